#include "teleos/kernel.hpp"

#include <algorithm>
#include <sstream>

namespace teleos::kernel {

const char* agent_kind_name(AgentKind k) {
    switch (k) {
        case AgentKind::AnomalyDetector: return "anomaly-detector";
        case AgentKind::ExperiencePredictor: return "experience-predictor";
        case AgentKind::SlaMonitor: return "sla-monitor";
        case AgentKind::OptimizationAdvisor: return "optimization-advisor";
        case AgentKind::CapacityForecaster: return "capacity-forecaster";
    }
    return "?";
}

std::optional<AgentKind> agent_kind_from_name(std::string_view s) {
    if (s == "anomaly-detector") return AgentKind::AnomalyDetector;
    if (s == "experience-predictor") return AgentKind::ExperiencePredictor;
    if (s == "sla-monitor") return AgentKind::SlaMonitor;
    if (s == "optimization-advisor") return AgentKind::OptimizationAdvisor;
    if (s == "capacity-forecaster") return AgentKind::CapacityForecaster;
    return std::nullopt;
}

bool is_data_reading_kind(AgentKind k) {
    return k == AgentKind::AnomalyDetector || k == AgentKind::SlaMonitor ||
           k == AgentKind::CapacityForecaster;
}

const char* health_state_name(HealthState s) {
    switch (s) {
        case HealthState::Healthy: return "healthy";
        case HealthState::Degraded: return "degraded";
        case HealthState::Failed: return "failed";
    }
    return "?";
}

bool key_pattern_matches(std::string_view pattern, std::string_view key) {
    if (!pattern.empty() && pattern.back() == '*') {
        auto prefix = pattern.substr(0, pattern.size() - 1);
        return key.substr(0, prefix.size()) == prefix;
    }
    return pattern == key;
}

bool topic_pattern_valid(std::string_view pattern) {
    if (pattern.empty()) return false;
    auto segs = split(pattern, '/');
    for (size_t i = 0; i < segs.size(); ++i) {
        if (segs[i].empty()) return false;
        const bool has_star = segs[i].find('*') != std::string_view::npos;
        if (has_star && (segs[i] != "*" || i + 1 != segs.size())) return false;
    }
    return true;
}

bool topic_matches(std::string_view pattern, std::string_view topic) {
    auto p = split(pattern, '/');
    if (p.empty()) return false;
    if (p.back() != "*") return pattern == topic;
    auto t = split(topic, '/');
    const size_t literal = p.size() - 1;
    if (t.size() < literal + 1) return false;  // '*' consumes at least one segment
    for (size_t i = 0; i < literal; ++i)
        if (t[i] != p[i]) return false;
    return true;
}

WorkflowCycleError::WorkflowCycleError(std::vector<std::string> nodes)
    : KernelError([&nodes] {
          std::string msg = "workflow contains a cycle:";
          for (const auto& n : nodes) msg += " " + n;
          return msg;
      }()),
      cycle(std::move(nodes)) {}

Digest descriptor_digest(const AgentDescriptor& d) {
    Encoder enc;
    enc.put_str(d.agent_id);
    enc.put_str(agent_kind_name(d.kind));
    enc.put_u64(d.version.major);
    enc.put_u64(d.version.minor);
    enc.put_str(d.input_schema.name);
    enc.put_u64(d.input_schema.version.major);
    enc.put_u64(d.input_schema.version.minor);
    enc.put_str(d.output_schema.name);
    enc.put_u64(d.output_schema.version.major);
    enc.put_u64(d.output_schema.version.minor);
    enc.put_u64(d.scopes.size());
    for (const auto& s : d.scopes) {
        enc.put_str(s.operator_id);
        enc.put_str(telemetry::kind_name(s.kind));
        enc.put_str(s.key_pattern);
    }
    enc.put_bytes(d.publisher_key);
    return sha256(enc.bytes());
}

void sign_descriptor(AgentDescriptor& d, const SecretKey& sk) {
    d.signature = sign_digest(descriptor_digest(d), sk);
}

Digest insight_digest(const Insight& i) {
    Encoder enc;
    enc.put_str(i.agent_id);
    enc.put_u64(i.agent_version.major);
    enc.put_u64(i.agent_version.minor);
    enc.put_i64(i.ts);
    enc.put_str(i.topic);
    encode_payload(enc, i.payload);
    enc.put_bytes(i.input_digest);
    return sha256(enc.bytes());
}

telemetry::KpiWindow AgentContext::read(const ReadRequest& req) {
    return kernel.mediated_read(agent_id, req);
}

telemetry::KpiWindow AgentContext::read_self(telemetry::Kind kind, const std::string& key,
                                             Timestamp from, Timestamp to) {
    return read(ReadRequest{host, kind, key, from, to});
}

Kernel::Kernel(SchemaRegistry& schemas, ledger::Ledger& audit, std::function<Timestamp()> clock,
               KernelConfig cfg)
    : schemas_(schemas), audit_(audit), clock_(std::move(clock)), cfg_(cfg) {}

void Kernel::attach_store(const OperatorId& op, telemetry::TelemetryStore* store) {
    stores_[op.id] = store;
}

void Kernel::audit(ledger::EntryType type, const Digest& payload_digest) {
    audit_.append_digest(payload_digest, type, clock_());
}

void Kernel::audit_text(ledger::EntryType type, const std::string& text) {
    audit(type, sha256(text));
}

std::string Kernel::register_agent(const AgentDescriptor& d, AgentImpl impl,
                                   const OperatorId& host, const SecretKey& signing_key) {
    if (d.agent_id.empty()) throw KernelError("agent id must be non-empty");
    if (agents_.count(d.agent_id)) {
        const auto& existing = agents_.at(d.agent_id).descriptor;
        if (existing.version == d.version) throw DuplicateAgentError(d.agent_id);
        throw DuplicateAgentError(d.agent_id);  // one live version per id
    }
    if (!verify_digest(descriptor_digest(d), d.signature, d.publisher_key))
        throw InvalidSignatureError();
    if (!schemas_.contains(d.input_schema)) throw UnknownSchemaError(d.input_schema);
    if (!schemas_.contains(d.output_schema)) throw UnknownSchemaError(d.output_schema);
    if (is_data_reading_kind(d.kind) && d.scopes.empty())
        throw KernelError("data-reading agent kind declares no scopes: " + d.agent_id);

    RegisteredAgent agent;
    agent.descriptor = d;
    agent.impl = std::move(impl);
    agent.host = host;
    agent.signing_key = signing_key;
    agent.topic = std::string(agent_kind_name(d.kind)) + "/" + d.agent_id;
    // Resolve "self" scopes against the host once, at registration.
    for (auto& scope : agent.descriptor.scopes)
        if (scope.operator_id == "self") scope.operator_id = host.id;

    topic_to_agent_[agent.topic] = d.agent_id;
    agents_.emplace(d.agent_id, std::move(agent));
    audit(ledger::EntryType::Registration, descriptor_digest(d));
    return d.agent_id;
}

bool Kernel::has_agent(const std::string& agent_id) const { return agents_.count(agent_id) > 0; }

const Kernel::RegisteredAgent& Kernel::agent_or_throw(const std::string& id) const {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw UnknownAgentError(id);
    return it->second;
}

Kernel::RegisteredAgent& Kernel::agent_or_throw(const std::string& id) {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw UnknownAgentError(id);
    return it->second;
}

const AgentDescriptor& Kernel::descriptor(const std::string& agent_id) const {
    return agent_or_throw(agent_id).descriptor;
}

std::string Kernel::topic_of(const std::string& agent_id) const {
    return agent_or_throw(agent_id).topic;
}

bool Kernel::scope_allows(const std::string& agent_id, const ReadRequest& req) const {
    const auto& agent = agent_or_throw(agent_id);
    for (const auto& scope : agent.descriptor.scopes) {
        if (scope.operator_id != req.op.id) continue;
        if (scope.kind != req.kind) continue;
        if (key_pattern_matches(scope.key_pattern, req.key)) return true;
    }
    return false;
}

telemetry::KpiWindow Kernel::mediated_read(const std::string& agent_id, const ReadRequest& req) {
    const bool allowed = scope_allows(agent_id, req);
    if (!allowed) {
        access_log_.push_back({agent_id, req, false, 0, clock_()});
        Encoder enc;
        enc.put_str(agent_id);
        enc.put_str(req.op.id);
        enc.put_str(telemetry::kind_name(req.kind));
        enc.put_str(req.key);
        enc.put_i64(req.from);
        enc.put_i64(req.to);
        audit(ledger::EntryType::AuthorizationDenied, sha256(enc.bytes()));
        throw AuthorizationDeniedError(req);
    }
    telemetry::KpiWindow window{req.key, {}};
    auto it = stores_.find(req.op.id);
    if (it != stores_.end() && it->second != nullptr)
        window = it->second->query_window(req.key, req.from, req.to);
    access_log_.push_back({agent_id, req, true, window.size(), clock_()});
    return window;
}

uint64_t Kernel::publish(const std::string& topic, const Insight& insight) {
    if (!topic_pattern_valid(topic) || topic.find('*') != std::string::npos)
        throw MalformedPatternError(topic);
    const auto& producer = agent_or_throw(insight.agent_id);
    auto violations = validate_payload(schemas_, producer.descriptor.output_schema, insight.payload);
    if (!violations.empty()) {
        audit_text(ledger::EntryType::Violation,
                   "publish rejected for " + insight.agent_id + " on " + topic);
        throw OutputViolationError(std::move(violations));
    }

    const uint64_t seq = ++topic_sequences_[topic];
    struct CascadeGuard {
        Kernel& k;
        explicit CascadeGuard(Kernel& kernel) : k(kernel) { ++k.cascade_depth_; }
        ~CascadeGuard() {
            if (--k.cascade_depth_ == 0) k.fired_edges_.clear();
        }
    } guard(*this);
    for (auto& [id, sub] : subscriptions_) {
        if (topic_matches(sub.pattern, topic)) sub.queue.push_back({topic, seq, insight});
    }
    insight_log_.push_back(insight);
    audit(ledger::EntryType::Insight, insight_digest(insight));
    run_workflow_edges(topic, insight);
    return seq;
}

SubscriptionId Kernel::subscribe(const std::string& pattern) {
    if (!topic_pattern_valid(pattern)) throw MalformedPatternError(pattern);
    SubscriptionId id = next_subscription_++;
    subscriptions_[id] = Subscription{pattern, {}};
    return id;
}

const std::vector<Delivery>& Kernel::delivered(SubscriptionId sub) const {
    auto it = subscriptions_.find(sub);
    if (it == subscriptions_.end()) throw KernelError("unknown subscription");
    return it->second.queue;
}

Insight Kernel::invoke(const std::string& agent_id, const Payload& input) {
    auto& agent = agent_or_throw(agent_id);
    const Timestamp now = clock_();
    agent.health.last_invocation = now;

    const Digest in_digest = payload_digest(input);
    auto in_violations = validate_payload(schemas_, agent.descriptor.input_schema, input);
    if (!in_violations.empty()) {
        // Rejected before the agent runs; not an agent fault.
        invocation_log_.push_back({agent_id, input, in_digest, false, now});
        audit_text(ledger::EntryType::Violation, "input violation for " + agent_id);
        throw InputViolationError(std::move(in_violations));
    }
    audit(ledger::EntryType::Invocation, in_digest);

    auto record_failure = [&](const std::string& what) {
        invocation_log_.push_back({agent_id, input, in_digest, false, now});
        agent.health.consecutive_errors += 1;
        agent.health.total_errors += 1;
        audit_text(ledger::EntryType::Violation, "execution error in " + agent_id + ": " + what);
    };

    Payload output;
    AgentContext ctx{*this, agent_id, agent.host, now};
    try {
        output = agent.impl(input, ctx);
    } catch (const AuthorizationDeniedError& e) {
        record_failure(e.what());
        throw AgentExecutionError(e.what());
    } catch (const AgentError& e) {
        record_failure(e.what());
        throw AgentExecutionError(e.what());
    } catch (const std::exception& e) {
        record_failure(e.what());
        throw AgentExecutionError(e.what());
    }

    auto out_violations = validate_payload(schemas_, agent.descriptor.output_schema, output);
    if (!out_violations.empty()) {
        record_failure("output schema violation");
        throw OutputViolationError(std::move(out_violations));
    }

    agent.health.consecutive_errors = 0;
    invocation_log_.push_back({agent_id, input, in_digest, true, now});

    Insight insight;
    insight.agent_id = agent_id;
    insight.agent_version = agent.descriptor.version;
    insight.ts = now;
    insight.topic = agent.topic;
    insight.payload = std::move(output);
    insight.input_digest = in_digest;
    insight.signature = sign_digest(insight_digest(insight), agent.signing_key);

    publish(agent.topic, insight);
    return insight;
}

WorkflowId Kernel::compose_workflow(const WorkflowSpec& spec) {
    for (const auto& node : spec.nodes)
        if (!agents_.count(node)) throw UnknownAgentError(node);

    // Resolve edges to producer->consumer agent pairs; both endpoints must
    // be declared workflow nodes.
    const std::set<std::string> members(spec.nodes.begin(), spec.nodes.end());
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& edge : spec.edges) {
        auto it = topic_to_agent_.find(edge.topic);
        if (it == topic_to_agent_.end())
            throw KernelError("workflow edge topic has no registered producer: " + edge.topic);
        if (!agents_.count(edge.consumer)) throw UnknownAgentError(edge.consumer);
        if (!members.count(it->second) || !members.count(edge.consumer))
            throw KernelError("workflow edge endpoint is not a declared node: " + it->second +
                              " -> " + edge.consumer);
        adj[it->second].push_back(edge.consumer);
    }

    // Iterative DFS cycle detection; reports the nodes on the cycle.
    std::map<std::string, int> state;  // 0 unvisited, 1 on stack, 2 done
    std::vector<std::string> path;
    std::function<void(const std::string&)> visit = [&](const std::string& node) {
        state[node] = 1;
        path.push_back(node);
        for (const auto& next : adj[node]) {
            if (state[next] == 1) {
                auto start = std::find(path.begin(), path.end(), next);
                throw WorkflowCycleError(std::vector<std::string>(start, path.end()));
            }
            if (state[next] == 0) visit(next);
        }
        path.pop_back();
        state[node] = 2;
    };
    for (const auto& [node, targets] : adj)
        if (state[node] == 0) visit(node);

    WorkflowId id = next_workflow_++;
    workflows_[id] = Workflow{spec};
    return id;
}

void Kernel::run_workflow_edges(const std::string& topic, const Insight& insight) {
    for (auto& [wf_id, wf] : workflows_) {
        for (size_t i = 0; i < wf.spec.edges.size(); ++i) {
            const auto& edge = wf.spec.edges[i];
            if (edge.topic != topic) continue;
            if (!fired_edges_.insert({wf_id, i}).second) continue;  // once per stimulus

            auto consumer_it = agents_.find(edge.consumer);
            if (consumer_it == agents_.end()) continue;
            SchemaDef in_schema = schemas_.get(consumer_it->second.descriptor.input_schema);

            // Map the insight payload onto the consumer's input schema, then
            // overlay the edge's bound params; wiring constants win over
            // whatever the producer happened to echo.
            Payload mapped;
            for (const auto& [name, value] : insight.payload)
                if (in_schema.find_field(name) != nullptr) mapped[name] = value;
            for (const auto& [name, value] : edge.bound_params) mapped[name] = value;

            try {
                invoke(edge.consumer, mapped);
            } catch (const KernelError&) {
                // Already audited by invoke; a failing consumer must not
                // stop the cascade or the publisher.
            }
        }
    }
}

HealthStatus Kernel::health_check(const std::string& agent_id) const {
    const auto& agent = agent_or_throw(agent_id);
    HealthStatus out = agent.health;
    if (out.consecutive_errors >= cfg_.failure_threshold)
        out.status = HealthState::Failed;
    else if (out.consecutive_errors > 0)
        out.status = HealthState::Degraded;
    else
        out.status = HealthState::Healthy;
    return out;
}

}  // namespace teleos::kernel
