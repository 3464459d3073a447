#include "teleos/scenario.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "teleos/prng.hpp"

namespace teleos::scenario {

using nlohmann::json;

ScenarioValidationError::ScenarioValidationError(std::vector<ValidationIssue> iss)
    : std::runtime_error([&iss] {
          std::string msg = "scenario validation failed:";
          for (const auto& i : iss) msg += "\n  " + i.path + ": " + i.message;
          return msg;
      }()),
      issues(std::move(iss)) {}

namespace {

struct Validator {
    std::vector<ValidationIssue> issues;

    void fail(const std::string& path, const std::string& message) {
        issues.push_back({path, message});
    }
    void require(bool ok, const std::string& path, const std::string& message) {
        if (!ok) fail(path, message);
    }
    void finish() {
        if (!issues.empty()) throw ScenarioValidationError(std::move(issues));
    }
};

federation::CongestionSchedule parse_congestion(const json& arr, const std::string& path,
                                                Validator& v) {
    federation::CongestionSchedule out;
    if (!arr.is_array()) {
        v.fail(path, "must be an array of {start, end, multiplier} windows");
        return out;
    }
    for (size_t i = 0; i < arr.size(); ++i) {
        const auto& w = arr[i];
        federation::CongestionWindow cw;
        cw.start = w.value("start", Timestamp{0});
        cw.end = w.value("end", Timestamp{0});
        cw.multiplier = w.value("multiplier", 1.0);
        const std::string wp = path + "[" + std::to_string(i) + "]";
        v.require(cw.end > cw.start, wp, "window end must be after start");
        v.require(cw.multiplier >= 1.0, wp, "multiplier must be >= 1");
        out.windows.push_back(cw);
    }
    std::sort(out.windows.begin(), out.windows.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    for (size_t i = 1; i < out.windows.size(); ++i)
        v.require(out.windows[i].start >= out.windows[i - 1].end, path,
                  "windows must not overlap");
    return out;
}

Payload parse_payload(const json& obj) {
    Payload p;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const auto& val = *it;
        if (val.is_string())
            p.emplace(it.key(), Value::text(val.get<std::string>()));
        else if (val.is_boolean())
            p.emplace(it.key(), Value::boolean(val.get<bool>()));
        else if (val.is_number_integer())
            p.emplace(it.key(), Value::integer(val.get<int64_t>()));
        else if (val.is_number())
            p.emplace(it.key(), Value::number(val.get<double>()));
        else if (val.is_array()) {
            std::vector<double> list;
            for (const auto& x : val) list.push_back(x.get<double>());
            p.emplace(it.key(), Value::number_list(std::move(list)));
        }
    }
    return p;
}

// JSON integers become Integer values, but several agent input fields are
// typed Timestamp or Number; coerce by the agent's input schema.
Payload coerce_to_schema(Payload p, const SchemaDef& schema) {
    for (auto& [name, value] : p) {
        const SchemaField* f = schema.find_field(name);
        if (f == nullptr) continue;
        if (f->type == SemType::Timestamp && value.type == SemType::Integer)
            value = Value::timestamp(value.i64);
        else if (f->type == SemType::Number && value.type == SemType::Integer)
            value = Value::number(static_cast<double>(value.i64));
        else if (f->type == SemType::Integer && value.type == SemType::Number &&
                 value.num == static_cast<double>(static_cast<int64_t>(value.num)))
            value = Value::integer(static_cast<int64_t>(value.num));
    }
    return p;
}

agents::ReferenceAgentParams parse_params(const json& obj) {
    agents::ReferenceAgentParams p;
    if (!obj.is_object()) return p;
    p.window = obj.value("window", p.window);
    p.threshold = obj.value("threshold", p.threshold);
    p.sla_threshold = obj.value("sla_threshold", p.sla_threshold);
    p.sla_target_fraction = obj.value("sla_target_fraction", p.sla_target_fraction);
    p.sla_horizon = obj.value("sla_horizon", p.sla_horizon);
    p.experience.latency_floor_ms = obj.value("latency_floor_ms", p.experience.latency_floor_ms);
    p.experience.latency_span_ms = obj.value("latency_span_ms", p.experience.latency_span_ms);
    p.experience.loss_ceiling = obj.value("loss_ceiling", p.experience.loss_ceiling);
    p.lambda = obj.value("lambda", p.lambda);
    p.alpha = obj.value("alpha", p.alpha);
    p.beta = obj.value("beta", p.beta);
    p.forecast_horizon = obj.value("forecast_horizon", p.forecast_horizon);
    return p;
}

std::optional<SemType> parse_sem_type(const std::string& s) { return sem_type_from_name(s); }

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ScenarioValidationError({{"$", std::string("json parse error: ") + e.what()}});
    }

    Validator v;
    ScenarioConfig cfg;
    cfg.seed = root.value("seed", 0ull);
    cfg.duration_ms = root.value("duration_ms", Timestamp{0});
    cfg.telemetry_interval_ms = root.value("telemetry_interval_ms", Timestamp{1000});
    v.require(cfg.duration_ms > 0, "duration_ms", "must be > 0");
    v.require(cfg.telemetry_interval_ms > 0, "telemetry_interval_ms", "must be > 0");

    // operators
    const auto& ops = root.value("operators", json::array());
    v.require(!ops.empty(), "operators", "at least one operator required");
    std::set<std::string> op_ids;
    for (size_t i = 0; i < ops.size(); ++i) {
        const std::string path = "operators[" + std::to_string(i) + "]";
        const auto& o = ops[i];
        OperatorConfig oc;
        oc.op.id = o.value("id", "");
        oc.op.region = o.value("region", "");
        v.require(!oc.op.id.empty(), path + ".id", "must be non-empty");
        if (!op_ids.insert(oc.op.id).second)
            v.fail(path + ".id", "duplicate operator id: " + oc.op.id);
        if (o.contains("link")) {
            const auto& l = o["link"];
            oc.link.base_latency_ms = l.value("base_latency_ms", 1.0);
            oc.link.bandwidth_mbps = l.value("bandwidth_mbps", 100.0);
            v.require(oc.link.base_latency_ms >= 0, path + ".link.base_latency_ms", "must be >= 0");
            v.require(oc.link.bandwidth_mbps > 0, path + ".link.bandwidth_mbps", "must be > 0");
            if (l.contains("congestion"))
                oc.link.congestion = parse_congestion(l["congestion"], path + ".link.congestion", v);
        }
        const auto& gens = o.value("generators", json::array());
        for (size_t gi = 0; gi < gens.size(); ++gi) {
            const std::string gpath = path + ".generators[" + std::to_string(gi) + "]";
            const auto& g = gens[gi];
            GeneratorConfig gc;
            gc.key = g.value("key", "");
            v.require(!gc.key.empty(), gpath + ".key", "must be non-empty");
            gc.domain = g.value("domain", "ran");
            v.require(telemetry::domain_from_name(gc.domain).has_value(), gpath + ".domain",
                      "unknown domain: " + gc.domain);
            gc.spec.base = g.value("base", 0.0);
            gc.spec.trend = g.value("trend", 0.0);
            gc.spec.season_amplitude = g.value("season_amplitude", 0.0);
            gc.spec.season_period = g.value("season_period", 1);
            gc.spec.noise_sigma = g.value("noise_sigma", 0.0);
            gc.spec.length = g.value("length", 1);
            v.require(gc.spec.length >= 1, gpath + ".length", "must be >= 1");
            v.require(gc.spec.season_period >= 1, gpath + ".season_period", "must be >= 1");
            v.require(gc.spec.noise_sigma >= 0, gpath + ".noise_sigma", "must be >= 0");
            if (g.contains("anomalies")) {
                gc.anomaly_rate = g["anomalies"].value("rate", 0.0);
                gc.anomaly_sigmas = g["anomalies"].value("amplitude_sigmas", 8.0);
                v.require(gc.anomaly_rate > 0.0 && gc.anomaly_rate < 1.0,
                          gpath + ".anomalies.rate", "must be in (0, 1)");
            }
            oc.generators.push_back(std::move(gc));
        }
        if (o.contains("topology")) {
            oc.topology_nodes = o["topology"].value("nodes", 0);
            oc.topology_avg_degree = o["topology"].value("avg_degree", 3.0);
            v.require(oc.topology_nodes >= 2, path + ".topology.nodes", "must be >= 2");
            v.require(oc.topology_avg_degree >= 1.0, path + ".topology.avg_degree",
                      "must be >= 1");
        }
        cfg.operators.push_back(std::move(oc));
    }

    // agents
    const auto& agents_json = root.value("agents", json::array());
    std::set<std::string> agent_ids;
    for (size_t i = 0; i < agents_json.size(); ++i) {
        const std::string path = "agents[" + std::to_string(i) + "]";
        const auto& a = agents_json[i];
        AgentConfig ac;
        ac.agent_id = a.value("id", "");
        v.require(!ac.agent_id.empty(), path + ".id", "must be non-empty");
        if (!agent_ids.insert(ac.agent_id).second)
            v.fail(path + ".id", "duplicate agent id: " + ac.agent_id);
        const std::string kind_s = a.value("kind", "");
        auto kind = kernel::agent_kind_from_name(kind_s);
        if (!kind) {
            v.fail(path + ".kind", "unknown agent kind: " + kind_s);
            continue;
        }
        ac.kind = *kind;
        ac.operator_id = a.value("operator", "");
        v.require(op_ids.count(ac.operator_id) > 0, path + ".operator",
                  "references unknown operator: " + ac.operator_id);
        ac.variant = a.value("variant", "");
        v.require(ac.variant.empty() || ac.variant == "always-flag" ||
                      ac.variant == "schema-violating",
                  path + ".variant", "unknown variant: " + ac.variant);
        const auto& scopes = a.value("scopes", json::array());
        for (size_t si = 0; si < scopes.size(); ++si) {
            const auto& s = scopes[si];
            kernel::DataScope scope;
            scope.operator_id = s.value("operator", "self");
            const std::string ks = s.value("kind", "kpi");
            auto k = telemetry::kind_from_name(ks);
            if (!k) {
                v.fail(path + ".scopes[" + std::to_string(si) + "].kind",
                       "unknown telemetry kind: " + ks);
                continue;
            }
            scope.kind = *k;
            scope.key_pattern = s.value("key_pattern", "*");
            v.require(scope.operator_id == "self" || op_ids.count(scope.operator_id) > 0,
                      path + ".scopes[" + std::to_string(si) + "].operator",
                      "references unknown operator: " + scope.operator_id);
            ac.scopes.push_back(std::move(scope));
        }
        ac.params = parse_params(a.value("params", json::object()));
        const auto& invs = a.value("invoke", json::array());
        for (size_t vi = 0; vi < invs.size(); ++vi) {
            const auto& inv = invs[vi];
            Payload input = parse_payload(inv.value("input", json::object()));
            if (inv.contains("at")) {
                ac.invocations.push_back({inv["at"].get<Timestamp>(), input});
            } else if (inv.contains("start") && inv.contains("period") && inv.contains("count")) {
                const Timestamp start = inv["start"].get<Timestamp>();
                const Timestamp period = inv["period"].get<Timestamp>();
                const int count = inv["count"].get<int>();
                v.require(period > 0, path + ".invoke[" + std::to_string(vi) + "].period",
                          "must be > 0");
                for (int c = 0; c < count; ++c)
                    ac.invocations.push_back({start + c * period, input});
            } else {
                v.fail(path + ".invoke[" + std::to_string(vi) + "]",
                       "needs either 'at' or 'start'/'period'/'count'");
            }
        }
        cfg.agents.push_back(std::move(ac));
    }

    // workflows
    const auto& wfs = root.value("workflows", json::array());
    for (size_t i = 0; i < wfs.size(); ++i) {
        const std::string path = "workflows[" + std::to_string(i) + "]";
        const auto& w = wfs[i];
        WorkflowConfig wc;
        for (const auto& n : w.value("nodes", json::array())) {
            const std::string node = n.get<std::string>();
            v.require(agent_ids.count(node) > 0, path + ".nodes",
                      "references unknown agent: " + node);
            wc.nodes.push_back(node);
        }
        const auto& edges = w.value("edges", json::array());
        for (size_t ei = 0; ei < edges.size(); ++ei) {
            const auto& e = edges[ei];
            kernel::WorkflowEdge edge;
            edge.topic = e.value("topic", "");
            edge.consumer = e.value("consumer", "");
            v.require(!edge.topic.empty(), path + ".edges[" + std::to_string(ei) + "].topic",
                      "must be non-empty");
            v.require(agent_ids.count(edge.consumer) > 0,
                      path + ".edges[" + std::to_string(ei) + "].consumer",
                      "references unknown agent: " + edge.consumer);
            edge.bound_params = parse_payload(e.value("params", json::object()));
            wc.edges.push_back(std::move(edge));
        }
        cfg.workflows.push_back(std::move(wc));
    }

    // federation
    if (root.contains("federation")) {
        const auto& f = root["federation"];
        auto& fc = cfg.federation;
        fc.rounds = f.value("rounds", 0);
        fc.start_ms = f.value("start_ms", Timestamp{0});
        fc.round_gap_ms = f.value("round_gap_ms", Timestamp{0});
        fc.deadline_ms = f.value("deadline_ms", Timestamp{60000});
        fc.lookahead_ms = f.value("lookahead_ms", fc.lookahead_ms);
        fc.masking = f.value("masking", false);
        if (f.contains("dp")) {
            fc.dp.clip = f["dp"].value("clip", 1.0);
            fc.dp.sigma = f["dp"].value("sigma", 0.0);
            v.require(fc.dp.clip > 0, "federation.dp.clip", "must be > 0");
            v.require(fc.dp.sigma >= 0, "federation.dp.sigma", "must be >= 0");
        }
        if (f.contains("off_peak"))
            fc.coordinator_schedule = parse_congestion(f["off_peak"], "federation.off_peak", v);
        for (const auto& p : f.value("participants", json::array())) {
            const std::string id = p.get<std::string>();
            v.require(op_ids.count(id) > 0, "federation.participants",
                      "references unknown operator: " + id);
            fc.participants.push_back(id);
        }
        if (fc.rounds > 0 && fc.participants.empty())
            for (const auto& oc : cfg.operators) fc.participants.push_back(oc.op.id);
        v.require(!fc.masking || fc.participants.size() >= 2, "federation.masking",
                  "masking requires at least 2 participants");
        fc.local_epochs = f.value("local_epochs", fc.local_epochs);
        fc.lr = f.value("lr", fc.lr);
        v.require(fc.lr > 0, "federation.lr", "must be > 0");
        if (f.contains("task")) {
            const auto& t = f["task"];
            fc.task.true_w = t.value("true_w", fc.task.true_w);
            fc.task.true_b = t.value("true_b", fc.task.true_b);
            fc.task.noise_sigma = t.value("noise_sigma", fc.task.noise_sigma);
            fc.task.samples_per_operator = t.value("samples_per_operator", fc.task.samples_per_operator);
            fc.task.x_max = t.value("x_max", fc.task.x_max);
            fc.task.eval_samples = t.value("eval_samples", fc.task.eval_samples);
            v.require(fc.task.samples_per_operator > 0, "federation.task.samples_per_operator",
                      "must be > 0");
            v.require(fc.task.eval_samples > 0, "federation.task.eval_samples", "must be > 0");
        }
    }

    // fault injection
    if (root.contains("fault_injection")) {
        const auto& fi = root["fault_injection"];
        cfg.fault.enabled = true;
        cfg.fault.export_raw_from = fi.value("export_raw_from", "");
        cfg.fault.at_ms = fi.value("at_ms", Timestamp{0});
        cfg.fault.size_bytes = fi.value("size_bytes", size_t{4096});
        v.require(op_ids.count(cfg.fault.export_raw_from) > 0, "fault_injection.export_raw_from",
                  "references unknown operator: " + cfg.fault.export_raw_from);
    }

    // extra schemas
    const auto& schemas = root.value("schemas", json::array());
    for (size_t i = 0; i < schemas.size(); ++i) {
        const std::string path = "schemas[" + std::to_string(i) + "]";
        const auto& s = schemas[i];
        SchemaDef def;
        def.name = s.value("name", "");
        v.require(!def.name.empty(), path + ".name", "must be non-empty");
        def.version.major = s.value("major", 1u);
        def.version.minor = s.value("minor", 0u);
        std::set<std::string> field_names;
        for (const auto& fld : s.value("fields", json::array())) {
            SchemaField field;
            field.name = fld.value("name", "");
            auto type = parse_sem_type(fld.value("type", "number"));
            if (!type) {
                v.fail(path + ".fields", "unknown semantic type on field " + field.name);
                continue;
            }
            field.type = *type;
            field.required = fld.value("required", true);
            field.unit = fld.value("unit", "");
            if (!is_known_unit(field.unit))
                v.fail(path + ".fields", "unknown unit tag on field " + field.name);
            if (!field_names.insert(field.name).second)
                v.fail(path + ".fields", "duplicate field name " + field.name);
            def.fields.push_back(std::move(field));
        }
        cfg.extra_schemas.push_back(std::move(def));
    }

    v.finish();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioValidationError({{"$", "cannot open scenario file: " + path}});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

namespace {

struct DetectorTruth {
    std::set<Timestamp> anomalies;       // injected ground truth timestamps
    std::set<Timestamp> scoreable;       // timestamps a detector can flag (index >= W)
};

std::vector<agents::Sample> make_linear_data(const LinearTaskConfig& task, uint64_t seed, int n) {
    CounterRng rng(seed);
    std::vector<agents::Sample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_unit() * task.x_max;
        const double y = task.true_w * x + task.true_b + task.noise_sigma * rng.next_gaussian();
        out.push_back({x, y});
    }
    return out;
}

}  // namespace

ScenarioOutputs run_scenario(const ScenarioConfig& cfg) {
    crypto_init();

    SchemaRegistry schemas;
    telemetry::register_builtin_schemas(schemas);
    agents::register_agent_schemas(schemas);
    for (const auto& def : cfg.extra_schemas) schemas.register_schema(def);

    simnet::Network net;
    ledger::Ledger audit(keypair_from_u64(derive_seed(cfg.seed, 0xC0C0)));
    kernel::Kernel k(schemas, audit, [&net] { return net.now(); });

    // --- operator substrate -------------------------------------------------
    std::map<std::string, std::unique_ptr<telemetry::TelemetryStore>> stores;
    std::map<std::string, std::map<std::string, DetectorTruth>> truth;  // op -> key -> truth

    for (const auto& oc : cfg.operators) {
        net.set_link(oc.op.id, oc.link);
        auto store = std::make_unique<telemetry::TelemetryStore>();

        for (size_t gi = 0; gi < oc.generators.size(); ++gi) {
            const auto& gc = oc.generators[gi];
            telemetry::GeneratorSpec spec = gc.spec;
            spec.seed = derive_seed(cfg.seed, digest_prefix_u64(sha256(oc.op.id + "/" + gc.key)));
            auto window = telemetry::generate_kpi_series(spec);

            DetectorTruth dt;
            if (gc.anomaly_rate > 0.0) {
                auto injected = telemetry::inject_anomalies(window, gc.anomaly_rate,
                                                            gc.anomaly_sigmas, spec.noise_sigma,
                                                            derive_seed(spec.seed, 0xA0));
                window = std::move(injected.series);
                for (size_t idx : injected.indices)
                    dt.anomalies.insert(static_cast<Timestamp>(idx) * cfg.telemetry_interval_ms);
            }

            for (size_t idx = 0; idx < window.points.size(); ++idx) {
                telemetry::RawRecord raw;
                raw.operator_id = oc.op.id;
                raw.region = oc.op.region;
                raw.domain = gc.domain;
                raw.kind = "kpi";
                raw.key = gc.key;
                raw.ts = static_cast<Timestamp>(idx) * cfg.telemetry_interval_ms;
                raw.value = window.points[idx].value;
                store->insert(telemetry::ingest(raw, {}, schemas));
            }
            truth[oc.op.id][gc.key] = std::move(dt);

            // Local batch extraction is modeled as one same-boundary message,
            // legal raw-telemetry traffic the sovereignty monitor can see.
            simnet::SimMessage batch;
            batch.src = oc.op.id;
            batch.dst = oc.op.id;
            batch.kind = simnet::MessageKind::RawTelemetry;
            batch.size_bytes = window.points.size() * 16;
            batch.payload_digest = sha256(oc.op.id + "/" + gc.key);
            net.transmit(batch);
        }

        if (oc.topology_nodes >= 2) {
            store->set_topology(telemetry::generate_topology(
                oc.topology_nodes, oc.topology_avg_degree,
                derive_seed(cfg.seed, digest_prefix_u64(sha256(oc.op.id + "/topology")))));
        }

        k.attach_store(oc.op, store.get());
        stores.emplace(oc.op.id, std::move(store));
    }

    // --- agents and workflows -------------------------------------------------
    std::map<std::string, AgentMetrics> metrics;
    std::map<std::string, std::string> agent_operator;
    for (const auto& ac : cfg.agents) {
        const auto host_it = std::find_if(cfg.operators.begin(), cfg.operators.end(),
                                          [&](const OperatorConfig& o) { return o.op.id == ac.operator_id; });
        agents::ReferenceAgentSpec spec;
        spec.agent_id = ac.agent_id;
        spec.kind = ac.kind;
        spec.host = host_it->op;
        spec.scopes = ac.scopes;
        spec.params = ac.params;
        spec.key_seed = derive_seed(cfg.seed, digest_prefix_u64(sha256("agent/" + ac.agent_id)));
        if (ac.variant == "always-flag")
            agents::register_always_flag_detector(k, spec);
        else if (ac.variant == "schema-violating")
            agents::register_schema_violating_emitter(k, spec);
        else
            agents::register_reference_agent(k, spec);
        metrics[ac.agent_id].is_detector = ac.kind == kernel::AgentKind::AnomalyDetector;
        agent_operator[ac.agent_id] = ac.operator_id;
    }

    for (const auto& wc : cfg.workflows) {
        kernel::WorkflowSpec spec;
        spec.nodes = wc.nodes;
        spec.edges = wc.edges;
        // Bound params typed like the consumer expects (JSON integers land
        // as Integer; the schema may want Number or Timestamp).
        for (auto& edge : spec.edges)
            edge.bound_params = coerce_to_schema(
                edge.bound_params, schemas.get(k.descriptor(edge.consumer).input_schema));
        k.compose_workflow(spec);
    }

    // --- scheduled invocations -------------------------------------------------
    for (const auto& ac : cfg.agents) {
        const SchemaDef in_schema = schemas.get(k.descriptor(ac.agent_id).input_schema);
        for (const auto& plan : ac.invocations) {
            Payload input = coerce_to_schema(plan.input, in_schema);
            net.schedule_at(plan.at, [&k, id = ac.agent_id, input] {
                try {
                    k.invoke(id, input);
                } catch (const kernel::KernelError&) {
                    // Audited by the kernel; the loop must keep going.
                }
            });
        }
    }

    // --- fault injection ---------------------------------------------------------
    if (cfg.fault.enabled) {
        net.schedule_at(cfg.fault.at_ms, [&net, &audit, fault = cfg.fault] {
            simnet::SimMessage msg;
            msg.src = fault.export_raw_from;
            msg.dst = simnet::kCoordinator;
            msg.kind = simnet::MessageKind::RawTelemetry;
            msg.size_bytes = fault.size_bytes;
            msg.payload_digest = sha256(std::string("raw-export/") + fault.export_raw_from);
            auto outcome = net.transmit(msg);
            if (!outcome) {
                audit.append_digest(msg.payload_digest, ledger::EntryType::Violation, net.now());
            }
        });
    }

    // --- federation rounds ---------------------------------------------------------
    ScenarioResult result;
    federation::GlobalModel model;
    model.weights = {0.0, 0.0};

    if (cfg.federation.rounds > 0) {
        const auto& fc = cfg.federation;
        // Disjoint contiguous partitions of one pooled seeded dataset.
        const int total = fc.task.samples_per_operator *
                          static_cast<int>(fc.participants.size());
        auto pooled = make_linear_data(fc.task, derive_seed(cfg.seed, 0xDA7A), total);
        auto eval_set =
            make_linear_data(fc.task, derive_seed(cfg.seed, 0xE7A1), fc.task.eval_samples);

        std::vector<federation::Participant> participants;
        std::vector<OperatorId> eligible;
        for (size_t i = 0; i < fc.participants.size(); ++i) {
            const auto op_it = std::find_if(cfg.operators.begin(), cfg.operators.end(),
                                            [&](const OperatorConfig& o) { return o.op.id == fc.participants[i]; });
            federation::Participant p;
            p.op = op_it->op;
            p.epochs = fc.local_epochs;
            p.lr = fc.lr;
            p.data.assign(pooled.begin() + i * fc.task.samples_per_operator,
                          pooled.begin() + (i + 1) * fc.task.samples_per_operator);
            eligible.push_back(p.op);
            participants.push_back(std::move(p));
        }

        federation::PlanConfig plan_cfg;
        plan_cfg.lookahead_ms = fc.lookahead_ms;
        plan_cfg.deadline_ms = fc.deadline_ms;
        plan_cfg.dp = fc.dp;
        plan_cfg.masking = fc.masking;
        for (const auto& oc : cfg.operators)
            if (!oc.link.congestion.windows.empty())
                plan_cfg.operator_schedules[oc.op.id] = oc.link.congestion;

        auto transport = net.transport();
        const uint64_t scenario_secret = derive_seed(cfg.seed, 0x5EC);
        for (int r = 0; r < fc.rounds; ++r) {
            const Timestamp planning_time =
                std::max<Timestamp>(net.now(), fc.start_ms + static_cast<Timestamp>(r) * fc.round_gap_ms);
            net.run_until(planning_time);
            auto plan = federation::plan_round(model, eligible, fc.coordinator_schedule,
                                               net.now(), plan_cfg, static_cast<uint64_t>(r));
            auto outcome = federation::run_round(plan, participants, model, eval_set, transport,
                                                 audit, scenario_secret);
            result.rounds.push_back(outcome.record);
            model = std::move(outcome.model);
        }
    }

    net.run_all();

    // --- per-agent metrics (workflow-triggered invocations included) ---------------
    for (const auto& inv : k.invocation_log()) {
        auto it = metrics.find(inv.agent_id);
        if (it == metrics.end()) continue;
        it->second.invocations += 1;
        if (!inv.ok) it->second.errors += 1;
    }
    // The last insight per (detector, key) is its final verdict on that
    // series; metrics aggregate over all keys the detector reported on.
    std::map<std::pair<std::string, std::string>, const kernel::Insight*> final_verdicts;
    for (const auto& insight : k.insight_log()) {
        auto m_it = metrics.find(insight.agent_id);
        if (m_it == metrics.end() || !m_it->second.is_detector) continue;
        auto key_it = insight.payload.find("key");
        if (key_it == insight.payload.end()) continue;
        final_verdicts[{insight.agent_id, key_it->second.str}] = &insight;
    }
    std::map<std::string, std::array<size_t, 4>> tallies;  // hit, relevant, fp, negatives
    for (const auto& [agent_key, insight] : final_verdicts) {
        const auto& [agent_id, series_key] = agent_key;
        auto ts_it = insight->payload.find("anomaly_timestamps");
        auto w_it = insight->payload.find("window");
        if (ts_it == insight->payload.end() || w_it == insight->payload.end()) continue;
        const auto& op_id = agent_operator[agent_id];
        auto truth_it = truth[op_id].find(series_key);
        if (truth_it == truth[op_id].end()) continue;
        const auto& dt = truth_it->second;

        // Only positions a windowed detector can score (index >= W) count,
        // for the truth and the negatives alike.
        const int w = static_cast<int>(w_it->second.i64);
        const Timestamp min_ts = static_cast<Timestamp>(w) * cfg.telemetry_interval_ms;
        std::set<Timestamp> detected;
        for (double t : ts_it->second.list) detected.insert(static_cast<Timestamp>(t));
        size_t relevant = 0, hit = 0;
        for (Timestamp t : dt.anomalies) {
            if (t < min_ts) continue;
            ++relevant;
            if (detected.count(t)) ++hit;
        }
        size_t scoreable = 0;
        for (const auto& oc : cfg.operators) {
            if (oc.op.id != op_id) continue;
            for (const auto& gc : oc.generators)
                if (gc.key == series_key && gc.spec.length > w)
                    scoreable = static_cast<size_t>(gc.spec.length - w);
        }
        auto& t = tallies[agent_id];
        t[0] += hit;
        t[1] += relevant;
        t[2] += detected.size() - hit;
        t[3] += scoreable > relevant ? scoreable - relevant : 0;
    }
    for (const auto& [agent_id, t] : tallies) {
        auto& m = metrics[agent_id];
        if (t[1] > 0) m.recall = static_cast<double>(t[0]) / static_cast<double>(t[1]);
        if (t[3] > 0)
            m.false_positive_rate = static_cast<double>(t[2]) / static_cast<double>(t[3]);
    }

    result.agent_metrics = std::move(metrics);
    result.sovereignty_violations = net.violations().size();
    result.audited_violations = simnet::audit_trace(net.trace()).size();
    result.ledger_length = audit.size();
    result.event_count = net.processed_events();
    result.final_model_version = model.version;
    result.trace_digest_hex = digest_hex(simnet::trace_digest(net.trace()));

    // --- report assembly --------------------------------------------------------------
    json report;
    report["tool"] = kToolVersion;
    report["seed"] = cfg.seed;
    report["duration_ms"] = cfg.duration_ms;
    report["sovereignty_violations"] = result.sovereignty_violations;
    report["audited_violations"] = result.audited_violations;
    report["ledger_length"] = result.ledger_length;
    report["event_count"] = result.event_count;
    report["final_model_version"] = result.final_model_version;
    report["trace_digest"] = result.trace_digest_hex;
    report["rounds"] = json::array();
    for (const auto& r : result.rounds) {
        json jr;
        jr["round"] = r.round_id;
        jr["start"] = r.start;
        jr["completed"] = r.completed;
        jr["planned"] = r.planned;
        jr["received"] = r.received;
        jr["aborted"] = r.aborted;
        jr["eval_loss_before"] = r.eval_loss_before;
        jr["eval_loss_after"] = r.eval_loss_after;
        jr["model_version"] = r.model_version;
        json attribution;
        for (const auto& [op, s] : r.attribution.scores) attribution[op] = s;
        jr["attribution"] = attribution;
        report["rounds"].push_back(jr);
    }
    json agents_json;
    for (const auto& [id, m] : result.agent_metrics) {
        json jm;
        jm["invocations"] = m.invocations;
        jm["errors"] = m.errors;
        if (m.is_detector) {
            jm["recall"] = m.recall;
            jm["false_positive_rate"] = m.false_positive_rate;
        }
        agents_json[id] = jm;
    }
    report["agents"] = agents_json;

    json operators_json;
    for (const auto& oc : cfg.operators) {
        const auto& store = stores.at(oc.op.id);
        json jo;
        jo["region"] = oc.op.region;
        jo["telemetry_records"] = store->record_count();
        if (store->topology()) {
            jo["topology_nodes"] = store->topology()->nodes.size();
            jo["topology_edges"] = store->topology()->edges.size();
        }
        operators_json[oc.op.id] = jo;
    }
    report["operators"] = operators_json;

    // Digest over the digest-free document, then embedded.
    result.report_digest_hex = digest_hex(sha256(report.dump(2)));
    report["report_digest"] = result.report_digest_hex;

    ScenarioOutputs out;
    out.report_json = report.dump(2) + "\n";
    out.ledger_text = ledger::export_chain(audit.entries());
    out.trace_text = simnet::export_trace(net.trace());

    std::ostringstream csv;
    csv << "round,start,completed,planned,received,aborted,eval_loss_before,eval_loss_after,"
           "model_version\n";
    for (const auto& r : result.rounds) {
        csv << r.round_id << ',' << r.start << ',' << r.completed << ',' << r.planned.size() << ','
            << r.received.size() << ',' << (r.aborted ? 1 : 0) << ','
            << format_double(r.eval_loss_before) << ',' << format_double(r.eval_loss_after) << ','
            << r.model_version << '\n';
    }
    out.rounds_csv = csv.str();
    out.result = std::move(result);
    return out;
}

}  // namespace teleos::scenario
