#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "teleos/domain.hpp"
#include "teleos/ledger.hpp"
#include "teleos/telemetry.hpp"

namespace teleos::kernel {

enum class AgentKind {
    AnomalyDetector,
    ExperiencePredictor,
    SlaMonitor,
    OptimizationAdvisor,
    CapacityForecaster,
};

const char* agent_kind_name(AgentKind k);
std::optional<AgentKind> agent_kind_from_name(std::string_view s);

// Kinds that must declare data scopes because they read telemetry through
// the mediated layer (the other two work from their invocation payload).
bool is_data_reading_kind(AgentKind k);

// operator_id == "self" binds to the agent's host operator at registration.
// Key patterns are literal or prefix + trailing '*'.
struct DataScope {
    std::string operator_id;
    telemetry::Kind kind = telemetry::Kind::Kpi;
    std::string key_pattern;
};

bool key_pattern_matches(std::string_view pattern, std::string_view key);

struct AgentDescriptor {
    std::string agent_id;
    AgentKind kind = AgentKind::AnomalyDetector;
    SchemaVersion version;
    SchemaRef input_schema;
    SchemaRef output_schema;
    std::vector<DataScope> scopes;
    PublicKey publisher_key{};
    Signature signature{};  // over sha256 of the canonical encoding below
};

// Canonical descriptor encoding (fields in declaration order, signature
// excluded). Signing and verification both go through this.
Digest descriptor_digest(const AgentDescriptor& d);
void sign_descriptor(AgentDescriptor& d, const SecretKey& sk);

struct Insight {
    std::string agent_id;
    SchemaVersion agent_version;
    Timestamp ts = 0;
    std::string topic;
    Payload payload;
    Digest input_digest{};
    Signature signature{};
};

Digest insight_digest(const Insight& i);  // canonical core, signature excluded

struct ReadRequest {
    OperatorId op;
    telemetry::Kind kind = telemetry::Kind::Kpi;
    std::string key;
    Timestamp from = 0;
    Timestamp to = 0;
};

struct WorkflowEdge {
    std::string topic;       // must resolve to a registered producer
    std::string consumer;    // agent id invoked when the topic fires
    Payload bound_params;    // constants merged under the mapped payload
};

struct WorkflowSpec {
    std::vector<std::string> nodes;
    std::vector<WorkflowEdge> edges;
};

// --- typed kernel errors ------------------------------------------------

struct KernelError : std::runtime_error {
    explicit KernelError(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidSignatureError : KernelError {
    InvalidSignatureError() : KernelError("descriptor signature does not verify") {}
};
struct DuplicateAgentError : KernelError {
    explicit DuplicateAgentError(const std::string& id)
        : KernelError("agent already registered: " + id) {}
};
struct UnknownAgentError : KernelError {
    explicit UnknownAgentError(const std::string& id) : KernelError("unknown agent: " + id) {}
};
struct InputViolationError : KernelError {
    std::vector<ContractViolation> violations;
    explicit InputViolationError(std::vector<ContractViolation> v)
        : KernelError("input payload violates the agent input schema"), violations(std::move(v)) {}
};
struct OutputViolationError : KernelError {
    std::vector<ContractViolation> violations;
    explicit OutputViolationError(std::vector<ContractViolation> v)
        : KernelError("agent output violates its output schema"), violations(std::move(v)) {}
};
struct AgentExecutionError : KernelError {
    explicit AgentExecutionError(const std::string& what)
        : KernelError("agent execution failed: " + what) {}
};
struct AuthorizationDeniedError : KernelError {
    ReadRequest request;
    explicit AuthorizationDeniedError(ReadRequest r)
        : KernelError("mediated read denied: no declared scope matches " + r.key),
          request(std::move(r)) {}
};
struct MalformedPatternError : KernelError {
    explicit MalformedPatternError(const std::string& p)
        : KernelError("malformed topic pattern: " + p) {}
};
struct WorkflowCycleError : KernelError {
    std::vector<std::string> cycle;
    explicit WorkflowCycleError(std::vector<std::string> nodes);
};

// Agents throw this to signal a typed, expected failure (anything else a
// handler throws is wrapped into AgentExecutionError too).
struct AgentError : std::runtime_error {
    explicit AgentError(const std::string& what) : std::runtime_error(what) {}
};

// --- health and audit surfaces -------------------------------------------

enum class HealthState { Healthy, Degraded, Failed };
const char* health_state_name(HealthState s);

struct HealthStatus {
    HealthState status = HealthState::Healthy;
    Timestamp last_invocation = -1;  // -1 = never invoked
    uint32_t consecutive_errors = 0;
    uint64_t total_errors = 0;
};

struct AccessRecord {
    std::string agent_id;
    ReadRequest request;
    bool granted = false;
    size_t points_returned = 0;
    Timestamp ts = 0;
};

struct InvocationRecord {
    std::string agent_id;
    Payload input;
    Digest input_digest{};
    bool ok = false;
    Timestamp ts = 0;
};

struct Delivery {
    std::string topic;
    uint64_t sequence = 0;
    Insight insight;
};

class Kernel;

struct AgentContext {
    Kernel& kernel;
    std::string agent_id;
    OperatorId host;
    Timestamp now = 0;

    telemetry::KpiWindow read(const ReadRequest& req);
    telemetry::KpiWindow read_self(telemetry::Kind kind, const std::string& key, Timestamp from,
                                   Timestamp to);
};

using AgentImpl = std::function<Payload(const Payload& input, AgentContext& ctx)>;
using SubscriptionId = uint64_t;
using WorkflowId = uint64_t;

struct KernelConfig {
    uint32_t failure_threshold = 3;  // consecutive errors before Failed
};

// Single-threaded by contract: the simulator's event loop is the only
// caller, so invocations and bus deliveries are naturally serialized.
class Kernel {
public:
    Kernel(SchemaRegistry& schemas, ledger::Ledger& audit, std::function<Timestamp()> clock,
           KernelConfig cfg = {});

    void attach_store(const OperatorId& op, telemetry::TelemetryStore* store);

    // Verifies the descriptor signature and schema references, assigns the
    // agent's insight topic "<kind>/<agent_id>", audits the registration.
    std::string register_agent(const AgentDescriptor& d, AgentImpl impl, const OperatorId& host,
                               const SecretKey& signing_key);

    bool has_agent(const std::string& agent_id) const;
    const AgentDescriptor& descriptor(const std::string& agent_id) const;
    std::string topic_of(const std::string& agent_id) const;

    // Scope-checked read; denials are audited and thrown, grants are logged
    // in the access log for post-hoc replay.
    telemetry::KpiWindow mediated_read(const std::string& agent_id, const ReadRequest& req);

    uint64_t publish(const std::string& topic, const Insight& insight);
    SubscriptionId subscribe(const std::string& pattern);
    const std::vector<Delivery>& delivered(SubscriptionId sub) const;

    // Validates, runs, validates output, signs, audits, and publishes the
    // resulting insight on the agent's topic. Typed errors, never crashes.
    Insight invoke(const std::string& agent_id, const Payload& input);

    WorkflowId compose_workflow(const WorkflowSpec& spec);

    HealthStatus health_check(const std::string& agent_id) const;

    const std::vector<AccessRecord>& access_log() const { return access_log_; }
    const std::vector<InvocationRecord>& invocation_log() const { return invocation_log_; }
    const std::vector<Insight>& insight_log() const { return insight_log_; }

    // True iff some declared scope of the agent covers the request.
    bool scope_allows(const std::string& agent_id, const ReadRequest& req) const;

private:
    struct RegisteredAgent {
        AgentDescriptor descriptor;
        AgentImpl impl;
        OperatorId host;
        SecretKey signing_key{};
        std::string topic;
        HealthStatus health;
    };

    struct Subscription {
        std::string pattern;
        std::vector<Delivery> queue;
    };

    struct Workflow {
        WorkflowSpec spec;
    };

    const RegisteredAgent& agent_or_throw(const std::string& id) const;
    RegisteredAgent& agent_or_throw(const std::string& id);
    void audit(ledger::EntryType type, const Digest& payload_digest);
    void audit_text(ledger::EntryType type, const std::string& text);
    void run_workflow_edges(const std::string& topic, const Insight& insight);

    SchemaRegistry& schemas_;
    ledger::Ledger& audit_;
    std::function<Timestamp()> clock_;
    KernelConfig cfg_;

    std::map<std::string, RegisteredAgent> agents_;
    std::map<std::string, std::string> topic_to_agent_;
    std::map<std::string, telemetry::TelemetryStore*> stores_;
    std::map<std::string, uint64_t> topic_sequences_;
    std::map<SubscriptionId, Subscription> subscriptions_;
    std::map<WorkflowId, Workflow> workflows_;
    SubscriptionId next_subscription_ = 1;
    WorkflowId next_workflow_ = 1;

    // One cascade per external stimulus: each workflow edge fires at most
    // once, which bounds triggered invocations by the edge count.
    int cascade_depth_ = 0;
    std::set<std::pair<WorkflowId, size_t>> fired_edges_;

    std::vector<AccessRecord> access_log_;
    std::vector<InvocationRecord> invocation_log_;
    std::vector<Insight> insight_log_;
};

// Topic grammar: '/'-separated non-empty segments; '*' only as the entire
// final segment, matching one or more trailing segments.
bool topic_pattern_valid(std::string_view pattern);
bool topic_matches(std::string_view pattern, std::string_view topic);

}  // namespace teleos::kernel
