#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teleos/agents.hpp"
#include "teleos/federation.hpp"
#include "teleos/kernel.hpp"
#include "teleos/simnet.hpp"

namespace teleos::scenario {

inline constexpr const char* kToolVersion = "teleos 0.1.0";

struct GeneratorConfig {
    std::string key;
    telemetry::GeneratorSpec spec;  // seed filled from the scenario seed
    std::string domain = "ran";
    // Optional seeded anomaly injection with ground truth kept for metrics.
    double anomaly_rate = 0.0;       // 0 = none
    double anomaly_sigmas = 8.0;
};

struct OperatorConfig {
    OperatorId op;
    simnet::LinkSpec link;
    std::vector<GeneratorConfig> generators;
    int topology_nodes = 0;  // 0 = no topology
    double topology_avg_degree = 3.0;
};

struct InvocationPlan {
    Timestamp at = 0;
    Payload input;
};

struct AgentConfig {
    std::string agent_id;
    kernel::AgentKind kind;
    std::string operator_id;
    std::vector<kernel::DataScope> scopes;
    agents::ReferenceAgentParams params;
    std::vector<InvocationPlan> invocations;
    std::string variant;  // "", "always-flag", "schema-violating"
};

struct WorkflowConfig {
    std::vector<std::string> nodes;
    std::vector<kernel::WorkflowEdge> edges;
};

struct LinearTaskConfig {
    double true_w = 3.0;
    double true_b = 0.0;
    double noise_sigma = 0.3;
    int samples_per_operator = 30;
    double x_max = 2.0;
    int eval_samples = 50;
};

struct FederationConfig {
    int rounds = 0;
    Timestamp start_ms = 0;
    Timestamp round_gap_ms = 0;
    Timestamp deadline_ms = 60000;
    Timestamp lookahead_ms = 24 * 3600 * 1000;
    federation::DpConfig dp;
    bool masking = false;
    federation::CongestionSchedule coordinator_schedule;
    std::vector<std::string> participants;
    int local_epochs = 20;
    double lr = 0.1;
    LinearTaskConfig task;
};

struct FaultInjectionConfig {
    bool enabled = false;
    std::string export_raw_from;
    Timestamp at_ms = 0;
    size_t size_bytes = 4096;
};

struct ScenarioConfig {
    uint64_t seed = 0;
    Timestamp duration_ms = 0;
    Timestamp telemetry_interval_ms = 1000;
    std::vector<OperatorConfig> operators;
    std::vector<AgentConfig> agents;
    std::vector<WorkflowConfig> workflows;
    FederationConfig federation;
    FaultInjectionConfig fault;
    std::vector<SchemaDef> extra_schemas;
};

struct ValidationIssue {
    std::string path;  // e.g. "federation.masking"
    std::string message;
};

struct ScenarioValidationError : std::runtime_error {
    std::vector<ValidationIssue> issues;
    explicit ScenarioValidationError(std::vector<ValidationIssue> iss);
};

// Parses and validates; every issue carries its field path.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text);

struct AgentMetrics {
    uint64_t invocations = 0;
    uint64_t errors = 0;
    bool is_detector = false;
    double recall = 0.0;
    double false_positive_rate = 0.0;
};

struct ScenarioResult {
    std::vector<federation::RoundRecord> rounds;
    std::map<std::string, AgentMetrics> agent_metrics;
    uint64_t sovereignty_violations = 0;
    uint64_t audited_violations = 0;  // post-hoc trace audit, must equal live
    uint64_t ledger_length = 0;
    uint64_t event_count = 0;
    uint64_t final_model_version = 0;
    std::string report_digest_hex;
    std::string trace_digest_hex;

    bool clean() const {
        return sovereignty_violations == 0 &&
               std::none_of(rounds.begin(), rounds.end(),
                            [](const federation::RoundRecord& r) { return r.aborted; });
    }
};

struct ScenarioOutputs {
    ScenarioResult result;
    std::string report_json;   // digest-bearing structured report
    std::string rounds_csv;    // per-round metrics table
    std::string ledger_text;   // ledger export format
    std::string trace_text;    // simnet trace export format
};

// Fully deterministic in (cfg, cfg.seed).
ScenarioOutputs run_scenario(const ScenarioConfig& cfg);

}  // namespace teleos::scenario
