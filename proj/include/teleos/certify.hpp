#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teleos/agents.hpp"
#include "teleos/kernel.hpp"

namespace teleos::certify {

// The five certification tests, each with a deterministic verdict:
//   contract-conformance  valid canned inputs produce schema-valid outputs;
//                         an invalid input is rejected before execution
//   determinism           two identical invocations give identical output
//                         digests (or the identical typed error)
//   scope-compliance      an out-of-scope read is denied and audited, and
//                         the agent surfaces a typed error or valid output
//                         without taking the kernel down
//   behavioral-benchmark  per-kind seeded benchmark (detector recall/FPR,
//                         forecaster MAE, exact canned checks otherwise)
//   latency-budget        virtual invocation cost (points read + 1) stays
//                         within the configured budget
//
// Shipped negative fixtures and their documented verdicts:
//   always-flag detector      fails behavioral-benchmark only
//   schema-violating emitter  fails contract-conformance and
//                             behavioral-benchmark (it cannot produce a
//                             schema-valid report for the benchmark either)
enum class CertTest {
    ContractConformance,
    Determinism,
    ScopeCompliance,
    BehavioralBenchmark,
    LatencyBudget,
};

const char* cert_test_name(CertTest t);

struct TestVerdict {
    CertTest test;
    bool pass = false;
    std::string detail;
};

struct CertificationReport {
    std::string agent_id;
    SchemaVersion agent_version;
    std::string kind;
    std::vector<TestVerdict> verdicts;  // all five, fixed order
    bool overall = false;               // AND of the verdicts

    bool passed(CertTest t) const;
};

struct SuiteConfig {
    uint64_t seed = 2026;
    // anomaly benchmark
    int benchmark_series = 40;
    int series_length = 420;
    double noise_sigma = 1.0;
    int anomalies_per_series = 3;
    double anomaly_sigmas = 8.0;
    double min_recall = 0.9;
    double max_false_positive_rate = 0.02;
    // forecaster benchmark
    int forecast_series = 20;
    int forecast_history = 60;
    int forecast_horizon = 10;
    double forecast_noise_sigma = 0.5;
    double max_forecast_mae = 2.5;
    // latency budget in virtual cost units (points read + 1 per invocation)
    uint64_t latency_budget = 1'000'000;
};

// Variant "" runs the reference implementation of the kind; "always-flag"
// and "schema-violating" run the shipped adversarial fixtures.
CertificationReport run_certification(kernel::AgentKind kind,
                                      const agents::ReferenceAgentParams& params,
                                      const SuiteConfig& cfg, const std::string& variant = "");

std::string report_text(const CertificationReport& report);
std::string report_json(const CertificationReport& report);

}  // namespace teleos::certify
