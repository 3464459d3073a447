#include "teleos/certify.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "teleos/prng.hpp"
#include "teleos/telemetry.hpp"

namespace teleos::certify {

const char* cert_test_name(CertTest t) {
    switch (t) {
        case CertTest::ContractConformance: return "contract-conformance";
        case CertTest::Determinism: return "determinism";
        case CertTest::ScopeCompliance: return "scope-compliance";
        case CertTest::BehavioralBenchmark: return "behavioral-benchmark";
        case CertTest::LatencyBudget: return "latency-budget";
    }
    return "?";
}

bool CertificationReport::passed(CertTest t) const {
    for (const auto& v : verdicts)
        if (v.test == t) return v.pass;
    return false;
}

namespace {

using kernel::AgentKind;

constexpr const char* kAgentId = "cert-agent";

struct SeriesTruth {
    std::set<Timestamp> anomalies;  // ground truth at index >= W only
    size_t scoreable = 0;
};

struct Harness {
    SchemaRegistry schemas;
    ledger::Ledger audit;
    // Invocations happen after the fixture window, as they would in a run.
    Timestamp clock = 1'000'000;
    kernel::Kernel k;
    OperatorId op{"cert-op", "lab"};
    telemetry::TelemetryStore store;
    std::map<std::string, SeriesTruth> bench_truth;
    std::map<std::string, std::vector<double>> forecast_holdout;
    uint64_t max_invocation_cost = 0;

    explicit Harness(const SuiteConfig& cfg)
        : audit(keypair_from_u64(derive_seed(cfg.seed, 0xCE57))),
          k(schemas, audit, [this] { return clock; }) {
        telemetry::register_builtin_schemas(schemas);
        agents::register_agent_schemas(schemas);
        k.attach_store(op, &store);
        seed_fixtures(cfg);
    }

    void put_series(const std::string& key, const telemetry::KpiWindow& window) {
        for (const auto& p : window.points) {
            telemetry::TelemetryRecord rec;
            rec.op = op;
            rec.domain = telemetry::Domain::Ran;
            rec.kind = telemetry::Kind::Kpi;
            rec.key = key;
            rec.ts = p.ts;
            rec.value = p.value;
            rec.schema = telemetry::builtin_schema_for(telemetry::Kind::Kpi);
            store.insert(rec);
        }
    }

    void seed_fixtures(const SuiteConfig& cfg) {
        // Anomaly benchmark: seeded noise with K injected spikes per series.
        const double rate =
            (cfg.anomalies_per_series - 0.5) / static_cast<double>(cfg.series_length);
        for (int i = 0; i < cfg.benchmark_series; ++i) {
            telemetry::GeneratorSpec spec;
            spec.base = 100.0;
            spec.noise_sigma = cfg.noise_sigma;
            spec.length = cfg.series_length;
            spec.seed = derive_seed(cfg.seed, 0xB000 + i);
            auto clean = telemetry::generate_kpi_series(spec);
            auto injected = telemetry::inject_anomalies(clean, rate, cfg.anomaly_sigmas,
                                                        cfg.noise_sigma,
                                                        derive_seed(cfg.seed, 0xA000 + i));
            const std::string key = "bench_" + std::to_string(i);
            put_series(key, injected.series);
            SeriesTruth truth;
            truth.scoreable = cfg.series_length - 20;
            for (size_t idx : injected.indices)
                if (idx >= 20) truth.anomalies.insert(static_cast<Timestamp>(idx));
            bench_truth[key] = std::move(truth);
        }

        // Forecaster benchmark: affine + noise, last `horizon` points held out.
        for (int i = 0; i < cfg.forecast_series; ++i) {
            CounterRng rng(derive_seed(cfg.seed, 0xF000 + i));
            const double intercept = 10.0 + rng.next_unit() * 50.0;
            const double slope = -2.0 + rng.next_unit() * 4.0;
            telemetry::KpiWindow history;
            std::vector<double> holdout;
            for (int t = 0; t < cfg.forecast_history + cfg.forecast_horizon; ++t) {
                const double y =
                    intercept + slope * t + cfg.forecast_noise_sigma * rng.next_gaussian();
                if (t < cfg.forecast_history)
                    history.points.push_back({t, y});
                else
                    holdout.push_back(y);
            }
            const std::string key = "fc_" + std::to_string(i);
            put_series(key, history);
            forecast_holdout[key] = std::move(holdout);
        }

        // Smooth series for contract checks and an exact line for the SLA
        // breach-forecast check (y = 2t up to t = 40, threshold 100).
        telemetry::GeneratorSpec main_spec;
        main_spec.base = 50.0;
        main_spec.trend = 0.1;
        main_spec.noise_sigma = 1.0;
        main_spec.length = 120;
        main_spec.seed = derive_seed(cfg.seed, 0x3A17);
        put_series("kpi_main", telemetry::generate_kpi_series(main_spec));

        telemetry::KpiWindow line;
        for (int t = 0; t <= 40; ++t) line.points.push_back({t, 2.0 * t});
        put_series("kpi_line", line);

        telemetry::KpiWindow secret;
        secret.points.push_back({0, 1.0});
        put_series("secret_metric", secret);
    }

    // Invocation wrapper tracking the virtual cost (points read + 1).
    Payload invoke(const Payload& input) {
        const size_t before = k.access_log().size();
        ++clock;
        try {
            auto insight = k.invoke(kAgentId, input);
            track_cost(before);
            return insight.payload;
        } catch (...) {
            track_cost(before);
            throw;
        }
    }

    void track_cost(size_t log_start) {
        uint64_t cost = 1;
        const auto& log = k.access_log();
        for (size_t i = log_start; i < log.size(); ++i) cost += log[i].points_returned;
        max_invocation_cost = std::max(max_invocation_cost, cost);
    }
};

Payload canned_valid_input(AgentKind kind) {
    switch (kind) {
        case AgentKind::AnomalyDetector:
            return {{"key", Value::text("kpi_main")}};
        case AgentKind::ExperiencePredictor:
            return {
                {"latency_ms", Value::number(275.0)},
                {"loss_ratio", Value::number(0.025)},
                {"throughput_mbps", Value::number(5.0)},
                {"demand_mbps", Value::number(10.0)},
            };
        case AgentKind::SlaMonitor:
            return {
                {"key", Value::text("kpi_main")},
                {"threshold", Value::number(200.0)},
                {"target_fraction", Value::number(0.9)},
                {"horizon", Value::integer(10)},
            };
        case AgentKind::OptimizationAdvisor:
            return {{"loads", Value::number_list({0.05, 0.3})}, {"lambda", Value::number(5.0)}};
        case AgentKind::CapacityForecaster:
            return {{"key", Value::text("fc_0")}, {"horizon", Value::integer(5)}};
    }
    return {};
}

Payload canned_invalid_input(AgentKind kind) {
    switch (kind) {
        case AgentKind::AnomalyDetector:
        case AgentKind::SlaMonitor:
        case AgentKind::CapacityForecaster:
            return {};  // missing required "key"
        case AgentKind::ExperiencePredictor:
            return {{"latency_ms", Value::number(100.0)}};  // missing the rest
        case AgentKind::OptimizationAdvisor:
            return {{"lambda", Value::number(1.0)}};  // missing "loads"
    }
    return {};
}

TestVerdict check_contract(Harness& h, AgentKind kind) {
    TestVerdict v{CertTest::ContractConformance, false, ""};
    try {
        Payload out = h.invoke(canned_valid_input(kind));
        const auto& d = h.k.descriptor(kAgentId);
        auto violations = validate_payload(h.schemas, d.output_schema, out);
        if (!violations.empty()) {
            v.detail = "output violates schema";
            return v;
        }
    } catch (const kernel::KernelError& e) {
        v.detail = std::string("valid input failed: ") + e.what();
        return v;
    }
    try {
        h.invoke(canned_invalid_input(kind));
        v.detail = "invalid input was accepted";
        return v;
    } catch (const kernel::InputViolationError&) {
        // rejected before execution, as required
    } catch (const kernel::KernelError& e) {
        v.detail = std::string("invalid input failed the wrong way: ") + e.what();
        return v;
    }
    v.pass = true;
    return v;
}

std::string outcome_digest(Harness& h, const Payload& input) {
    try {
        Payload out = h.invoke(input);
        return digest_hex(payload_digest(out));
    } catch (const kernel::KernelError& e) {
        return digest_hex(sha256(std::string("error:") + e.what()));
    }
}

TestVerdict check_determinism(Harness& h, AgentKind kind) {
    TestVerdict v{CertTest::Determinism, false, ""};
    const Payload input = canned_valid_input(kind);
    const std::string first = outcome_digest(h, input);
    const std::string second = outcome_digest(h, input);
    v.pass = first == second;
    if (!v.pass) v.detail = "two identical invocations produced different outputs";
    return v;
}

TestVerdict check_scope(Harness& h, AgentKind kind) {
    TestVerdict v{CertTest::ScopeCompliance, false, ""};
    const size_t denials_before = [&h] {
        size_t n = 0;
        for (const auto& e : h.audit.entries())
            if (e.type == ledger::EntryType::AuthorizationDenied) ++n;
        return n;
    }();

    // The mediation layer itself must deny and audit.
    try {
        h.k.mediated_read(kAgentId, {h.op, telemetry::Kind::Kpi, "secret_metric", 0, 1000});
        v.detail = "out-of-scope read was granted";
        return v;
    } catch (const kernel::AuthorizationDeniedError&) {
    }
    size_t denials_after = 0;
    for (const auto& e : h.audit.entries())
        if (e.type == ledger::EntryType::AuthorizationDenied) ++denials_after;
    if (denials_after != denials_before + 1) {
        v.detail = "denial was not audited";
        return v;
    }

    // A data-reading agent driven at an out-of-scope key must surface a
    // typed error, not crash; afterwards the agent must still serve.
    if (kernel::is_data_reading_kind(kind)) {
        Payload bad = canned_valid_input(kind);
        bad["key"] = Value::text("secret_metric");
        try {
            h.invoke(bad);
            // A valid output despite the denial is acceptable behavior.
        } catch (const kernel::AgentExecutionError&) {
        } catch (const kernel::KernelError& e) {
            v.detail = std::string("unexpected failure type: ") + e.what();
            return v;
        }
    }
    try {
        h.invoke(canned_valid_input(kind));
    } catch (const kernel::OutputViolationError&) {
        // Still alive and typed; output validity is contract's concern.
    } catch (const kernel::KernelError& e) {
        v.detail = std::string("agent unusable after denial: ") + e.what();
        return v;
    }
    v.pass = true;
    return v;
}

TestVerdict check_behavior_detector(Harness& h, const SuiteConfig& cfg) {
    TestVerdict v{CertTest::BehavioralBenchmark, false, ""};
    size_t relevant = 0, hits = 0, false_pos = 0, negatives = 0;
    for (const auto& [key, truth] : h.bench_truth) {
        Payload out;
        try {
            out = h.invoke({{"key", Value::text(key)}});
        } catch (const kernel::KernelError& e) {
            v.detail = std::string("benchmark invocation failed: ") + e.what();
            return v;
        }
        std::set<Timestamp> detected;
        for (double t : out.at("anomaly_timestamps").list)
            detected.insert(static_cast<Timestamp>(t));
        relevant += truth.anomalies.size();
        for (Timestamp t : truth.anomalies)
            if (detected.count(t)) ++hits;
        size_t series_hits = 0;
        for (Timestamp t : detected)
            if (truth.anomalies.count(t)) ++series_hits;
        false_pos += detected.size() - series_hits;
        negatives += truth.scoreable - truth.anomalies.size();
    }
    const double recall = relevant ? static_cast<double>(hits) / relevant : 0.0;
    const double fpr = negatives ? static_cast<double>(false_pos) / negatives : 1.0;
    std::ostringstream detail;
    detail << "recall=" << recall << " fpr=" << fpr;
    v.detail = detail.str();
    v.pass = recall >= cfg.min_recall && fpr <= cfg.max_false_positive_rate;
    return v;
}

TestVerdict check_behavior_forecaster(Harness& h, const SuiteConfig& cfg) {
    TestVerdict v{CertTest::BehavioralBenchmark, false, ""};
    double total_mae = 0.0;
    size_t n = 0;
    for (const auto& [key, holdout] : h.forecast_holdout) {
        Payload out;
        try {
            out = h.invoke({{"key", Value::text(key)},
                            {"horizon", Value::integer(cfg.forecast_horizon)}});
        } catch (const kernel::KernelError& e) {
            v.detail = std::string("benchmark invocation failed: ") + e.what();
            return v;
        }
        const auto& forecast = out.at("forecast").list;
        if (forecast.size() != holdout.size()) {
            v.detail = "forecast horizon mismatch";
            return v;
        }
        double mae = 0.0;
        for (size_t i = 0; i < forecast.size(); ++i) mae += std::abs(forecast[i] - holdout[i]);
        total_mae += mae / forecast.size();
        ++n;
    }
    const double mean_mae = total_mae / n;
    std::ostringstream detail;
    detail << "mae=" << mean_mae << " bound=" << cfg.max_forecast_mae;
    v.detail = detail.str();
    v.pass = mean_mae <= cfg.max_forecast_mae;
    return v;
}

TestVerdict check_behavior_experience(Harness& h) {
    TestVerdict v{CertTest::BehavioralBenchmark, false, ""};
    try {
        auto perfect = h.invoke({{"latency_ms", Value::number(50.0)},
                                 {"loss_ratio", Value::number(0.0)},
                                 {"throughput_mbps", Value::number(10.0)},
                                 {"demand_mbps", Value::number(10.0)}});
        auto starved = h.invoke({{"latency_ms", Value::number(50.0)},
                                 {"loss_ratio", Value::number(0.0)},
                                 {"throughput_mbps", Value::number(0.0)},
                                 {"demand_mbps", Value::number(10.0)}});
        auto mid = h.invoke(canned_valid_input(AgentKind::ExperiencePredictor));
        auto better = h.invoke({{"latency_ms", Value::number(100.0)},
                                {"loss_ratio", Value::number(0.025)},
                                {"throughput_mbps", Value::number(5.0)},
                                {"demand_mbps", Value::number(10.0)}});
        const double s_perfect = perfect.at("score").num;
        const double s_starved = starved.at("score").num;
        const double s_mid = mid.at("score").num;
        const double s_better = better.at("score").num;
        v.pass = std::abs(s_perfect - 1.0) < 1e-12 && s_starved == 0.0 &&
                 std::abs(s_mid - 0.5) < 1e-9 && s_better >= s_mid &&
                 s_mid >= 0.0 && s_mid <= 1.0;
        if (!v.pass) v.detail = "canned experience scores off";
    } catch (const kernel::KernelError& e) {
        v.detail = e.what();
    }
    return v;
}

TestVerdict check_behavior_sla(Harness& h) {
    TestVerdict v{CertTest::BehavioralBenchmark, false, ""};
    try {
        // Exact line y = 2t observed to t = 40; crosses 100 at t = 50.
        auto line = h.invoke({{"key", Value::text("kpi_line")},
                              {"threshold", Value::number(100.0)},
                              {"target_fraction", Value::number(0.95)},
                              {"horizon", Value::integer(20)}});
        const bool line_ok = line.at("compliant").flag &&
                             line.at("breach_forecast").flag &&
                             line.at("first_breach_ts").i64 == 50;
        auto breached = h.invoke({{"key", Value::text("kpi_line")},
                                  {"threshold", Value::number(-1.0)},
                                  {"target_fraction", Value::number(0.5)},
                                  {"horizon", Value::integer(5)}});
        const bool breached_ok = !breached.at("compliant").flag;
        v.pass = line_ok && breached_ok;
        if (!v.pass) v.detail = "canned sla verdicts off";
    } catch (const kernel::KernelError& e) {
        v.detail = e.what();
    }
    return v;
}

TestVerdict check_behavior_advisor(Harness& h) {
    TestVerdict v{CertTest::BehavioralBenchmark, false, ""};
    try {
        auto idle = h.invoke({{"loads", Value::number_list({0.5})}});
        auto sleepy = h.invoke(canned_valid_input(AgentKind::OptimizationAdvisor));
        auto hot = h.invoke({{"loads", Value::number_list({0.95, 0.2})},
                             {"lambda", Value::number(0.1)}});
        v.pass = idle.at("action").str == "no-op" && sleepy.at("action").str == "sleep:0" &&
                 hot.at("action").str == "shift:0->1" && hot.at("utility_delta").num > 0.0;
        if (!v.pass)
            v.detail = "actions: " + idle.at("action").str + " " + sleepy.at("action").str + " " +
                       hot.at("action").str;
    } catch (const kernel::KernelError& e) {
        v.detail = e.what();
    }
    return v;
}

TestVerdict check_behavior(Harness& h, AgentKind kind, const SuiteConfig& cfg) {
    switch (kind) {
        case AgentKind::AnomalyDetector: return check_behavior_detector(h, cfg);
        case AgentKind::CapacityForecaster: return check_behavior_forecaster(h, cfg);
        case AgentKind::ExperiencePredictor: return check_behavior_experience(h);
        case AgentKind::SlaMonitor: return check_behavior_sla(h);
        case AgentKind::OptimizationAdvisor: return check_behavior_advisor(h);
    }
    return {CertTest::BehavioralBenchmark, false, "unknown kind"};
}

TestVerdict check_latency(Harness& h, const SuiteConfig& cfg) {
    TestVerdict v{CertTest::LatencyBudget, false, ""};
    std::ostringstream detail;
    detail << "max_cost=" << h.max_invocation_cost << " budget=" << cfg.latency_budget;
    v.detail = detail.str();
    v.pass = h.max_invocation_cost <= cfg.latency_budget;
    return v;
}

}  // namespace

CertificationReport run_certification(kernel::AgentKind kind,
                                      const agents::ReferenceAgentParams& params,
                                      const SuiteConfig& cfg, const std::string& variant) {
    crypto_init();
    Harness h(cfg);

    agents::ReferenceAgentSpec spec;
    spec.agent_id = kAgentId;
    spec.kind = kind;
    spec.host = h.op;
    spec.scopes = {
        {"self", telemetry::Kind::Kpi, "bench*"},
        {"self", telemetry::Kind::Kpi, "fc*"},
        {"self", telemetry::Kind::Kpi, "kpi_*"},
    };
    spec.params = params;
    spec.key_seed = derive_seed(cfg.seed, 0xCE77);
    if (variant == "always-flag")
        agents::register_always_flag_detector(h.k, spec);
    else if (variant == "schema-violating")
        agents::register_schema_violating_emitter(h.k, spec);
    else
        agents::register_reference_agent(h.k, spec);

    CertificationReport report;
    report.agent_id = kAgentId;
    report.agent_version = {1, 0};
    report.kind = kernel::agent_kind_name(kind);
    if (!variant.empty()) report.kind += " (" + variant + ")";

    report.verdicts.push_back(check_contract(h, kind));
    report.verdicts.push_back(check_determinism(h, kind));
    report.verdicts.push_back(check_scope(h, kind));
    report.verdicts.push_back(check_behavior(h, kind, cfg));
    report.verdicts.push_back(check_latency(h, cfg));
    report.overall = std::all_of(report.verdicts.begin(), report.verdicts.end(),
                                 [](const TestVerdict& v) { return v.pass; });
    return report;
}

std::string report_text(const CertificationReport& report) {
    std::ostringstream os;
    os << "certification of " << report.kind << " (" << report.agent_id << " v"
       << report.agent_version.str() << ")\n";
    for (const auto& v : report.verdicts) {
        os << "  [" << (v.pass ? "PASS" : "FAIL") << "] " << cert_test_name(v.test);
        if (!v.detail.empty()) os << ": " << v.detail;
        os << "\n";
    }
    os << "overall: " << (report.overall ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::string report_json(const CertificationReport& report) {
    nlohmann::json j;
    j["agent_id"] = report.agent_id;
    j["agent_version"] = report.agent_version.str();
    j["kind"] = report.kind;
    j["overall"] = report.overall;
    nlohmann::json tests;
    for (const auto& v : report.verdicts) {
        nlohmann::json t;
        t["pass"] = v.pass;
        t["detail"] = v.detail;
        tests[cert_test_name(v.test)] = t;
    }
    j["tests"] = tests;
    return j.dump(2) + "\n";
}

}  // namespace teleos::certify
