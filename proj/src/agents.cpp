#include "teleos/agents.hpp"

#include <algorithm>
#include <cmath>

#include "teleos/prng.hpp"

namespace teleos::agents {

namespace {

double median_inplace(std::vector<double>& v) {
    const size_t n = v.size();
    auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    double hi = *mid;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> robust_scores(const std::vector<double>& values, int window) {
    const int n = static_cast<int>(values.size());
    if (window < 1) throw AgentsError("window must be >= 1");
    if (n <= window) throw AgentsError("series shorter than the scoring window");

    std::vector<double> scores(n - window, 0.0);
#pragma omp parallel for schedule(static) if (n - window > 512)
    for (int t = window; t < n; ++t) {
        std::vector<double> buf(values.begin() + (t - window), values.begin() + t);
        const double med = median_inplace(buf);
        for (double& x : buf) x = std::abs(x - med);
        const double mad = median_inplace(buf);
        scores[t - window] = std::abs(values[t] - med) / (1.4826 * mad + 1e-9);
    }
    return scores;
}

AnomalyReport detect_anomalies(const telemetry::KpiWindow& window, int w, double threshold) {
    auto values = window.values();
    auto scores = robust_scores(values, w);

    AnomalyReport report;
    report.window = w;
    report.threshold = threshold;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > threshold) {
            const auto& p = window.points[i + w];
            report.anomalies.push_back({p.ts, p.value, scores[i]});
        }
    }
    return report;
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

ExperienceScore predict_experience(const ExperienceSnapshot& snap, const ExperienceConfig& cfg) {
    if (snap.latency_ms < 0 || snap.loss_ratio < 0 || snap.throughput_mbps < 0)
        throw AgentsError("experience inputs must be non-negative");
    if (!(snap.demand_mbps > 0)) throw AgentsError("demand must be positive");

    ExperienceScore out;
    out.s_latency = clamp01(1.0 - (snap.latency_ms - cfg.latency_floor_ms) / cfg.latency_span_ms);
    out.s_loss = clamp01(1.0 - snap.loss_ratio / cfg.loss_ceiling);
    out.s_throughput = clamp01(snap.throughput_mbps / snap.demand_mbps);
    out.score = std::cbrt(out.s_latency * out.s_loss * out.s_throughput);
    return out;
}

SlaReport monitor_sla(const telemetry::KpiWindow& window, const SlaSpec& sla) {
    if (window.empty()) throw AgentsError("sla monitoring requires a non-empty window");
    if (sla.horizon < 1) throw AgentsError("sla horizon must be >= 1");

    SlaReport report;
    size_t within = 0;
    for (const auto& p : window.points)
        if (p.value <= sla.threshold) ++within;
    report.observed_within_fraction = static_cast<double>(within) / window.size();
    report.compliant = report.observed_within_fraction >= sla.target_fraction;

    if (window.size() >= 2) {
        auto forecast = forecast_capacity(window, sla.horizon);
        // Regular cadence assumed; the last observed interval extends it.
        const auto& pts = window.points;
        const Timestamp step = pts[pts.size() - 1].ts - pts[pts.size() - 2].ts;
        size_t breaching = 0;
        for (size_t i = 0; i < forecast.size(); ++i) {
            if (forecast[i] >= sla.threshold) {
                ++breaching;
                if (!report.breach_forecast) {
                    report.breach_forecast = true;
                    report.first_breach_ts = pts.back().ts + static_cast<Timestamp>(i + 1) * step;
                }
            }
        }
        report.horizon_breach_fraction = static_cast<double>(breaching) / forecast.size();
    }
    return report;
}

namespace {

struct CellPlan {
    std::vector<double> load;
    std::vector<bool> active;
};

double plan_utility(const CellPlan& plan, const std::vector<CellState>& cells, double lambda) {
    double u = 0.0;
    for (size_t i = 0; i < plan.load.size(); ++i) {
        if (!plan.active[i]) continue;
        u += 1.0 - std::max(0.0, plan.load[i] - 0.8) / 0.2;
        u -= lambda * cells[i].energy_active;
    }
    return u;
}

}  // namespace

OptimizationAdvice advise_optimization(const std::vector<CellState>& cells, double lambda) {
    if (cells.empty()) throw AgentsError("advisor needs at least one cell");
    const size_t n = cells.size();

    CellPlan base;
    base.load.reserve(n);
    base.active.assign(n, true);
    for (const auto& c : cells) base.load.push_back(c.load);
    const double u_before = plan_utility(base, cells, lambda);

    OptimizationAdvice best{"no-op", 0.0};
    auto consider = [&](const std::string& id, const CellPlan& plan) {
        const double delta = plan_utility(plan, cells, lambda) - u_before;
        if (delta > best.utility_delta ||
            (delta == best.utility_delta && id < best.action)) {
            best = {id, delta};
        }
    };

    for (size_t i = 0; i < n; ++i) {
        if (cells[i].load < 0.1 && n >= 2) {
            // Sleep i; its load migrates to the least-loaded other cell.
            size_t target = i == 0 ? 1 : 0;
            for (size_t j = 0; j < n; ++j)
                if (j != i && base.load[j] < base.load[target]) target = j;
            CellPlan plan = base;
            plan.active[i] = false;
            plan.load[target] += plan.load[i];
            plan.load[i] = 0.0;
            consider("sleep:" + std::to_string(i), plan);
        }
        if (cells[i].load > 0.8) {
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                CellPlan plan = base;
                const double excess = plan.load[i] - 0.8;
                plan.load[i] = 0.8;
                plan.load[j] += excess;
                consider("shift:" + std::to_string(i) + "->" + std::to_string(j), plan);
            }
        }
    }
    return best;
}

HoltState holt_fit(const std::vector<double>& values, double alpha, double beta) {
    if (values.size() < 2) throw AgentsError("holt fit needs at least 2 observations");
    HoltState s{values[0], values[1] - values[0]};
    for (size_t t = 1; t < values.size(); ++t) {
        const double prev_level = s.level;
        s.level = alpha * values[t] + (1.0 - alpha) * (s.level + s.trend);
        s.trend = beta * (s.level - prev_level) + (1.0 - beta) * s.trend;
    }
    return s;
}

std::vector<double> forecast_capacity(const telemetry::KpiWindow& window, int horizon,
                                      double alpha, double beta) {
    if (horizon < 1) throw AgentsError("forecast horizon must be >= 1");
    auto state = holt_fit(window.values(), alpha, beta);
    std::vector<double> out;
    out.reserve(horizon);
    for (int i = 1; i <= horizon; ++i) out.push_back(state.level + i * state.trend);
    return out;
}

double mse_loss(double w, double b, const std::vector<Sample>& data) {
    double acc = 0.0;
    for (const auto& s : data) {
        const double r = w * s.x + b - s.y;
        acc += r * r;
    }
    return acc / static_cast<double>(data.size());
}

std::pair<double, double> mse_gradient(double w, double b, const std::vector<Sample>& data) {
    double dw = 0.0, db = 0.0;
    for (const auto& s : data) {
        const double r = w * s.x + b - s.y;
        dw += 2.0 * r * s.x;
        db += 2.0 * r;
    }
    const double n = static_cast<double>(data.size());
    return {dw / n, db / n};
}

TrainResult local_train(const LocalModel& base, const std::vector<Sample>& data, int epochs,
                        double lr) {
    if (data.empty()) throw AgentsError("training data must be non-empty");
    if (!(lr > 0)) throw AgentsError("learning rate must be positive");
    for (const auto& s : data)
        if (!std::isfinite(s.x) || !std::isfinite(s.y))
            throw AgentsError("training data contains non-finite values");

    TrainResult out;
    out.model = base;
    out.loss_trace.reserve(epochs);
    for (int e = 0; e < epochs; ++e) {
        auto [dw, db] = mse_gradient(out.model.w, out.model.b, data);
        out.model.w -= lr * dw;
        out.model.b -= lr * db;
        out.loss_trace.push_back(mse_loss(out.model.w, out.model.b, data));
    }
    if (!std::isfinite(out.model.w) || !std::isfinite(out.model.b))
        throw AgentsError("training diverged to non-finite weights (learning rate too high)");
    return out;
}

// --- kernel-facing wrappers --------------------------------------------------

namespace {

using kernel::AgentContext;
using kernel::AgentDescriptor;
using kernel::AgentError;
using kernel::AgentKind;

constexpr SchemaVersion kV1{1, 0};

SchemaDef window_input_schema(const char* name) {
    SchemaDef def;
    def.name = name;
    def.version = kV1;
    def.fields = {
        {"key", SemType::String, true, ""},
        {"from", SemType::Timestamp, false, ""},
        {"to", SemType::Timestamp, false, ""},
        {"window", SemType::Integer, false, ""},
        {"threshold", SemType::Number, false, ""},
        {"target_fraction", SemType::Number, false, ""},
        {"horizon", SemType::Integer, false, ""},
        {"alpha", SemType::Number, false, ""},
        {"beta", SemType::Number, false, ""},
    };
    return def;
}

}  // namespace

void register_agent_schemas(SchemaRegistry& reg) {
    reg.register_schema(window_input_schema("anomaly-input"));
    reg.register_schema(window_input_schema("sla-input"));
    reg.register_schema(window_input_schema("forecast-input"));

    SchemaDef anomaly_out{"anomaly-report", kV1,
                          {
                              {"key", SemType::String, true, ""},
                              {"anomaly_count", SemType::Integer, true, ""},
                              {"anomaly_timestamps", SemType::ListOfNumber, true, ""},
                              {"max_score", SemType::Number, true, ""},
                              {"window", SemType::Integer, true, ""},
                              {"threshold", SemType::Number, true, ""},
                          }};
    reg.register_schema(anomaly_out);

    SchemaDef experience_in{"experience-input", kV1,
                            {
                                {"latency_ms", SemType::Number, true, "ms"},
                                {"loss_ratio", SemType::Number, true, "dimensionless"},
                                {"throughput_mbps", SemType::Number, true, "mbps"},
                                {"demand_mbps", SemType::Number, true, "mbps"},
                            }};
    reg.register_schema(experience_in);

    SchemaDef experience_out{"experience-score", kV1,
                             {
                                 {"score", SemType::Number, true, ""},
                                 {"s_latency", SemType::Number, true, ""},
                                 {"s_loss", SemType::Number, true, ""},
                                 {"s_throughput", SemType::Number, true, ""},
                             }};
    reg.register_schema(experience_out);

    SchemaDef sla_out{"sla-report", kV1,
                      {
                          {"key", SemType::String, true, ""},
                          {"compliant", SemType::Boolean, true, ""},
                          {"observed_within_fraction", SemType::Number, true, ""},
                          {"breach_forecast", SemType::Boolean, true, ""},
                          {"first_breach_ts", SemType::Timestamp, false, ""},
                          {"horizon_breach_fraction", SemType::Number, true, ""},
                      }};
    reg.register_schema(sla_out);

    SchemaDef advisor_in{"optimization-input", kV1,
                         {
                             {"loads", SemType::ListOfNumber, true, ""},
                             {"energy", SemType::ListOfNumber, false, ""},
                             {"lambda", SemType::Number, false, ""},
                         }};
    reg.register_schema(advisor_in);

    SchemaDef advisor_out{"optimization-advice", kV1,
                          {
                              {"action", SemType::String, true, ""},
                              {"utility_delta", SemType::Number, true, ""},
                          }};
    reg.register_schema(advisor_out);

    SchemaDef forecast_out{"capacity-forecast", kV1,
                           {
                               {"key", SemType::String, true, ""},
                               {"forecast", SemType::ListOfNumber, true, ""},
                               {"level", SemType::Number, true, ""},
                               {"trend", SemType::Number, true, ""},
                           }};
    reg.register_schema(forecast_out);
}

namespace {

double get_num(const Payload& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second.num;
}

int64_t get_int(const Payload& p, const std::string& key, int64_t fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second.i64;
}

std::string get_str(const Payload& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw AgentError("missing field: " + key);
    return it->second.str;
}

telemetry::KpiWindow read_window(AgentContext& ctx, const Payload& input) {
    const auto key = get_str(input, "key");
    const Timestamp from = get_int(input, "from", 0);
    const Timestamp to = get_int(input, "to", ctx.now + 1);
    auto window = ctx.read_self(telemetry::Kind::Kpi, key, from, to);
    if (window.empty()) throw AgentError("no data for key " + key);
    return window;
}

SchemaRef input_schema_for(AgentKind kind) {
    switch (kind) {
        case AgentKind::AnomalyDetector: return {"anomaly-input", kV1};
        case AgentKind::ExperiencePredictor: return {"experience-input", kV1};
        case AgentKind::SlaMonitor: return {"sla-input", kV1};
        case AgentKind::OptimizationAdvisor: return {"optimization-input", kV1};
        case AgentKind::CapacityForecaster: return {"forecast-input", kV1};
    }
    return {"anomaly-input", kV1};
}

SchemaRef output_schema_for(AgentKind kind) {
    switch (kind) {
        case AgentKind::AnomalyDetector: return {"anomaly-report", kV1};
        case AgentKind::ExperiencePredictor: return {"experience-score", kV1};
        case AgentKind::SlaMonitor: return {"sla-report", kV1};
        case AgentKind::OptimizationAdvisor: return {"optimization-advice", kV1};
        case AgentKind::CapacityForecaster: return {"capacity-forecast", kV1};
    }
    return {"anomaly-report", kV1};
}

Payload anomaly_payload(const std::string& key, const AnomalyReport& report) {
    std::vector<double> ts;
    double max_score = 0.0;
    for (const auto& a : report.anomalies) {
        ts.push_back(static_cast<double>(a.ts));
        max_score = std::max(max_score, a.score);
    }
    return Payload{
        {"key", Value::text(key)},
        {"anomaly_count", Value::integer(static_cast<int64_t>(report.anomalies.size()))},
        {"anomaly_timestamps", Value::number_list(std::move(ts))},
        {"max_score", Value::number(max_score)},
        {"window", Value::integer(report.window)},
        {"threshold", Value::number(report.threshold)},
    };
}

kernel::AgentImpl make_impl(AgentKind kind, const ReferenceAgentParams& params) {
    switch (kind) {
        case AgentKind::AnomalyDetector:
            return [params](const Payload& input, AgentContext& ctx) {
                auto window = read_window(ctx, input);
                const int w = static_cast<int>(get_int(input, "window", params.window));
                const double k = get_num(input, "threshold", params.threshold);
                return anomaly_payload(window.key, detect_anomalies(window, w, k));
            };
        case AgentKind::ExperiencePredictor:
            return [params](const Payload& input, AgentContext&) {
                ExperienceSnapshot snap;
                snap.latency_ms = get_num(input, "latency_ms", 0.0);
                snap.loss_ratio = get_num(input, "loss_ratio", 0.0);
                snap.throughput_mbps = get_num(input, "throughput_mbps", 0.0);
                snap.demand_mbps = get_num(input, "demand_mbps", 0.0);
                auto score = predict_experience(snap, params.experience);
                return Payload{
                    {"score", Value::number(score.score)},
                    {"s_latency", Value::number(score.s_latency)},
                    {"s_loss", Value::number(score.s_loss)},
                    {"s_throughput", Value::number(score.s_throughput)},
                };
            };
        case AgentKind::SlaMonitor:
            return [params](const Payload& input, AgentContext& ctx) {
                auto window = read_window(ctx, input);
                SlaSpec spec;
                spec.threshold = get_num(input, "threshold", params.sla_threshold);
                spec.target_fraction =
                    get_num(input, "target_fraction", params.sla_target_fraction);
                spec.horizon = static_cast<int>(get_int(input, "horizon", params.sla_horizon));
                auto report = monitor_sla(window, spec);
                Payload out{
                    {"key", Value::text(window.key)},
                    {"compliant", Value::boolean(report.compliant)},
                    {"observed_within_fraction", Value::number(report.observed_within_fraction)},
                    {"breach_forecast", Value::boolean(report.breach_forecast)},
                    {"horizon_breach_fraction", Value::number(report.horizon_breach_fraction)},
                };
                if (report.breach_forecast)
                    out.emplace("first_breach_ts", Value::timestamp(report.first_breach_ts));
                return out;
            };
        case AgentKind::OptimizationAdvisor:
            return [params](const Payload& input, AgentContext&) {
                auto it = input.find("loads");
                if (it == input.end()) throw AgentError("missing field: loads");
                std::vector<CellState> cells;
                for (double l : it->second.list) cells.push_back({l, 1.0});
                if (auto e = input.find("energy"); e != input.end()) {
                    for (size_t i = 0; i < cells.size() && i < e->second.list.size(); ++i)
                        cells[i].energy_active = e->second.list[i];
                }
                const double lambda = get_num(input, "lambda", params.lambda);
                auto advice = advise_optimization(cells, lambda);
                return Payload{
                    {"action", Value::text(advice.action)},
                    {"utility_delta", Value::number(advice.utility_delta)},
                };
            };
        case AgentKind::CapacityForecaster:
            return [params](const Payload& input, AgentContext& ctx) {
                auto window = read_window(ctx, input);
                const double alpha = get_num(input, "alpha", params.alpha);
                const double beta = get_num(input, "beta", params.beta);
                const int h =
                    static_cast<int>(get_int(input, "horizon", params.forecast_horizon));
                if (h < 1) throw AgentError("forecast horizon must be >= 1");
                auto state = holt_fit(window.values(), alpha, beta);
                std::vector<double> forecast;
                forecast.reserve(h);
                for (int i = 1; i <= h; ++i) forecast.push_back(state.level + i * state.trend);
                return Payload{
                    {"key", Value::text(window.key)},
                    {"forecast", Value::number_list(std::move(forecast))},
                    {"level", Value::number(state.level)},
                    {"trend", Value::number(state.trend)},
                };
            };
    }
    throw AgentsError("unreachable agent kind");
}

std::string register_with_impl(kernel::Kernel& k, const ReferenceAgentSpec& spec,
                               kernel::AgentImpl impl) {
    // Stable per-id fallback keeps fixture keys deterministic.
    const uint64_t key_seed =
        spec.key_seed != 0 ? spec.key_seed : digest_prefix_u64(sha256(spec.agent_id));
    auto keys = keypair_from_u64(key_seed);
    AgentDescriptor d;
    d.agent_id = spec.agent_id;
    d.kind = spec.kind;
    d.version = kV1;
    d.input_schema = input_schema_for(spec.kind);
    d.output_schema = output_schema_for(spec.kind);
    d.scopes = spec.scopes;
    d.publisher_key = keys.pub;
    sign_descriptor(d, keys.secret);
    return k.register_agent(d, std::move(impl), spec.host, keys.secret);
}

}  // namespace

std::string register_reference_agent(kernel::Kernel& k, const ReferenceAgentSpec& spec) {
    return register_with_impl(k, spec, make_impl(spec.kind, spec.params));
}

std::string register_always_flag_detector(kernel::Kernel& k, const ReferenceAgentSpec& spec) {
    ReferenceAgentSpec fixed = spec;
    fixed.kind = AgentKind::AnomalyDetector;
    auto impl = [params = spec.params](const Payload& input, AgentContext& ctx) {
        auto window = read_window(ctx, input);
        AnomalyReport report;
        report.window = params.window;
        report.threshold = params.threshold;
        // Deliberately broken: every scoreable point is an anomaly.
        for (size_t i = params.window; i < window.points.size(); ++i)
            report.anomalies.push_back(
                {window.points[i].ts, window.points[i].value, params.threshold + 1.0});
        return anomaly_payload(window.key, report);
    };
    return register_with_impl(k, fixed, impl);
}

std::string register_schema_violating_emitter(kernel::Kernel& k, const ReferenceAgentSpec& spec) {
    ReferenceAgentSpec fixed = spec;
    fixed.kind = AgentKind::AnomalyDetector;
    auto impl = [params = spec.params](const Payload& input, AgentContext& ctx) {
        auto window = read_window(ctx, input);
        auto report = detect_anomalies(window, params.window, params.threshold);
        auto payload = anomaly_payload(window.key, report);
        payload.erase("anomaly_count");  // drops a required output field
        return payload;
    };
    return register_with_impl(k, fixed, impl);
}

}  // namespace teleos::agents
