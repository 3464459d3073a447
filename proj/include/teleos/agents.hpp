#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teleos/domain.hpp"
#include "teleos/kernel.hpp"
#include "teleos/telemetry.hpp"

namespace teleos::agents {

struct AgentsError : std::runtime_error {
    explicit AgentsError(const std::string& what) : std::runtime_error(what) {}
};

// --- anomaly detection ----------------------------------------------------

struct AnomalyPoint {
    Timestamp ts = 0;
    double value = 0.0;
    double score = 0.0;
};

struct AnomalyReport {
    std::vector<AnomalyPoint> anomalies;
    int window = 0;     // parameter echo
    double threshold = 0.0;
};

// Robust score per position t >= W over the trailing window x[t-W .. t-1]:
//   score_t = |x_t - median(win)| / (1.4826 * MAD(win) + 1e-9)
// The 1e-9 floor keeps constant baselines finite. Positions are independent,
// so scoring parallelizes over t (OpenMP) without changing any result.
std::vector<double> robust_scores(const std::vector<double>& values, int window);

// Flags positions with score > threshold. Requires window length > W.
AnomalyReport detect_anomalies(const telemetry::KpiWindow& window, int w = 20,
                               double threshold = 3.5);

// --- experience prediction --------------------------------------------------

struct ExperienceSnapshot {
    double latency_ms = 0.0;
    double loss_ratio = 0.0;
    double throughput_mbps = 0.0;
    double demand_mbps = 0.0;
};

struct ExperienceConfig {
    double latency_floor_ms = 50.0;   // score 1 at or below
    double latency_span_ms = 450.0;   // score 0 at floor + span
    double loss_ceiling = 0.05;       // score 0 at or above
};

struct ExperienceScore {
    double score = 0.0;  // geometric mean of the three subscores
    double s_latency = 0.0;
    double s_loss = 0.0;
    double s_throughput = 0.0;
};

ExperienceScore predict_experience(const ExperienceSnapshot& snap,
                                   const ExperienceConfig& cfg = {});

// --- SLA monitoring ---------------------------------------------------------

struct SlaSpec {
    double threshold = 0.0;
    double target_fraction = 0.0;  // compliant iff P(sample <= threshold) >= this
    int horizon = 1;
};

struct SlaReport {
    bool compliant = false;
    double observed_within_fraction = 0.0;
    bool breach_forecast = false;
    Timestamp first_breach_ts = 0;          // valid when breach_forecast
    double horizon_breach_fraction = 0.0;   // share of forecast steps at/over threshold
};

// Observed compliance over the window plus a Holt forecast over `horizon`
// steps; a forecast value >= threshold counts as a predicted breach.
SlaReport monitor_sla(const telemetry::KpiWindow& window, const SlaSpec& sla);

// --- optimization advice ------------------------------------------------------

struct CellState {
    double load = 0.0;          // in [0, 1]
    double energy_active = 1.0; // energy drawn while the cell is active
};

struct OptimizationAdvice {
    std::string action;          // "no-op", "sleep:<i>", "shift:<i>-><j>"
    double utility_delta = 0.0;  // U(after) - U(before)
};

// U = sum(qos(load_i)) - lambda * sum(energy_i) over active cells, with
// qos(l) = 1 - max(0, l - 0.8) / 0.2. Action set: no-op; sleep:i for cells
// with load < 0.1 (load moves to the least-loaded other cell); shift:i->j
// for cells with load > 0.8 (excess over 0.8 moves to j). Returns the
// argmax action; ties break toward the lexicographically smaller id.
OptimizationAdvice advise_optimization(const std::vector<CellState>& cells, double lambda);

// --- capacity forecasting ----------------------------------------------------

struct HoltState {
    double level = 0.0;
    double trend = 0.0;
};

// Holt linear trend: l_t = a*y_t + (1-a)(l_{t-1} + b_{t-1}),
// b_t = b*(l_t - l_{t-1}) + (1-b)*b_{t-1}; init l_1 = y_1, b_1 = y_2 - y_1.
HoltState holt_fit(const std::vector<double>& values, double alpha, double beta);

// yhat_{T+i} = l_T + i * b_T for i in 1..h. Requires >= 2 observations.
std::vector<double> forecast_capacity(const telemetry::KpiWindow& window, int horizon,
                                      double alpha = 0.5, double beta = 0.3);

// --- local training (federated participant side) ---------------------------

struct LocalModel {
    double w = 0.0;
    double b = 0.0;
    uint64_t base_version = 0;  // global model version this was trained from

    std::vector<double> weights() const { return {w, b}; }
};

struct Sample {
    double x = 0.0;
    double y = 0.0;
};

double mse_loss(double w, double b, const std::vector<Sample>& data);

// d/dw and d/db of mse_loss.
std::pair<double, double> mse_gradient(double w, double b, const std::vector<Sample>& data);

struct TrainResult {
    LocalModel model;
    std::vector<double> loss_trace;  // loss after each epoch's update
};

// Full-batch gradient descent on y = w*x + b. Monotone loss for
// lr <= 0.5 / (mean(x^2) + 1) on any dataset (conservative curvature bound).
TrainResult local_train(const LocalModel& base, const std::vector<Sample>& data, int epochs,
                        double lr);

// --- kernel-facing reference agents ------------------------------------------

// Registers the shared input/output schemas the five reference agents use.
void register_agent_schemas(SchemaRegistry& reg);

struct ReferenceAgentParams {
    // anomaly detector
    int window = 20;
    double threshold = 3.5;
    // sla monitor
    double sla_threshold = 200.0;
    double sla_target_fraction = 0.95;
    int sla_horizon = 10;
    // experience predictor
    ExperienceConfig experience;
    // optimization advisor
    double lambda = 0.5;
    // capacity forecaster
    double alpha = 0.5;
    double beta = 0.3;
    int forecast_horizon = 10;
};

struct ReferenceAgentSpec {
    std::string agent_id;
    kernel::AgentKind kind;
    OperatorId host;
    std::vector<kernel::DataScope> scopes;
    ReferenceAgentParams params;
    uint64_t key_seed = 0;  // deterministic publisher keypair
};

// Builds, signs, and registers a deterministic reference agent of the given
// kind. Returns the agent id.
std::string register_reference_agent(kernel::Kernel& k, const ReferenceAgentSpec& spec);

// Adversarial fixtures for certification: a detector that flags every point,
// and a detector that omits a required output field.
std::string register_always_flag_detector(kernel::Kernel& k, const ReferenceAgentSpec& spec);
std::string register_schema_violating_emitter(kernel::Kernel& k, const ReferenceAgentSpec& spec);

}  // namespace teleos::agents
