#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teleos/agents.hpp"
#include "teleos/crypto.hpp"
#include "teleos/domain.hpp"
#include "teleos/ledger.hpp"

namespace teleos::federation {

struct FederationError : std::runtime_error {
    explicit FederationError(const std::string& what) : std::runtime_error(what) {}
};

struct GlobalModel {
    uint64_t version = 0;
    std::vector<double> weights;  // (w, b) for the reference linear task
    uint64_t lineage_version = 0; // previous version
    uint64_t lineage_round = 0;   // round that produced this version
};

Digest model_digest(const GlobalModel& m);

// Non-overlapping sorted [start, end) windows; time outside every window has
// multiplier 1 (off-peak).
struct CongestionWindow {
    Timestamp start = 0;
    Timestamp end = 0;
    double multiplier = 1.0;  // >= 1
};

struct CongestionSchedule {
    std::vector<CongestionWindow> windows;

    double multiplier_at(Timestamp t) const;
    bool off_peak(Timestamp t) const { return multiplier_at(t) == 1.0; }
    // Earliest off-peak instant >= t, if any exists within [t, t + lookahead].
    std::optional<Timestamp> next_off_peak(Timestamp t, Timestamp lookahead) const;
};

struct DpConfig {
    double clip = 1.0;   // > 0
    double sigma = 0.0;  // >= 0; noise stddev is sigma * clip per coordinate
};

struct RoundPlan {
    uint64_t round_id = 0;
    uint64_t base_version = 0;
    std::vector<OperatorId> participants;  // order defines mask sign convention
    Timestamp start = 0;
    Timestamp deadline = 0;
    DpConfig dp;
    bool masking = false;
};

struct PlanConfig {
    Timestamp lookahead_ms = 24 * 3600 * 1000;
    Timestamp deadline_ms = 60 * 1000;  // relative to start
    DpConfig dp;
    bool masking = false;
    // Optional per-operator congestion; an operator congested at the round
    // start is excluded from participation.
    std::map<std::string, CongestionSchedule> operator_schedules;
};

// start = earliest off-peak instant >= now on the coordinator schedule;
// participants = eligible operators whose own schedule is off-peak at start.
// Throws when no off-peak instant exists within the lookahead or when the
// participant set would be empty (or < 2 with masking).
RoundPlan plan_round(const GlobalModel& model, const std::vector<OperatorId>& eligible,
                     const CongestionSchedule& coordinator_sched, Timestamp now,
                     const PlanConfig& cfg, uint64_t round_id);

// --- update pipeline ---------------------------------------------------------

// L2 clipping: unchanged when ||d|| <= c, else scaled to norm c.
std::vector<double> clip_update(const std::vector<double>& delta, double c);

// Adds seeded gaussian(0, sigma*c) per coordinate; sigma == 0 returns the
// input bit-for-bit.
std::vector<double> add_dp_noise(const std::vector<double>& delta, double sigma, double c,
                                 uint64_t seed);

// Fixed-point domain: scale 2^24, signed 64-bit, weighted by sample count
// before rounding. Masks cancel exactly only in this integer domain.
inline constexpr int64_t kFixedPointScale = 1 << 24;

std::vector<int64_t> quantize(const std::vector<double>& delta, uint64_t sample_count);
std::vector<double> dequantize(const std::vector<int64_t>& q, uint64_t total_samples);

Digest commitment_digest(const std::vector<int64_t>& q);

struct ModelUpdate {
    uint64_t round_id = 0;
    OperatorId op;
    std::vector<int64_t> quantized;  // masked or unmasked fixed-point delta
    uint64_t sample_count = 1;
    Digest commitment{};  // over the unmasked quantized vector
    bool masked = false;
};

// Pairwise masks from the shared per-pair seed: participant earlier in the
// plan order adds PRG(seed), the later one subtracts it, so the sum over all
// participants cancels exactly (wrapping 64-bit arithmetic).
using PairSeeds = std::map<std::pair<std::string, std::string>, uint64_t>;

std::vector<int64_t> mask_update(const std::vector<int64_t>& q, const OperatorId& me,
                                 const std::vector<OperatorId>& participants,
                                 const PairSeeds& seeds);

// Derives the per-pair seeds for a round. Stands in for a pairwise key
// agreement between operators; the coordinator never uses these.
PairSeeds derive_pair_seeds(const std::vector<OperatorId>& participants, uint64_t round_id,
                            uint64_t scenario_secret);

// Wrapping sum of the fixed-point vectors, dequantized by total sample count
// and applied to the base weights. version = base.version + 1.
GlobalModel aggregate(const std::vector<ModelUpdate>& updates, const GlobalModel& base);

struct AttributionScore {
    std::map<std::string, double> scores;  // operator id -> score, sums to 1 when any > 0
};

// Leave-one-out attribution on the coordinator's synthetic eval set:
// score_o = max(0, loss(without o) - loss(all)), normalized. A sole
// contributor scores 1. Requires unmasked updates (masks only cancel over
// the full participant set).
AttributionScore score_contributions(const std::vector<ModelUpdate>& updates,
                                     const GlobalModel& base,
                                     const std::vector<agents::Sample>& eval_set);

double eval_loss(const GlobalModel& m, const std::vector<agents::Sample>& eval_set);

// --- round execution ---------------------------------------------------------

struct Participant {
    OperatorId op;
    std::vector<agents::Sample> data;
    int epochs = 20;
    double lr = 0.1;
};

// Minimal transport surface the round driver needs; simnet implements it on
// the shared event loop, unit tests use an instant loopback.
struct Transport {
    // Returns the delivery timestamp, or nullopt when the message is blocked.
    std::function<std::optional<Timestamp>(const OperatorId& src, const std::string& dst,
                                           size_t size_bytes, const Digest& payload_digest,
                                           Timestamp now)>
        send_model_update;
    std::function<Timestamp()> now;
    // Waits until the given virtual time (pumping the event loop).
    std::function<void(Timestamp)> run_until;
};

Transport instant_transport(Timestamp* clock);

struct RoundRecord {
    uint64_t round_id = 0;
    Timestamp start = 0;
    Timestamp completed = 0;
    std::vector<std::string> planned;
    std::vector<std::string> received;
    bool aborted = false;
    double eval_loss_before = 0.0;
    double eval_loss_after = 0.0;
    uint64_t model_version = 0;
    AttributionScore attribution;
};

struct RoundOutcome {
    GlobalModel model;  // new version, or the base when aborted
    AttributionScore attribution;
    RoundRecord record;
};

// Full round: per participant local_train -> clip -> dp noise -> quantize ->
// (mask) -> send; aggregate on arrival or at the deadline. A masked round
// aborts when any participant misses the deadline; an unmasked round
// proceeds with whatever arrived (>= 1). Commitments, round start/result or
// abort all go to the ledger.
RoundOutcome run_round(const RoundPlan& plan, const std::vector<Participant>& participants,
                       const GlobalModel& base, const std::vector<agents::Sample>& eval_set,
                       Transport& net, ledger::Ledger& audit, uint64_t scenario_secret);

}  // namespace teleos::federation
