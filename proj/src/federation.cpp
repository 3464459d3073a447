#include "teleos/federation.hpp"

#include <algorithm>
#include <cmath>

#include "teleos/prng.hpp"

namespace teleos::federation {

Digest model_digest(const GlobalModel& m) {
    Encoder enc;
    enc.put_u64(m.version);
    enc.put_u64(m.weights.size());
    for (double w : m.weights) enc.put_f64(w);
    enc.put_u64(m.lineage_version);
    enc.put_u64(m.lineage_round);
    return sha256(enc.bytes());
}

double CongestionSchedule::multiplier_at(Timestamp t) const {
    for (const auto& w : windows)
        if (t >= w.start && t < w.end) return w.multiplier;
    return 1.0;
}

std::optional<Timestamp> CongestionSchedule::next_off_peak(Timestamp t, Timestamp lookahead) const {
    Timestamp candidate = t;
    const Timestamp limit = t + lookahead;
    while (candidate <= limit) {
        bool inside = false;
        for (const auto& w : windows) {
            if (candidate >= w.start && candidate < w.end && w.multiplier > 1.0) {
                candidate = w.end;  // windows sorted and non-overlapping
                inside = true;
                break;
            }
        }
        if (!inside) return candidate;
    }
    return std::nullopt;
}

RoundPlan plan_round(const GlobalModel& model, const std::vector<OperatorId>& eligible,
                     const CongestionSchedule& coordinator_sched, Timestamp now,
                     const PlanConfig& cfg, uint64_t round_id) {
    if (eligible.empty()) throw FederationError("no eligible operators for round planning");
    if (!(cfg.dp.clip > 0)) throw FederationError("dp clip must be > 0");
    if (cfg.dp.sigma < 0) throw FederationError("dp sigma must be >= 0");

    auto start = coordinator_sched.next_off_peak(now, cfg.lookahead_ms);
    if (!start)
        throw FederationError("no off-peak window within the scheduling lookahead of " +
                              std::to_string(cfg.lookahead_ms) + " ms");

    RoundPlan plan;
    plan.round_id = round_id;
    plan.base_version = model.version;
    plan.start = *start;
    plan.deadline = *start + cfg.deadline_ms;
    plan.dp = cfg.dp;
    plan.masking = cfg.masking;
    for (const auto& op : eligible) {
        auto it = cfg.operator_schedules.find(op.id);
        if (it != cfg.operator_schedules.end() && !it->second.off_peak(plan.start)) continue;
        plan.participants.push_back(op);
    }
    if (plan.participants.empty())
        throw FederationError("every eligible operator is congested at the planned start");
    if (plan.masking && plan.participants.size() < 2)
        throw FederationError("masking requires at least 2 participants");
    return plan;
}

std::vector<double> clip_update(const std::vector<double>& delta, double c) {
    if (!(c > 0)) throw FederationError("clip bound must be > 0");
    double norm_sq = 0.0;
    for (double d : delta) norm_sq += d * d;
    const double norm = std::sqrt(norm_sq);
    if (norm <= c) return delta;
    std::vector<double> out = delta;
    const double scale = c / norm;
    for (double& d : out) d *= scale;
    return out;
}

std::vector<double> add_dp_noise(const std::vector<double>& delta, double sigma, double c,
                                 uint64_t seed) {
    if (sigma < 0) throw FederationError("sigma must be >= 0");
    if (sigma == 0.0) return delta;
    CounterRng rng(seed);
    std::vector<double> out = delta;
    for (double& d : out) d += sigma * c * rng.next_gaussian();
    return out;
}

std::vector<int64_t> quantize(const std::vector<double>& delta, uint64_t sample_count) {
    if (sample_count < 1) throw FederationError("sample count must be >= 1");
    std::vector<int64_t> out;
    out.reserve(delta.size());
    for (double d : delta) {
        const double weighted = d * static_cast<double>(sample_count);
        if (!(std::abs(weighted) < static_cast<double>(1 << 20)))
            throw FederationError("quantization range overflow: |value * samples| must be < 2^20");
        out.push_back(static_cast<int64_t>(
            std::llround(weighted * static_cast<double>(kFixedPointScale))));
    }
    return out;
}

std::vector<double> dequantize(const std::vector<int64_t>& q, uint64_t total_samples) {
    if (total_samples < 1) throw FederationError("total samples must be >= 1");
    std::vector<double> out;
    out.reserve(q.size());
    const double denom = static_cast<double>(kFixedPointScale) * static_cast<double>(total_samples);
    for (int64_t v : q) out.push_back(static_cast<double>(v) / denom);
    return out;
}

Digest commitment_digest(const std::vector<int64_t>& q) {
    Encoder enc;
    enc.put_u64(q.size());
    for (int64_t v : q) enc.put_i64(v);
    return sha256(enc.bytes());
}

PairSeeds derive_pair_seeds(const std::vector<OperatorId>& participants, uint64_t round_id,
                            uint64_t scenario_secret) {
    PairSeeds seeds;
    for (size_t i = 0; i < participants.size(); ++i) {
        for (size_t j = i + 1; j < participants.size(); ++j) {
            auto [a, b] = std::minmax(participants[i].id, participants[j].id);
            Encoder enc;
            enc.put_str("pair-seed");
            enc.put_u64(round_id);
            enc.put_u64(scenario_secret);
            enc.put_str(a);
            enc.put_str(b);
            seeds[{a, b}] = digest_prefix_u64(sha256(enc.bytes()));
        }
    }
    return seeds;
}

std::vector<int64_t> mask_update(const std::vector<int64_t>& q, const OperatorId& me,
                                 const std::vector<OperatorId>& participants,
                                 const PairSeeds& seeds) {
    if (participants.size() < 2)
        throw FederationError("masking unavailable: needs at least 2 participants");
    const auto my_pos = std::find_if(participants.begin(), participants.end(),
                                     [&](const OperatorId& p) { return p.id == me.id; });
    if (my_pos == participants.end())
        throw FederationError("masking operator is not in the participant list");
    const size_t my_index = static_cast<size_t>(my_pos - participants.begin());

    std::vector<uint64_t> acc(q.size());
    for (size_t i = 0; i < q.size(); ++i) acc[i] = static_cast<uint64_t>(q[i]);

    for (size_t other = 0; other < participants.size(); ++other) {
        if (other == my_index) continue;
        auto key = std::minmax(me.id, participants[other].id);
        auto it = seeds.find({key.first, key.second});
        if (it == seeds.end())
            throw FederationError("missing pairwise seed for " + me.id + "/" +
                                  participants[other].id);
        CounterRng prg(it->second);
        // Earlier participant in plan order adds, later subtracts.
        const bool add = my_index < other;
        for (size_t i = 0; i < acc.size(); ++i) {
            const uint64_t m = prg.next_u64();
            acc[i] = add ? acc[i] + m : acc[i] - m;  // wrapping
        }
    }

    std::vector<int64_t> out(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<int64_t>(acc[i]);
    return out;
}

GlobalModel aggregate(const std::vector<ModelUpdate>& updates, const GlobalModel& base) {
    if (updates.empty()) throw FederationError("nothing to aggregate");
    const uint64_t round = updates.front().round_id;
    const bool masked = updates.front().masked;
    const size_t dim = updates.front().quantized.size();
    uint64_t total_samples = 0;
    for (const auto& u : updates) {
        if (u.round_id != round) throw FederationError("aggregate saw updates from mixed rounds");
        if (u.masked != masked) throw FederationError("aggregate saw mixed masking states");
        if (u.quantized.size() != dim) throw FederationError("update dimension mismatch");
        if (u.sample_count < 1) throw FederationError("update with zero samples");
        if (!masked && commitment_digest(u.quantized) != u.commitment)
            throw FederationError("unmasked update does not match its commitment: " + u.op.id);
        total_samples += u.sample_count;
    }

    std::vector<uint64_t> sum(dim, 0);
    for (const auto& u : updates)
        for (size_t i = 0; i < dim; ++i) sum[i] += static_cast<uint64_t>(u.quantized[i]);

    std::vector<int64_t> summed(dim);
    for (size_t i = 0; i < dim; ++i) summed[i] = static_cast<int64_t>(sum[i]);
    const std::vector<double> delta = dequantize(summed, total_samples);

    GlobalModel out;
    out.version = base.version + 1;
    out.lineage_version = base.version;
    out.lineage_round = round;
    out.weights = base.weights;
    if (out.weights.size() != dim) out.weights.resize(dim, 0.0);
    for (size_t i = 0; i < dim; ++i) out.weights[i] += delta[i];
    return out;
}

double eval_loss(const GlobalModel& m, const std::vector<agents::Sample>& eval_set) {
    const double w = m.weights.size() > 0 ? m.weights[0] : 0.0;
    const double b = m.weights.size() > 1 ? m.weights[1] : 0.0;
    return agents::mse_loss(w, b, eval_set);
}

AttributionScore score_contributions(const std::vector<ModelUpdate>& updates,
                                     const GlobalModel& base,
                                     const std::vector<agents::Sample>& eval_set) {
    if (updates.empty()) throw FederationError("no updates to attribute");
    AttributionScore out;
    if (updates.size() == 1) {
        // Leave-one-out is undefined for a sole contributor; by convention it
        // receives the full credit.
        out.scores[updates.front().op.id] = 1.0;
        return out;
    }
    const double loss_all = eval_loss(aggregate(updates, base), eval_set);
    double total = 0.0;
    for (size_t i = 0; i < updates.size(); ++i) {
        std::vector<ModelUpdate> without;
        without.reserve(updates.size() - 1);
        for (size_t j = 0; j < updates.size(); ++j)
            if (j != i) without.push_back(updates[j]);
        const double loss_without = eval_loss(aggregate(without, base), eval_set);
        const double score = std::max(0.0, loss_without - loss_all);
        out.scores[updates[i].op.id] = score;
        total += score;
    }
    if (total > 0)
        for (auto& [op, s] : out.scores) s /= total;
    else
        for (auto& [op, s] : out.scores) s = 0.0;
    return out;
}

Transport instant_transport(Timestamp* clock) {
    Transport t;
    t.send_model_update = [clock](const OperatorId&, const std::string&, size_t, const Digest&,
                                  Timestamp now) -> std::optional<Timestamp> {
        *clock = std::max(*clock, now);
        return now;
    };
    t.now = [clock] { return *clock; };
    t.run_until = [clock](Timestamp t_target) { *clock = std::max(*clock, t_target); };
    return t;
}

RoundOutcome run_round(const RoundPlan& plan, const std::vector<Participant>& participants,
                       const GlobalModel& base, const std::vector<agents::Sample>& eval_set,
                       Transport& net, ledger::Ledger& audit, uint64_t scenario_secret) {
    if (plan.base_version != base.version)
        throw FederationError("round planned against a different base version");

    RoundOutcome out;
    out.record.round_id = plan.round_id;
    out.record.start = plan.start;
    out.record.eval_loss_before = eval_loss(base, eval_set);

    // Bring the shared event loop up to the planned start before sending.
    net.run_until(plan.start);

    {
        Encoder enc;
        enc.put_u64(plan.round_id);
        enc.put_u64(plan.base_version);
        enc.put_u64(plan.participants.size());
        for (const auto& p : plan.participants) enc.put_str(p.id);
        enc.put_i64(plan.start);
        enc.put_i64(plan.deadline);
        audit.append_digest(sha256(enc.bytes()), ledger::EntryType::RoundStart, net.now());
    }

    const PairSeeds seeds =
        plan.masking ? derive_pair_seeds(plan.participants, plan.round_id, scenario_secret)
                     : PairSeeds{};

    struct Arrival {
        ModelUpdate update;
        Timestamp at = 0;
    };
    std::vector<Arrival> arrivals;

    for (const auto& planned : plan.participants) {
        auto it = std::find_if(participants.begin(), participants.end(),
                               [&](const Participant& p) { return p.op.id == planned.id; });
        if (it == participants.end())
            throw FederationError("planned participant has no local state: " + planned.id);
        out.record.planned.push_back(planned.id);

        // Local pipeline, executed on the participant's side of the boundary.
        agents::LocalModel local;
        local.w = base.weights.size() > 0 ? base.weights[0] : 0.0;
        local.b = base.weights.size() > 1 ? base.weights[1] : 0.0;
        local.base_version = base.version;
        auto trained = agents::local_train(local, it->data, it->epochs, it->lr);

        std::vector<double> delta{trained.model.w - local.w, trained.model.b - local.b};
        delta = clip_update(delta, plan.dp.clip);
        const uint64_t noise_seed =
            derive_seed(scenario_secret, (plan.round_id << 16) ^ digest_prefix_u64(sha256(planned.id)));
        delta = add_dp_noise(delta, plan.dp.sigma, plan.dp.clip, noise_seed);

        ModelUpdate update;
        update.round_id = plan.round_id;
        update.op = planned;
        update.sample_count = it->data.size();
        update.quantized = quantize(delta, update.sample_count);
        update.commitment = commitment_digest(update.quantized);
        if (plan.masking) {
            update.quantized = mask_update(update.quantized, planned, plan.participants, seeds);
            update.masked = true;
        }

        const size_t size_bytes = update.quantized.size() * 8 + 64;
        auto delivery = net.send_model_update(planned, "coordinator", size_bytes,
                                              commitment_digest(update.quantized), plan.start);
        if (delivery && *delivery <= plan.deadline)
            arrivals.push_back({std::move(update), *delivery});
    }

    // Aggregate as soon as everything has arrived, otherwise at the deadline.
    Timestamp agg_time = plan.deadline;
    if (arrivals.size() == plan.participants.size()) {
        agg_time = plan.start;
        for (const auto& a : arrivals) agg_time = std::max(agg_time, a.at);
    }
    net.run_until(agg_time);
    agg_time = std::max(agg_time, net.now());
    out.record.completed = agg_time;

    const bool dropout = arrivals.size() < plan.participants.size();
    if ((plan.masking && dropout) || arrivals.empty()) {
        // Masked updates only cancel over the full set; a partial masked sum
        // would be garbage, so the round aborts without touching the model.
        Encoder enc;
        enc.put_u64(plan.round_id);
        enc.put_str("round-abort");
        enc.put_u64(arrivals.size());
        audit.append_digest(sha256(enc.bytes()), ledger::EntryType::RoundAbort, agg_time);
        out.model = base;
        out.record.aborted = true;
        out.record.eval_loss_after = out.record.eval_loss_before;
        out.record.model_version = base.version;
        return out;
    }

    std::vector<ModelUpdate> updates;
    updates.reserve(arrivals.size());
    for (auto& a : arrivals) {
        audit.append_digest(a.update.commitment, ledger::EntryType::UpdateCommitment, agg_time);
        out.record.received.push_back(a.update.op.id);
        updates.push_back(std::move(a.update));
    }

    out.model = aggregate(updates, base);
    audit.append_digest(model_digest(out.model), ledger::EntryType::RoundResult, agg_time);

    if (plan.masking) {
        // The coordinator cannot see individual updates through the masks;
        // credit is shared uniformly instead of leave-one-out.
        const double share = 1.0 / static_cast<double>(updates.size());
        for (const auto& u : updates) out.attribution.scores[u.op.id] = share;
    } else {
        out.attribution = score_contributions(updates, base, eval_set);
    }

    out.record.eval_loss_after = eval_loss(out.model, eval_set);
    out.record.model_version = out.model.version;
    out.record.attribution = out.attribution;
    return out;
}

}  // namespace teleos::federation
