#include "teleos/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "teleos/codec.hpp"

namespace teleos::reference {

namespace {

double sorted_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> robust_scores_serial(const std::vector<double>& values, int window) {
    const int n = static_cast<int>(values.size());
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (n <= window) throw std::invalid_argument("series shorter than the scoring window");

    std::vector<double> scores;
    scores.reserve(n - window);
    for (int t = window; t < n; ++t) {
        std::vector<double> win(values.begin() + (t - window), values.begin() + t);
        const double med = sorted_median(win);
        std::vector<double> dev;
        dev.reserve(win.size());
        for (double x : win) dev.push_back(std::abs(x - med));
        const double mad = sorted_median(std::move(dev));
        scores.push_back(std::abs(values[t] - med) / (1.4826 * mad + 1e-9));
    }
    return scores;
}

ledger::VerifyResult verify_chain_serial(const std::vector<ledger::LedgerEntry>& entries) {
    Digest prev = ledger::genesis_hash();
    Timestamp last_ts = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.index != i) return ledger::VerifyResult::fail(i);
        if (i > 0 && e.ts < last_ts) return ledger::VerifyResult::fail(i);
        if (e.prev_hash != prev) return ledger::VerifyResult::fail(i);
        if (ledger::compute_entry_hash(e) != e.entry_hash) return ledger::VerifyResult::fail(i);
        auto key_bytes = from_hex(e.signer);
        if (!key_bytes || key_bytes->size() != 32) return ledger::VerifyResult::fail(i);
        PublicKey pk;
        std::copy(key_bytes->begin(), key_bytes->end(), pk.begin());
        if (!ledger::verify_entry(e, pk)) return ledger::VerifyResult::fail(i);
        prev = e.entry_hash;
        last_ts = e.ts;
    }
    return ledger::VerifyResult::pass();
}

}  // namespace teleos::reference
