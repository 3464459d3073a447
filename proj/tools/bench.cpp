// Compares the OpenMP kernels against their serial reference implementations
// on synthetic workloads and reports timings plus an equivalence check.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "teleos/agents.hpp"
#include "teleos/ledger.hpp"
#include "teleos/prng.hpp"
#include "teleos/reference.hpp"

using namespace teleos;
using Clock = std::chrono::steady_clock;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int repeats = 3) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        auto t0 = Clock::now();
        fn();
        auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::cout << std::left << std::setw(22) << name << " serial " << std::setw(9) << serial_ms
              << " ms   parallel " << std::setw(9) << parallel_ms << " ms   speedup "
              << std::setprecision(2) << std::fixed << serial_ms / parallel_ms
              << (equal ? "   results identical" : "   RESULTS DIFFER") << "\n"
              << std::defaultfloat << std::setprecision(6);
}

}  // namespace

int main() {
    crypto_init();
#ifdef _OPENMP
    std::cout << "openmp threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "built without openmp; both columns run serial code paths\n";
#endif

    {
        CounterRng rng(7);
        std::vector<double> series(200000);
        for (double& v : series) v = rng.next_gaussian();
        std::vector<double> a, b;
        const double serial_ms = time_ms([&] { a = reference::robust_scores_serial(series, 20); });
        const double parallel_ms = time_ms([&] { b = agents::robust_scores(series, 20); });
        report("robust_scores", serial_ms, parallel_ms, a == b);
    }

    {
        ledger::Ledger log(keypair_from_u64(99));
        std::vector<uint8_t> payload{1, 2, 3, 4};
        for (int i = 0; i < 3000; ++i)
            log.append(payload, ledger::EntryType::Insight, i);
        ledger::VerifyResult a{}, b{};
        const double serial_ms =
            time_ms([&] { a = reference::verify_chain_serial(log.entries()); });
        const double parallel_ms = time_ms([&] { b = ledger::verify_chain(log.entries()); });
        report("verify_chain", serial_ms, parallel_ms, a.ok == b.ok);
    }

    return 0;
}
