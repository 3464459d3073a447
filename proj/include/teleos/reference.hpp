#pragma once

#include <vector>

#include "teleos/ledger.hpp"

namespace teleos::reference {

// Serial counterparts of the OpenMP-parallel kernels, kept as independent
// implementations for equivalence testing and for the benchmark tool. They
// share only the primitive building blocks (hashing, signatures), not the
// loop or reduction structure.

// Straight single-pass robust scoring with full sorts per window.
std::vector<double> robust_scores_serial(const std::vector<double>& values, int window);

// Front-to-back chain walk; stops at the first bad entry.
teleos::ledger::VerifyResult verify_chain_serial(const std::vector<ledger::LedgerEntry>& entries);

}  // namespace teleos::reference
