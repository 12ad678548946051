#pragma once

#include <cstdint>
#include <iosfwd>

namespace unimc {

// Fast built-in diagnostics: analytic softmax/loss anchors, cross-option
// attention isolation, permutation equivariance, mixed-batch loss parity,
// and a finite-difference gradient check on a small model. Prints one
// pass/fail line per check. Returns true iff everything passed.
bool run_selfcheck(std::ostream& out, std::uint64_t seed = 7);

}  // namespace unimc
