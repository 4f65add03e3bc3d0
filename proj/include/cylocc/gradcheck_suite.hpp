#pragma once

#include <ostream>

namespace cylocc {

/// Finite-difference verification of every autodiff op, every loss, every
/// pipeline stage in isolation, and a small end-to-end parameter slice
/// (tolerance 1e-4, 1e-3 for the end-to-end slice). Prints one line per
/// check; returns the number of failed checks.
int run_gradcheck_suite(std::ostream& out, int seeds = 5);

}  // namespace cylocc
