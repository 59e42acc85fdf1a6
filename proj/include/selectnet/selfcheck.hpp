#pragma once

// Property checks against independent oracles: finite differences for
// gradients, a naive re-implementation of the self-paced filter, exact
// bookkeeping for oversampling and carving, and the selector's sign property.

#include <cstdint>
#include <string>
#include <vector>

namespace selectnet {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

/// Analytic vs central-difference gradients (h = 1e-5) on random nets of at
/// most 200 parameters with softmax, sigmoid and identity heads.
CheckResult check_gradients(int nets = 20, std::uint64_t seed = 11);

/// self_paced_select against a brute-force filter for random classifier
/// states over a random pool.
CheckResult check_selection_rule(int states = 50, int pool_size = 500, std::uint64_t seed = 12);

/// oversample_to_balance bookkeeping for random class-count vectors.
CheckResult check_oversampling(int trials = 100, std::uint64_t seed = 13);

/// Selector trained on candidates with losses in {0.1, 1.5} and lambda 0.6:
/// low-loss mean score beats the high-loss mean by >= 0.3 and the objective
/// decreases, for every seed.
CheckResult check_selector_sign(int seeds = 5, std::uint64_t seed = 14);

/// 5000-per-class source carved at 0.01 / 0.90 yields 50 / 4500 labeled.
CheckResult check_carving();

std::vector<CheckResult> run_selfchecks();

}  // namespace selectnet
