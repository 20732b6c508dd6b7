#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace iassl {

enum class OptKind { sgd, adam };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("OptimizerConfig: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw std::invalid_argument("OptimizerConfig: betas must be in [0,1)");
  }
};

// params - lr * grad.
std::vector<double> sgd_step(std::span<const double> params, std::span<const double> grad, double lr);
void sgd_step_inplace(std::span<double> params, std::span<const double> grad, double lr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct AdamStep {
  AdamState state;
  std::vector<double> params;
};

// Bias-corrected Adam update; t is incremented.
AdamStep adam_step(AdamState state, std::span<const double> params, std::span<const double> grad,
                   const OptimizerConfig& cfg);
void adam_step_inplace(AdamState& state, std::span<double> params, std::span<const double> grad,
                       const OptimizerConfig& cfg);

struct BcdConfig {
  double lambda1 = 0.0;  // L2 weight on the first block
  double lambda2 = 0.0;  // L2 weight on every deeper block
  double tol = 1e-6;     // relative objective-decrease threshold
  std::size_t max_cycles = 100;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("BcdConfig: tol must be > 0");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("BcdConfig: lambdas must be >= 0");
    if (max_cycles == 0) throw std::invalid_argument("BcdConfig: max_cycles must be >= 1");
  }
};

using BlockParams = std::vector<std::vector<double>>;

struct BcdBlock {
  std::vector<double> params;
  // Minimizes the joint objective over this block with the others held
  // fixed. Must not increase the joint objective (including the L2 terms).
  std::function<std::vector<double>(const BlockParams& all, std::size_t block_index)> minimize;
};

struct BcdResult {
  BlockParams params;
  std::vector<double> trace;  // joint objective after init and after each cycle
  std::size_t cycles = 0;
};

// Cyclic block coordinate descent over the blocks in order. The traced
// objective is objective(all) + lambda1*|b0|^2 + lambda2*sum_{i>=1}|bi|^2.
// Stops when the relative per-cycle decrease drops below cfg.tol or after
// cfg.max_cycles. A block minimizer that increases the objective is a
// contract violation and raises an error naming the cycle.
BcdResult bcd_minimize(std::vector<BcdBlock> blocks,
                       const std::function<double(const BlockParams&)>& objective, const BcdConfig& cfg);

}  // namespace iassl
