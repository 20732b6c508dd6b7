#include "iassl/optim.hpp"

#include <cmath>
#include <string>

namespace iassl {

void sgd_step_inplace(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw std::invalid_argument("sgd_step: dimension mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

std::vector<double> sgd_step(std::span<const double> params, std::span<const double> grad, double lr) {
  std::vector<double> out(params.begin(), params.end());
  sgd_step_inplace(out, grad, lr);
  return out;
}

void adam_step_inplace(AdamState& state, std::span<double> params, std::span<const double> grad,
                       const OptimizerConfig& cfg) {
  const std::size_t n = params.size();
  if (grad.size() != n || state.m.size() != n || state.v.size() != n)
    throw std::invalid_argument("adam_step: dimension mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

AdamStep adam_step(AdamState state, std::span<const double> params, std::span<const double> grad,
                   const OptimizerConfig& cfg) {
  AdamStep out{std::move(state), std::vector<double>(params.begin(), params.end())};
  adam_step_inplace(out.state, out.params, grad, cfg);
  return out;
}

namespace {

double block_sq_norm(const std::vector<double>& b) {
  double s = 0.0;
  for (double v : b) s += v * v;
  return s;
}

}  // namespace

BcdResult bcd_minimize(std::vector<BcdBlock> blocks,
                       const std::function<double(const BlockParams&)>& objective, const BcdConfig& cfg) {
  cfg.validate();
  if (blocks.empty()) throw std::invalid_argument("bcd_minimize: no blocks");

  BlockParams params;
  params.reserve(blocks.size());
  for (const auto& b : blocks) params.push_back(b.params);

  auto traced = [&](const BlockParams& p) {
    double obj = objective(p);
    obj += cfg.lambda1 * block_sq_norm(p[0]);
    for (std::size_t i = 1; i < p.size(); ++i) obj += cfg.lambda2 * block_sq_norm(p[i]);
    return obj;
  };

  BcdResult res;
  res.trace.push_back(traced(params));

  for (std::size_t cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    for (std::size_t i = 0; i < blocks.size(); ++i) params[i] = blocks[i].minimize(params, i);

    const double prev = res.trace.back();
    const double cur = traced(params);
    if (cur > prev + 1e-12 * std::max(1.0, std::abs(prev)))
      throw std::runtime_error("bcd_minimize: objective increased in cycle " + std::to_string(cycle));
    res.trace.push_back(cur);
    res.cycles = cycle;

    const double decrease = prev - cur;
    if (decrease < cfg.tol * std::max(1.0, std::abs(prev))) break;
  }

  res.params = std::move(params);
  return res;
}

}  // namespace iassl
