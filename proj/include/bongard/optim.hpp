#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>

#include "bongard/params.hpp"

namespace bongard {

struct TrainConfig {
  double max_lr = 5e-5;
  double warmup_frac = 0.05;
  long total_steps = 5000;
  int batch_size = 8;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  double noise_gate_prob = 0.25;
  bool dropout_enabled = true;
  double svm_C = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw DomainError("train: warmup_frac must be in (0, 1)");
    if (total_steps < 0) throw DomainError("train: total_steps must be non-negative");
    if (batch_size <= 0) throw DomainError("train: batch_size must be positive");
    if (!(noise_gate_prob >= 0.0 && noise_gate_prob <= 1.0)) throw DomainError("train: noise_gate_prob must be in [0, 1]");
    if (!(max_lr >= 0.0)) throw DomainError("train: max_lr must be non-negative");
  }
};

// Linear warmup to max_lr over the first warmup_frac of the steps, then cosine decay to 0.
inline double onecycle_lr(long step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps)
    throw DomainError("onecycle_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.total_steps) + "]");
  const double total = static_cast<double>(cfg.total_steps);
  const double warm = cfg.warmup_frac * total;
  const double s = static_cast<double>(step);
  if (s < warm) return cfg.max_lr * s / warm;
  const double span = total - warm;
  if (span <= 0.0) return cfg.max_lr;
  const double progress = (s - warm) / span;
  return cfg.max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

enum class StepResult { applied, rejected_non_finite };

// Decoupled weight decay applies to every parameter.
inline StepResult adamw_step(std::span<double> params, std::span<const double> grads, AdamState& st, double lr,
                             const TrainConfig& cfg) {
  if (grads.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw DimensionError("adamw: shape mismatch");
  if (lr < 0.0) throw DomainError("adamw: negative learning rate");
  for (double g : grads)
    if (!std::isfinite(g)) return StepResult::rejected_non_finite;
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grads[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    params[i] -= lr * cfg.weight_decay * params[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
  return StepResult::applied;
}

// Loss with optional gradient: when `grad` is non-empty it must be filled (overwritten).
using LossFn = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

// Relative error |a − n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// gradient is near zero from being judged on finite-difference round-off alone.
inline double grad_rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <class Rng>
GradCheckResult gradient_check(const LossFn& loss, std::span<const double> params, std::size_t probe_count, Rng& rng,
                               double step = 1e-6, double floor = 1e-3) {
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size(), 0.0);
  const double f0 = loss(x, grad);
  if (!std::isfinite(f0)) throw DomainError("gradient_check: non-finite loss");
  GradCheckResult res;
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<std::size_t> probes;
  if (probe_count >= x.size()) {
    for (std::size_t i = 0; i < x.size(); ++i) probes.push_back(i);
  } else {
    for (std::size_t p = 0; p < probe_count; ++p) probes.push_back(pick(rng));
  }
  for (auto i : probes) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = loss(x, {});
    x[i] = orig - step;
    const double fm = loss(x, {});
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw DomainError("gradient_check: non-finite loss");
    const double numeric = (fp - fm) / (2.0 * step);
    const double rel = grad_rel_error(grad[i], numeric, floor);
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
    }
    res.max_abs_error = std::max(res.max_abs_error, std::abs(grad[i] - numeric));
  }
  return res;
}

}  // namespace bongard
