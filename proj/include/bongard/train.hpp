#pragma once

#include <functional>
#include <random>

#include "bongard/mimic.hpp"
#include "bongard/optim.hpp"
#include "bongard/synthetic.hpp"

namespace bongard {

struct TrainResult {
  MimicModel model;
  std::vector<double> loss_curve;
  std::vector<std::string> skipped;  // ids of episodes whose teacher could not be fit
};

using TrainLogFn = std::function<void(long step, double loss, double lr)>;

// A train-split episode after support-set standardization, with its clean teacher target.
struct TeacherCase {
  Episode standardized;
  MimicTargets target;
};

inline std::vector<TeacherCase> prepare_teacher_cases(const Dataset& d, MimicMode mode, const SvmOptions& svm,
                                                      std::vector<std::string>* skipped, std::string_view split = "train") {
  std::vector<TeacherCase> cases;
  for (const auto* e : d.split(split)) {
    Episode s = standardize_episode(*e);
    try {
      auto t = teacher_targets(mode, s, svm);
      cases.push_back({std::move(s), std::move(t)});
    } catch (const SvmError&) {
      if (skipped) skipped->push_back(e->id);
    } catch (const DomainError&) {
      if (skipped) skipped->push_back(e->id);
    }
  }
  return cases;
}

// Each step: a batch of train episodes (uniform, with replacement); the student sees a support
// subset (support dropout) whose labels may be noised (one gate draw per batch); the teacher target
// is fixed and clean. Mean batch loss, AdamW with the 1-cycle schedule.
inline TrainResult train_mimic(const Dataset& d, const MimicConfig& mcfg, const TrainConfig& cfg, const TrainLogFn& log = {},
                               long log_every = 0) {
  cfg.validate();
  MimicConfig model_cfg = mcfg;
  model_cfg.token_dim = d.dim;
  TrainResult res{MimicModel(model_cfg), {}, {}};
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 0x1417));
  res.model.init(init_rng);

  SvmOptions svm;
  svm.C = cfg.svm_C;
  const auto cases = prepare_teacher_cases(d, model_cfg.mode, svm, &res.skipped);
  if (cfg.total_steps == 0) return res;
  if (cases.empty()) throw DomainError("train_mimic: no usable training episodes");

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7A11));
  std::uniform_int_distribution<std::size_t> pick(0, cases.size() - 1);
  std::bernoulli_distribution gate(cfg.noise_gate_prob);
  auto& params = res.model.params().data();
  AdamState state(params.size());
  std::vector<double> grad(params.size()), g(params.size());

  res.loss_curve.reserve(static_cast<std::size_t>(cfg.total_steps));
  for (long step = 0; step < cfg.total_steps; ++step) {
    const bool noisy = gate(rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& c = cases[pick(rng)];
      const Episode student = cfg.dropout_enabled ? support_dropout(c.standardized, rng) : c.standardized;
      const auto supports = apply_label_noise(student.labeled_supports(), rng, noisy);
      loss += mimic_loss_and_grad(res.model, params, supports, c.target, g);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
    const double inv = 1.0 / cfg.batch_size;
    loss *= inv;
    for (auto& v : grad) v *= inv;
    if (!std::isfinite(loss))
      throw DomainError("train_mimic: non-finite loss at step " + std::to_string(step) + " (lr " +
                        std::to_string(onecycle_lr(step + 1, cfg)) + ")");
    const double lr = onecycle_lr(step + 1, cfg);
    if (adamw_step(params, grad, state, lr, cfg) != StepResult::applied)
      throw DomainError("train_mimic: non-finite gradient at step " + std::to_string(step));
    res.loss_curve.push_back(loss);
    if (log && log_every > 0 && (step % log_every == 0 || step + 1 == cfg.total_steps)) log(step, loss, lr);
  }
  return res;
}

// Mean cos(ĥ, h) of the student (given all supports, clean labels) against the teacher.
inline double mimic_fidelity(const MimicModel& model, const Dataset& d, std::string_view split, const SvmOptions& svm = {}) {
  std::vector<std::string> skipped;
  const auto cases = prepare_teacher_cases(d, model.config().mode, svm, &skipped, split);
  double total = 0.0;
  for (const auto& c : cases) total += 1.0 - mimic_loss(predict_targets(model, c.standardized.labeled_supports()), c.target) /
                                                 (model.config().mode == MimicMode::svm_mimic ? 1.0 : 2.0);
  return cases.empty() ? 0.0 : total / static_cast<double>(cases.size());
}

}  // namespace bongard
