#pragma once

// Student-teacher "mimic" models: a support-set transformer regresses either the two class
// prototypes or the max-margin hyperplane that a teacher fits to the whole (clean) problem.

#include <random>
#include <span>

#include "bongard/classifiers.hpp"
#include "bongard/normalize.hpp"
#include "bongard/transformer.hpp"

namespace bongard {

struct MimicTargets {
  MimicMode mode = MimicMode::svm_mimic;
  PrototypePair protos;  // prototype_mimic
  FeatureVector h;       // svm_mimic: (w, b)
};

// Support tokens (feature + label indicator) followed by the task token(s).
inline Matrix assemble_student_input(const MimicModel& model, std::span<const double> p,
                                     std::span<const LabeledVector> supports) {
  const auto& cfg = model.config();
  const auto& ps = model.params();
  const Index n = static_cast<Index>(supports.size());
  const int t = cfg.task_tokens();
  Matrix tokens(n + t, cfg.token_dim);
  const auto ip = ps.mat(model.indicator_pos_slot(), p);
  const auto in = ps.mat(model.indicator_neg_slot(), p);
  for (Index i = 0; i < n; ++i) {
    const auto& s = supports[static_cast<std::size_t>(i)];
    if (s.features.size() != cfg.token_dim) throw DimensionError("mimic: support dimension does not match token_dim");
    tokens.row(i) = s.features.transpose() + (s.label == Label::positive ? ip.row(0) : in.row(0));
  }
  tokens.bottomRows(t) = ps.mat(model.task_slot(), p);
  return tokens;
}

inline Matrix assemble_student_input(const MimicModel& model, std::span<const LabeledVector> supports) {
  return assemble_student_input(model, model.params().data(), supports);
}

inline MimicTargets predict_targets(const MimicModel& model, std::span<const double> p,
                                    std::span<const LabeledVector> supports) {
  const Matrix tokens = assemble_student_input(model, p, supports);
  const Matrix out = model.transformer_forward(p, tokens);
  const Index n = static_cast<Index>(supports.size());
  MimicTargets t;
  t.mode = model.config().mode;
  if (t.mode == MimicMode::svm_mimic) {
    t.h = model.head_forward(p, 0, out.row(n));
  } else {
    t.protos.p = model.head_forward(p, 0, out.row(n));
    t.protos.n = model.head_forward(p, 1, out.row(n + 1));
  }
  return t;
}

inline MimicTargets predict_targets(const MimicModel& model, std::span<const LabeledVector> supports) {
  return predict_targets(model, model.params().data(), supports);
}

// 1 − cos(a, b); optionally d/da.
inline double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::VectorXd* da = nullptr) {
  require_same_dim(a, b, "cosine_distance");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("mimic loss: zero-norm vector");
  const double c = a.dot(b) / (na * nb);
  if (da) *da = -(b / (na * nb) - c * a / (na * na));
  return 1.0 - c;
}

inline double mimic_loss_prototype(const FeatureVector& p_hat, const FeatureVector& n_hat, const FeatureVector& p,
                                   const FeatureVector& n) {
  return cosine_distance(p_hat, p) + cosine_distance(n_hat, n);
}

inline double mimic_loss_svm(const FeatureVector& h_hat, const FeatureVector& h) { return cosine_distance(h_hat, h); }

inline double mimic_loss(const MimicTargets& pred, const MimicTargets& teacher) {
  if (pred.mode != teacher.mode) throw DomainError("mimic_loss: mode mismatch");
  return pred.mode == MimicMode::svm_mimic ? mimic_loss_svm(pred.h, teacher.h)
                                           : mimic_loss_prototype(pred.protos.p, pred.protos.n, teacher.protos.p, teacher.protos.n);
}

// Mimic loss of the student on `supports` against `teacher`; fills `grad` (overwriting) when non-empty.
inline double mimic_loss_and_grad(const MimicModel& model, std::span<const double> p, std::span<const LabeledVector> supports,
                                  const MimicTargets& teacher, std::span<double> grad) {
  const auto& cfg = model.config();
  if (teacher.mode != cfg.mode) throw DomainError("mimic: teacher mode does not match model mode");
  if (grad.empty()) return mimic_loss(predict_targets(model, p, supports), teacher);

  std::fill(grad.begin(), grad.end(), 0.0);
  const Matrix tokens = assemble_student_input(model, p, supports);
  MimicModel::Cache cache;
  const Matrix out = model.transformer_forward(p, tokens, &cache);
  const Index n = static_cast<Index>(supports.size());
  Matrix dout = Matrix::Zero(out.rows(), out.cols());
  double loss = 0.0;
  for (int t = 0; t < cfg.task_tokens(); ++t) {
    MimicModel::HeadCache hc;
    const Eigen::VectorXd pred = model.head_forward(p, t, out.row(n + t), &hc);
    const Eigen::VectorXd& target =
        cfg.mode == MimicMode::svm_mimic ? teacher.h : (t == 0 ? teacher.protos.p : teacher.protos.n);
    Eigen::VectorXd dpred;
    loss += cosine_distance(pred, target, &dpred);
    dout.row(n + t) = model.head_backward(p, t, hc, dpred, grad);
  }
  const Matrix dtokens = model.transformer_backward(p, cache, std::move(dout), grad);
  const auto& ps = model.params();
  auto dip = ps.mat(model.indicator_pos_slot(), grad);
  auto din = ps.mat(model.indicator_neg_slot(), grad);
  for (Index i = 0; i < n; ++i) {
    if (supports[static_cast<std::size_t>(i)].label == Label::positive) dip.row(0) += dtokens.row(i);
    else din.row(0) += dtokens.row(i);
  }
  ps.mat(model.task_slot(), grad) += dtokens.bottomRows(cfg.task_tokens());
  return loss;
}

// Teachers see the supports plus every labeled query.
inline std::vector<LabeledVector> supports_with_queries(const Episode& e) {
  auto all = e.labeled_supports();
  for (const auto& q : e.queries) all.push_back({q.features, q.label});
  return all;
}

inline PrototypePair teacher_prototypes(const Episode& standardized) {
  const auto all = supports_with_queries(standardized);
  return prototype_fit(all);
}

inline FeatureVector teacher_hyperplane(const Episode& standardized, const SvmOptions& opt = {}) {
  const auto all = supports_with_queries(standardized);
  return svm_fit(all, opt).as_vector();
}

inline MimicTargets teacher_targets(MimicMode mode, const Episode& standardized, const SvmOptions& opt = {}) {
  MimicTargets t;
  t.mode = mode;
  if (mode == MimicMode::svm_mimic) t.h = teacher_hyperplane(standardized, opt);
  else t.protos = teacher_prototypes(standardized);
  return t;
}

// Keeps m ~ U{2..K} supports per class.
template <class Rng>
Episode support_dropout(const Episode& e, Rng& rng) {
  const std::size_t k = std::min(e.positives.size(), e.negatives.size());
  if (k < 2) throw DomainError("support_dropout: need K >= 2");
  std::uniform_int_distribution<std::size_t> pick(2, k);
  return split_supports(e, pick(rng), rng);
}

// When gated, flips exactly one positive and one negative label (each chosen uniformly within its class).
template <class Rng>
std::vector<LabeledVector> apply_label_noise(std::vector<LabeledVector> supports, Rng& rng, bool batch_gate) {
  if (!batch_gate) return supports;
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < supports.size(); ++i) (supports[i].label == Label::positive ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DomainError("apply_label_noise: need at least one support per class");
  std::uniform_int_distribution<std::size_t> pp(0, pos.size() - 1), pn(0, neg.size() - 1);
  const std::size_t a = pos[pp(rng)];
  const std::size_t b = neg[pn(rng)];
  supports[a].label = Label::negative;
  supports[b].label = Label::positive;
  return supports;
}

// Scores a (standardized) query against the emitted rule.
inline Prediction mimic_classify(const MimicTargets& t, const FeatureVector& query) {
  if (t.mode == MimicMode::svm_mimic) return hyperplane_classify(Hyperplane::from_vector(t.h), query);
  return prototype_classify(t.protos, query);
}

}  // namespace bongard
