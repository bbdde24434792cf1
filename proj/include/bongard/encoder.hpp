#pragma once

// Small trainable encoder (raw R -> hidden H -> feature D, ReLU between) and the
// temperature-scaled contrastive loss over positive pairs against all negatives.

#include <cmath>
#include <span>

#include "bongard/episode.hpp"
#include "bongard/optim.hpp"
#include "bongard/params.hpp"

namespace bongard {

struct EncoderConfig {
  Index raw_dim = 128;
  Index hidden_dim = 64;
  Index feature_dim = 64;
};

class Encoder {
 public:
  Encoder() : Encoder(EncoderConfig{}) {}
  explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    if (cfg.raw_dim <= 0 || cfg.hidden_dim <= 0 || cfg.feature_dim <= 0) throw DomainError("encoder: dimensions must be positive");
    w1_ = store_.add("enc.w1", cfg.raw_dim, cfg.hidden_dim);
    b1_ = store_.add("enc.b1", 1, cfg.hidden_dim);
    w2_ = store_.add("enc.w2", cfg.hidden_dim, cfg.feature_dim);
    b2_ = store_.add("enc.b2", 1, cfg.feature_dim);
  }

  template <class Rng>
  void init(Rng& rng) {
    store_.fill_normal(w1_, std::sqrt(2.0 / static_cast<double>(cfg_.raw_dim)), rng);
    store_.fill_normal(w2_, std::sqrt(1.0 / static_cast<double>(cfg_.hidden_dim)), rng);
    store_.fill(b1_, 0.0);
    store_.fill(b2_, 0.0);
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  ParamStore::MatMap w1() { return store_.mat(w1_); }
  ParamStore::MatMap b1() { return store_.mat(b1_); }
  ParamStore::MatMap w2() { return store_.mat(w2_); }
  ParamStore::MatMap b2() { return store_.mat(b2_); }

  struct Cache {
    Matrix x, z, a;
  };

  // Rows of `raw` are inputs; returns one feature row per input.
  Matrix forward(std::span<const double> p, const Matrix& raw, Cache* cache = nullptr) const {
    if (raw.cols() != cfg_.raw_dim) throw DimensionError("encoder: raw input has wrong length");
    const auto W1 = store_.mat(w1_, p);
    const auto B1 = store_.mat(b1_, p);
    const auto W2 = store_.mat(w2_, p);
    const auto B2 = store_.mat(b2_, p);
    Matrix z = raw * W1;
    z.rowwise() += B1.row(0);
    Matrix a = z.cwiseMax(0.0);
    Matrix out = a * W2;
    out.rowwise() += B2.row(0);
    if (cache) *cache = {raw, std::move(z), std::move(a)};
    return out;
  }
  Matrix forward(const Matrix& raw) const { return forward(store_.data(), raw); }

  FeatureVector encode(const FeatureVector& raw) const {
    if (raw.size() != cfg_.raw_dim) throw DimensionError("encoder: raw input has wrong length");
    Matrix r = raw.transpose();
    return forward(r).row(0).transpose();
  }

  // Accumulates parameter gradients given d(loss)/d(features).
  void backward(std::span<const double> p, const Cache& c, const Matrix& d_out, std::span<double> grad) const {
    const auto W2 = store_.mat(w2_, p);
    store_.mat(w2_, grad) += c.a.transpose() * d_out;
    store_.mat(b2_, grad) += d_out.colwise().sum();
    Matrix dz = (d_out * W2.transpose()).cwiseProduct((c.z.array() > 0.0).cast<double>().matrix());
    store_.mat(w1_, grad) += c.x.transpose() * dz;
    store_.mat(b1_, grad) += dz.colwise().sum();
  }

 private:
  EncoderConfig cfg_;
  ParamStore store_;
  std::size_t w1_, b1_, w2_, b2_;
};

inline constexpr double kDefaultTemperature = 0.1;

// Mean over ordered positive pairs (i, j), i != j, of
//   −log( exp(s_ij/τ) / (exp(s_ij/τ) + Σ_k exp(s_ik/τ)) ),  s = cosine similarity, k over negatives.
// Rows of `pos` / `neg` are feature vectors. Gradients w.r.t. the rows are written when requested.
inline double contrastive_loss(const Matrix& pos, const Matrix& neg, double tau, Matrix* d_pos = nullptr,
                               Matrix* d_neg = nullptr) {
  const Index kp = pos.rows();
  const Index kn = neg.rows();
  if (kp < 2) throw DomainError("contrastive_loss: need at least 2 positives");
  if (kn < 1) throw DomainError("contrastive_loss: need at least 1 negative");
  if (!(tau > 0.0)) throw DomainError("contrastive_loss: temperature must be positive");
  if (pos.cols() != neg.cols()) throw DimensionError("contrastive_loss: dimension mismatch");

  const Eigen::VectorXd pn = pos.rowwise().norm();
  const Eigen::VectorXd nn = neg.rowwise().norm();
  if ((pn.array() == 0.0).any() || (nn.array() == 0.0).any()) throw DomainError("contrastive_loss: zero-norm feature");
  const Matrix up = pn.cwiseInverse().asDiagonal() * pos;
  const Matrix un = nn.cwiseInverse().asDiagonal() * neg;
  const Matrix spp = up * up.transpose();
  const Matrix spn = up * un.transpose();

  const double pairs = static_cast<double>(kp * (kp - 1));
  const bool want_grad = d_pos || d_neg;
  Matrix dspp = Matrix::Zero(kp, kp);
  Matrix dspn = Matrix::Zero(kp, kn);
  double total = 0.0;
  for (Index i = 0; i < kp; ++i) {
    const Eigen::VectorXd neg_logits = spn.row(i).transpose() / tau;
    for (Index j = 0; j < kp; ++j) {
      if (j == i) continue;
      const double a = spp(i, j) / tau;
      const double mx = std::max(a, neg_logits.maxCoeff());
      const double ea = std::exp(a - mx);
      const Eigen::VectorXd eb = (neg_logits.array() - mx).exp();
      const double z = ea + eb.sum();
      total += -a + mx + std::log(z);
      if (want_grad) {
        dspp(i, j) += (ea / z - 1.0) / (tau * pairs);
        dspn.row(i) += eb.transpose() / (z * tau * pairs);
      }
    }
  }
  if (want_grad) {
    // d cos(x, y)/dx = y/(|x||y|) − cos(x, y)·x/|x|²
    Matrix gp = Matrix::Zero(kp, pos.cols());
    Matrix gn = Matrix::Zero(kn, neg.cols());
    for (Index i = 0; i < kp; ++i) {
      for (Index j = 0; j < kp; ++j) {
        if (dspp(i, j) == 0.0) continue;
        gp.row(i) += dspp(i, j) * (up.row(j) - spp(i, j) * up.row(i)) / pn[i];
        gp.row(j) += dspp(i, j) * (up.row(i) - spp(i, j) * up.row(j)) / pn[j];
      }
      for (Index k = 0; k < kn; ++k) {
        gp.row(i) += dspn(i, k) * (un.row(k) - spn(i, k) * up.row(i)) / pn[i];
        gn.row(k) += dspn(i, k) * (up.row(i) - spn(i, k) * un.row(k)) / nn[k];
      }
    }
    if (d_pos) *d_pos = std::move(gp);
    if (d_neg) *d_neg = std::move(gn);
  }
  return total / pairs;
}

inline Matrix stack_rows(std::span<const FeatureVector> vs) {
  if (vs.empty()) return {};
  Matrix m(static_cast<Index>(vs.size()), vs.front().size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    require_same_dim(vs[i], vs.front(), "stack_rows");
    m.row(static_cast<Index>(i)) = vs[i].transpose();
  }
  return m;
}

// Mean contrastive loss of an episode of raw inputs and its gradient w.r.t. encoder parameters.
inline double encoder_loss(const Encoder& enc, std::span<const double> p, const Episode& raw_episode, double tau,
                           std::span<double> grad) {
  const Matrix xp = stack_rows(raw_episode.positives);
  const Matrix xn = stack_rows(raw_episode.negatives);
  Encoder::Cache cp, cn;
  const bool want = !grad.empty();
  const Matrix fp = enc.forward(p, xp, want ? &cp : nullptr);
  const Matrix fn = enc.forward(p, xn, want ? &cn : nullptr);
  if (!want) return contrastive_loss(fp, fn, tau);
  Matrix dp, dn;
  const double loss = contrastive_loss(fp, fn, tau, &dp, &dn);
  std::fill(grad.begin(), grad.end(), 0.0);
  enc.backward(p, cp, dp, grad);
  enc.backward(p, cn, dn, grad);
  return loss;
}

// One AdamW step on the contrastive loss of a single raw-input episode. Returns the pre-step loss.
inline double encoder_train_step(Encoder& enc, const Episode& raw_episode, double tau, AdamState& state, double lr,
                                 const TrainConfig& cfg) {
  auto& p = enc.params().data();
  if (state.m.size() != p.size()) state = AdamState(p.size());
  std::vector<double> grad(p.size(), 0.0);
  const double loss = encoder_loss(enc, p, raw_episode, tau, grad);
  if (!std::isfinite(loss)) throw DomainError("encoder_train_step: non-finite loss");
  if (adamw_step(p, grad, state, lr, cfg) != StepResult::applied) throw DomainError("encoder_train_step: non-finite gradient");
  return loss;
}

// Within-class minus cross-class mean cosine similarity of encoded supports.
inline double class_separation(const Encoder& enc, std::span<const Episode* const> raw_episodes) {
  double within = 0.0, cross = 0.0;
  long nw = 0, nc = 0;
  for (const auto* e : raw_episodes) {
    Matrix fp = enc.forward(stack_rows(e->positives));
    Matrix fn = enc.forward(stack_rows(e->negatives));
    fp.rowwise().normalize();
    fn.rowwise().normalize();
    const Matrix spp = fp * fp.transpose();
    const Matrix snn = fn * fn.transpose();
    within += spp.sum() - spp.trace() + snn.sum() - snn.trace();
    nw += fp.rows() * (fp.rows() - 1) + fn.rows() * (fn.rows() - 1);
    cross += (fp * fn.transpose()).sum();
    nc += fp.rows() * fn.rows();
  }
  return within / static_cast<double>(nw) - cross / static_cast<double>(nc);
}

}  // namespace bongard
