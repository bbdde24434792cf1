#pragma once

// Pre-norm Transformer encoder over a set of support tokens plus learnable task tokens.
// No positional encoding: outputs are permutation-equivariant in the support tokens, and the
// task-token outputs are permutation-invariant.
//
// Block:  X1 = X + MHA(LN1(X)) ;  X2 = X1 + W2·gelu(W1·LN2(X1) + c1) + c2
// Head (per task token):  out = LN_head(x_task)·Wout + bout

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bongard/params.hpp"

namespace bongard {

enum class MimicMode { prototype_mimic, svm_mimic };

inline std::string_view mode_name(MimicMode m) { return m == MimicMode::svm_mimic ? "svm_mimic" : "prototype_mimic"; }
inline MimicMode parse_mode(std::string_view s) {
  if (s == "svm_mimic") return MimicMode::svm_mimic;
  if (s == "prototype_mimic") return MimicMode::prototype_mimic;
  throw DomainError("unknown mimic mode '" + std::string(s) + "'");
}

struct MimicConfig {
  MimicMode mode = MimicMode::svm_mimic;
  int depth = 6;
  int heads = 8;
  int head_dim = 64;
  Index token_dim = 64;
  Index mlp_dim = 64;
  double ln_eps = 1e-5;
  double embed_init_std = 0.02;  // indicators and task tokens

  int task_tokens() const { return mode == MimicMode::svm_mimic ? 1 : 2; }
  Index output_dim() const { return mode == MimicMode::svm_mimic ? token_dim + 1 : token_dim; }
  Index attn_dim() const { return static_cast<Index>(heads) * head_dim; }

  void validate() const {
    if (depth < 0) throw DomainError("mimic: depth must be non-negative");
    if (heads <= 0 || head_dim <= 0) throw DomainError("mimic: heads and head_dim must be positive");
    if (token_dim <= 0 || mlp_dim <= 0) throw DomainError("mimic: token and mlp dims must be positive");
  }
};

namespace detail {

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

inline Matrix layernorm_forward(const Matrix& x, const Eigen::Ref<const Eigen::RowVectorXd>& g,
                                const Eigen::Ref<const Eigen::RowVectorXd>& b, double eps, LayerNormCache* c) {
  const Index d = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  Matrix xc = x.colwise() - mean;
  Eigen::VectorXd var = xc.rowwise().squaredNorm() / static_cast<double>(d);
  Eigen::VectorXd rstd = (var.array() + eps).rsqrt();
  Matrix xhat = rstd.asDiagonal() * xc;
  Matrix y = xhat.array().rowwise() * g.array();
  y.rowwise() += b;
  if (c) *c = {std::move(xhat), std::move(rstd)};
  return y;
}

// Returns dX; accumulates dg, db.
inline Matrix layernorm_backward(const Matrix& dy, const LayerNormCache& c, const Eigen::Ref<const Eigen::RowVectorXd>& g,
                                 Eigen::Ref<Matrix> dg, Eigen::Ref<Matrix> db) {
  dg += dy.cwiseProduct(c.xhat).colwise().sum();
  db += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * g.array();
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  const Eigen::VectorXd m1 = dxhat.rowwise().sum() * inv_d;
  const Eigen::VectorXd m2 = dxhat.cwiseProduct(c.xhat).rowwise().sum() * inv_d;
  Matrix dx = dxhat;
  dx.colwise() -= m1;
  dx -= m2.asDiagonal() * c.xhat;
  return c.rstd.asDiagonal() * dx;
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline double gelu(double z) { return 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z))); }
inline double gelu_grad(double z) {
  const double t = std::tanh(kGeluC * (z + kGeluA * z * z * z));
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
}

inline void softmax_rows(Matrix& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace detail

class MimicModel {
 public:
  struct LayerSlots {
    std::size_t ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, c1, w2, c2;
  };
  struct HeadSlots {
    std::size_t ln_g, ln_b, w, b;
  };

  MimicModel() : MimicModel(MimicConfig{}) {}
  explicit MimicModel(const MimicConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const Index d = cfg.token_dim, a = cfg.attn_dim(), m = cfg.mlp_dim;
    ind_pos_ = store_.add("indicator_pos", 1, d);
    ind_neg_ = store_.add("indicator_neg", 1, d);
    task_ = store_.add("task_tokens", cfg.task_tokens(), d);
    for (int l = 0; l < cfg.depth; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerSlots s{};
      s.ln1_g = store_.add(p + "ln1.g", 1, d);
      s.ln1_b = store_.add(p + "ln1.b", 1, d);
      s.wq = store_.add(p + "attn.wq", d, a);
      s.wk = store_.add(p + "attn.wk", d, a);
      s.wv = store_.add(p + "attn.wv", d, a);
      s.wo = store_.add(p + "attn.wo", a, d);
      s.bo = store_.add(p + "attn.bo", 1, d);
      s.ln2_g = store_.add(p + "ln2.g", 1, d);
      s.ln2_b = store_.add(p + "ln2.b", 1, d);
      s.w1 = store_.add(p + "mlp.w1", d, m);
      s.c1 = store_.add(p + "mlp.c1", 1, m);
      s.w2 = store_.add(p + "mlp.w2", m, d);
      s.c2 = store_.add(p + "mlp.c2", 1, d);
      layers_.push_back(s);
    }
    for (int t = 0; t < cfg.task_tokens(); ++t) {
      const std::string p = "head" + std::to_string(t) + ".";
      HeadSlots h{};
      h.ln_g = store_.add(p + "ln.g", 1, d);
      h.ln_b = store_.add(p + "ln.b", 1, d);
      h.w = store_.add(p + "w", d, cfg.output_dim());
      h.b = store_.add(p + "b", 1, cfg.output_dim());
      heads_.push_back(h);
    }
  }

  // Indicators and task tokens ~ N(0, embed_init_std²); projections scaled by fan-in; output head near zero.
  template <class Rng>
  void init(Rng& rng) {
    store_.fill_normal(ind_pos_, cfg_.embed_init_std, rng);
    store_.fill_normal(ind_neg_, cfg_.embed_init_std, rng);
    store_.fill_normal(task_, cfg_.embed_init_std, rng);
    const double d = static_cast<double>(cfg_.token_dim);
    for (const auto& s : layers_) {
      store_.fill(s.ln1_g, 1.0);
      store_.fill(s.ln2_g, 1.0);
      store_.fill_normal(s.wq, 1.0 / std::sqrt(d), rng);
      store_.fill_normal(s.wk, 1.0 / std::sqrt(d), rng);
      store_.fill_normal(s.wv, 1.0 / std::sqrt(d), rng);
      store_.fill_normal(s.wo, 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim()) * 2.0 * cfg_.depth), rng);
      store_.fill_normal(s.w1, 1.0 / std::sqrt(d), rng);
      store_.fill_normal(s.w2, 1.0 / std::sqrt(static_cast<double>(cfg_.mlp_dim) * 2.0 * cfg_.depth), rng);
    }
    for (const auto& h : heads_) {
      store_.fill(h.ln_g, 1.0);
      store_.fill_normal(h.w, 1e-3, rng);
    }
  }

  const MimicConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  ParamStore::MatMap indicator_pos() { return store_.mat(ind_pos_); }
  ParamStore::MatMap indicator_neg() { return store_.mat(ind_neg_); }
  ParamStore::MatMap task_tokens() { return store_.mat(task_); }
  std::size_t indicator_pos_slot() const { return ind_pos_; }
  std::size_t indicator_neg_slot() const { return ind_neg_; }
  std::size_t task_slot() const { return task_; }
  const std::vector<LayerSlots>& layer_slots() const { return layers_; }
  const std::vector<HeadSlots>& head_slots() const { return heads_; }

  struct LayerCache {
    Matrix x;
    detail::LayerNormCache ln1;
    Matrix a, q, k, v, o;
    std::vector<Matrix> probs;
    Matrix x1;
    detail::LayerNormCache ln2;
    Matrix b, z;
  };
  struct Cache {
    std::vector<LayerCache> layers;
    Matrix out;
  };

  // Runs the encoder stack; returns one row per input token.
  Matrix transformer_forward(std::span<const double> p, const Matrix& tokens, Cache* cache = nullptr) const {
    if (tokens.cols() != cfg_.token_dim) throw DimensionError("transformer: token dimension mismatch");
    Matrix x = tokens;
    if (cache) cache->layers.clear();
    const Index dh = cfg_.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (const auto& s : layers_) {
      LayerCache lc;
      detail::LayerNormCache ln1, ln2;
      Matrix a = detail::layernorm_forward(x, store_.mat(s.ln1_g, p), store_.mat(s.ln1_b, p), cfg_.ln_eps, &ln1);
      Matrix q = a * store_.mat(s.wq, p);
      Matrix k = a * store_.mat(s.wk, p);
      Matrix v = a * store_.mat(s.wv, p);
      Matrix o(x.rows(), cfg_.attn_dim());
      std::vector<Matrix> probs;
      for (int h = 0; h < cfg_.heads; ++h) {
        Matrix sc = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
        detail::softmax_rows(sc);
        o.middleCols(h * dh, dh) = sc * v.middleCols(h * dh, dh);
        if (cache) probs.push_back(std::move(sc));
      }
      Matrix x1 = x + o * store_.mat(s.wo, p);
      x1.rowwise() += store_.mat(s.bo, p).row(0);
      Matrix b = detail::layernorm_forward(x1, store_.mat(s.ln2_g, p), store_.mat(s.ln2_b, p), cfg_.ln_eps, &ln2);
      Matrix z = b * store_.mat(s.w1, p);
      z.rowwise() += store_.mat(s.c1, p).row(0);
      Matrix g = z.unaryExpr([](double t) { return detail::gelu(t); });
      Matrix x2 = x1 + g * store_.mat(s.w2, p);
      x2.rowwise() += store_.mat(s.c2, p).row(0);
      if (cache) {
        lc.x = std::move(x);
        lc.ln1 = std::move(ln1);
        lc.a = std::move(a);
        lc.q = std::move(q);
        lc.k = std::move(k);
        lc.v = std::move(v);
        lc.o = std::move(o);
        lc.probs = std::move(probs);
        lc.x1 = std::move(x1);
        lc.ln2 = std::move(ln2);
        lc.b = std::move(b);
        lc.z = std::move(z);
        cache->layers.push_back(std::move(lc));
      }
      x = std::move(x2);
    }
    if (cache) cache->out = x;
    return x;
  }

  // Back-propagates d(loss)/d(outputs) through the stack; accumulates parameter gradients and
  // returns d(loss)/d(tokens).
  Matrix transformer_backward(std::span<const double> p, const Cache& cache, Matrix dx, std::span<double> grad) const {
    const Index dh = cfg_.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& s = layers_[li];
      const auto& c = cache.layers[li];
      // MLP branch
      Matrix dg = dx * store_.mat(s.w2, p).transpose();
      Matrix g = c.z.unaryExpr([](double t) { return detail::gelu(t); });
      store_.mat(s.w2, grad) += g.transpose() * dx;
      store_.mat(s.c2, grad) += dx.colwise().sum();
      Matrix dz = dg.cwiseProduct(c.z.unaryExpr([](double t) { return detail::gelu_grad(t); }));
      store_.mat(s.w1, grad) += c.b.transpose() * dz;
      store_.mat(s.c1, grad) += dz.colwise().sum();
      Matrix db = dz * store_.mat(s.w1, p).transpose();
      auto dln2_g = store_.mat(s.ln2_g, grad);
      auto dln2_b = store_.mat(s.ln2_b, grad);
      Matrix dx1 = dx + detail::layernorm_backward(db, c.ln2, store_.mat(s.ln2_g, p), dln2_g, dln2_b);
      // attention branch
      store_.mat(s.wo, grad) += c.o.transpose() * dx1;
      store_.mat(s.bo, grad) += dx1.colwise().sum();
      Matrix dO = dx1 * store_.mat(s.wo, p).transpose();
      Matrix dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
      for (int h = 0; h < cfg_.heads; ++h) {
        const Matrix& P = c.probs[static_cast<std::size_t>(h)];
        const auto dOh = dO.middleCols(h * dh, dh);
        Matrix dP = dOh * c.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh) = P.transpose() * dOh;
        Eigen::VectorXd rowdot = dP.cwiseProduct(P).rowwise().sum();
        Matrix dS = P.cwiseProduct(dP.colwise() - rowdot) * scale;
        dq.middleCols(h * dh, dh) = dS * c.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh) = dS.transpose() * c.q.middleCols(h * dh, dh);
      }
      store_.mat(s.wq, grad) += c.a.transpose() * dq;
      store_.mat(s.wk, grad) += c.a.transpose() * dk;
      store_.mat(s.wv, grad) += c.a.transpose() * dv;
      Matrix da = dq * store_.mat(s.wq, p).transpose() + dk * store_.mat(s.wk, p).transpose() +
                  dv * store_.mat(s.wv, p).transpose();
      auto dln1_g = store_.mat(s.ln1_g, grad);
      auto dln1_b = store_.mat(s.ln1_b, grad);
      dx = dx1 + detail::layernorm_backward(da, c.ln1, store_.mat(s.ln1_g, p), dln1_g, dln1_b);
    }
    return dx;
  }

  struct HeadCache {
    detail::LayerNormCache ln;
    Matrix y;
  };

  // Decodes the t-th task-token output into its target vector.
  Eigen::VectorXd head_forward(std::span<const double> p, int t, const Eigen::RowVectorXd& x, HeadCache* c = nullptr) const {
    const auto& h = heads_[static_cast<std::size_t>(t)];
    Matrix xm = x;
    detail::LayerNormCache ln;
    Matrix y = detail::layernorm_forward(xm, store_.mat(h.ln_g, p), store_.mat(h.ln_b, p), cfg_.ln_eps, &ln);
    Eigen::RowVectorXd out = y * store_.mat(h.w, p);
    out += store_.mat(h.b, p).row(0);
    if (c) *c = {std::move(ln), std::move(y)};
    return out.transpose();
  }

  Eigen::RowVectorXd head_backward(std::span<const double> p, int t, const HeadCache& c, const Eigen::VectorXd& dout,
                                   std::span<double> grad) const {
    const auto& h = heads_[static_cast<std::size_t>(t)];
    const Eigen::RowVectorXd dr = dout.transpose();
    store_.mat(h.w, grad) += c.y.transpose() * dr;
    store_.mat(h.b, grad) += dr;
    Matrix dy = dr * store_.mat(h.w, p).transpose();
    auto dg = store_.mat(h.ln_g, grad);
    auto db = store_.mat(h.ln_b, grad);
    return detail::layernorm_backward(dy, c.ln, store_.mat(h.ln_g, p), dg, db).row(0);
  }

 private:
  MimicConfig cfg_;
  ParamStore store_;
  std::size_t ind_pos_, ind_neg_, task_;
  std::vector<LayerSlots> layers_;
  std::vector<HeadSlots> heads_;
};

}  // namespace bongard
