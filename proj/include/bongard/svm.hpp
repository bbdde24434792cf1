#pragma once

// Soft-margin linear SVM with an unregularized intercept.
//
// Solves the dual  min ½ aᵀQa − eᵀa  s.t. 0 ≤ a ≤ C, yᵀa = 0,  Q_ij = y_i y_j <x_i, x_j>
// by sequential minimal optimization: each iteration updates the maximal-violating pair
// chosen with second-order working-set selection. The equality constraint keeps the
// intercept out of the regularizer, so ‖w‖ in the margin score excludes b.

#include <cmath>
#include <limits>
#include <span>

#include "bongard/types.hpp"

namespace bongard {

struct Hyperplane {
  FeatureVector w;
  double b = 0.0;

  Index dim() const { return w.size(); }
  // Concatenation (w, b) used as a regression target.
  FeatureVector as_vector() const {
    FeatureVector h(w.size() + 1);
    h.head(w.size()) = w;
    h[w.size()] = b;
    return h;
  }
  static Hyperplane from_vector(const FeatureVector& h) {
    if (h.size() < 2) throw DimensionError("hyperplane vector needs at least 2 entries");
    return {h.head(h.size() - 1), h[h.size() - 1]};
  }
};

struct SvmOptions {
  double C = 1.0;
  double tol = 1e-6;
  int max_passes = 10000;  // iteration cap is max_passes × number of supports
};

struct SvmSolution {
  Hyperplane plane;
  Eigen::VectorXd alpha;
  double primal = 0.0;  // ½‖w‖² + C Σ hinge
  double dual = 0.0;    // ½ aᵀQa − eᵀa (minimized form)
  double max_violation = 0.0;
  long iterations = 0;
};

class SvmError : public Error {
 public:
  SvmError(const std::string& what, double violation) : Error(what), violation_(violation) {}
  double final_violation() const { return violation_; }

 private:
  double violation_;
};

// Primal objective ½‖w‖² + C Σ max(0, 1 − y(w·x + b)).
inline double svm_primal_objective(const Hyperplane& h, std::span<const LabeledVector> supports, double C) {
  double hinge = 0.0;
  for (const auto& s : supports) hinge += std::max(0.0, 1.0 - sign_of(s.label) * (h.w.dot(s.features) + h.b));
  return 0.5 * h.w.squaredNorm() + C * hinge;
}

inline SvmSolution svm_solve(std::span<const LabeledVector> supports, const SvmOptions& opt = {}) {
  const Index n = static_cast<Index>(supports.size());
  if (!(opt.C > 0.0)) throw DomainError("svm: C must be positive");
  bool has_pos = false, has_neg = false;
  for (const auto& s : supports) (s.label == Label::positive ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DomainError("svm: need at least one support per class");
  const Index d = supports[0].features.size();

  Matrix X(n, d);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    require_same_dim(supports[static_cast<std::size_t>(i)].features, supports[0].features, "svm");
    X.row(i) = supports[static_cast<std::size_t>(i)].features.transpose();
    y[i] = sign_of(supports[static_cast<std::size_t>(i)].label);
  }
  const Matrix K = X * X.transpose();
  const Matrix Q = (y * y.transpose()).cwiseProduct(K);

  constexpr double kTau = 1e-12;
  const double C = opt.C;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);

  auto in_up = [&](Index t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](Index t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

  const long max_iter = static_cast<long>(opt.max_passes) * std::max<long>(n, 1);
  long iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Index i = -1;
    for (Index t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v >= gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t)) gmin = std::min(gmin, v);
    }
    violation = gmax - gmin;
    if (i < 0 || violation < opt.tol) break;
    if (iter >= max_iter)
      throw SvmError("svm: no convergence after " + std::to_string(iter) + " iterations (violation " +
                         std::to_string(violation) + ")",
                     violation);

    Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double bdiff = gmax + y[t] * G[t];
      if (bdiff <= 0) continue;
      double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
      if (a <= 0) a = kTau;
      const double score = -(bdiff * bdiff) / a;
      if (score <= best) {
        best = score;
        j = t;
      }
    }
    if (j < 0) break;

    const double ai_old = alpha[i];
    const double aj_old = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - ai_old;
    const double dj = alpha[j] - aj_old;
    G += Q.col(i) * di + Q.col(j) * dj;
  }

  // Intercept from free vectors, or the midpoint of the feasible interval when none are free.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  SvmSolution sol;
  sol.alpha = alpha;
  sol.plane.w = X.transpose() * alpha.cwiseProduct(y);
  sol.plane.b = -rho;
  sol.iterations = iter;
  sol.max_violation = violation;
  sol.dual = 0.5 * alpha.dot(Q * alpha) - alpha.sum();
  sol.primal = svm_primal_objective(sol.plane, supports, C);
  if (!sol.plane.w.allFinite() || !std::isfinite(sol.plane.b)) throw SvmError("svm: non-finite solution", violation);
  if (sol.plane.w.norm() == 0.0) throw SvmError("svm: degenerate hyperplane (w = 0)", violation);
  return sol;
}

inline Hyperplane svm_fit(std::span<const LabeledVector> supports, const SvmOptions& opt = {}) {
  return svm_solve(supports, opt).plane;
}

// Signed distance of f from the hyperplane.
inline double margin_score(const Hyperplane& h, const FeatureVector& f) {
  require_same_dim(h.w, f, "margin_score");
  const double n = h.w.norm();
  if (n == 0.0) throw DomainError("margin_score: zero coefficient vector");
  return (h.w.dot(f) + h.b) / n;
}

}  // namespace bongard
