#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bongard {

using FeatureVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Label : std::int8_t { negative = -1, positive = 1 };

constexpr double sign_of(Label l) { return l == Label::positive ? 1.0 : -1.0; }
constexpr Label flip(Label l) { return l == Label::positive ? Label::negative : Label::positive; }
constexpr std::string_view label_name(Label l) { return l == Label::positive ? "pos" : "neg"; }

// Ties (score exactly zero) resolve to positive.
inline Label label_from_score(double score) { return score >= 0.0 ? Label::positive : Label::negative; }

struct LabeledVector {
  FeatureVector features;
  Label label = Label::positive;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

inline void require_same_dim(const FeatureVector& a, const FeatureVector& b, const char* what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
}

inline double cosine(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b, "cosine");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero-norm vector");
  return a.dot(b) / (na * nb);
}

}  // namespace bongard
