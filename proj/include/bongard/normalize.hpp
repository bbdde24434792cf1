#pragma once

#include <span>

#include "bongard/episode.hpp"

namespace bongard {

inline constexpr double kSigmaFloor = 1e-5;

// Per-dimension mean and (clamped) population standard deviation.
struct NormStats {
  FeatureVector mu;
  FeatureVector sigma;

  Index dim() const { return mu.size(); }
};

inline NormStats stats_of(std::span<const FeatureVector* const> vectors, double floor = kSigmaFloor) {
  if (vectors.size() < 2) throw DomainError("stats: need at least 2 vectors");
  const Index d = vectors.front()->size();
  NormStats s{FeatureVector::Zero(d), FeatureVector::Zero(d)};
  for (const auto* v : vectors) {
    require_same_dim(*v, s.mu, "stats");
    s.mu += *v;
  }
  const double n = static_cast<double>(vectors.size());
  s.mu /= n;
  for (const auto* v : vectors) s.sigma += (*v - s.mu).cwiseAbs2();
  s.sigma = (s.sigma / n).cwiseSqrt().cwiseMax(floor);
  return s;
}

// Statistics over the pooled support set (both classes). Queries never contribute.
inline NormStats support_stats(std::span<const FeatureVector> supports, double floor = kSigmaFloor) {
  std::vector<const FeatureVector*> ptrs;
  ptrs.reserve(supports.size());
  for (const auto& f : supports) ptrs.push_back(&f);
  return stats_of(ptrs, floor);
}

inline NormStats support_stats(const Episode& e, double floor = kSigmaFloor) {
  std::vector<const FeatureVector*> ptrs;
  for (const auto& f : e.positives) ptrs.push_back(&f);
  for (const auto& f : e.negatives) ptrs.push_back(&f);
  return stats_of(ptrs, floor);
}

inline FeatureVector standardize(const FeatureVector& f, const NormStats& s) {
  require_same_dim(f, s.mu, "standardize");
  return (f - s.mu).cwiseQuotient(s.sigma);
}

inline FeatureVector unstandardize(const FeatureVector& f, const NormStats& s) {
  require_same_dim(f, s.mu, "unstandardize");
  return f.cwiseProduct(s.sigma) + s.mu;
}

inline FeatureVector l2_normalize(const FeatureVector& f) {
  const double n = f.norm();
  if (n == 0.0) throw DomainError("l2_normalize: zero vector");
  return f / n;
}

// Statistics over every support and query vector of the training split.
inline NormStats trainset_stats(const Dataset& d, std::string_view train_split = "train", double floor = kSigmaFloor) {
  std::vector<const FeatureVector*> ptrs;
  for (const auto* e : d.split(train_split)) {
    for (const auto& f : e->positives) ptrs.push_back(&f);
    for (const auto& f : e->negatives) ptrs.push_back(&f);
    for (const auto& q : e->queries) ptrs.push_back(&q.features);
  }
  if (ptrs.empty()) throw DomainError("trainset_stats: split '" + std::string(train_split) + "' is empty");
  return stats_of(ptrs, floor);
}

// Applies `fn` to every support and query vector of a copy of `e`.
template <class Fn>
Episode map_features(const Episode& e, Fn&& fn) {
  Episode out = e;
  for (auto& f : out.positives) f = fn(f);
  for (auto& f : out.negatives) f = fn(f);
  for (auto& q : out.queries) q.features = fn(q.features);
  return out;
}

inline Episode standardize_episode(const Episode& e, const NormStats& s) {
  return map_features(e, [&](const FeatureVector& f) { return standardize(f, s); });
}

// Support-set standardization: stats from the supports, applied to supports and queries.
inline Episode standardize_episode(const Episode& e) { return standardize_episode(e, support_stats(e)); }

inline Episode l2_normalize_episode(const Episode& e) {
  return map_features(e, [](const FeatureVector& f) { return l2_normalize(f); });
}

}  // namespace bongard
