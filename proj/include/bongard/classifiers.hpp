#pragma once

#include <algorithm>
#include <numeric>
#include <span>

#include "bongard/episode.hpp"
#include "bongard/svm.hpp"

namespace bongard {

struct Prediction {
  Label label = Label::positive;
  double score = 0.0;
};

// kNN by cosine similarity. Equal similarities are broken by support value (lexicographic),
// so the vote does not depend on support order.
inline Label knn_classify(std::span<const LabeledVector> supports, const FeatureVector& query, std::size_t k = 5) {
  if (k == 0 || k % 2 == 0) throw DomainError("knn: k must be odd, got " + std::to_string(k));
  if (k > supports.size())
    throw DomainError("knn: k=" + std::to_string(k) + " exceeds support count " + std::to_string(supports.size()));
  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(supports.size());
  for (std::size_t i = 0; i < supports.size(); ++i) sims.emplace_back(cosine(supports[i].features, query), i);
  auto before = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    const auto& fa = supports[a.second].features;
    const auto& fb = supports[b.second].features;
    if (!(fa.array() == fb.array()).all())
      return std::lexicographical_compare(fa.data(), fa.data() + fa.size(), fb.data(), fb.data() + fb.size());
    return sign_of(supports[a.second].label) > sign_of(supports[b.second].label);
  };
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(), before);
  int vote = 0;
  for (std::size_t i = 0; i < k; ++i) vote += supports[sims[i].second].label == Label::positive ? 1 : -1;
  return vote > 0 ? Label::positive : Label::negative;
}

struct PrototypePair {
  FeatureVector p;
  FeatureVector n;
};

inline FeatureVector mean_of(std::span<const FeatureVector> vs) {
  if (vs.empty()) throw DomainError("mean of empty set");
  FeatureVector m = FeatureVector::Zero(vs.front().size());
  for (const auto& v : vs) {
    require_same_dim(v, m, "mean");
    m += v;
  }
  return m / static_cast<double>(vs.size());
}

inline PrototypePair prototype_fit(std::span<const LabeledVector> supports) {
  std::vector<FeatureVector> pos, neg;
  for (const auto& s : supports) (s.label == Label::positive ? pos : neg).push_back(s.features);
  if (pos.empty() || neg.empty()) throw DomainError("prototype_fit: empty class");
  return {mean_of(pos), mean_of(neg)};
}

inline PrototypePair prototype_fit(const Episode& e) {
  if (e.positives.empty() || e.negatives.empty()) throw DomainError("prototype_fit: empty class");
  return {mean_of(e.positives), mean_of(e.negatives)};
}

inline Prediction prototype_classify(const PrototypePair& pp, const FeatureVector& query) {
  const double score = cosine(query, pp.p) - cosine(query, pp.n);
  return {label_from_score(score), score};
}

inline Prediction hyperplane_classify(const Hyperplane& h, const FeatureVector& query) {
  const double score = margin_score(h, query);
  return {label_from_score(score), score};
}

}  // namespace bongard
