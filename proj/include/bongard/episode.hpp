#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "bongard/types.hpp"

namespace bongard {

struct Query {
  FeatureVector features;
  Label label = Label::positive;
};

// One problem: K positive and K negative supports plus labeled queries.
struct Episode {
  std::string id;
  std::string split;
  std::vector<FeatureVector> positives;
  std::vector<FeatureVector> negatives;
  std::vector<Query> queries;
  std::optional<std::string> concept_id;

  Index dim() const { return positives.empty() ? 0 : positives.front().size(); }
  std::size_t shots() const { return positives.size(); }

  // Supports flattened as positives followed by negatives.
  std::vector<LabeledVector> labeled_supports() const {
    std::vector<LabeledVector> out;
    out.reserve(positives.size() + negatives.size());
    for (const auto& f : positives) out.push_back({f, Label::positive});
    for (const auto& f : negatives) out.push_back({f, Label::negative});
    return out;
  }
};

enum class Violation {
  too_few_supports,
  class_count_mismatch,
  no_queries,
  dimension_mismatch,
  non_finite_feature,
  empty_id,
};

inline std::string_view violation_name(Violation v) {
  switch (v) {
    case Violation::too_few_supports: return "too few supports (need K >= 2 per class)";
    case Violation::class_count_mismatch: return "class-count mismatch";
    case Violation::no_queries: return "no queries";
    case Violation::dimension_mismatch: return "dimension mismatch";
    case Violation::non_finite_feature: return "non-finite feature";
    case Violation::empty_id: return "empty id";
  }
  return "unknown";
}

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(Violation v) const { return std::find(violations.begin(), violations.end(), v) != violations.end(); }
  std::string describe() const {
    std::string s;
    for (auto v : violations) {
      if (!s.empty()) s += "; ";
      s += violation_name(v);
    }
    return s;
  }
};

// Lists each violated invariant once. `expected_dim` < 0 means "infer from the episode".
inline ValidationReport validate_episode(const Episode& e, Index expected_dim = -1) {
  ValidationReport r;
  auto add = [&](Violation v) {
    if (!r.has(v)) r.violations.push_back(v);
  };
  if (e.id.empty()) add(Violation::empty_id);
  if (e.positives.size() != e.negatives.size()) add(Violation::class_count_mismatch);
  if (e.positives.size() < 2 || e.negatives.size() < 2) add(Violation::too_few_supports);
  if (e.queries.empty()) add(Violation::no_queries);

  Index dim = expected_dim;
  auto check = [&](const FeatureVector& f) {
    if (dim < 0) dim = f.size();
    if (f.size() != dim || f.size() == 0) add(Violation::dimension_mismatch);
    if (!f.allFinite()) add(Violation::non_finite_feature);
  };
  for (const auto& f : e.positives) check(f);
  for (const auto& f : e.negatives) check(f);
  for (const auto& q : e.queries) check(q.features);
  return r;
}

struct Dataset {
  Index dim = 0;
  std::vector<Episode> episodes;

  std::vector<const Episode*> split(std::string_view name) const {
    std::vector<const Episode*> out;
    for (const auto& e : episodes)
      if (e.split == name) out.push_back(&e);
    return out;
  }

  std::vector<std::string> split_names() const {
    std::vector<std::string> names;
    for (const auto& e : episodes)
      if (std::find(names.begin(), names.end(), e.split) == names.end()) names.push_back(e.split);
    return names;
  }
};

// Throws on the first invalid episode or duplicate id.
inline void validate_dataset(const Dataset& d) {
  std::unordered_set<std::string> seen;
  for (const auto& e : d.episodes) {
    auto r = validate_episode(e, d.dim);
    if (!r.ok()) throw Error("episode '" + e.id + "': " + r.describe());
    if (!seen.insert(e.id).second) throw Error("duplicate episode id '" + e.id + "'");
  }
}

// k distinct indices from [0, n), uniformly, returned in increasing order.
template <class Rng>
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Keeps m supports per class. Chosen supports keep their original relative order, so m == K
// returns the episode unchanged.
template <class Rng>
Episode split_supports(const Episode& e, std::size_t m, Rng& rng) {
  const std::size_t k = std::min(e.positives.size(), e.negatives.size());
  if (m < 2 || m > k)
    throw DomainError("split_supports: m=" + std::to_string(m) + " outside [2, " + std::to_string(k) + "]");
  Episode out = e;
  out.positives.clear();
  out.negatives.clear();
  for (auto i : sample_without_replacement(e.positives.size(), m, rng)) out.positives.push_back(e.positives[i]);
  for (auto i : sample_without_replacement(e.negatives.size(), m, rng)) out.negatives.push_back(e.negatives[i]);
  return out;
}

}  // namespace bongard
