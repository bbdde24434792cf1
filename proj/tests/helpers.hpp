#pragma once

#include <random>

#include "bongard/episode.hpp"

namespace testing_util {

using bongard::Episode;
using bongard::FeatureVector;
using bongard::Index;
using bongard::Label;

inline FeatureVector randn(Index d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  FeatureVector v(d);
  for (Index i = 0; i < d; ++i) v[i] = nd(rng);
  return v;
}

// Unstructured Gaussian episode with a random per-episode offset.
inline Episode random_episode(Index d, int k, std::mt19937_64& rng, int queries_per_class = 1, std::string id = "e") {
  Episode e;
  e.id = std::move(id);
  e.split = "test";
  const FeatureVector off = randn(d, rng, 3.0);
  const FeatureVector dir = randn(d, rng);
  for (int i = 0; i < k; ++i) e.positives.push_back(off + dir + randn(d, rng));
  for (int i = 0; i < k; ++i) e.negatives.push_back(off - dir + randn(d, rng));
  for (int i = 0; i < queries_per_class; ++i) {
    e.queries.push_back({off + dir + randn(d, rng), Label::positive});
    e.queries.push_back({off - dir + randn(d, rng), Label::negative});
  }
  return e;
}

}  // namespace testing_util
