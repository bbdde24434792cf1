#pragma once

// Feature-space Bongard problems. Every image of an episode shares a problem-level offset o and a
// problem-level per-dimension noise scale; the concept c separates the classes:
//
//   positive = o + α·c + s ∘ ε,   negative = o − α·c + s ∘ ε,   ε ~ N(0, I)
//
// ‖o‖ ≈ β and s has RMS σ_n with log-normal spread γ across dimensions. Concepts are unit vectors
// drawn from a shared rank-r subspace; each split draws from its own disjoint pool.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bongard/episode.hpp"
#include "bongard/normalize.hpp"

namespace bongard {

struct SplitSpec {
  std::string name;
  int episodes = 0;
  int pool_size = 0;
};

struct EpisodeSpec {
  Index dim = 64;
  Index raw_dim = 128;
  int shots = 6;
  int queries_per_class = 1;
  double alpha = 1.0;
  double beta = 5.0;
  double noise = 0.5;
  double scale_spread = 0.5;
  int concept_rank = 8;  // 0: concepts span the full space
  int max_concept_reuse = 100;
  std::vector<SplitSpec> splits = {{"train", 2000, 64}, {"val", 200, 16}, {"test", 500, 32}};
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 2) throw DomainError("episode spec: dim must be >= 2");
    if (raw_dim < dim) throw DomainError("episode spec: raw_dim must be >= dim");
    if (shots < 2) throw DomainError("episode spec: shots must be >= 2");
    if (queries_per_class < 1) throw DomainError("episode spec: queries_per_class must be >= 1");
    if (alpha < 0 || beta < 0 || noise < 0 || scale_spread < 0) throw DomainError("episode spec: magnitudes must be >= 0");
    if (concept_rank < 0 || concept_rank > dim) throw DomainError("episode spec: concept_rank must be in [0, dim]");
    for (const auto& s : splits) {
      if (s.episodes < 0 || s.pool_size < 0) throw DomainError("episode spec: split '" + s.name + "' has negative sizes");
      if (s.episodes > 0 && static_cast<long>(s.episodes) > static_cast<long>(s.pool_size) * max_concept_reuse)
        throw DomainError("episode spec: concept pool of split '" + s.name + "' (" + std::to_string(s.pool_size) +
                          ") too small for " + std::to_string(s.episodes) + " episodes");
    }
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return splitmix64(splitmix64(splitmix64(seed ^ splitmix64(a)) ^ b) ^ c);
}

template <class Rng>
FeatureVector gaussian_vector(Index n, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> nd(0.0, stddev);
  FeatureVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

struct Concept {
  std::string id;
  FeatureVector direction;
};

class ConceptPools {
 public:
  explicit ConceptPools(const EpisodeSpec& spec) {
    std::mt19937_64 rng(derive_seed(spec.seed, 0xC0C0));
    const Index r = spec.concept_rank == 0 ? spec.dim : spec.concept_rank;
    Matrix g(spec.dim, r);
    for (Index c = 0; c < r; ++c) g.col(c) = gaussian_vector(spec.dim, rng);
    basis_ = spec.concept_rank == 0 ? Matrix::Identity(spec.dim, spec.dim) : Matrix(Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(spec.dim, r));
    for (std::size_t s = 0; s < spec.splits.size(); ++s) {
      std::vector<Concept> pool;
      for (int j = 0; j < spec.splits[s].pool_size; ++j) {
        std::mt19937_64 crng(derive_seed(spec.seed, 0xC0C1, s, static_cast<std::uint64_t>(j)));
        FeatureVector d = basis_ * gaussian_vector(r, crng);
        pool.push_back({spec.splits[s].name + "-c" + std::to_string(j), d.normalized()});
      }
      pools_.push_back(std::move(pool));
    }
  }

  const std::vector<Concept>& pool(std::size_t split_index) const { return pools_.at(split_index); }
  const Matrix& basis() const { return basis_; }

 private:
  Matrix basis_;
  std::vector<std::vector<Concept>> pools_;
};

template <class Rng>
Episode generate_episode(const EpisodeSpec& spec, const Concept& target, Rng& rng, std::string id = "episode",
                         std::string split = "train") {
  const Index d = spec.dim;
  if (target.direction.size() != d) throw DimensionError("generate_episode: concept dimension mismatch");
  const FeatureVector offset = gaussian_vector(d, rng, spec.beta / std::sqrt(static_cast<double>(d)));
  FeatureVector scale = FeatureVector::Constant(d, spec.noise);
  if (spec.scale_spread > 0.0 && spec.noise > 0.0) {
    scale = (spec.scale_spread * gaussian_vector(d, rng)).array().exp();
    scale *= spec.noise / std::sqrt(scale.squaredNorm() / static_cast<double>(d));
  }
  auto draw = [&](double sign) -> FeatureVector {
    return offset + sign * spec.alpha * target.direction + scale.cwiseProduct(gaussian_vector(d, rng));
  };
  Episode e;
  e.id = std::move(id);
  e.split = std::move(split);
  e.concept_id = target.id;
  for (int i = 0; i < spec.shots; ++i) e.positives.push_back(draw(+1.0));
  for (int i = 0; i < spec.shots; ++i) e.negatives.push_back(draw(-1.0));
  for (int i = 0; i < spec.queries_per_class; ++i) {
    e.queries.push_back({draw(+1.0), Label::positive});
    e.queries.push_back({draw(-1.0), Label::negative});
  }
  return e;
}

// Fixed injective map from feature space to the raw-input space: raw = tanh(A f).
class RawMap {
 public:
  explicit RawMap(const EpisodeSpec& spec) {
    std::mt19937_64 rng(derive_seed(spec.seed, 0x7A57));
    a_ = Matrix(spec.raw_dim, spec.dim);
    for (Index c = 0; c < spec.dim; ++c) a_.col(c) = gaussian_vector(spec.raw_dim, rng, 1.0 / std::sqrt(static_cast<double>(spec.dim)));
  }
  FeatureVector operator()(const FeatureVector& f) const { return (a_ * f).array().tanh().matrix(); }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
};

struct GeneratedData {
  Dataset features;
  Dataset raw;  // empty unless requested
};

// Episode i of split s uses its own RNG seeded from (seed, s, i).
inline GeneratedData generate_dataset(const EpisodeSpec& spec, bool with_raw = false) {
  spec.validate();
  const ConceptPools pools(spec);
  GeneratedData out;
  out.features.dim = spec.dim;
  for (std::size_t s = 0; s < spec.splits.size(); ++s) {
    const auto& split = spec.splits[s];
    const auto& pool = pools.pool(s);
    for (int i = 0; i < split.episodes; ++i) {
      std::mt19937_64 rng(derive_seed(spec.seed, 0xE915, s, static_cast<std::uint64_t>(i)));
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const auto& c = pool[pick(rng)];
      out.features.episodes.push_back(generate_episode(spec, c, rng, split.name + "-" + std::to_string(i), split.name));
    }
  }
  if (with_raw) {
    const RawMap map(spec);
    out.raw.dim = spec.raw_dim;
    for (const auto& e : out.features.episodes) out.raw.episodes.push_back(map_features(e, map));
  }
  return out;
}

// Replaces every query label by a fair coin flip (chance-level calibration data).
inline Dataset shuffle_query_labels(const Dataset& d, std::uint64_t seed) {
  Dataset out = d;
  std::mt19937_64 rng(derive_seed(seed, 0x5EED));
  std::bernoulli_distribution coin(0.5);
  for (auto& e : out.episodes)
    for (auto& q : e.queries) q.label = coin(rng) ? Label::positive : Label::negative;
  return out;
}

}  // namespace bongard
