#pragma once

// Run configuration: one JSON file with nested sections, every field addressable as
// "section.key" and overridable from the command line (`section.key=value`).
//
//   {
//     "seed": 0,
//     "run_root": "runs",
//     "episode_spec": {"dim": 64, "shots": 6, ..., "splits": [{"name": "train", "episodes": 2000, "pool_size": 64}, ...]},
//     "mimic": {"mode": "svm_mimic", "depth": 6, ...},
//     "train": {"max_lr": 5e-5, "total_steps": 5000, ...},
//     "encoder": {"raw_dim": 128, "hidden_dim": 64, "feature_dim": 64},
//     "method": {"method": "svm", "normalization": "support_standardize", "k": 5, "C": 1.0, "checkpoint": ""}
//   }

#include <filesystem>
#include <fstream>

#include "bongard/bench.hpp"
#include "bongard/serialize.hpp"
#include "bongard/synthetic.hpp"

namespace bongard {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline nlohmann::json to_json(const EpisodeSpec& s) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& sp : s.splits) splits.push_back({{"name", sp.name}, {"episodes", sp.episodes}, {"pool_size", sp.pool_size}});
  return {{"dim", s.dim},
          {"raw_dim", s.raw_dim},
          {"shots", s.shots},
          {"queries_per_class", s.queries_per_class},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"noise", s.noise},
          {"scale_spread", s.scale_spread},
          {"concept_rank", s.concept_rank},
          {"max_concept_reuse", s.max_concept_reuse},
          {"splits", splits},
          {"seed", s.seed}};
}

inline EpisodeSpec episode_spec_from_json(const nlohmann::json& j, EpisodeSpec s = {}) {
  s.dim = j.value("dim", s.dim);
  s.raw_dim = j.value("raw_dim", s.raw_dim);
  s.shots = j.value("shots", s.shots);
  s.queries_per_class = j.value("queries_per_class", s.queries_per_class);
  s.alpha = j.value("alpha", s.alpha);
  s.beta = j.value("beta", s.beta);
  s.noise = j.value("noise", s.noise);
  s.scale_spread = j.value("scale_spread", s.scale_spread);
  s.concept_rank = j.value("concept_rank", s.concept_rank);
  s.max_concept_reuse = j.value("max_concept_reuse", s.max_concept_reuse);
  s.seed = j.value("seed", s.seed);
  if (j.contains("splits")) {
    s.splits.clear();
    for (const auto& sp : j.at("splits"))
      s.splits.push_back({sp.at("name").get<std::string>(), sp.value("episodes", 0), sp.value("pool_size", 0)});
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const MethodSpec& m) {
  return {{"method", std::string(method_name(m.method))},
          {"normalization", std::string(normalization_name(m.normalization))},
          {"k", m.k},
          {"C", m.C},
          {"checkpoint", m.checkpoint}};
}

inline MethodSpec method_spec_from_json(const nlohmann::json& j, MethodSpec m = {}) {
  if (j.contains("method")) m.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("normalization")) m.normalization = parse_normalization(j.at("normalization").get<std::string>());
  m.k = j.value("k", m.k);
  m.C = j.value("C", m.C);
  m.checkpoint = j.value("checkpoint", m.checkpoint);
  if (m.C <= 0) throw DomainError("method: C must be > 0");
  return m;
}

struct RunConfig {
  std::uint64_t seed = 0;
  std::string run_root = "runs";
  EpisodeSpec episode_spec;
  MimicConfig mimic;
  TrainConfig train;
  EncoderConfig encoder;
  MethodSpec method;
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"run_root", c.run_root},
          {"episode_spec", to_json(c.episode_spec)},
          {"mimic", to_json(c.mimic)},
          {"train", to_json(c.train)},
          {"encoder", to_json(c.encoder)},
          {"method", to_json(c.method)}};
}

// The top-level seed fills in episode_spec.seed and train.seed unless those are given explicitly.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"seed", "run_root", "episode_spec", "mimic", "train", "encoder", "method"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.run_root = j.value("run_root", c.run_root);
    const auto section = [&](const char* name) { return j.contains(name) ? j.at(name) : nlohmann::json::object(); };
    auto spec = section("episode_spec");
    if (!spec.contains("seed")) spec["seed"] = c.seed;
    auto train = section("train");
    if (!train.contains("seed")) train["seed"] = c.seed;
    c.episode_spec = episode_spec_from_json(spec);
    c.mimic = mimic_config_from_json(section("mimic"));
    c.train = train_config_from_json(train);
    c.encoder = encoder_config_from_json(section("encoder"));
    c.method = method_spec_from_json(section("method"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

// Applies "a.b.c=value" to a JSON tree. The value is parsed as JSON when possible
// (numbers, booleans, arrays), otherwise taken as a string.
inline void apply_override(nlohmann::json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides = {}) {
  nlohmann::json j = path.empty() ? nlohmann::json::object() : read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace bongard
