#pragma once

// Line-delimited episode files: one JSON object per line.
//
//   {"id": "...", "split": "train", "positives": [[...], ...], "negatives": [[...], ...],
//    "queries": [{"features": [...], "label": "pos"|"neg"}, ...], "concept_id": "..."}
//
// concept_id is optional. Numbers are written with round-trip precision so that
// parse(write(d)) reproduces every value bit-exactly.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bongard/episode.hpp"
#include "json.hpp"

namespace bongard {

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline nlohmann::json vector_to_json(const FeatureVector& f) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < f.size(); ++i) a.push_back(f[i]);
  return a;
}

inline FeatureVector vector_from_json(const nlohmann::json& a) {
  if (!a.is_array()) throw Error("expected array of numbers");
  FeatureVector f(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw Error("non-numeric feature value");
    f[static_cast<Index>(i)] = a[i].get<double>();
  }
  return f;
}

inline std::vector<FeatureVector> vectors_from_json(const nlohmann::json& a, const char* field) {
  if (!a.is_array()) throw Error(std::string("field '") + field + "' must be an array");
  std::vector<FeatureVector> out;
  out.reserve(a.size());
  for (const auto& v : a) out.push_back(vector_from_json(v));
  return out;
}

}  // namespace detail

inline nlohmann::json episode_to_json(const Episode& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["split"] = e.split;
  j["positives"] = nlohmann::json::array();
  for (const auto& f : e.positives) j["positives"].push_back(detail::vector_to_json(f));
  j["negatives"] = nlohmann::json::array();
  for (const auto& f : e.negatives) j["negatives"].push_back(detail::vector_to_json(f));
  j["queries"] = nlohmann::json::array();
  for (const auto& q : e.queries)
    j["queries"].push_back({{"features", detail::vector_to_json(q.features)}, {"label", std::string(label_name(q.label))}});
  if (e.concept_id) j["concept_id"] = *e.concept_id;
  return j;
}

inline Episode episode_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("episode record must be an object");
  for (const char* key : {"id", "split", "positives", "negatives", "queries"})
    if (!j.contains(key)) throw Error(std::string("missing field '") + key + "'");
  Episode e;
  e.id = j.at("id").get<std::string>();
  e.split = j.at("split").get<std::string>();
  e.positives = detail::vectors_from_json(j.at("positives"), "positives");
  e.negatives = detail::vectors_from_json(j.at("negatives"), "negatives");
  const auto& qs = j.at("queries");
  if (!qs.is_array()) throw Error("field 'queries' must be an array");
  for (const auto& q : qs) {
    if (!q.is_object() || !q.contains("features") || !q.contains("label")) throw Error("query needs 'features' and 'label'");
    const auto lbl = q.at("label").get<std::string>();
    if (lbl != "pos" && lbl != "neg") throw Error("query label must be \"pos\" or \"neg\", got \"" + lbl + "\"");
    e.queries.push_back({detail::vector_from_json(q.at("features")), lbl == "pos" ? Label::positive : Label::negative});
  }
  if (j.contains("concept_id") && !j.at("concept_id").is_null()) e.concept_id = j.at("concept_id").get<std::string>();
  return e;
}

inline Dataset parse_episode_stream(std::istream& in) {
  Dataset d;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Episode e;
    try {
      e = episode_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(lineno, std::string("malformed record: ") + ex.what());
    } catch (const Error& ex) {
      throw ParseError(lineno, ex.what());
    }
    if (!have_dim) {
      d.dim = e.dim();
      have_dim = true;
    }
    auto report = validate_episode(e, d.dim);
    if (report.has(Violation::dimension_mismatch))
      throw ParseError(lineno, "dimension mismatch: dataset dimension is " + std::to_string(d.dim));
    if (!report.ok()) throw ParseError(lineno, "invalid episode '" + e.id + "': " + report.describe());
    if (!ids.insert(e.id).second) throw ParseError(lineno, "duplicate episode id '" + e.id + "'");
    d.episodes.push_back(std::move(e));
  }
  if (d.episodes.empty()) throw Error("episode file is empty");
  return d;
}

inline Dataset parse_episode_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open episode file " + path.string());
  return parse_episode_stream(in);
}

inline void write_episode_stream(std::ostream& out, const Dataset& d) {
  for (const auto& e : d.episodes) out << episode_to_json(e).dump() << '\n';
}

inline void write_episode_file(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write episode file " + path.string());
  write_episode_stream(out, d);
}

}  // namespace bongard
