#pragma once

// Episodic evaluation harness: per-query accuracy of a method/normalization pair on a split,
// support-count and label-noise robustness sweeps, and CSV/markdown reports.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "bongard/classifiers.hpp"
#include "bongard/mimic.hpp"
#include "bongard/normalize.hpp"
#include "bongard/synthetic.hpp"
#include "json.hpp"

namespace bongard {

enum class Method { knn, prototype, svm, prototype_mimic, svm_mimic };
enum class Normalization {
  none,
  l2,
  support_standardize,
  trainset_standardize,
  l2_then_support_standardize,
  support_standardize_then_l2,
};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::knn: return "knn";
    case Method::prototype: return "prototype";
    case Method::svm: return "svm";
    case Method::prototype_mimic: return "prototype_mimic";
    case Method::svm_mimic: return "svm_mimic";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::knn, Method::prototype, Method::svm, Method::prototype_mimic, Method::svm_mimic})
    if (method_name(m) == s) return m;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

inline std::string_view normalization_name(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::l2: return "l2";
    case Normalization::support_standardize: return "support_standardize";
    case Normalization::trainset_standardize: return "trainset_standardize";
    case Normalization::l2_then_support_standardize: return "l2_then_support_standardize";
    case Normalization::support_standardize_then_l2: return "support_standardize_then_l2";
  }
  return "?";
}

inline Normalization parse_normalization(std::string_view s) {
  for (auto n : {Normalization::none, Normalization::l2, Normalization::support_standardize, Normalization::trainset_standardize,
                 Normalization::l2_then_support_standardize, Normalization::support_standardize_then_l2})
    if (normalization_name(n) == s) return n;
  throw DomainError("unknown normalization '" + std::string(s) + "'");
}

inline bool is_mimic(Method m) { return m == Method::prototype_mimic || m == Method::svm_mimic; }

struct MethodSpec {
  Method method = Method::prototype;
  Normalization normalization = Normalization::support_standardize;
  std::size_t k = 5;
  double C = 1.0;
  std::string checkpoint;
};

// Evaluation-time perturbations applied to the supports before normalization.
struct Perturbation {
  std::size_t support_count = 0;   // 0 keeps all supports
  std::size_t flips_per_class = 0;  // support labels flipped in each class
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  std::string id;
  bool skipped = false;
  std::vector<double> scores;  // one per query
  std::vector<bool> correct;
};

struct EvalReport {
  std::string method;
  std::string normalization;
  std::string split;
  long correct = 0;
  long total = 0;
  long skipped_episodes = 0;
  double runtime_s = 0.0;
  std::vector<EpisodeResult> episodes;
  nlohmann::json config;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

namespace detail {

inline std::uint64_t id_hash(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Flips `flips` labels within each class, chosen uniformly without replacement.
template <class Rng>
void flip_labels(std::vector<LabeledVector>& supports, std::size_t flips, Rng& rng) {
  if (flips == 0) return;
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < supports.size(); ++i) (supports[i].label == Label::positive ? pos : neg).push_back(i);
  if (2 * flips >= pos.size() || 2 * flips >= neg.size())
    throw DomainError("label noise: flips per class must be < K/2");
  for (auto i : sample_without_replacement(pos.size(), flips, rng)) supports[pos[i]].label = Label::negative;
  for (auto i : sample_without_replacement(neg.size(), flips, rng)) supports[neg[i]].label = Label::positive;
}

}  // namespace detail

class Evaluator {
 public:
  Evaluator(MethodSpec spec, const Dataset& data, const MimicModel* model = nullptr)
      : spec_(std::move(spec)), data_(data), model_(model) {
    if (is_mimic(spec_.method)) {
      if (!model_) throw DomainError("method " + std::string(method_name(spec_.method)) + " requires a checkpoint");
      const auto want = spec_.method == Method::svm_mimic ? MimicMode::svm_mimic : MimicMode::prototype_mimic;
      if (model_->config().mode != want) throw DomainError("checkpoint mode does not match method");
    }
    if (spec_.method == Method::knn && (spec_.k == 0 || spec_.k % 2 == 0)) throw DomainError("knn: k must be odd");
    if (spec_.normalization == Normalization::trainset_standardize) train_stats_ = trainset_stats(data_);
  }

  EvalReport evaluate(std::string_view split, const Perturbation& perturb = {}) const {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport r;
    r.method = method_name(spec_.method);
    r.normalization = normalization_name(spec_.normalization);
    r.split = split;
    r.config = {{"method", r.method},       {"normalization", r.normalization},       {"k", spec_.k},
                {"C", spec_.C},             {"support_count", perturb.support_count}, {"flips_per_class", perturb.flips_per_class},
                {"seed", perturb.seed},     {"checkpoint", spec_.checkpoint}};
    for (const auto* e : data_.split(split)) {
      auto er = evaluate_episode(*e, perturb);
      if (er.skipped) {
        ++r.skipped_episodes;
      } else {
        for (bool c : er.correct) r.correct += c ? 1 : 0;
        r.total += static_cast<long>(er.correct.size());
      }
      r.episodes.push_back(std::move(er));
    }
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  EpisodeResult evaluate_episode(const Episode& original, const Perturbation& perturb) const {
    EpisodeResult out;
    out.id = original.id;
    std::mt19937_64 rng(derive_seed(perturb.seed, detail::id_hash(original.id)));
    const Episode e = perturb.support_count > 0 ? split_supports(original, perturb.support_count, rng) : original;
    auto supports = e.labeled_supports();
    detail::flip_labels(supports, perturb.flips_per_class, rng);
    std::vector<FeatureVector> queries;
    for (const auto& q : e.queries) queries.push_back(q.features);
    normalize(supports, queries);

    try {
      std::function<double(const FeatureVector&)> score;
      switch (spec_.method) {
        case Method::knn:
          score = [&](const FeatureVector& q) {
            return knn_classify(supports, q, std::min(spec_.k, supports.size() - (supports.size() % 2 == 0 ? 1 : 0))) ==
                           Label::positive
                       ? 1.0
                       : -1.0;
          };
          break;
        case Method::prototype: {
          auto pp = prototype_fit(supports);
          score = [pp](const FeatureVector& q) { return prototype_classify(pp, q).score; };
          break;
        }
        case Method::svm: {
          SvmOptions opt;
          opt.C = spec_.C;
          auto h = svm_fit(supports, opt);
          score = [h](const FeatureVector& q) { return margin_score(h, q); };
          break;
        }
        case Method::prototype_mimic:
        case Method::svm_mimic: {
          auto t = predict_targets(*model_, supports);
          score = [t](const FeatureVector& q) { return mimic_classify(t, q).score; };
          break;
        }
      }
      for (std::size_t i = 0; i < queries.size(); ++i) {
        const double s = score(queries[i]);
        out.scores.push_back(s);
        out.correct.push_back(label_from_score(s) == e.queries[i].label);
      }
    } catch (const SvmError&) {
      out.skipped = true;
      out.scores.clear();
      out.correct.clear();
    } catch (const DomainError&) {
      out.skipped = true;
      out.scores.clear();
      out.correct.clear();
    }
    return out;
  }

  const MethodSpec& spec() const { return spec_; }

 private:
  // Queries always use statistics computed from the supports (or the train split), never their own.
  void normalize(std::vector<LabeledVector>& supports, std::vector<FeatureVector>& queries) const {
    auto apply = [&](auto&& fn) {
      for (auto& s : supports) s.features = fn(s.features);
      for (auto& q : queries) q = fn(q);
    };
    auto support_standardize = [&] {
      std::vector<FeatureVector> fs;
      for (const auto& s : supports) fs.push_back(s.features);
      const auto st = support_stats(fs);
      apply([&](const FeatureVector& f) { return standardize(f, st); });
    };
    auto l2 = [&] { apply([](const FeatureVector& f) { return l2_normalize(f); }); };
    switch (spec_.normalization) {
      case Normalization::none: break;
      case Normalization::l2: l2(); break;
      case Normalization::support_standardize: support_standardize(); break;
      case Normalization::trainset_standardize:
        apply([&](const FeatureVector& f) { return standardize(f, *train_stats_); });
        break;
      case Normalization::l2_then_support_standardize:
        l2();
        support_standardize();
        break;
      case Normalization::support_standardize_then_l2:
        support_standardize();
        l2();
        break;
    }
  }

  MethodSpec spec_;
  const Dataset& data_;
  const MimicModel* model_;
  std::optional<NormStats> train_stats_;
};

inline EvalReport evaluate(const MethodSpec& method, const Dataset& d, std::string_view split, const MimicModel* model = nullptr,
                           const Perturbation& perturb = {}) {
  return Evaluator(method, d, model).evaluate(split, perturb);
}

enum class SweepAxis { support_count, label_noise };

inline std::string_view axis_name(SweepAxis a) { return a == SweepAxis::support_count ? "support_count" : "label_noise"; }
inline SweepAxis parse_axis(std::string_view s) {
  if (s == "support_count") return SweepAxis::support_count;
  if (s == "label_noise") return SweepAxis::label_noise;
  throw DomainError("unknown sweep axis '" + std::string(s) + "'");
}

struct SweepPoint {
  std::size_t level = 0;
  std::vector<double> accuracies;  // one per repeat

  double mean() const;
  double stddev() const;
};

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Sample standard deviation (n − 1); zero for fewer than two values.
inline double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double SweepPoint::mean() const { return mean_of(accuracies); }
inline double SweepPoint::stddev() const { return sample_stddev(accuracies); }

struct SweepTable {
  std::string method;
  std::string normalization;
  std::string split;
  SweepAxis axis = SweepAxis::support_count;
  std::vector<SweepPoint> points;
};

// Each level is evaluated `repeats` times with different random support subsets / flipped labels.
inline SweepTable robustness_sweep(const MethodSpec& method, const Dataset& d, std::string_view split, SweepAxis axis,
                                   std::span<const std::size_t> levels, const MimicModel* model = nullptr, int repeats = 3,
                                   std::uint64_t seed = 0) {
  const auto eps = d.split(split);
  if (eps.empty()) throw DomainError("sweep: split '" + std::string(split) + "' is empty");
  std::size_t k = eps.front()->shots();
  for (const auto* e : eps) k = std::min(k, e->shots());
  for (auto lv : levels) {
    if (axis == SweepAxis::support_count && (lv < 2 || lv > k))
      throw DomainError("sweep: support count " + std::to_string(lv) + " outside [2, " + std::to_string(k) + "]");
    if (axis == SweepAxis::label_noise && 2 * lv >= k)
      throw DomainError("sweep: flips per class " + std::to_string(lv) + " must be < K/2");
  }
  const Evaluator ev(method, d, model);
  SweepTable t{std::string(method_name(method.method)), std::string(normalization_name(method.normalization)),
               std::string(split), axis, {}};
  for (auto lv : levels) {
    SweepPoint p{lv, {}};
    for (int r = 0; r < repeats; ++r) {
      Perturbation pert;
      pert.seed = derive_seed(seed, 0x5A, static_cast<std::uint64_t>(r));
      if (axis == SweepAxis::support_count) pert.support_count = lv;
      else pert.flips_per_class = lv;
      p.accuracies.push_back(ev.evaluate(split, pert).accuracy());
    }
    t.points.push_back(std::move(p));
  }
  return t;
}

// One row per (method, normalization, split), aggregated over repeated runs (e.g. seeds).
struct ReportRow {
  std::string method;
  std::string normalization;
  std::string split;
  std::vector<double> accuracies;
  long queries = 0;
  long skipped = 0;

  double mean() const { return mean_of(accuracies); }
  double stddev() const { return sample_stddev(accuracies); }
};

inline std::vector<ReportRow> aggregate(std::span<const EvalReport> reports) {
  std::vector<ReportRow> rows;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const ReportRow& row) {
      return row.method == r.method && row.normalization == r.normalization && row.split == r.split;
    });
    if (it == rows.end()) {
      rows.push_back({r.method, r.normalization, r.split, {}, 0, 0});
      it = std::prev(rows.end());
    }
    it->accuracies.push_back(r.accuracy());
    it->queries += r.total;
    it->skipped += r.skipped_episodes;
  }
  return rows;
}

namespace detail {
inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
inline std::string fmt_pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}
}  // namespace detail

inline constexpr std::string_view kReportCsvHeader = "method,normalization,split,runs,accuracy_mean,accuracy_std,queries,skipped_episodes";

inline std::string report_csv(std::span<const ReportRow> rows) {
  std::string out(kReportCsvHeader);
  out += '\n';
  for (const auto& r : rows)
    out += r.method + "," + r.normalization + "," + r.split + "," + std::to_string(r.accuracies.size()) + "," +
           detail::fmt_num(r.mean()) + "," + detail::fmt_num(r.stddev()) + "," + std::to_string(r.queries) + "," +
           std::to_string(r.skipped) + "\n";
  return out;
}

inline std::string report_markdown(std::span<const ReportRow> rows) {
  std::string out = "| Method | Normalization | Split | Runs | Accuracy (%) | Queries | Skipped |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    out += "| " + r.method + " | " + r.normalization + " | " + r.split + " | " + std::to_string(r.accuracies.size()) + " | " +
           detail::fmt_pct(r.mean()) + " ± " + detail::fmt_pct(r.stddev()) + " | " + std::to_string(r.queries) + " | " +
           std::to_string(r.skipped) + " |\n";
  return out;
}

struct ParsedReportRow {
  std::string method, normalization, split;
  std::size_t runs = 0;
  double mean = 0.0, stddev = 0.0;
  long queries = 0, skipped = 0;
};

inline std::vector<ParsedReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != kReportCsvHeader) throw Error("report csv: unexpected header");
  std::vector<ParsedReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw Error("report csv: expected 8 columns");
    rows.push_back({f[0], f[1], f[2], std::stoul(f[3]), std::stod(f[4]), std::stod(f[5]), std::stol(f[6]), std::stol(f[7])});
  }
  return rows;
}

inline std::string sweep_csv(const SweepTable& t) {
  std::string out = "method,normalization,split,axis,level,runs,accuracy_mean,accuracy_std\n";
  for (const auto& p : t.points)
    out += t.method + "," + t.normalization + "," + t.split + "," + std::string(axis_name(t.axis)) + "," +
           std::to_string(p.level) + "," + std::to_string(p.accuracies.size()) + "," + detail::fmt_num(p.mean()) + "," +
           detail::fmt_num(p.stddev()) + "\n";
  return out;
}

inline std::string sweep_markdown(const SweepTable& t) {
  std::string out = "| Method | Normalization | Split | " + std::string(axis_name(t.axis)) + " | Accuracy (%) |\n|---|---|---|---|---|\n";
  for (const auto& p : t.points)
    out += "| " + t.method + " | " + t.normalization + " | " + t.split + " | " + std::to_string(p.level) + " | " +
           detail::fmt_pct(p.mean()) + " ± " + detail::fmt_pct(p.stddev()) + " |\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// Writes report.csv and report.md under `dir`.
inline void report(std::span<const EvalReport> results, const std::filesystem::path& dir) {
  if (results.empty()) throw DomainError("report: no results");
  std::filesystem::create_directories(dir);
  const auto rows = aggregate(results);
  write_text(dir / "report.csv", report_csv(rows));
  write_text(dir / "report.md", report_markdown(rows));
}

// Per-query scores in a stable order (split order, then query order).
inline std::string scores_csv(const EvalReport& r) {
  std::string out = "episode,query,score,correct\n";
  for (const auto& e : r.episodes) {
    if (e.skipped) {
      out += e.id + ",,,skipped\n";
      continue;
    }
    for (std::size_t i = 0; i < e.scores.size(); ++i)
      out += e.id + "," + std::to_string(i) + "," + detail::fmt_num(e.scores[i]) + "," + (e.correct[i] ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace bongard
