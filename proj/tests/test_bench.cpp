#include <gtest/gtest.h>

#include "bongard/bench.hpp"
#include "bongard/config.hpp"
#include "bongard/train.hpp"

using namespace bongard;

namespace {

Dataset corpus(std::uint64_t seed, int test_episodes = 150, double noise = 0.5) {
  EpisodeSpec spec;
  spec.noise = noise;
  spec.splits = {{"train", 50, 16}, {"test", test_episodes, 32}};
  spec.seed = seed;
  return generate_dataset(spec).features;
}

MethodSpec method(Method m, Normalization n) {
  MethodSpec s;
  s.method = m;
  s.normalization = n;
  return s;
}

}  // namespace

TEST(Evaluate, SvmOnNoiselessCorpusIsPerfect) {
  const auto d = corpus(1, 100, 0.0);
  EXPECT_EQ(evaluate(method(Method::svm, Normalization::support_standardize), d, "test").accuracy(), 1.0);
}

TEST(Evaluate, StandardizationBeatsRawPrototype) {
  const auto d = corpus(2, 300);
  const auto raw = evaluate(method(Method::prototype, Normalization::none), d, "test");
  const auto std = evaluate(method(Method::prototype, Normalization::support_standardize), d, "test");
  EXPECT_LT(raw.accuracy(), std.accuracy());
}

TEST(Evaluate, CountsMatchDataset) {
  const auto d = corpus(3, 40);
  for (auto n : {Normalization::none, Normalization::l2, Normalization::support_standardize, Normalization::trainset_standardize,
                 Normalization::l2_then_support_standardize, Normalization::support_standardize_then_l2})
    for (auto m : {Method::knn, Method::prototype, Method::svm}) {
      const auto r = evaluate(method(m, n), d, "test");
      EXPECT_EQ(r.total + 2 * r.skipped_episodes, 80);
      EXPECT_EQ(r.episodes.size(), 40u);
      EXPECT_GE(r.accuracy(), 0.0);
      EXPECT_LE(r.accuracy(), 1.0);
    }
}

TEST(Evaluate, ChanceLevelOnShuffledLabels) {
  EpisodeSpec spec;
  spec.splits = {{"test", 600, 32}};
  spec.seed = 4;
  const auto d = shuffle_query_labels(generate_dataset(spec).features, 9);
  for (auto m : {Method::knn, Method::prototype, Method::svm}) {
    const auto r = evaluate(method(m, Normalization::support_standardize), d, "test");
    ASSERT_GE(r.total, 1000);
    EXPECT_NEAR(r.accuracy(), 0.5, 0.03) << method_name(m);
  }
}

TEST(Evaluate, InvariantToEpisodeOrder) {
  auto d = corpus(5, 60);
  const auto m = method(Method::knn, Normalization::support_standardize);
  Perturbation p;
  p.support_count = 3;
  p.seed = 2;
  const auto a = evaluate(m, d, "test", nullptr, p);
  std::mt19937_64 rng(1);
  std::shuffle(d.episodes.begin(), d.episodes.end(), rng);
  const auto b = evaluate(m, d, "test", nullptr, p);
  EXPECT_EQ(a.correct, b.correct);
  EXPECT_EQ(a.total, b.total);
}

TEST(Evaluate, DeterministicReports) {
  const auto d = corpus(6, 30);
  const auto m = method(Method::svm, Normalization::support_standardize);
  Perturbation p;
  p.flips_per_class = 1;
  p.seed = 4;
  EXPECT_EQ(scores_csv(evaluate(m, d, "test", nullptr, p)), scores_csv(evaluate(m, d, "test", nullptr, p)));
}

TEST(Evaluate, MimicMethodNeedsModel) {
  const auto d = corpus(7, 5);
  EXPECT_THROW(evaluate(method(Method::svm_mimic, Normalization::support_standardize), d, "test"), DomainError);
  MimicConfig c;
  c.mode = MimicMode::prototype_mimic;
  c.depth = 1;
  c.heads = 1;
  c.head_dim = 4;
  MimicModel m(c);
  EXPECT_THROW(evaluate(method(Method::svm_mimic, Normalization::support_standardize), d, "test", &m), DomainError);
}

TEST(Evaluate, SolverFailureSkipsEpisode) {
  Dataset d;
  d.dim = 2;
  Episode bad;
  bad.id = "bad";
  bad.split = "test";
  bad.positives = {FeatureVector{{1.0, 0.0}}, FeatureVector{{1.0, 0.0}}};
  bad.negatives = bad.positives;
  bad.queries = {{FeatureVector{{1.0, 0.0}}, Label::positive}};
  d.episodes.push_back(bad);
  Episode good = bad;
  good.id = "good";
  good.negatives = {FeatureVector{{-1.0, 0.0}}, FeatureVector{{-1.0, 0.1}}};
  d.episodes.push_back(good);
  const auto r = evaluate(method(Method::svm, Normalization::none), d, "test");
  EXPECT_EQ(r.skipped_episodes, 1);
  EXPECT_EQ(r.total, 1);
  EXPECT_TRUE(r.episodes[0].skipped);
  EXPECT_EQ(r.accuracy(), 1.0);
}

TEST(Sweep, FullSupportLevelReproducesEvaluate) {
  const auto d = corpus(8, 50);
  const auto m = method(Method::svm, Normalization::support_standardize);
  const std::vector<std::size_t> levels = {6};
  const auto t = robustness_sweep(m, d, "test", SweepAxis::support_count, levels);
  const double acc = evaluate(m, d, "test").accuracy();
  ASSERT_EQ(t.points[0].accuracies.size(), 3u);
  for (double a : t.points[0].accuracies) EXPECT_EQ(a, acc);
  EXPECT_EQ(t.points[0].stddev(), 0.0);
  const std::vector<std::size_t> none = {0};
  const auto z = robustness_sweep(m, d, "test", SweepAxis::label_noise, none);
  EXPECT_EQ(z.points[0].mean(), acc);
}

TEST(Sweep, FewerSupportsNoBetterForSvm) {
  double at2 = 0, at6 = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto d = corpus(seed, 200);
    const std::vector<std::size_t> levels = {2, 6};
    const auto t = robustness_sweep(method(Method::svm, Normalization::support_standardize), d, "test", SweepAxis::support_count,
                                    levels, nullptr, 3, seed);
    at2 += t.points[0].mean();
    at6 += t.points[1].mean();
  }
  EXPECT_LE(at2, at6);
}

TEST(Sweep, InvalidLevelsRejected) {
  const auto d = corpus(9, 5);
  const auto m = method(Method::prototype, Normalization::support_standardize);
  for (std::size_t bad : {1u, 7u}) {
    const std::vector<std::size_t> lv = {bad};
    EXPECT_THROW(robustness_sweep(m, d, "test", SweepAxis::support_count, lv), DomainError);
  }
  const std::vector<std::size_t> three = {3};
  EXPECT_THROW(robustness_sweep(m, d, "test", SweepAxis::label_noise, three), DomainError);
}

TEST(Sweep, LabelNoiseFlipsOnePerClass) {
  Episode e;
  e.id = "x";
  e.split = "test";
  for (int i = 0; i < 4; ++i) {
    e.positives.push_back(FeatureVector::Constant(2, i + 1.0));
    e.negatives.push_back(FeatureVector::Constant(2, -i - 1.0));
  }
  std::mt19937_64 rng(1);
  auto sup = e.labeled_supports();
  detail::flip_labels(sup, 1, rng);
  int pos_to_neg = 0, neg_to_pos = 0;
  for (std::size_t i = 0; i < sup.size(); ++i) {
    if (i < 4 && sup[i].label == Label::negative) ++pos_to_neg;
    if (i >= 4 && sup[i].label == Label::positive) ++neg_to_pos;
  }
  EXPECT_EQ(pos_to_neg, 1);
  EXPECT_EQ(neg_to_pos, 1);
}

TEST(Report, SingleReportSingleRowRoundTrip) {
  const auto d = corpus(10, 20);
  std::vector<EvalReport> rs = {evaluate(method(Method::prototype, Normalization::l2), d, "test")};
  const auto rows = aggregate(rs);
  ASSERT_EQ(rows.size(), 1u);
  const auto parsed = parse_report_csv(report_csv(rows));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0].method, "prototype");
  EXPECT_EQ(parsed[0].normalization, "l2");
  EXPECT_EQ(parsed[0].split, "test");
  EXPECT_EQ(parsed[0].mean, rs[0].accuracy());
  EXPECT_EQ(parsed[0].stddev, 0.0);
  EXPECT_EQ(parsed[0].queries, rs[0].total);
}

TEST(Report, ThreeSeedsStdMatchesHandComputation) {
  std::vector<EvalReport> rs;
  for (long c : {7, 8, 10}) {
    EvalReport r;
    r.method = "svm";
    r.normalization = "support_standardize";
    r.split = "test";
    r.correct = c;
    r.total = 10;
    rs.push_back(r);
  }
  const auto rows = aggregate(rs);
  ASSERT_EQ(rows.size(), 1u);
  // values .7 .8 1.0: mean .8333…, sample variance ((−.1333)² + (−.0333)² + .1667²)/2 = .02333…
  EXPECT_NEAR(rows[0].mean(), 2.5 / 3, 1e-15);
  EXPECT_NEAR(rows[0].stddev(), std::sqrt(0.07 / 3), 1e-15);
  const auto parsed = parse_report_csv(report_csv(rows));
  EXPECT_EQ(parsed[0].runs, 3u);
  EXPECT_EQ(parsed[0].stddev, rows[0].stddev());
}

TEST(Report, RowsAndColumnsInStableOrder) {
  std::vector<EvalReport> rs(3);
  rs[0].method = "svm", rs[0].normalization = "none", rs[0].split = "test";
  rs[1].method = "knn", rs[1].normalization = "none", rs[1].split = "test";
  rs[2] = rs[0];
  const auto rows = aggregate(rs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "svm");
  EXPECT_EQ(rows[0].accuracies.size(), 2u);
  const auto md = report_markdown(rows);
  EXPECT_EQ(md.substr(0, md.find('\n')), "| Method | Normalization | Split | Runs | Accuracy (%) | Queries | Skipped |");
  EXPECT_THROW(report({}, std::filesystem::temp_directory_path()), DomainError);
}

TEST(Config, DefaultsAndOverrides) {
  const std::vector<std::string> ov = {"seed=5", "train.max_lr=0.001", "method.method=knn", "mimic.mode=prototype_mimic",
                                       "episode_spec.splits=[{\"name\":\"test\",\"episodes\":3,\"pool_size\":2}]"};
  const auto c = load_run_config("", ov);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.episode_spec.seed, 5u);
  EXPECT_EQ(c.train.max_lr, 0.001);
  EXPECT_EQ(c.method.method, Method::knn);
  EXPECT_EQ(c.mimic.mode, MimicMode::prototype_mimic);
  ASSERT_EQ(c.episode_spec.splits.size(), 1u);
  EXPECT_EQ(c.episode_spec.splits[0].episodes, 3);
}

TEST(Config, RoundTripAndErrors) {
  RunConfig c;
  c.seed = 3;
  c.train.batch_size = 16;
  c.method.normalization = Normalization::l2;
  c.episode_spec.seed = 3;
  c.train.seed = 3;
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  nlohmann::json j;
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(j, "a..b=1"), ConfigError);
  EXPECT_THROW(run_config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_THROW(load_run_config("", std::vector<std::string>{"method.normalization=zscore"}), DomainError);
  EXPECT_THROW(load_run_config("", std::vector<std::string>{"train.batch_size=\"x\""}), ConfigError);
}
