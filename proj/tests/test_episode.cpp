#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "bongard/episode_io.hpp"
#include "helpers.hpp"

using namespace bongard;
using testing_util::random_episode;

TEST(Validate, WellFormedEpisodePasses) {
  std::mt19937_64 rng(1);
  EXPECT_TRUE(validate_episode(random_episode(4, 6, rng)).ok());
}

TEST(Validate, ClassCountMismatch) {
  std::mt19937_64 rng(2);
  auto e = random_episode(4, 6, rng);
  e.negatives.pop_back();
  const auto r = validate_episode(e);
  EXPECT_TRUE(r.has(Violation::class_count_mismatch));
  EXPECT_FALSE(r.has(Violation::too_few_supports));
}

TEST(Validate, SingleSupportPerClass) {
  std::mt19937_64 rng(3);
  auto e = random_episode(4, 1, rng);
  EXPECT_TRUE(validate_episode(e).has(Violation::too_few_supports));
}

TEST(Validate, NoQueriesAndEmptyId) {
  std::mt19937_64 rng(4);
  auto e = random_episode(4, 3, rng);
  e.queries.clear();
  e.id.clear();
  const auto r = validate_episode(e);
  EXPECT_TRUE(r.has(Violation::no_queries));
  EXPECT_TRUE(r.has(Violation::empty_id));
  EXPECT_EQ(r.violations.size(), 2u);
}

TEST(Validate, DimensionAndFiniteness) {
  std::mt19937_64 rng(5);
  auto e = random_episode(4, 3, rng);
  e.queries[0].features = FeatureVector::Zero(5);
  e.positives[1][2] = std::numeric_limits<double>::quiet_NaN();
  const auto r = validate_episode(e);
  EXPECT_TRUE(r.has(Violation::dimension_mismatch));
  EXPECT_TRUE(r.has(Violation::non_finite_feature));
  EXPECT_TRUE(validate_episode(random_episode(4, 3, rng), 7).has(Violation::dimension_mismatch));
}

TEST(Dataset, DuplicateIdRejected) {
  std::mt19937_64 rng(6);
  Dataset d{4, {random_episode(4, 3, rng, 1, "a"), random_episode(4, 3, rng, 1, "a")}};
  EXPECT_THROW(validate_dataset(d), Error);
}

TEST(SplitSupports, FullCountIsIdentity) {
  std::mt19937_64 rng(7);
  const auto e = random_episode(5, 6, rng);
  const auto s = split_supports(e, 6, rng);
  ASSERT_EQ(s.positives.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s.positives[i], e.positives[i]);
    EXPECT_EQ(s.negatives[i], e.negatives[i]);
  }
}

TEST(SplitSupports, SubsetOfOriginalAndBalanced) {
  std::mt19937_64 rng(8);
  const auto e = random_episode(5, 6, rng);
  for (std::size_t m = 2; m <= 6; ++m) {
    const auto s = split_supports(e, m, rng);
    EXPECT_EQ(s.positives.size(), m);
    EXPECT_EQ(s.negatives.size(), m);
    for (const auto& f : s.positives)
      EXPECT_NE(std::find(e.positives.begin(), e.positives.end(), f), e.positives.end());
    EXPECT_EQ(s.queries.size(), e.queries.size());
  }
}

TEST(SplitSupports, OutOfRangeRejected) {
  std::mt19937_64 rng(9);
  const auto e = random_episode(5, 6, rng);
  EXPECT_THROW(split_supports(e, 1, rng), DomainError);
  EXPECT_THROW(split_supports(e, 7, rng), DomainError);
}

TEST(SampleWithoutReplacement, UniformOverSubsets) {
  // Every one of the C(4,2) = 6 pairs should appear ~1/6 of the time.
  std::mt19937_64 rng(10);
  std::map<std::vector<std::size_t>, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[sample_without_replacement(4, 2, rng)];
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [k, c] : counts) EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 6.0, 0.01);
}

TEST(EpisodeIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  Dataset d;
  d.dim = 7;
  for (int i = 0; i < 5; ++i) d.episodes.push_back(random_episode(7, 3, rng, 2, "ep" + std::to_string(i)));
  d.episodes[2].concept_id = "c3";
  d.episodes[1].queries[0].features[0] = 1e-300;
  std::stringstream ss;
  write_episode_stream(ss, d);
  const auto back = parse_episode_stream(ss);
  ASSERT_EQ(back.episodes.size(), d.episodes.size());
  EXPECT_EQ(back.dim, 7);
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    const auto& a = d.episodes[i];
    const auto& b = back.episodes[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.concept_id, b.concept_id);
    for (std::size_t j = 0; j < a.positives.size(); ++j) EXPECT_EQ(a.positives[j], b.positives[j]);
    for (std::size_t j = 0; j < a.negatives.size(); ++j) EXPECT_EQ(a.negatives[j], b.negatives[j]);
    for (std::size_t j = 0; j < a.queries.size(); ++j) {
      EXPECT_EQ(a.queries[j].features, b.queries[j].features);
      EXPECT_EQ(a.queries[j].label, b.queries[j].label);
    }
  }
}

TEST(EpisodeIo, EmptyFileIsAnError) {
  std::stringstream ss("\n  \n");
  EXPECT_THROW(parse_episode_stream(ss), Error);
}

TEST(EpisodeIo, DimensionMismatchReportsLine) {
  std::mt19937_64 rng(12);
  Dataset d{3, {random_episode(3, 2, rng, 1, "a"), random_episode(4, 2, rng, 1, "b")}};
  std::stringstream ss;
  write_episode_stream(ss, d);
  try {
    parse_episode_stream(ss);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos);
  }
}

TEST(EpisodeIo, BadLabelAndMalformedJson) {
  std::stringstream bad_label(
      R"({"id":"x","split":"t","positives":[[1],[2]],"negatives":[[3],[4]],"queries":[{"features":[1],"label":"yes"}]})");
  EXPECT_THROW(parse_episode_stream(bad_label), ParseError);
  std::stringstream malformed("{\"id\": ");
  EXPECT_THROW(parse_episode_stream(malformed), ParseError);
}

TEST(EpisodeIo, DuplicateIdsInFile) {
  std::mt19937_64 rng(13);
  Dataset d{3, {random_episode(3, 2, rng, 1, "same"), random_episode(3, 2, rng, 1, "same")}};
  std::stringstream ss;
  write_episode_stream(ss, d);
  EXPECT_THROW(parse_episode_stream(ss), ParseError);
}
