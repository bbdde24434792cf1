#include <gtest/gtest.h>

#include "bongard/mimic.hpp"
#include "bongard/optim.hpp"
#include "bongard/synthetic.hpp"
#include "helpers.hpp"

using namespace bongard;
using testing_util::randn;
using testing_util::random_episode;

namespace {

MimicModel make_model(MimicMode mode, Index d, std::mt19937_64& rng, int depth = 2, int heads = 2, int head_dim = 4) {
  MimicConfig c;
  c.mode = mode;
  c.depth = depth;
  c.heads = heads;
  c.head_dim = head_dim;
  c.token_dim = d;
  c.mlp_dim = d;
  c.embed_init_std = 0.5;
  MimicModel m(c);
  m.init(rng);
  std::normal_distribution<double> nd(0.0, 0.05);
  for (auto& v : m.params().data()) v += nd(rng);
  return m;
}

FeatureVector v2(double a, double b) { return FeatureVector{{a, b}}; }

}  // namespace

TEST(StudentInput, TokenCountAndIndicators) {
  std::mt19937_64 rng(1);
  auto m = make_model(MimicMode::svm_mimic, 5, rng);
  const auto e = random_episode(5, 6, rng);
  auto sup = e.labeled_supports();
  const Matrix t = assemble_student_input(m, sup);
  EXPECT_EQ(t.rows(), 13);
  m.indicator_pos().setZero();
  m.indicator_neg().setZero();
  const Matrix z = assemble_student_input(m, sup);
  for (Index i = 0; i < 12; ++i) EXPECT_EQ(z.row(i).transpose(), sup[static_cast<std::size_t>(i)].features);
}

TEST(StudentInput, FlippingOneLabelChangesOneToken) {
  std::mt19937_64 rng(2);
  auto m = make_model(MimicMode::prototype_mimic, 4, rng);
  const auto e = random_episode(4, 3, rng);
  auto sup = e.labeled_supports();
  const Matrix a = assemble_student_input(m, sup);
  sup[1].label = Label::negative;
  const Matrix b = assemble_student_input(m, sup);
  EXPECT_EQ(a.rows(), 8);
  for (Index i = 0; i < a.rows(); ++i) {
    if (i == 1) {
      const Eigen::RowVectorXd diff = m.indicator_pos().row(0) - m.indicator_neg().row(0);
      EXPECT_LT((a.row(i) - b.row(i) - diff).cwiseAbs().maxCoeff(), 1e-15);
    } else {
      EXPECT_EQ(a.row(i), b.row(i));
    }
  }
}

TEST(StudentInput, DimensionChecked) {
  std::mt19937_64 rng(3);
  auto m = make_model(MimicMode::svm_mimic, 4, rng);
  std::vector<LabeledVector> sup = {{FeatureVector::Zero(5), Label::positive}};
  EXPECT_THROW(assemble_student_input(m, sup), DimensionError);
}

TEST(PredictTargets, ShapesAndDeterminism) {
  std::mt19937_64 rng(4);
  const auto e = random_episode(6, 4, rng);
  const auto sup = e.labeled_supports();
  auto pm = make_model(MimicMode::prototype_mimic, 6, rng);
  const auto tp = predict_targets(pm, sup);
  EXPECT_EQ(tp.protos.p.size(), 6);
  EXPECT_EQ(tp.protos.n.size(), 6);
  auto sm = make_model(MimicMode::svm_mimic, 6, rng);
  const auto a = predict_targets(sm, sup), b = predict_targets(sm, sup);
  EXPECT_EQ(a.h.size(), 7);
  EXPECT_EQ(a.h, b.h);
}

TEST(PredictTargets, InvariantToSupportPermutation) {
  std::mt19937_64 rng(5);
  for (auto mode : {MimicMode::prototype_mimic, MimicMode::svm_mimic}) {
    auto m = make_model(mode, 8, rng, 3, 2, 4);
    const auto e = random_episode(8, 6, rng);
    auto sup = e.labeled_supports();
    const auto base = predict_targets(m, sup);
    for (int r = 0; r < 20; ++r) {
      std::shuffle(sup.begin(), sup.end(), rng);
      const auto t = predict_targets(m, sup);
      if (mode == MimicMode::svm_mimic) {
        EXPECT_LT((t.h - base.h).cwiseAbs().maxCoeff(), 1e-8);
      } else {
        EXPECT_LT((t.protos.p - base.protos.p).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((t.protos.n - base.protos.n).cwiseAbs().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(MimicLoss, PrototypeExamples) {
  const auto p = v2(1, 2), n = v2(-3, 1);
  EXPECT_NEAR(mimic_loss_prototype(p, n, p, n), 0.0, 1e-15);
  EXPECT_NEAR(mimic_loss_prototype(v2(-2, 1), v2(1, 3), p, n), 2.0, 1e-15);
  EXPECT_NEAR(mimic_loss_prototype(-p, -n, p, n), 4.0, 1e-15);
  EXPECT_THROW(mimic_loss_prototype(v2(0, 0), n, p, n), DomainError);
}

TEST(MimicLoss, SvmExamplesAndScaleInvariance) {
  std::mt19937_64 rng(6);
  const FeatureVector h{{1.0, -2.0, 0.5}};
  EXPECT_NEAR(mimic_loss_svm(h, h), 0.0, 1e-15);
  EXPECT_NEAR(mimic_loss_svm(2 * h, h), 0.0, 1e-15);
  EXPECT_NEAR(mimic_loss_svm(FeatureVector{{2.0, 1.0, 0.0}}, h), 1.0, 1e-15);
  for (int t = 0; t < 50; ++t) {
    const auto a = randn(5, rng), b = randn(5, rng);
    EXPECT_NEAR(mimic_loss_svm(3.7 * a, 0.2 * b), mimic_loss_svm(a, b), 1e-14);
  }
}

TEST(Teacher, PrototypesUseQueries) {
  std::mt19937_64 rng(7);
  const auto e = random_episode(5, 6, rng);
  const auto pp = teacher_prototypes(e);
  FeatureVector sp = FeatureVector::Zero(5), sn = FeatureVector::Zero(5);
  for (const auto& f : e.positives) sp += f;
  for (const auto& f : e.negatives) sn += f;
  for (const auto& q : e.queries) (q.label == Label::positive ? sp : sn) += q.features;
  EXPECT_LT((pp.p - sp / 7).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((pp.n - sn / 7).cwiseAbs().maxCoeff(), 1e-12);
  auto no_q = e;
  no_q.queries.clear();
  const auto a = teacher_prototypes(no_q), b = prototype_fit(no_q);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.n, b.n);
}

TEST(Teacher, SymmetricPairHyperplane) {
  Episode e;
  e.positives = {FeatureVector{{1.0, 0.0, 0.0}}};
  e.negatives = {FeatureVector{{-1.0, 0.0, 0.0}}};
  const auto h = teacher_hyperplane(e);
  ASSERT_EQ(h.size(), 4);
  EXPECT_GT(h[0], 0);
  EXPECT_NEAR(h[1], 0, 1e-12);
  EXPECT_NEAR(h[2], 0, 1e-12);
  EXPECT_NEAR(h[3], 0, 1e-9);
}

TEST(Teacher, FarPositiveQueryLeavesSolutionUnchanged) {
  Episode e;
  e.positives = {v2(2, 0), v2(2, 1)};
  e.negatives = {v2(0, 0), v2(0, 1)};
  const auto h0 = teacher_hyperplane(e);
  e.queries.push_back({v2(10, 0.5), Label::positive});
  const auto h1 = teacher_hyperplane(e);
  EXPECT_LT((h0 - h1).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Teacher, FiniteNonzeroOnSyntheticTrainSplit) {
  EpisodeSpec spec;
  spec.splits = {{"train", 300, 64}};
  const auto data = generate_dataset(spec);
  for (const auto& e : data.features.episodes) {
    const auto h = teacher_hyperplane(standardize_episode(e));
    EXPECT_TRUE(h.allFinite());
    EXPECT_GT(h.head(h.size() - 1).norm(), 0.0);
  }
}

TEST(SupportDropout, KTwoKeepsAll) {
  std::mt19937_64 rng(8);
  const auto e = random_episode(3, 2, rng);
  for (int t = 0; t < 20; ++t) {
    const auto d = support_dropout(e, rng);
    EXPECT_EQ(d.positives, e.positives);
    EXPECT_EQ(d.negatives, e.negatives);
  }
}

TEST(SupportDropout, UniformOverCounts) {
  std::mt19937_64 rng(9);
  const auto e = random_episode(3, 6, rng);
  std::array<int, 7> counts{};
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const auto d = support_dropout(e, rng);
    ASSERT_EQ(d.positives.size(), d.negatives.size());
    ++counts[d.positives.size()];
  }
  for (int m = 2; m <= 6; ++m) EXPECT_NEAR(counts[static_cast<std::size_t>(m)] / static_cast<double>(n), 0.2, 0.02);
}

TEST(LabelNoise, GateOffIsIdentity) {
  std::mt19937_64 rng(10);
  const auto sup = random_episode(3, 6, rng).labeled_supports();
  const auto out = apply_label_noise(sup, rng, false);
  for (std::size_t i = 0; i < sup.size(); ++i) EXPECT_EQ(out[i].label, sup[i].label);
}

TEST(LabelNoise, ExactlyOnePerClassAndUniform) {
  std::mt19937_64 rng(11);
  const auto sup = random_episode(3, 6, rng).labeled_supports();
  std::vector<int> flips(sup.size(), 0);
  const int n = 12000;
  for (int t = 0; t < n; ++t) {
    const auto out = apply_label_noise(sup, rng, true);
    int from_pos = 0, from_neg = 0;
    for (std::size_t i = 0; i < sup.size(); ++i)
      if (out[i].label != sup[i].label) {
        ++flips[i];
        (sup[i].label == Label::positive ? from_pos : from_neg)++;
        EXPECT_EQ(out[i].features, sup[i].features);
      }
    ASSERT_EQ(from_pos, 1);
    ASSERT_EQ(from_neg, 1);
  }
  for (int f : flips) EXPECT_NEAR(f / static_cast<double>(n), 1.0 / 6.0, 0.02);
}

TEST(MimicClassify, Examples) {
  MimicTargets t;
  t.mode = MimicMode::svm_mimic;
  t.h = FeatureVector{{3.0, 4.0, 0.0}};
  const auto p = mimic_classify(t, v2(1, 1));
  EXPECT_DOUBLE_EQ(p.score, 1.4);
  EXPECT_EQ(p.label, Label::positive);
  MimicTargets pt;
  pt.mode = MimicMode::prototype_mimic;
  pt.protos = {v2(1, 0), v2(-1, 0)};
  const auto tie = mimic_classify(pt, v2(0, 1));
  EXPECT_EQ(tie.score, 0.0);
  EXPECT_EQ(tie.label, Label::positive);
}

TEST(MimicClassify, PositiveSideQueryScoresPositive) {
  // A query well inside the positive class of a separable episode gets a positive score from the teacher rule.
  EpisodeSpec spec;
  spec.noise = 0.0;
  spec.splits = {{"test", 20, 4}};
  const auto data = generate_dataset(spec);
  for (const auto& e : data.features.episodes) {
    const auto s = standardize_episode(e);
    MimicTargets t = teacher_targets(MimicMode::svm_mimic, s);
    EXPECT_GT(mimic_classify(t, s.positives[0]).score, 0.0);
  }
}

TEST(MimicGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (auto mode : {MimicMode::prototype_mimic, MimicMode::svm_mimic}) {
    for (int trial = 0; trial < 3; ++trial) {
      auto m = make_model(mode, 8, rng, 2, 2, 4);
      const auto e = standardize_episode(random_episode(8, 3, rng));
      auto sup = apply_label_noise(e.labeled_supports(), rng, trial == 1);
      const auto teacher = teacher_targets(mode, e);
      LossFn f = [&](std::span<const double> p, std::span<double> g) { return mimic_loss_and_grad(m, p, sup, teacher, g); };
      const auto r = gradient_check(f, m.params().data(), m.params().size(), rng);
      EXPECT_LT(r.max_rel_error, 1e-6) << mode_name(mode) << " worst index " << r.worst_index;
    }
  }
}

TEST(MimicGradient, GradIsOverwrittenNotAccumulated) {
  std::mt19937_64 rng(13);
  auto m = make_model(MimicMode::svm_mimic, 4, rng, 1, 1, 4);
  const auto e = standardize_episode(random_episode(4, 3, rng));
  const auto teacher = teacher_targets(MimicMode::svm_mimic, e);
  std::vector<double> g1(m.params().size(), 0.0), g2(m.params().size(), 123.0);
  mimic_loss_and_grad(m, m.params().data(), e.labeled_supports(), teacher, g1);
  mimic_loss_and_grad(m, m.params().data(), e.labeled_supports(), teacher, g2);
  EXPECT_EQ(g1, g2);
}

TEST(MimicTeacher, NoiseDoesNotTouchTeacher) {
  std::mt19937_64 rng(14);
  const auto e = standardize_episode(random_episode(5, 6, rng));
  const auto clean = teacher_targets(MimicMode::svm_mimic, e);
  apply_label_noise(e.labeled_supports(), rng, true);
  EXPECT_EQ(teacher_targets(MimicMode::svm_mimic, e).h, clean.h);
}
