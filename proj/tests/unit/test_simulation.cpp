#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fpcd/metrics.hpp"
#include "fpcd/simulation.hpp"

using namespace fpcd;

namespace {
Fingerprint ten_features() {
  Fingerprint fp;
  for (int i = 0; i < 10; ++i) fp.set(FeatureId("ap" + std::to_string(i)), -40.0 - 5.0 * i);
  return fp;
}

std::size_t count(const ChangeLabels& l, ChangeKind k) {
  return static_cast<std::size_t>(std::count_if(l.begin(), l.end(), [&](const auto& x) { return x.kind == k; }));
}

std::size_t changed(const ChangeLabels& l) {
  return static_cast<std::size_t>(
      std::count_if(l.begin(), l.end(), [](const auto& x) { return x.status == ChangeStatus::changed; }));
}
}  // namespace

TEST(PathLoss, ClosedFormWithoutShadowing) {
  PropagationScenario s;
  s.shadowing_sigma = 0.0;
  s.access_points = {{FeatureId("ap"), {0.0, 0.0}}};
  const Point2 p{3.0, 4.0};
  const double hand = -40.0 - 30.0 * std::log10(5.0);
  EXPECT_NEAR(path_loss_rss(s, s.access_points[0], p), hand, 1e-12);
  EXPECT_NEAR(*measure(s, p, nullptr).get(FeatureId("ap")), hand, 1e-12);
}

TEST(PathLoss, CoLocatedPointHearsTheReferencePower) {
  PropagationScenario s;
  s.access_points = {{FeatureId("ap"), {2.0, 2.0}}};
  EXPECT_EQ(path_loss_rss(s, s.access_points[0], {2.0, 2.0}), s.ref_power_dbm);
  EXPECT_EQ(path_loss_rss(s, s.access_points[0], {2.5, 2.0}), s.ref_power_dbm);
}

TEST(PathLoss, WallsAttenuateCrossingLinks) {
  PropagationScenario s;
  s.access_points = {{FeatureId("ap"), {0.0, 0.0}}};
  s.walls = {{{5.0, -10.0}, {5.0, 10.0}, 7.0}};
  const double open = -40.0 - 30.0 * std::log10(4.0);
  EXPECT_NEAR(path_loss_rss(s, s.access_points[0], {4.0, 0.0}), open, 1e-12);
  EXPECT_NEAR(path_loss_rss(s, s.access_points[0], {6.0, 0.0}), -40.0 - 30.0 * std::log10(6.0) - 7.0, 1e-12);
}

TEST(GenerateScenario, RejectsInvalidScenarios) {
  PropagationScenario s;
  EXPECT_THROW(generate_scenario(s), InvalidInput);
  s = default_scenario(1);
  s.exponent = 0.0;
  EXPECT_THROW(generate_scenario(s), InvalidInput);
  s = default_scenario(1);
  s.shadowing_sigma = -1.0;
  EXPECT_THROW(generate_scenario(s), InvalidInput);
}

TEST(GenerateScenario, DeterministicForAFixedSeed) {
  const auto a = generate_scenario(default_scenario(9));
  const auto b = generate_scenario(default_scenario(9));
  ASSERT_EQ(a.training.size(), b.training.size());
  ASSERT_EQ(a.validation.size(), b.validation.size());
  for (std::size_t i = 0; i < a.training.size(); ++i) {
    EXPECT_EQ(a.training.samples()[i].location, b.training.samples()[i].location);
    EXPECT_EQ(a.training.samples()[i].fingerprint, b.training.samples()[i].fingerprint);
  }
  const auto c = generate_scenario(default_scenario(10));
  EXPECT_FALSE(a.training.samples()[0].fingerprint == c.training.samples()[0].fingerprint);
}

TEST(GenerateScenario, SplitAndValueRange) {
  const auto s = default_scenario(3);
  const auto survey = generate_scenario(s);
  const auto total = survey.training.size() + survey.validation.size();
  EXPECT_EQ(total, 31u * 21u);
  EXPECT_NEAR(static_cast<double>(survey.training.size()) / static_cast<double>(total), 0.75, 0.01);
  double heard = 0.0;
  for (const auto& lf : survey.training.samples()) {
    heard += static_cast<double>(lf.fingerprint.size());
    for (const auto& e : lf.fingerprint) {
      EXPECT_GE(e.rss, s.sensitivity_dbm);
      EXPECT_LE(e.rss, 0.0);
    }
  }
  heard /= static_cast<double>(survey.training.size());
  EXPECT_GE(heard, 8.0);
  EXPECT_LE(heard, 12.0);
}

TEST(InjectChanges, NoChangeSpecIsIdentity) {
  const auto fp = ten_features();
  const auto r = inject_changes(fp, ChangeSpec{0.0, 0.0, -15.0, 1}, 0);
  EXPECT_EQ(r.fingerprint, fp);
  ASSERT_EQ(r.labels.size(), 10u);
  for (const auto& l : r.labels) EXPECT_EQ(l.status, ChangeStatus::stable);
}

TEST(InjectChanges, HalfMissing) {
  const auto r = inject_changes(ten_features(), ChangeSpec{0.5, 0.0, -15.0, 1}, 4);
  EXPECT_EQ(r.fingerprint.size(), 5u);
  EXPECT_EQ(changed(r.labels), 5u);
  EXPECT_EQ(count(r.labels, ChangeKind::missing), 5u);
}

TEST(InjectChanges, MissingAndShiftedAreDisjoint) {
  const auto fp = ten_features();
  const auto r = inject_changes(fp, ChangeSpec{0.2, 0.3, -10.0, 1}, 7);
  EXPECT_EQ(count(r.labels, ChangeKind::missing), 2u);
  EXPECT_EQ(count(r.labels, ChangeKind::shifted), 3u);
  EXPECT_EQ(r.fingerprint.size(), 8u);
  for (const auto& l : r.labels) {
    const auto before = *fp.get(l.id);
    const auto after = r.fingerprint.get(l.id);
    switch (l.kind) {
      case ChangeKind::missing: EXPECT_FALSE(after.has_value()); break;
      case ChangeKind::shifted: EXPECT_EQ(*after, before - 10.0); break;
      case ChangeKind::none: EXPECT_EQ(*after, before); break;
    }
  }
}

TEST(InjectChanges, CeilingCounts) {
  Fingerprint fp;
  for (int i = 0; i < 7; ++i) fp.set(FeatureId("f" + std::to_string(i)), -60.0);
  const auto r = inject_changes(fp, ChangeSpec{0.1, 0.2, 5.0, 2}, 0);
  EXPECT_EQ(count(r.labels, ChangeKind::missing), 1u);  // ceil(0.7)
  EXPECT_EQ(count(r.labels, ChangeKind::shifted), 2u);  // ceil(1.4)
}

TEST(InjectChanges, ShiftBelowTheFloorBecomesMissing) {
  const Fingerprint fp{{"weak", -100}};
  const auto r = inject_changes(fp, ChangeSpec{0.0, 0.5, -15.0, 1}, 0);
  ASSERT_EQ(r.labels.size(), 1u);
  EXPECT_EQ(r.labels[0].status, ChangeStatus::changed);
  EXPECT_EQ(r.labels[0].kind, ChangeKind::missing);
  EXPECT_TRUE(r.fingerprint.empty());
}

TEST(InjectChanges, PositiveShiftsClipAtZero) {
  const Fingerprint fp{{"loud", -3}};
  const auto r = inject_changes(fp, ChangeSpec{0.0, 0.5, 15.0, 1}, 0);
  EXPECT_EQ(*r.fingerprint.get(FeatureId("loud")), 0.0);
}

TEST(InjectChanges, InvalidSpecs) {
  const auto fp = ten_features();
  EXPECT_THROW(inject_changes(fp, ChangeSpec{0.6, 0.0, -15.0, 1}, 0), InvalidInput);
  EXPECT_THROW(inject_changes(fp, ChangeSpec{0.3, 0.3, -15.0, 1}, 0), InvalidInput);
  EXPECT_THROW(inject_changes(fp, ChangeSpec{-0.1, 0.0, -15.0, 1}, 0), InvalidInput);
}

TEST(InjectChanges, DeterministicPerDrawIndex) {
  const auto fp = ten_features();
  const ChangeSpec spec{0.3, 0.2, -15.0, 11};
  const auto a = inject_changes(fp, spec, 3);
  const auto b = inject_changes(fp, spec, 3);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  std::set<std::vector<FeatureId>> distinct;
  for (std::uint64_t j = 0; j < 20; ++j) distinct.insert(inject_changes(fp, spec, j).fingerprint.keys());
  EXPECT_GT(distinct.size(), 1u);
}

TEST(InjectChanges, SharedModeChangesTheSameFeaturesEverywhere) {
  FeatureRegistry reg;
  for (int i = 0; i < 10; ++i) reg.add(FeatureId("ap" + std::to_string(i)));
  const ChangeSpec spec{0.3, 0.0, -15.0, 5, ChangeMode::shared};
  const auto a = inject(ten_features(), spec, 0, reg);
  const auto b = inject(ten_features(), spec, 17, reg);
  EXPECT_EQ(a.fingerprint.keys(), b.fingerprint.keys());
  EXPECT_EQ(a.fingerprint.size(), 7u);
}

TEST(ChangeGrid, CoversEveryTupleUpToHalf) {
  const auto g = change_grid(0);
  // 21 (m, s) pairs on the 10 % lattice with m + s <= 0.5, times six shifts
  EXPECT_EQ(g.size(), 21u * 6u);
  for (const auto& s : g) {
    EXPECT_LE(s.missing_ratio + s.shift_ratio, 0.5 + 1e-12);
    EXPECT_NO_THROW(s.validate());
  }
}

TEST(SmoothValidation, CoLocatedPointReproducesTrainingWithoutRidge) {
  std::vector<LabeledFingerprint> train;
  for (int i = 0; i < 4; ++i) {
    LabeledFingerprint lf;
    lf.location = {2.0 * i, 0.0};
    lf.fingerprint = Fingerprint{{"a", -50.0 - 3 * i}, {"b", -70.0 + 2 * i}};
    train.push_back(lf);
  }
  const KernelSmoother ks(RfmTrainingSet(train), KernelParams{1.0, 1.0, 0.0}, QueryConfig{});
  LabeledFingerprint v;
  v.location = {4.0, 0.0};
  v.fingerprint = Fingerprint{{"a", -20}, {"b", -20}};
  const auto out = smooth_validation({v}, ks);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(*out[0].fingerprint.get(FeatureId("a")), -56.0, 1e-6);
  EXPECT_NEAR(*out[0].fingerprint.get(FeatureId("b")), -66.0, 1e-6);
}

TEST(SmoothValidation, ResmoothingIsAFixedPointAtTrainingLocations) {
  const auto s = default_scenario(5);
  const auto survey = generate_scenario(s);
  const KernelParams kp{2.0, 1.0, 0.0};
  const KernelSmoother ks(survey.training, kp, QueryConfig{2.0});
  const auto once = smooth_samples(survey.training.samples(), ks);
  const KernelSmoother ks2(once, kp, QueryConfig{2.0});
  const auto twice = smooth_samples(once.samples(), ks2);
  ASSERT_EQ(once.size(), twice.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < once.size(); ++i)
    for (const auto& e : once.samples()[i].fingerprint) {
      const auto v = twice.samples()[i].fingerprint.get(e.id);
      ASSERT_TRUE(v.has_value());
      worst = std::max(worst, std::abs(*v - e.rss));
    }
  EXPECT_LT(worst, 0.1);
}

TEST(ReadingNoise, DeterministicAndScaledByTheModel) {
  const auto fp = ten_features();
  const VariabilityModel m{0.0, 2.0, 0.5};
  EXPECT_EQ(add_reading_noise(fp, m, 4, 2), add_reading_noise(fp, m, 4, 2));
  double ss = 0.0;
  std::size_t n = 0;
  for (std::uint64_t j = 0; j < 400; ++j) {
    const auto noisy = add_reading_noise(fp, m, 4, j, -200.0);
    for (const auto& e : noisy) {
      const double d = e.rss - *fp.get(e.id);
      ss += d * d;
      ++n;
    }
  }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 2.0, 0.1);
}
