#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <vector>

#include "fpcd/rfm.hpp"
#include "fpcd/rng.hpp"

using namespace fpcd;

namespace {

LabeledFingerprint at(double x, double y, Fingerprint fp) {
  LabeledFingerprint lf;
  lf.location = {x, y};
  lf.fingerprint = std::move(fp);
  return lf;
}

KernelParams exact(double ls = 1.0) {
  KernelParams k;
  k.length_scale = ls;
  k.reg = 0.0;
  return k;
}

/// Independent kernel-ridge oracle: centred, dense Gram, full-pivot LU.
double oracle_predict(const std::vector<Point2>& pts, const std::vector<double>& vals, const Point2& q,
                      const KernelParams& k) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(vals.size());
  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd o(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
      const double r = std::sqrt(3.0) * d / k.length_scale;
      g(i, j) = k.amplitude * k.amplitude * (1 + r) * std::exp(-r);
    }
    const double d = std::hypot(pts[i].x - q.x, pts[i].y - q.y);
    const double r = std::sqrt(3.0) * d / k.length_scale;
    z(i) = k.amplitude * k.amplitude * (1 + r) * std::exp(-r);
    o(i) = vals[i] - mean;
  }
  g.diagonal().array() += k.reg;
  return mean + z.dot(g.fullPivLu().solve(o));
}

std::vector<LabeledFingerprint> smooth_field(double spacing, double w, double h) {
  std::vector<LabeledFingerprint> out;
  for (double y = 0; y <= h + 1e-9; y += spacing)
    for (double x = 0; x <= w + 1e-9; x += spacing)
      out.push_back(at(x, y, Fingerprint{{"f1", -60.0 + 4.0 * std::sin(x / 6.0) + 3.0 * std::cos(y / 7.0)}}));
  return out;
}

}  // namespace

TEST(Matern32, ValueAtZeroIsAmplitudeSquared) {
  KernelParams k;
  k.amplitude = 1.7;
  EXPECT_NEAR(matern32(0.0, k), 1.7 * 1.7, 1e-15);
}

TEST(Matern32, ValueAtOneLengthScale) {
  KernelParams k;
  k.length_scale = 2.5;
  const double oracle = (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0));
  EXPECT_NEAR(matern32(2.5, k), oracle, 1e-12 * oracle);
  EXPECT_NEAR(oracle, 0.4834, 5e-5);
}

TEST(Matern32, DecaysBelowTinyBeyondTwentyLengthScales) {
  KernelParams k;
  EXPECT_LT(matern32(20.0, k), 1e-10);
  EXPECT_LT(matern32(35.0, k), 1e-10);
}

TEST(Matern32, MonotoneNonIncreasing) {
  KernelParams k;
  double prev = matern32(0.0, k);
  for (double d = 0.01; d < 30.0; d += 0.01) {
    const double v = matern32(d, k);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(KernelParams, Validation) {
  KernelParams k;
  k.length_scale = 0;
  EXPECT_THROW(k.validate(), InvalidInput);
  k = {};
  k.amplitude = 0;
  EXPECT_THROW(k.validate(), InvalidInput);
  k = {};
  k.reg = -1;
  EXPECT_THROW(k.validate(), InvalidInput);
  QueryConfig q;
  q.scale = 1.0;
  EXPECT_THROW(q.validate(), InvalidInput);
}

TEST(KsPredict, SinglePointExactInterpolation) {
  const RfmTrainingSet ts({at(1, 2, {{"f1", -63.5}})});
  const KernelSmoother ks(ts, exact(), QueryConfig{});
  EXPECT_NEAR(ks_predict(ks, {1, 2}, FeatureId("f1")), -63.5, 1e-12);
}

TEST(KsPredict, SymmetricPairReproducesCommonValue) {
  const RfmTrainingSet ts({at(-1, 0, {{"f1", -70}}), at(1, 0, {{"f1", -70}})});
  const KernelSmoother ks(ts, exact(), QueryConfig{});
  EXPECT_NEAR(ks_predict(ks, {0, 0}, FeatureId("f1")), -70.0, 1e-9);
}

TEST(KsPredict, LargeRegularizationShrinksToTheSubsetMean) {
  // the regression is centred, so the ridge limit is the subset mean
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}}), at(1, 0, {{"f1", -60}}), at(0, 1, {{"f1", -70}})});
  KernelParams k;
  k.reg = 1e12;
  const KernelSmoother ks(ts, k, QueryConfig{});
  for (Point2 q : {Point2{0, 0}, Point2{0.3, 0.4}, Point2{5, 5}})
    EXPECT_NEAR(ks_predict(ks, q, FeatureId("f1")), -60.0, 1e-6);
}

TEST(KsPredict, DuplicatedLocationsWithoutRegularizationFail) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}}), at(0, 0, {{"f1", -52}})});
  const KernelSmoother ks(ts, exact(), QueryConfig{});
  EXPECT_THROW(ks_predict(ks, {0, 0}, FeatureId("f1")), NumericalFailure);
  EXPECT_THROW(ks_predict_query(ks, {0, 0}, FeatureId("f1")), NumericalFailure);
}

TEST(KsPredict, DuplicatedLocationsWithRegularizationSucceed) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}}), at(0, 0, {{"f1", -52}})});
  KernelParams k;
  k.reg = 0.5;
  const KernelSmoother ks(ts, k, QueryConfig{});
  EXPECT_NEAR(ks_predict(ks, {0, 0}, FeatureId("f1")), -51.0, 1e-9);
}

TEST(KsPredict, UnknownFeatureIsInvalid) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}})});
  const KernelSmoother ks(ts, exact(), QueryConfig{});
  EXPECT_THROW(ks_predict(ks, {0, 0}, FeatureId("nope")), InvalidInput);
}

TEST(KsPredict, MatchesDenseOracle) {
  Rng rng(7);
  std::vector<LabeledFingerprint> s;
  std::vector<Point2> pts;
  std::vector<double> vals;
  for (int i = 0; i < 25; ++i) {
    const Point2 p{rng.uniform() * 6, rng.uniform() * 6};
    const double v = -80 + 30 * rng.uniform();
    s.push_back(at(p.x, p.y, Fingerprint{{"f1", v}}));
    pts.push_back(p);
    vals.push_back(v);
  }
  KernelParams k;
  k.reg = 0.3;
  k.length_scale = 1.3;
  const KernelSmoother ks(RfmTrainingSet(s), k, QueryConfig{10.0});
  for (Point2 q : {Point2{1, 1}, Point2{3.3, 2.2}, Point2{5.9, 0.1}}) {
    const double o = oracle_predict(pts, vals, q, k);
    EXPECT_NEAR(ks_predict(ks, q, FeatureId("f1")), o, 1e-9 * std::abs(o));
  }
}

TEST(KsPredict, LiteralNormalEquationsMatchOracle) {
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {0, 1.5}};
  const std::vector<double> vals{-50, -62, -71};
  KernelParams k;
  k.reg = 0.2;
  k.literal_normal_equations = true;
  std::vector<LabeledFingerprint> s;
  for (std::size_t i = 0; i < pts.size(); ++i) s.push_back(at(pts[i].x, pts[i].y, Fingerprint{{"f1", vals[i]}}));
  const KernelSmoother ks(RfmTrainingSet(s), k, QueryConfig{});
  // oracle: z' (G G + reg I)^-1 o, centred
  Eigen::Matrix3d g;
  Eigen::Vector3d o, z;
  const Point2 q{0.4, 0.4};
  const double mean = (vals[0] + vals[1] + vals[2]) / 3.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) g(i, j) = matern32(distance(pts[i], pts[j]), k);
    z(i) = matern32(distance(pts[i], q), k);
    o(i) = vals[i] - mean;
  }
  Eigen::Matrix3d sys = g * g;
  sys.diagonal().array() += k.reg;
  const double expected = mean + z.dot(sys.fullPivLu().solve(o));
  EXPECT_NEAR(ks_predict(ks, q, FeatureId("f1")), expected, 1e-9 * std::abs(expected));
}

TEST(KsPredictQuery, WideRadiusEqualsFullPrediction) {
  const auto s = smooth_field(1.0, 6, 4);
  const KernelSmoother ks(RfmTrainingSet(s), KernelParams{}, QueryConfig{50.0});
  for (Point2 q : {Point2{0.5, 0.5}, Point2{3.2, 1.7}}) {
    const double full = ks_predict(ks, q, FeatureId("f1"));
    EXPECT_NEAR(ks_predict_query(ks, q, FeatureId("f1")), full, 1e-9 * std::abs(full));
  }
}

TEST(KsPredictQuery, NoPointsInRadiusGivesMissingIndicator) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{});
  EXPECT_EQ(ks_predict_query(ks, {100, 100}, FeatureId("f1")), kMissingDbm);
}

TEST(KsPredictQuery, EqualsDenseOracleOnTheSelectedSubset) {
  const auto s = smooth_field(1.0, 10, 10);
  KernelParams k;
  k.reg = 0.25;
  const QueryConfig qc{2.5};
  const KernelSmoother ks(RfmTrainingSet(s), k, qc);
  const Point2 q{4.3, 5.6};
  std::vector<Point2> pts;
  std::vector<double> vals;
  for (const auto& lf : s) {
    if (distance(lf.location, q) <= qc.radius(k)) {
      pts.push_back(lf.location);
      vals.push_back(*lf.fingerprint.get(FeatureId("f1")));
    }
  }
  ASSERT_GT(pts.size(), 5u);
  ASSERT_LT(pts.size(), s.size());
  const double o = oracle_predict(pts, vals, q, k);
  EXPECT_NEAR(ks_predict_query(ks, q, FeatureId("f1")), o, 1e-9 * std::abs(o));
}

TEST(KsPredictQuery, IndicatorPointsJoinNearCoverageOnly) {
  // f2 is measured at the origin only; (1,0) is within the radius and
  // contributes -110, (50,0) is far and does not
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}, {"f2", -60}}), at(1, 0, {{"f1", -55}}), at(50, 0, {{"f1", -70}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{5.0});
  EXPECT_EQ(ks.subset_size(FeatureId("f2")), 2u);
  EXPECT_EQ(ks.subset_size(FeatureId("f1")), 3u);
  EXPECT_EQ(ks_predict_query(ks, {50, 0}, FeatureId("f2")), kMissingDbm);
}

TEST(KsPredict, PermutationInvariant) {
  Rng rng(11);
  std::vector<LabeledFingerprint> s;
  for (int i = 0; i < 40; ++i) {
    Fingerprint fp{{"f1", -60 + 10 * rng.uniform()}};
    if (rng.uniform() < 0.6) fp.set(FeatureId("f2"), -75 + 10 * rng.uniform());
    s.push_back(at(rng.uniform() * 8, rng.uniform() * 8, fp));
  }
  auto shuffled = s;
  const auto perm = Rng(3).permutation(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) shuffled[i] = s[perm[i]];
  const FeatureRegistry reg({FeatureId("f1"), FeatureId("f2")});
  const KernelSmoother a(RfmTrainingSet(s, reg), KernelParams{}, QueryConfig{});
  const KernelSmoother b(RfmTrainingSet(shuffled, reg), KernelParams{}, QueryConfig{});
  for (Point2 q : {Point2{1, 1}, Point2{4, 4.5}, Point2{7.5, 2}}) {
    for (const char* f : {"f1", "f2"}) {
      EXPECT_NEAR(a.predict(q, FeatureId(f)), b.predict(q, FeatureId(f)), 1e-9);
      EXPECT_NEAR(a.predict_query(q, FeatureId(f)), b.predict_query(q, FeatureId(f)), 1e-9);
    }
  }
}

TEST(SmoothDataset, SmoothFieldIsPreservedWithinOneDbm) {
  const auto s = smooth_field(1.0, 20, 12);
  const RfmTrainingSet ts(s);
  const auto out = smooth_dataset(ts, KernelParams{}, QueryConfig{});
  ASSERT_EQ(out.size(), ts.size());
  double mae = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    mae += std::abs(*out.samples()[i].fingerprint.get(FeatureId("f1")) - *s[i].fingerprint.get(FeatureId("f1")));
  mae /= static_cast<double>(s.size());
  EXPECT_LT(mae, 1.0);
}

TEST(SmoothDataset, SinglePointWithoutRegularizationIsIdentity) {
  const RfmTrainingSet ts({at(2, 3, {{"f1", -50}, {"f2", -77.25}})});
  const auto out = smooth_dataset(ts, exact(), QueryConfig{});
  EXPECT_EQ(out.samples()[0].fingerprint, ts.samples()[0].fingerprint);
}

TEST(SmoothDataset, FeaturePredictedAtTheIndicatorIsDropped) {
  // f2 is barely audible at the centre and unheard all around it
  std::vector<LabeledFingerprint> s{at(0, 0, {{"f1", -50}, {"f2", -109.5}})};
  for (Point2 p : {Point2{0.5, 0}, Point2{-0.5, 0}, Point2{0, 0.5}, Point2{0, -0.5}}) s.push_back(at(p.x, p.y, {{"f1", -50}}));
  const auto out = smooth_dataset(RfmTrainingSet(s), KernelParams{}, QueryConfig{});
  EXPECT_TRUE(out.samples()[0].fingerprint.contains(FeatureId("f1")));
  EXPECT_FALSE(out.samples()[0].fingerprint.contains(FeatureId("f2")));
}

TEST(InterpolateGrid, SingleCellSinglePoint) {
  const RfmTrainingSet ts({at(0.2, 0.3, {{"f1", -50}, {"f2", -80}})});
  const KernelSmoother ks(ts, exact(), QueryConfig{});
  const auto grid = interpolate_grid(ks, Roi{0, 0, 0.5, 0.5}, 0.5);
  ASSERT_EQ(grid.cell_count(), 1u);
  const auto& fp = grid.cell_fingerprint(0);
  ASSERT_EQ(fp.size(), 2u);
  EXPECT_NEAR(*fp.get(FeatureId("f1")), -50, 0.5);
  EXPECT_NEAR(*fp.get(FeatureId("f2")), -80, 0.5);
}

TEST(InterpolateGrid, SpacingLargerThanRoiGivesOneCell) {
  const RfmTrainingSet ts({at(1, 1, {{"f1", -50}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{});
  const auto grid = interpolate_grid(ks, Roi{0, 0, 2, 3}, 10.0);
  EXPECT_EQ(grid.cell_count(), 1u);
}

TEST(InterpolateGrid, UncoveredCellsAreEmpty) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{});
  const auto grid = interpolate_grid(ks, Roi{0, 0, 40, 2}, 0.5);
  EXPECT_FALSE(grid.cell_fingerprint(grid.nearest_cell({0.1, 0.1})).empty());
  EXPECT_TRUE(grid.cell_fingerprint(grid.nearest_cell({39, 1})).empty());
}

TEST(InterpolateGrid, InvalidRoiRejected) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{});
  EXPECT_THROW(interpolate_grid(ks, Roi{0, 0, -1, 1}, 0.5), InvalidInput);
  EXPECT_THROW(interpolate_grid(ks, Roi{0, 0, 1, 1}, 0.0), InvalidInput);
}

TEST(InterpolateGrid, ThreadCountDoesNotChangeValues) {
  const auto s = smooth_field(1.0, 8, 6);
  const KernelSmoother ks(RfmTrainingSet(s), KernelParams{}, QueryConfig{});
  const auto a = interpolate_grid(ks, Roi{0, 0, 8, 6}, 0.5, Parallelism{1});
  const auto b = interpolate_grid(ks, Roi{0, 0, 8, 6}, 0.5, Parallelism{4});
  ASSERT_EQ(a.values().size(), b.values().size());
  EXPECT_EQ(0, std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(float)));
}

TEST(ExpectedFingerprint, DenseClusterCoversItsFeatures) {
  std::vector<LabeledFingerprint> s;
  for (Point2 p : {Point2{5, 5}, Point2{5.5, 5}, Point2{5, 5.5}, Point2{5.5, 5.5}})
    s.push_back(at(p.x, p.y, {{"a", -60}, {"b", -70}, {"c", -80}}));
  s.push_back(at(5.2, 5.2, {{"a", -61}, {"d", -90}}));
  const KernelSmoother ks(RfmTrainingSet(s), KernelParams{}, QueryConfig{});
  const auto e = expected_fingerprint(ks, Point2{5.25, 5.25});
  for (const char* f : {"a", "b", "c"}) EXPECT_TRUE(e.contains(FeatureId(f))) << f;
}

TEST(ExpectedFingerprint, FarAwayIsEmpty) {
  const RfmTrainingSet ts({at(0, 0, {{"f1", -50}})});
  const KernelSmoother ks(ts, KernelParams{}, QueryConfig{});
  EXPECT_TRUE(expected_fingerprint(ks, Point2{500, 500}).empty());
}

TEST(ExpectedFingerprint, GridLookupIsTheNearestCell) {
  const auto s = smooth_field(1.0, 6, 4);
  const KernelSmoother ks(RfmTrainingSet(s), KernelParams{}, QueryConfig{});
  const auto grid = interpolate_grid(ks, Roi{0, 0, 6, 4}, 0.5);
  const Point2 q{2.74, 1.26};
  EXPECT_EQ(expected_fingerprint(grid, q), grid.cell_fingerprint(grid.nearest_cell(q)));
  const Point2 c = grid.center(grid.nearest_cell(q));
  EXPECT_NEAR(c.x, 2.75, 1e-12);
  EXPECT_NEAR(c.y, 1.25, 1e-12);
}

TEST(RfmTrainingSet, RejectsNonFiniteLocationsAndBadBlocks) {
  auto bad = at(std::nan(""), 0, {{"f1", -50}});
  EXPECT_THROW(RfmTrainingSet({bad}), InvalidInput);
  auto blk = at(0, 0, {{"f1", -50}});
  blk.block = 0;
  EXPECT_THROW(RfmTrainingSet({blk}), InvalidInput);
}
