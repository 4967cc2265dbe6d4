#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "fpcd/fpcd.hpp"

using namespace fpcd;

namespace {

constexpr int kTrials = 300;

Fingerprint random_fp(Rng& rng, std::size_t universe, double keep = 0.6) {
  Fingerprint fp;
  for (std::size_t i = 0; i < universe; ++i)
    if (rng.uniform() < keep) fp.set(FeatureId("f" + std::to_string(i)), -100.0 + 90.0 * rng.uniform());
  return fp;
}

double mann_whitney(const std::vector<ScoredLabel>& s) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : s)
    for (const auto& n : s) {
      if (!p.changed || n.changed) continue;
      pairs += 1.0;
      wins += p.belief > n.belief ? 1.0 : (p.belief == n.belief ? 0.5 : 0.0);
    }
  return wins / pairs;
}

}  // namespace

TEST(Properties, MjiBoundsIdentityAndMonotonicity) {
  Rng rng(1);
  for (int t = 0; t < kTrials; ++t) {
    auto a = random_fp(rng, 15);
    if (a.empty()) continue;
    auto b = random_fp(rng, 15);
    EXPECT_EQ(mji(a, a), 1.0);
    double prev = mji(a, b);
    EXPECT_GE(prev, 0.0);
    EXPECT_LE(prev, 1.0);
    // removing a shared key never raises the score
    for (;;) {
      std::vector<FeatureId> shared;
      for (const auto& e : b)
        if (a.contains(e.id)) shared.push_back(e.id);
      if (shared.empty()) break;
      b.erase(shared[rng.below(shared.size())]);
      const double now = mji(a, b);
      EXPECT_LE(now, prev + 1e-15);
      prev = now;
    }
  }
}

TEST(Properties, RemovingAnUnsharedExpectedKeyCanRaiseMji) {
  // the second ratio |A n B| / |B| grows when B loses a key A never had
  const Fingerprint a{{"f1", -50}, {"f2", -60}};
  const Fingerprint b{{"f1", -50}, {"f3", -60}};
  EXPECT_GT(mji(a, Fingerprint{{"f1", -50}}), mji(a, b));
}

TEST(Properties, CdmIsASymmetricNonNegativeDissimilarity) {
  Rng rng(2);
  for (int t = 0; t < kTrials; ++t) {
    const auto a = random_fp(rng, 12), b = random_fp(rng, 12);
    if (a.empty() && b.empty()) continue;
    const double lambda = 5.0 * rng.uniform();
    EXPECT_GE(cdm(a, b, lambda), 0.0);
    EXPECT_NEAR(cdm(a, b, lambda), cdm(b, a, lambda), 1e-12);
    if (!a.empty()) EXPECT_EQ(cdm(a, a, lambda), 0.0);
  }
}

TEST(Properties, IndicatingValueCountsResidualsWithinTheThreshold) {
  Rng rng(3);
  for (int t = 0; t < kTrials; ++t) {
    const auto a = random_fp(rng, 10), b = random_fp(rng, 10);
    if (a.empty()) continue;
    const auto r = residual_vector(a, b);
    ASSERT_EQ(r.size(), a.size());
    const double lambda = 30.0 * rng.uniform();
    std::size_t n = 0;
    for (double v : r) {
      EXPECT_GE(v, 0.0);
      n += v <= lambda ? 1 : 0;
    }
    EXPECT_EQ(indicating_value(r, lambda), n);
  }
}

TEST(Properties, AucEqualsMannWhitney) {
  Rng rng(4);
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<ScoredLabel> s(n);
    // coarse beliefs so ties are frequent
    for (auto& x : s) {
      x.belief = static_cast<double>(rng.below(11)) / 10.0;
      x.changed = rng.uniform() < 0.4;
    }
    s[0].changed = true;
    s[1].changed = false;
    const auto roc = roc_auc(s);
    EXPECT_NEAR(roc.auc, mann_whitney(s), 1e-12);
    EXPECT_GE(roc.auc, 0.0);
    EXPECT_LE(roc.auc, 1.0);
  }
}

TEST(Properties, ConfusionCountsCoverEveryLabel) {
  Rng rng(5);
  for (int t = 0; t < kTrials; ++t) {
    std::vector<ScoredLabel> s(1 + rng.below(30));
    for (auto& x : s) x = {rng.uniform(), rng.uniform() < 0.5};
    EXPECT_EQ(confusion(s, rng.uniform()).total(), s.size());
  }
}

TEST(Properties, EcdfIsMonotoneInRadius) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> e(1 + rng.below(40));
    for (auto& v : e) v = 10.0 * rng.uniform();
    double prev = 0.0;
    for (double r = 0.0; r <= 11.0; r += 0.25) {
      const double a = ecdf_accuracy(e, r);
      EXPECT_GE(a, prev);
      EXPECT_LE(a, 1.0);
      prev = a;
    }
  }
}

TEST(Properties, DispersivenessIsRotationInvariant) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    std::vector<Point2> p(3 + rng.below(30));
    for (auto& q : p) q = {10.0 * rng.uniform(), 4.0 * rng.uniform()};
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    std::vector<Point2> r;
    for (const auto& q : p)
      r.push_back({std::cos(th) * q.x - std::sin(th) * q.y + 3.0, std::sin(th) * q.x + std::cos(th) * q.y - 1.0});
    EXPECT_NEAR(dispersiveness(p), dispersiveness(r), 1e-9);
  }
}

TEST(Properties, BandwidthIsOrdered) {
  Rng rng(8);
  for (int t = 0; t < kTrials; ++t) {
    std::map<double, double> curve;
    const std::size_t n = 3 + rng.below(17);
    for (std::size_t i = 0; i < n; ++i) curve[0.05 * static_cast<double>(i + 1)] = 0.1 + 5.0 * rng.uniform();
    const auto b = bandwidth_3db(curve);
    EXPECT_LE(b.alpha_l, b.alpha_m);
    EXPECT_LE(b.alpha_m, b.alpha_r);
  }
}

TEST(Properties, ChangeBeliefRangeSymmetryAndMonotonicity) {
  Rng rng(9);
  const VariabilityModel fitted{0.025, 3.0, 0.5};
  for (int t = 0; t < kTrials; ++t) {
    const double a = -105.0 + 100.0 * rng.uniform(), b = -105.0 + 100.0 * rng.uniform();
    const double x = change_belief(a, b, fitted);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
    EXPECT_NEAR(x, change_belief(b, a, fitted), 1e-12);
  }
  const VariabilityModel flat{0.0, 1.5 + rng.uniform(), 0.5};
  double prev = 0.0;
  for (double gap = 0.0; gap <= 40.0; gap += 0.1) {
    const double x = change_belief(-50.0, -50.0 - gap, flat);
    EXPECT_GE(x, prev - 1e-15) << gap;
    prev = x;
  }
}

TEST(Properties, BeliefsCoverTheKeyUnionOnce) {
  Rng rng(10);
  for (int t = 0; t < kTrials; ++t) {
    const auto a = random_fp(rng, 12), b = random_fp(rng, 12);
    const auto beliefs = beliefs_against(a, b, VariabilityModel{});
    std::set<FeatureId> want;
    for (const auto& e : a) want.insert(e.id);
    for (const auto& e : b) want.insert(e.id);
    ASSERT_EQ(beliefs.size(), want.size());
    std::size_t i = 0;
    for (const auto& id : want) EXPECT_EQ(beliefs[i++].id, id);
  }
}

TEST(Properties, RobustStatsPermutationAndMedianPadding) {
  Rng rng(11);
  for (int t = 0; t < kTrials; ++t) {
    std::vector<double> v(1 + 2 * rng.below(8));  // odd counts
    for (auto& x : v) x = -90.0 + 40.0 * rng.uniform();
    const auto s = robust_stats(v);
    auto p = v;
    const auto perm = rng.permutation(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = v[perm[i]];
    const auto sp = robust_stats(p);
    EXPECT_EQ(s.mu, sp.mu);
    EXPECT_EQ(s.sigma, sp.sigma);
    auto padded = v;
    padded.push_back(s.mu);
    padded.push_back(s.mu);
    EXPECT_EQ(robust_stats(padded).mu, s.mu);
  }
}

TEST(Properties, InterBlockSelfComparisonIsStable) {
  Rng rng(12);
  for (int t = 0; t < kTrials; ++t) {
    const BlockStats b{-100.0 + 90.0 * rng.uniform(), 1e-3 + 10.0 * rng.uniform(), 1 + rng.below(20)};
    EXPECT_EQ(label_inter_block(b, b), ChangeStatus::stable);
  }
}

TEST(Properties, InjectionCountsAndDisjointness) {
  Rng rng(13);
  for (int t = 0; t < kTrials; ++t) {
    const auto fp = random_fp(rng, 25, 0.7);
    const double m = static_cast<double>(rng.below(6)) / 10.0;
    const double s = static_cast<double>(rng.below(6 - static_cast<std::uint64_t>(m * 10 + 0.5))) / 10.0;
    const ChangeSpec spec{m, s, rng.uniform() < 0.5 ? -15.0 : 10.0, 77};
    const auto inj = inject_changes(fp, spec, static_cast<std::uint64_t>(t));
    const std::size_t n = fp.size();
    std::size_t changed = 0;
    ASSERT_EQ(inj.labels.size(), n);
    for (const auto& l : inj.labels) {
      EXPECT_TRUE(fp.contains(l.id));
      changed += l.status == ChangeStatus::changed ? 1 : 0;
    }
    const std::size_t nm = std::min(n, ratio_count(m, n));
    const std::size_t ns = std::min(n - nm, ratio_count(s, n));
    EXPECT_EQ(changed, nm + ns);
    const auto missing = static_cast<std::size_t>(std::count_if(
        inj.labels.begin(), inj.labels.end(), [](const auto& l) { return l.kind == ChangeKind::missing; }));
    EXPECT_GE(missing, nm);  // shifts below the floor turn into missing
    EXPECT_EQ(inj.fingerprint.size(), n - missing);
  }
}

TEST(Properties, ResampleIsASubsetOfTheRequestedSize) {
  Rng rng(14);
  for (int t = 0; t < kTrials; ++t) {
    const auto fp = random_fp(rng, 30, 0.8);
    if (fp.empty()) continue;
    ResampleConfig cfg;
    cfg.alpha_res = 0.05 + 0.95 * rng.uniform();
    cfg.seed = 5;
    const auto r = resample(fp, cfg, static_cast<std::uint64_t>(t));
    EXPECT_EQ(r.size(), resample_size(fp.size(), cfg.alpha_res, cfg.min_features));
    for (const auto& e : r) EXPECT_EQ(fp.get(e.id), e.rss);
    EXPECT_EQ(r, resample(fp, cfg, static_cast<std::uint64_t>(t)));
  }
}

TEST(Properties, KnnEstimateStaysInsideTheNeighborBox) {
  Rng rng(15);
  FeatureRegistry reg;
  for (int i = 0; i < 8; ++i) reg.add(FeatureId("f" + std::to_string(i)));
  std::vector<float> values(6 * 5 * reg.size());
  for (auto& v : values) v = rng.uniform() < 0.2 ? std::nanf("") : static_cast<float>(-100.0 + 80.0 * rng.uniform());
  const RfmGrid grid(Roi{0, 0, 6, 5}, 1.0, reg, values);
  for (int t = 0; t < 100; ++t) {
    const auto q = random_fp(rng, 8, 0.7);
    if (q.empty()) continue;
    PositioningConfig cfg;
    cfg.k = 1 + rng.below(6);
    cfg.dissimilarity = rng.uniform() < 0.5 ? Dissimilarity::cdm : Dissimilarity::euclidean_vector;
    const auto est = knn_locate(q, grid, cfg);
    double lx = 1e9, hx = -1e9, ly = 1e9, hy = -1e9;
    for (std::size_t c : est.neighbors) {
      lx = std::min(lx, grid.center(c).x);
      hx = std::max(hx, grid.center(c).x);
      ly = std::min(ly, grid.center(c).y);
      hy = std::max(hy, grid.center(c).y);
    }
    EXPECT_GE(est.location.x, lx - 1e-12);
    EXPECT_LE(est.location.x, hx + 1e-12);
    EXPECT_GE(est.location.y, ly - 1e-12);
    EXPECT_LE(est.location.y, hy + 1e-12);
  }
}
