#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "beamsim/autocouple.hpp"
#include "beamsim/sim.hpp"

using namespace beamsim;

namespace {

const OpticalLayout kLayout;

// Static disturbance that puts the optimum at the requested mirror angles.
Disturbance hide_optimum(double a1, double b1, double a2, double b2) {
  auto axis = [](double m1, double m2) {
    const double t = -2.0 * (m1 - m2);
    const double s = -(2.0 * kLayout.d1 * m1 + t * kLayout.d1);
    return std::pair{t, s};
  };
  const auto [tx, sx] = axis(a1, a2);
  const auto [ty, sy] = axis(b1, b2);
  return {tx, ty, sx, sy};
}

Objective constant(double v) {
  return {ObjectiveKind::power, [v](const MirrorState&) { return Score{v, true}; }};
}

}  // namespace

TEST(HiddenOptimum, HelperRoundTrips) {
  const AlignedAngles a = analytic_optimum(kLayout, hide_optimum(2e-3, -3e-3, 1e-3, -1e-3));
  EXPECT_NEAR(a.alpha1, 2e-3, 1e-15);
  EXPECT_NEAR(a.beta1, -3e-3, 1e-15);
  EXPECT_NEAR(a.alpha2, 1e-3, 1e-15);
  EXPECT_NEAR(a.beta2, -1e-3, 1e-15);
}

TEST(RandomSearch, ImmediateWhenStartAboveThreshold) {
  const StageResult r = random_search(constant(1.0), MirrorState{}, {5e-3, 0.5, 100, 1});
  EXPECT_EQ(r.evaluations, 1);
  EXPECT_EQ(r.state, MirrorState{});
}

TEST(RandomSearch, ZeroObjectiveExhausts) {
  try {
    random_search(constant(0.0), MirrorState{}, {5e-3, 0.01, 500, 1});
    FAIL() << "expected NotFoundError";
  } catch (const NotFoundError& e) {
    EXPECT_EQ(e.evaluations(), 500);
  }
}

TEST(RandomSearch, FindsHiddenOptimumQuickly) {
  const Objective obj = noiseless_objective(kLayout, hide_optimum(2e-3, -3e-3, 0, 0));
  const double thr = 0.01 * peak_efficiency(kLayout);
  std::vector<long> evals;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const StageResult r = random_search(obj, MirrorState{}, {5e-3, thr, 20'000, seed});
    EXPECT_GT(r.score, thr);
    EXPECT_EQ(r.state.alpha2(), 0.0);
    EXPECT_EQ(r.state.beta2(), 0.0);
    evals.push_back(r.evaluations);
  }
  std::nth_element(evals.begin(), evals.begin() + 50, evals.end());
  EXPECT_LE(evals[50], 300);
}

TEST(AngleSearch, WithinOneStepOfOptimum) {
  // alpha2, beta2 at the optimum so the surface is unimodal in (alpha1, beta1).
  const Objective obj = noiseless_objective(kLayout, hide_optimum(1.0e-3, -0.5e-3, 0.3e-3, -0.2e-3));
  const MirrorState center(0.4e-3, 0.2e-3, 0.3e-3, -0.2e-3);
  const AngleSearchResult r = angle_search(obj, center);
  EXPECT_LE(std::abs(r.state.alpha1() - 1.0e-3), 100e-6 + 1e-12);
  EXPECT_LE(std::abs(r.state.beta1() + 0.5e-3), 100e-6 + 1e-12);
  EXPECT_EQ(r.evaluations, 62);
}

TEST(AngleSearch, FlatObjectiveKeepsFirstPoint) {
  const MirrorState center(1e-3, 1e-3, 0, 0);
  const AngleSearchResult r = angle_search(constant(0.5), center);
  EXPECT_NEAR(r.state.alpha1(), center.alpha1() - 1.5e-3, 1e-12);
  EXPECT_NEAR(r.state.beta1(), center.beta1() - 1.5e-3, 1e-12);
}

TEST(AngleSearch, OptimumAtCenterReturnsCenter) {
  const Objective obj = noiseless_objective(kLayout, hide_optimum(1e-3, -1e-3, 0.5e-3, -0.5e-3));
  const MirrorState center(1e-3, -1e-3, 0.5e-3, -0.5e-3);
  EXPECT_EQ(angle_search(obj, center).state, center);
}

TEST(AngleSearch, HoldsSecondMirror) {
  const Objective obj = noiseless_objective(kLayout, hide_optimum(1e-3, -1e-3, 0.5e-3, -0.5e-3));
  const AngleSearchResult r = angle_search(obj, MirrorState(0, 0, 0.25e-3, -0.75e-3));
  EXPECT_EQ(r.state.alpha2(), 0.25e-3);
  EXPECT_EQ(r.state.beta2(), -0.75e-3);
  for (const auto& p : r.trace) EXPECT_LE(p.score, r.score);
}

TEST(PositionSearch, NoiselessWithinHalfMilliradian) {
  const Disturbance d = hide_optimum(2e-3, -1.5e-3, 0.8e-3, -0.7e-3);
  const Objective obj = noiseless_objective(kLayout, d);
  // Angles locked at the optimum difference, positions far off.
  const MirrorState locked(-1e-3, 1e-3, -1e-3 - 1.2e-3, 1e-3 + 0.8e-3);
  const PositionSearchResult r = position_search(obj, locked, {}, &kLayout);
  EXPECT_LE(std::abs(r.state.alpha1() - 2e-3), 0.5e-3 + 1e-12);
  EXPECT_LE(std::abs(r.state.beta1() + 1.5e-3), 0.5e-3 + 1e-12);
  EXPECT_EQ(r.evaluations, 21 * 21);
  EXPECT_EQ(r.map.values.size(), 441u);
}

TEST(PositionSearch, GammaConstantOverRaster) {
  // Holds at every feasible point; infeasible points clamp FSM2 and are invalid.
  const MirrorState locked(0, 0, -1.2e-3, 0.8e-3);
  const PositionSearchResult r = position_search(constant(1.0), locked, {}, &kLayout);
  const double g0 = trace_incidence(kLayout, locked).gamma;
  int feasible = 0;
  for (std::size_t k = 0; k < r.map.gamma.size(); ++k) {
    if (std::isnan(r.map.values[k])) continue;
    ++feasible;
    EXPECT_NEAR(r.map.gamma[k], g0, 2.0 * 2.0 * 0.25e-6);
  }
  EXPECT_GT(feasible, 200);
}

TEST(PositionSearch, InfeasiblePointsMarkedInvalid) {
  const MirrorState locked(0, 0, -1.2e-3, 0.8e-3);
  const PositionSearchResult r = position_search(constant(1.0), locked, {}, &kLayout);
  long nan = std::count_if(r.map.values.begin(), r.map.values.end(), [](double v) { return std::isnan(v); });
  EXPECT_GT(nan, 0);
  EXPECT_TRUE(std::isfinite(r.score));
  EXPECT_LE(std::abs(r.state.alpha2()), 5e-3);
}

TEST(PositionSearch, NoisyObjectiveSmoothedArgmax) {
  const Disturbance d = hide_optimum(2e-3, -1.5e-3, 0.8e-3, -0.7e-3);
  const double peak = peak_efficiency(kLayout);
  const MirrorState locked(0, 0, -1.2e-3, 0.8e-3);
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto rng = std::make_shared<Rng>(make_rng(seed, 0));
    Objective obj{ObjectiveKind::power, [d, peak, rng](const MirrorState& m) {
                    std::normal_distribution<double> n(0.0, 0.05 * peak);
                    return Score{coupling_efficiency(kLayout, trace_incidence(kLayout, m, d)) + n(*rng), true};
                  }};
    const PositionSearchResult r = position_search(obj, locked);
    hits += std::abs(r.state.alpha1() - 2e-3) <= 1e-3 + 1e-12 && std::abs(r.state.beta1() + 1.5e-3) <= 1e-3 + 1e-12;
  }
  EXPECT_GE(hits, 95);
}

TEST(Smoothing, ConstantMapUnchanged) {
  const std::vector<double> m(7 * 5, 3.25);
  for (double v : gaussian_smooth(m, 7, 5, 1.0)) EXPECT_NEAR(v, 3.25, 1e-14);
}

TEST(Smoothing, LinearAndShiftInvariantInterior) {
  std::vector<double> a(21 * 21, 0.0), b(21 * 21, 0.0);
  a[10 * 21 + 10] = 1.0;
  b[11 * 21 + 9] = 1.0;
  const auto sa = gaussian_smooth(a, 21, 21, 1.0);
  const auto sb = gaussian_smooth(b, 21, 21, 1.0);
  for (int i = 3; i < 18; ++i)
    for (int j = 3; j < 18; ++j) EXPECT_NEAR(sa[i * 21 + j], sb[(i + 1) * 21 + (j - 1)], 1e-15);
  std::vector<double> c(21 * 21);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = 2.0 * a[k] + 3.0 * b[k];
  const auto sc = gaussian_smooth(c, 21, 21, 1.0);
  for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(sc[k], 2.0 * sa[k] + 3.0 * sb[k], 1e-15);
}

TEST(AutoCouple, FullyMisalignedStartWithinStageBounds) {
  // Angle stage: alpha1 - alpha2 within one 100 urad step per axis, i.e. a
  // beam tilt up to 200 urad per axis. Position stage: common-mode shift
  // within half a 0.5 mrad step.
  const Scenario sc;
  const Objective obj = noiseless_objective(sc.layout, sc.misalignment);
  EXPECT_LT(obj.evaluate(sc.start).value, 1e-6);
  const AlignedAngles a = analytic_optimum(sc.layout, sc.misalignment);
  const double tilt = 2.0 * 100e-6, shift = 2.0 * sc.layout.d1 * 0.25e-3 + 2.0 * sc.layout.d2 * 100e-6;
  const double bound = coupling_efficiency(sc.layout, BeamIncidence::from_components(shift, shift, tilt, tilt));
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    AutoCoupleConfig cfg;
    cfg.random.threshold = 0.01 * peak_efficiency(sc.layout);
    cfg.random.seed = seed;
    const SearchOutcome o = auto_couple(obj, cfg, &sc.layout);
    ASSERT_EQ(o.stage_reached, Stage::position);
    const MirrorState& m = o.best_state;
    EXPECT_LE(std::abs((m.alpha1() - m.alpha2()) - (a.alpha1 - a.alpha2)), 100e-6 + 0.5e-6) << seed;
    EXPECT_LE(std::abs((m.beta1() - m.beta2()) - (a.beta1 - a.beta2)), 100e-6 + 0.5e-6) << seed;
    EXPECT_LE(std::abs(m.alpha1() - a.alpha1), 0.25e-3 + 100e-6) << seed;
    EXPECT_LE(std::abs(m.beta1() - a.beta1), 0.25e-3 + 100e-6) << seed;
    EXPECT_GE(obj.evaluate(m).value, bound) << seed;
    EXPECT_GE(o.peak_observed, o.best_score);
    EXPECT_EQ(o.evaluations, o.random.evaluations + 62 + 441);
  }
}

TEST(AutoCouple, StartAtOptimumStaysNear) {
  const Scenario sc;
  const AlignedAngles a = analytic_optimum(sc.layout, sc.misalignment);
  AutoCoupleConfig cfg;
  cfg.start = MirrorState(a.alpha1, a.beta1, a.alpha2, a.beta2);
  cfg.random.threshold = 0.5;
  const SearchOutcome o = auto_couple(noiseless_objective(sc.layout, sc.misalignment), cfg, &sc.layout);
  EXPECT_EQ(o.random.evaluations, 1);
  EXPECT_LE(std::abs(o.best_state.alpha1() - cfg.start.alpha1()), 0.5e-3 + 1e-12);
  EXPECT_LE(std::abs(o.best_state.beta1() - cfg.start.beta1()), 0.5e-3 + 1e-12);
}

TEST(AutoCouple, StopsAfterRequestedStage) {
  const Scenario sc;
  AutoCoupleConfig cfg;
  cfg.random.threshold = 0.009;
  cfg.last_stage = Stage::angle;
  const SearchOutcome o = auto_couple(noiseless_objective(sc.layout, sc.misalignment), cfg);
  EXPECT_EQ(o.stage_reached, Stage::angle);
  EXPECT_FALSE(o.position.has_value());
}

TEST(AutoCouple, G2MatchesPowerAtLowBrightness) {
  // In the counting-limited regime (true rate a few times the dark rate) g2
  // ranks mirror states like the power signal. Region: 1 mrad per axis.
  const Scenario sc;
  SourceModel src = sc.source;
  src.kind = SourceKind::spdc;
  src.pump_mw = 0.01;
  const double eta1 = 0.01 * peak_efficiency(sc.layout);
  const double idler = src.pair_rate() + src.dark_rate;
  const double acc = (src.true_coincidence_rate(eta1) + src.dark_rate) * idler * src.coincidence_window;
  const double g2_threshold = (src.true_coincidence_rate(eta1) + acc) / acc;
  int same = 0;
  const int n = 20;
  for (std::uint64_t seed = 1; seed <= n; ++seed) {
    AutoCoupleConfig cfg;
    cfg.random.seed = seed;
    auto rng = std::make_shared<Rng>(make_rng(seed, 4));
    cfg.random.threshold = 0.009;
    const SearchOutcome p = auto_couple(power_objective(sc.layout, sc.misalignment, sc.source, rng), cfg, &sc.layout);
    cfg.random.threshold = g2_threshold;
    const SearchOutcome g = auto_couple(g2_objective(sc.layout, sc.misalignment, src, 1.0, rng), cfg, &sc.layout);
    EXPECT_EQ(g.objective, ObjectiveKind::g2_peak);
    same += std::abs(g.best_state.alpha1() - p.best_state.alpha1()) <= 1e-3 + 1e-12 &&
            std::abs(g.best_state.beta1() - p.best_state.beta1()) <= 1e-3 + 1e-12;
  }
  EXPECT_GE(same, 18);
}

TEST(ScanCsv, HeaderAndRows) {
  const PositionSearchResult r = position_search(constant(1.0), MirrorState{});
  std::ostringstream os;
  write_scan_csv(os, r.map);
  const std::string s = os.str();
  EXPECT_NE(s.find("alpha1_rad,beta1_rad,score,smoothed_score\n"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2 + 441);
}

TEST(Objective, ParseNames) {
  EXPECT_EQ(parse_objective_kind("power"), ObjectiveKind::power);
  EXPECT_EQ(parse_objective_kind("g2"), ObjectiveKind::g2_peak);
  EXPECT_THROW(parse_objective_kind("phase"), Error);
}
