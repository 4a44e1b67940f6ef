#include <gtest/gtest.h>

#include <cmath>

#include "beamsim/detect.hpp"

using namespace beamsim;

namespace {

SourceModel spdc() {
  SourceModel s;
  s.kind = SourceKind::spdc;
  return s;
}

}  // namespace

TEST(Photodiode, ZeroEfficiency) {
  EXPECT_EQ(photodiode_power(SourceModel{}, 0.0, 1u), 0.0);
}

TEST(Photodiode, MeanAtPeakEfficiency) {
  SourceModel s;
  s.photodiode_noise = 0.0;
  EXPECT_NEAR(photodiode_power(s, 0.898, 1u), 0.754e-3, 5e-7);
  EXPECT_DOUBLE_EQ(photodiode_power(s, 0.5, 1u), 1e-3 * 0.84 * 0.5);
}

TEST(Photodiode, NoiseLevelAndSeed) {
  SourceModel s;
  Rng rng = make_rng(5, 0);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20'000;
  for (int i = 0; i < n; ++i) {
    const double p = photodiode_power(s, 0.8, rng) / s.expected_power(0.8);
    sum += p;
    sum2 += p * p;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 1.0, 2e-4);
  EXPECT_NEAR(std::sqrt(sum2 / n - mean * mean), 0.005, 2e-4);
  EXPECT_EQ(photodiode_power(s, 0.8, 9u), photodiode_power(s, 0.8, 9u));
}

TEST(Counts, LaserRejected) { EXPECT_THROW(pair_counts(SourceModel{}, 0.5, 1.0, 1u), ConfigError); }

TEST(Counts, NonPositiveDwellRejected) { EXPECT_THROW(pair_counts(spdc(), 0.5, 0.0, 1u), ConfigError); }

TEST(Counts, ZeroEfficiencyLeavesAccidentals) {
  const SourceModel s = spdc();
  Rng rng = make_rng(2, 0);
  double c = 0.0, a = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CountRecord r = pair_counts(s, 0.0, 1000.0, rng);
    c += static_cast<double>(r.coincidences);
    a += r.accidentals_estimate;
  }
  EXPECT_NEAR(c / a, 1.0, 0.10);  // ~1400 accidental counts in total
}

TEST(Counts, CoincidencesNeverExceedSingles) {
  const SourceModel s = spdc();
  Rng rng = make_rng(4, 0);
  for (double eta : {0.0, 0.01, 0.3, 0.898, 1.0})
    for (int i = 0; i < 200; ++i) {
      const CountRecord r = pair_counts(s, eta, 0.01, rng);
      ASSERT_LE(r.coincidences, std::min(r.signal_singles, r.idler_singles));
    }
}

TEST(Counts, PoissonMeanEqualsVariance) {
  const SourceModel s = spdc();
  Rng rng = make_rng(11, 0);
  const int n = 20'000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = static_cast<double>(pair_counts(s, 0.6, 0.05, rng).coincidences);
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / n;
  const double var = (sum2 - n * mean * mean) / (n - 1);
  EXPECT_NEAR(var / mean, 1.0, 0.05);
  const double expected = (s.true_coincidence_rate(0.6) +
                           (s.true_coincidence_rate(0.6) + s.dark_rate) * (s.pair_rate() + s.dark_rate) *
                               s.coincidence_window) * 0.05;
  EXPECT_NEAR(mean / expected, 1.0, 0.01);
}

TEST(Counts, SeededDeterminism) {
  const CountRecord a = pair_counts(spdc(), 0.7, 1.0, 33u);
  const CountRecord b = pair_counts(spdc(), 0.7, 1.0, 33u);
  EXPECT_EQ(a.coincidences, b.coincidences);
  EXPECT_EQ(a.signal_singles, b.signal_singles);
  EXPECT_EQ(a.idler_singles, b.idler_singles);
}

TEST(G2, UncorrelatedLightIsOne) {
  CountRecord r{1.0, 1000, 1000, 0, 0.0};
  r.accidentals_estimate = 5.0;
  r.coincidences = 5;
  EXPECT_DOUBLE_EQ(g2_peak(r), 1.0);
  r.coincidences = 55;
  EXPECT_DOUBLE_EQ(g2_peak(r), 11.0);
}

TEST(G2, UndefinedWithoutAccidentals) {
  EXPECT_THROW(g2_peak(CountRecord{1.0, 0, 10, 0, 0.0}), UndefinedStatistic);
  EXPECT_THROW(g2_peak(CountRecord{1.0, 10, 10, 1, 0.0}), UndefinedStatistic);
}

TEST(G2, IncreasesAlongEfficiencyRamp) {
  // Fixed seed ladder, long dwell: the expected trend dominates the Poisson scatter.
  const SourceModel s = spdc();
  double prev = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const double eta = 0.005 * k;
    const double g = g2_peak(pair_counts(s, eta, 100.0, static_cast<std::uint64_t>(k)));
    EXPECT_GT(g, prev) << "eta " << eta;
    prev = g;
  }
}

TEST(Calibration, PumpHitsTargetRate) {
  const SourceModel s = spdc();
  SourceModel t = s;
  t.pump_mw = calibrate_pump_mw(s, 0.75, 5834.0);
  EXPECT_NEAR(t.true_coincidence_rate(0.75), 5834.0, 1e-9);
}

TEST(Source, ValidationAndParsing) {
  SourceModel s;
  s.channel_loss = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(parse_source_kind("spdc"), SourceKind::spdc);
  EXPECT_THROW(parse_source_kind("lamp"), Error);
}
