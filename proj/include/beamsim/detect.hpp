#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "beamsim/error.hpp"
#include "beamsim/random.hpp"

namespace beamsim {

enum class SourceKind { laser, spdc };

inline std::string_view to_string(SourceKind k) { return k == SourceKind::laser ? "laser" : "spdc"; }

inline SourceKind parse_source_kind(std::string_view s) {
  if (s == "laser") return SourceKind::laser;
  if (s == "spdc") return SourceKind::spdc;
  throw ConfigError("unknown source kind '" + std::string(s) + "' (laser|spdc)");
}

/// Classical laser or photon-pair source, plus the detection chain behind the
/// fiber.
struct SourceModel {
  SourceKind kind = SourceKind::laser;
  double input_power_w = 1e-3;       ///< laser power arriving at the receiver
  double pump_mw = 0.15;             ///< SPDC pump power
  double pair_rate_per_mw = 9.0e4;   ///< heralded pair rate at the transmitter, Hz/mW
  double channel_loss = 0.16;        ///< loss before the collimator
  double detector_efficiency = 0.6;  ///< signal-arm detector
  double dark_rate = 100.0;          ///< per detector, Hz
  double coincidence_window = 1e-9;  ///< s
  double photodiode_noise = 0.005;   ///< relative Gaussian noise of the photodiode

  void validate() const {
    auto fraction = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    auto rate = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!fraction(channel_loss) || !fraction(detector_efficiency))
      throw ConfigError("source fractions must lie in [0, 1]");
    if (!rate(input_power_w) || !rate(pump_mw) || !rate(pair_rate_per_mw) || !rate(dark_rate) ||
        !rate(coincidence_window) || !rate(photodiode_noise))
      throw ConfigError("source rates and powers must be non-negative");
  }

  /// Pair rate leaving the source, Hz.
  double pair_rate() const { return pair_rate_per_mw * pump_mw; }

  /// Expected true-coincidence rate at coupling efficiency eta.
  double true_coincidence_rate(double eta) const {
    return pair_rate() * (1.0 - channel_loss) * eta * detector_efficiency;
  }

  /// Mean photodiode power at coupling efficiency eta.
  double expected_power(double eta) const { return input_power_w * (1.0 - channel_loss) * eta; }
};

/// One photodiode sample: P_in (1 - loss) eta with relative Gaussian noise,
/// floored at zero.
inline double photodiode_power(const SourceModel& src, double eta, Rng& rng) {
  const double mean = src.expected_power(eta);
  if (src.photodiode_noise <= 0.0) return mean;
  std::normal_distribution<double> n(0.0, src.photodiode_noise);
  return std::max(0.0, mean * (1.0 + n(rng)));
}

inline double photodiode_power(const SourceModel& src, double eta, std::uint64_t noise_seed) {
  Rng rng = make_rng(noise_seed, 0xD1u);
  return photodiode_power(src, eta, rng);
}

struct CountRecord {
  double dwell = 0.0;
  std::uint64_t signal_singles = 0;
  std::uint64_t idler_singles = 0;
  std::uint64_t coincidences = 0;
  double accidentals_estimate = 0.0;
};

/// Poisson counts over one dwell. True coincidences and accidentals are drawn
/// first and the singles are built on top of them, so coincidences never
/// exceed either singles count.
inline CountRecord pair_counts(const SourceModel& src, double eta, double dwell, Rng& rng) {
  if (src.kind != SourceKind::spdc) throw ConfigError("pair_counts needs an spdc source");
  if (!(dwell > 0.0)) throw ConfigError("dwell must be positive");
  eta = std::clamp(eta, 0.0, 1.0);

  const double idler_rate = src.pair_rate() + src.dark_rate;
  const double true_rate = src.true_coincidence_rate(eta);
  const double signal_rate = true_rate + src.dark_rate;
  const double acc_rate = signal_rate * idler_rate * src.coincidence_window;

  auto draw = [&](double mean) -> std::uint64_t {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> p(mean);
    return p(rng);
  };
  const std::uint64_t n_true = draw(true_rate * dwell);
  const std::uint64_t n_acc = draw(acc_rate * dwell);

  CountRecord r;
  r.dwell = dwell;
  r.coincidences = n_true + n_acc;
  r.signal_singles = r.coincidences + draw(std::max(0.0, (signal_rate - true_rate - acc_rate) * dwell));
  r.idler_singles = r.coincidences + draw(std::max(0.0, (idler_rate - true_rate - acc_rate) * dwell));
  r.accidentals_estimate = static_cast<double>(r.signal_singles) * static_cast<double>(r.idler_singles) *
                           src.coincidence_window / dwell;
  return r;
}

inline CountRecord pair_counts(const SourceModel& src, double eta, double dwell, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xC0u);
  return pair_counts(src, eta, dwell, rng);
}

/// Peak of the signal-idler correlation in coincidence-to-accidental form,
/// 1 + (C - A) / A.
inline double g2_peak(const CountRecord& rec) {
  if (rec.signal_singles == 0 || rec.idler_singles == 0 || !(rec.accidentals_estimate > 0.0))
    throw UndefinedStatistic("g2_peak undefined without accidentals (zero singles or window)");
  const double c = static_cast<double>(rec.coincidences);
  return 1.0 + (c - rec.accidentals_estimate) / rec.accidentals_estimate;
}

/// Pump power that makes the expected true-coincidence rate equal `cps` at
/// coupling efficiency `eta`.
inline double calibrate_pump_mw(const SourceModel& src, double eta, double cps) {
  const double per_mw = src.pair_rate_per_mw * (1.0 - src.channel_loss) * eta * src.detector_efficiency;
  if (!(per_mw > 0.0)) throw ConfigError("cannot calibrate pump: zero transmission");
  return cps / per_mw;
}

}  // namespace beamsim
