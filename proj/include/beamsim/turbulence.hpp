#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "beamsim/error.hpp"
#include "beamsim/fft.hpp"
#include "beamsim/io.hpp"
#include "beamsim/random.hpp"

namespace beamsim {

/// +-0.04 deg, the actuation range of the turbulence simulator.
inline constexpr double kDefaultWanderClip = 0.04 * std::numbers::pi / 180.0;
/// +-0.02 deg, measured wander at 2.6 km, used as the per-axis RMS.
inline constexpr double kWanderRms2p6km = 0.02 * std::numbers::pi / 180.0;

/// One-sided PSD of angular wander per axis (rad^2/Hz), piecewise linear
/// between the listed frequencies and zero outside them.
struct SpectrumProfile {
  std::vector<double> freqs;
  std::vector<double> psd;
  std::string label;

  void validate() const {
    if (freqs.size() != psd.size()) throw ConfigError("profile freqs/psd size mismatch");
    if (freqs.size() < 2) throw ConfigError("profile needs at least two bins");
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      if (!std::isfinite(freqs[i]) || !std::isfinite(psd[i]))
        throw ConfigError("profile contains non-finite values");
      if (psd[i] < 0.0) throw ConfigError("profile psd must be non-negative");
      if (i > 0 && !(freqs[i] > freqs[i - 1]))
        throw ConfigError("profile frequencies must be strictly increasing");
    }
  }

  double density(double f) const {
    if (freqs.empty() || f < freqs.front() || f > freqs.back()) return 0.0;
    auto it = std::upper_bound(freqs.begin(), freqs.end(), f);
    if (it == freqs.end()) return psd.back();
    const std::size_t hi = static_cast<std::size_t>(it - freqs.begin());
    const std::size_t lo = hi - 1;
    const double t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
    return psd[lo] + t * (psd[hi] - psd[lo]);
  }

  /// Exact integral of the piecewise-linear density over [lo, hi].
  double band_power(double lo, double hi) const {
    double sum = 0.0;
    for (std::size_t i = 1; i < freqs.size(); ++i) {
      const double a = std::max(lo, freqs[i - 1]);
      const double b = std::min(hi, freqs[i]);
      if (b <= a) continue;
      sum += 0.5 * (density(a) + density(b)) * (b - a);
    }
    return sum;
  }

  double total_power() const {
    return freqs.empty() ? 0.0 : band_power(freqs.front(), freqs.back());
  }

  /// Highest frequency carrying non-zero density.
  double highest_active_frequency() const {
    for (std::size_t i = psd.size(); i-- > 0;) {
      if (psd[i] > 0.0) return i + 1 < freqs.size() ? freqs[i + 1] : freqs[i];
    }
    return 0.0;
  }

  SpectrumProfile scaled_to_rms(double rms) const {
    SpectrumProfile out = *this;
    const double p = total_power();
    if (p <= 0.0) return out;
    const double g = rms * rms / p;
    for (auto& v : out.psd) v *= g;
    return out;
  }
};

/// Seeded two-axis angular wander, in rad.
struct WanderSeries {
  double sample_rate = 10'000.0;
  std::vector<double> x;
  std::vector<double> y;
  std::uint64_t seed = 0;
  double clip = kDefaultWanderClip;

  std::size_t size() const { return x.size(); }
};

// ---------------------------------------------------------------------------
// Builtin profiles
// ---------------------------------------------------------------------------

/// Parametric stand-in for a measured wander spectrum: a Lorentzian-type
/// low-frequency falloff 1/(1+(f/fc)^p) plus an optional raised-cosine bump
/// on [100, 300] Hz, band-limited to 0-1000 Hz and normalized to `rms`.
struct ProfileShape {
  double corner_hz;
  double exponent;
  double bump_fraction;  ///< share of total variance in the 100-300 Hz bump
  double rms;            ///< per-axis RMS (rad)
};

inline constexpr double kProfileBandHz = 1000.0;
inline constexpr double kBumpLoHz = 100.0;
inline constexpr double kBumpHiHz = 300.0;

inline SpectrumProfile make_profile(const ProfileShape& s, std::string label, double df = 0.25) {
  const auto n = static_cast<std::size_t>(std::llround(kProfileBandHz / df)) + 1;
  SpectrumProfile base{std::vector<double>(n), std::vector<double>(n, 0.0), label};
  SpectrumProfile bump = base;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) * df;
    base.freqs[i] = bump.freqs[i] = f;
    base.psd[i] = 1.0 / (1.0 + std::pow(f / s.corner_hz, s.exponent));
    if (f >= kBumpLoHz && f <= kBumpHiHz)
      bump.psd[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (f - kBumpLoHz) / (kBumpHiHz - kBumpLoHz)));
  }
  const double var = s.rms * s.rms;
  const double pb = base.total_power();
  const double pu = bump.total_power();
  SpectrumProfile out = base;
  for (std::size_t i = 0; i < n; ++i) {
    out.psd[i] = (1.0 - s.bump_fraction) * var * base.psd[i] / pb;
    if (s.bump_fraction > 0.0) out.psd[i] += s.bump_fraction * var * bump.psd[i] / pu;
  }
  return out;
}

inline ProfileShape builtin_shape(std::string_view name) {
  if (name == "indoor60m") return {3.0, 2.0, 0.0, 1.4e-4};
  if (name == "outdoor250m") return {10.0, 2.0, 0.2, 2.0e-4};
  if (name == "outdoor2_6km") return {40.0, 2.0, 0.6, kWanderRms2p6km};
  throw LookupError("unknown builtin profile '" + std::string(name) +
                    "' (known: indoor60m, outdoor250m, outdoor2_6km)");
}

inline SpectrumProfile builtin_profile(std::string_view name) {
  return make_profile(builtin_shape(name), std::string(name));
}

/// Variance carried by the 100-300 Hz bump of a builtin profile.
inline double builtin_bump_power(std::string_view name) {
  const auto s = builtin_shape(name);
  return s.bump_fraction * s.rms * s.rms;
}

// ---------------------------------------------------------------------------
// Synthesis and estimation
// ---------------------------------------------------------------------------

/// Inverse-spectral synthesis: every positive-frequency bin k gets amplitude
/// sqrt(psd(f_k) df / 2) and an independent uniform phase, so the unclipped
/// series variance equals sum psd df exactly. x and y use separate streams.
inline WanderSeries synthesize(const SpectrumProfile& profile, double duration, double sample_rate,
                               std::uint64_t seed, double clip = kDefaultWanderClip) {
  profile.validate();
  if (!(duration > 0.0) || !(sample_rate > 0.0))
    throw ConfigError("duration and sample rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  if (n < 2 * profile.freqs.size())
    throw ConfigError("series of " + std::to_string(n) + " samples is shorter than twice the " +
                      std::to_string(profile.freqs.size()) + " profile bins");
  const double nyquist = 0.5 * sample_rate;
  if (profile.highest_active_frequency() > nyquist)
    throw ConfigError("profile '" + profile.label + "' extends to " +
                      io::fmt(profile.highest_active_frequency()) + " Hz, beyond Nyquist " +
                      io::fmt(nyquist) + " Hz");

  const double df = sample_rate / static_cast<double>(n);
  std::vector<double> amp(n / 2 + 1, 0.0);
  for (std::size_t k = 1; k < amp.size(); ++k) {
    if (n % 2 == 0 && k == n / 2) continue;
    amp[k] = std::sqrt(profile.density(static_cast<double>(k) * df) * df * 0.5);
  }

  auto axis = [&](std::uint64_t stream) {
    Rng rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<std::complex<double>> half(amp.size());
    for (std::size_t k = 0; k < amp.size(); ++k) half[k] = std::polar(amp[k], phase(rng));
    std::vector<double> v = fft::inverse_real(half, n);
    for (auto& s : v) s = std::clamp(s, -clip, clip);
    return v;
  };

  WanderSeries out;
  out.sample_rate = sample_rate;
  out.seed = seed;
  out.clip = clip;
  out.x = axis(1);
  out.y = axis(2);
  return out;
}

struct WelchOptions {
  int n_segments = 10;
  double overlap = 0.5;
  std::size_t min_segment = 64;
};

/// Averaged Hann-window periodogram of one channel, one-sided, scaled so the
/// integral over frequency equals the variance.
inline SpectrumProfile welch_psd(std::span<const double> x, double sample_rate,
                                 const WelchOptions& opt = {}) {
  if (opt.n_segments < 1) throw ConfigError("n_segments must be >= 1");
  if (opt.overlap < 0.0 || opt.overlap >= 1.0) throw ConfigError("overlap must be in [0, 1)");
  const double span_factor = 1.0 + (opt.n_segments - 1) * (1.0 - opt.overlap);
  const auto len = static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) / span_factor));
  if (len < opt.min_segment)
    throw SizeError("series of " + std::to_string(x.size()) + " samples is too short for " +
                    std::to_string(opt.n_segments) + " segments");
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(len * (1.0 - opt.overlap))));

  std::vector<double> window(len);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len)));
    wsum2 += window[i] * window[i];
  }

  std::vector<double> acc(len / 2 + 1, 0.0);
  std::vector<double> seg(len);
  for (int s = 0; s < opt.n_segments; ++s) {
    const std::size_t start = static_cast<std::size_t>(s) * hop;
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += x[start + i];
    mean /= static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) seg[i] = (x[start + i] - mean) * window[i];
    const auto spec = fft::forward_real(seg);
    for (std::size_t k = 0; k < acc.size(); ++k) {
      double p = std::norm(spec[k]) / (sample_rate * wsum2);
      if (k != 0 && !(len % 2 == 0 && k == len / 2)) p *= 2.0;
      acc[k] += p;
    }
  }

  SpectrumProfile out;
  out.label = "welch";
  out.freqs.resize(acc.size());
  out.psd.resize(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) {
    out.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(len);
    out.psd[k] = acc[k] / opt.n_segments;
  }
  return out;
}

/// Per-axis PSD of a wander series: the x and y estimates averaged.
inline SpectrumProfile estimate_psd(const WanderSeries& series, int n_segments = 10,
                                    WelchOptions opt = {}) {
  opt.n_segments = n_segments;
  SpectrumProfile px = welch_psd(series.x, series.sample_rate, opt);
  const SpectrumProfile py = welch_psd(series.y, series.sample_rate, opt);
  for (std::size_t k = 0; k < px.psd.size(); ++k) px.psd[k] = 0.5 * (px.psd[k] + py.psd[k]);
  px.label = "estimate";
  return px;
}

/// Sum of psd * df over the estimate's bins: the discrete Parseval integral.
inline double integrated_power(const SpectrumProfile& p) {
  if (p.freqs.size() < 2) return 0.0;
  const double df = p.freqs[1] - p.freqs[0];
  double s = 0.0;
  for (double v : p.psd) s += v * df;
  return s;
}

/// Worst relative error of octave-band powers between an estimate and the
/// reference profile, over [lo, hi). Bands carrying less than `floor` of the
/// reference's total power are skipped.
inline double inband_deviation(const SpectrumProfile& reference, const SpectrumProfile& estimate,
                               double lo = 1.0, double hi = kProfileBandHz, double floor = 0.01) {
  const double total = reference.band_power(lo, hi);
  double worst = 0.0;
  for (double a = lo; a < hi; a *= 2.0) {
    const double b = std::min(hi, 2.0 * a);
    const double ref = reference.band_power(a, b);
    if (ref < floor * total || ref <= 0.0) continue;
    worst = std::max(worst, std::abs(estimate.band_power(a, b) - ref) / ref);
  }
  return worst;
}

inline double rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_profile_csv(std::ostream& out, const SpectrumProfile& p) {
  out << "# beamsim spectrum profile\n";
  out << "# label: " << p.label << "\n";
  out << "# frequency_hz,psd_rad2_per_hz\n";
  for (std::size_t i = 0; i < p.freqs.size(); ++i)
    out << io::fmt(p.freqs[i]) << ',' << io::fmt(p.psd[i]) << '\n';
}

inline void write_profile_csv(const std::string& path, const SpectrumProfile& p) {
  auto out = io::open_out(path);
  write_profile_csv(out, p);
  io::check_written(out, path);
}

inline SpectrumProfile read_profile_csv(std::istream& in, std::string label = "csv") {
  SpectrumProfile p;
  p.label = std::move(label);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = io::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      constexpr std::string_view key = "# label:";
      if (t.substr(0, key.size()) == key) p.label = std::string(io::trim(t.substr(key.size())));
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string_view::npos)
      throw ConfigError("profile csv line " + std::to_string(lineno) + ": expected two columns");
    try {
      p.freqs.push_back(io::parse_double(t.substr(0, comma)));
      p.psd.push_back(io::parse_double(t.substr(comma + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("profile csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  p.validate();
  return p;
}

inline SpectrumProfile read_profile_csv(const std::string& path) {
  auto in = io::open_in(path);
  return read_profile_csv(in, path);
}

inline void write_series_csv(std::ostream& out, const WanderSeries& s) {
  out << "# beamsim wander series, seed " << s.seed << ", clip " << io::fmt(s.clip) << " rad\n";
  out << "time_s,x_rad,y_rad\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << io::fmt(static_cast<double>(i) / s.sample_rate) << ',' << io::fmt(s.x[i]) << ','
        << io::fmt(s.y[i]) << '\n';
}

inline void write_series_csv(const std::string& path, const WanderSeries& s) {
  auto out = io::open_out(path);
  write_series_csv(out, s);
  io::check_written(out, path);
}

}  // namespace beamsim
