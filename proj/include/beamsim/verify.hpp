#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "beamsim/control.hpp"
#include "beamsim/fft.hpp"
#include "beamsim/io.hpp"
#include "beamsim/optics.hpp"
#include "beamsim/random.hpp"
#include "beamsim/turbulence.hpp"

// Self-checks run by `beamsim verify`. Each compares a library path against
// an independent computation.

namespace beamsim::verify {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;  ///< measured error or quantity
  double bound = 0.0;  ///< tolerance it is held to
  std::string detail;
};

struct Options {
  bool perturb_closed_form = false;  ///< test hook: scales the closed form by 1.01
};

/// Closed-form coupling against the numeric overlap on a 25 x 25 grid of
/// r' in [0, 1 mm] and gamma in [0, 1 mrad].
inline Check closed_form_sweep(const Options& opt) {
  const OpticalLayout L;
  constexpr int n = 25;
  double worst = 0.0;
  double at_r = 0.0, at_g = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double r = 1e-3 * i / (n - 1);
      const double g = 1e-3 * j / (n - 1);
      const BeamIncidence inc = BeamIncidence::from_components(r, 0.0, g, 0.0);
      double closed = coupling_efficiency(L, inc);
      if (opt.perturb_closed_form) closed *= 1.01;
      const double numeric = overlap_efficiency_numeric(L, inc);
      const double rel = std::abs(closed - numeric) / numeric;
      if (rel > worst) {
        worst = rel;
        at_r = r;
        at_g = g;
      }
    }
  }
  return {"closed_form_vs_overlap", worst <= 1e-3, worst, 1e-3,
          "worst at r'=" + io::fmt(at_r) + " m, gamma=" + io::fmt(at_g) + " rad"};
}

inline std::vector<Check> peak_checks() {
  const OpticalLayout L;
  const double closed = peak_efficiency(L);
  const double numeric = overlap_efficiency_numeric(L, BeamIncidence{});
  return {{"peak_closed_form", std::abs(closed - 0.8980) <= 1e-3, std::abs(closed - 0.8980), 1e-3,
           "eta_max=" + io::fmt(closed)},
          {"peak_numeric", std::abs(numeric - 0.8980) <= 1e-3, std::abs(numeric - 0.8980), 1e-3,
           "eta_max=" + io::fmt(numeric)}};
}

/// P*D by explicit 2x2 products, independent of Mat2.
inline std::array<double, 4> plant_times_decoupler(double d1, double d2, double d3) {
  const double p[4] = {d2 - d3, d3 - d2, d1 + d2, -d2};
  const double q[4] = {1.0, 1.0, (d1 + d2) / d2, 1.0};
  return {p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3], p[2] * q[0] + p[3] * q[2],
          p[2] * q[1] + p[3] * q[3]};
}

inline std::vector<Check> decoupling_checks() {
  std::vector<Check> out;
  const OpticalLayout L;
  const DecouplingCheck c = verify_decoupling(L);
  const auto m = plant_times_decoupler(L.d1, L.d2, L.d3);
  const double want_angle = (L.d3 - L.d2) * L.d1 / L.d2;
  const double diag_err = std::max({std::abs(c.diag_angle - want_angle), std::abs(c.diag_position - L.d1),
                                    std::abs(m[0] - want_angle), std::abs(m[3] - L.d1)});
  out.push_back({"decoupling_diagonal", diag_err <= 1e-12 && std::abs(want_angle - 0.15429) < 5e-6, diag_err, 1e-12,
                 "diag=(" + io::fmt(c.diag_angle) + ", " + io::fmt(c.diag_position) + ") m"});
  out.push_back({"decoupling_offdiag_layout", c.offdiag_relative <= 1e-12, c.offdiag_relative, 1e-12, ""});

  Rng rng = make_rng(20240601, 0);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  double worst = 0.0;
  int failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const double d1 = u(rng), d2 = u(rng), d3 = u(rng);
    try {
      worst = std::max(worst, verify_decoupling(Decoupler{d1, d2}, PlantModel{d1, d2, d3}).offdiag_relative);
    } catch (const GeometryInconsistency&) {
      ++failures;
    }
    const auto e = plant_times_decoupler(d1, d2, d3);
    const double scale = std::hypot(std::hypot(e[0], e[1]), std::hypot(e[2], e[3]));
    worst = std::max(worst, std::max(std::abs(e[1]), std::abs(e[2])) / scale);
  }
  out.push_back({"decoupling_offdiag_random", failures == 0 && worst <= 1e-12, worst, 1e-12,
                 "1000 geometries, d in [0.01, 2] m"});
  return out;
}

inline Check fft_parseval() {
  Rng rng = make_rng(7, 0);
  std::normal_distribution<double> nd;
  std::vector<double> x(4096);
  for (double& v : x) v = nd(rng);
  const auto X = fft::forward_real(x);
  const std::size_t n = x.size();
  double time = 0.0, freq = 0.0;
  for (double v : x) time += v * v;
  for (std::size_t k = 0; k < X.size(); ++k) {
    const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    freq += w * std::norm(X[k]);
  }
  freq /= static_cast<double>(n);
  const double rel = std::abs(time - freq) / time;
  return {"fft_parseval", rel <= 1e-12, rel, 1e-12, ""};
}

/// Variance of a synthesized series against the integrated profile, and the
/// Welch round trip, for each builtin profile.
inline std::vector<Check> turbulence_checks() {
  std::vector<Check> out;
  for (const char* name : {"indoor60m", "outdoor250m", "outdoor2_6km"}) {
    const SpectrumProfile p = builtin_profile(name);
    // Parseval holds before clipping; the round trip uses the clipped series.
    const WanderSeries raw = synthesize(p, 60.0, 10'000.0, 11, std::numeric_limits<double>::infinity());
    const double var = 0.5 * (rms(raw.x) * rms(raw.x) + rms(raw.y) * rms(raw.y));
    const double want = p.total_power();
    const double rel = std::abs(var - want) / want;
    out.push_back({std::string("parseval_") + name, rel <= 0.10, rel, 0.10,
                   "variance " + io::fmt(var) + " vs " + io::fmt(want) + " rad^2"});
    const WanderSeries s = synthesize(p, 60.0, 10'000.0, 11, kDefaultWanderClip);
    const double dev = inband_deviation(p, estimate_psd(s));
    out.push_back({std::string("round_trip_") + name, dev <= 0.20, dev, 0.20, "worst octave band"});
  }
  const WanderSeries s = synthesize(builtin_profile("outdoor2_6km"), 10.0, 10'000.0, 3, kDefaultWanderClip);
  const double r = 0.5 * (rms(s.x) + rms(s.y));
  const double rel = std::abs(r - 3.49e-4) / 3.49e-4;
  out.push_back({"rms_outdoor2_6km", rel <= 0.10, rel, 0.10, "rms " + io::fmt(r) + " rad"});
  return out;
}

/// Combined angle against the quadrature sum (small angles) and against
/// arccos(cos h cos v) (large angles).
inline Check gamma_check() {
  double worst_small = 0.0, worst_large = 0.0;
  for (int i = -10; i <= 10; ++i) {
    for (int j = -10; j <= 10; ++j) {
      if (i == 0 && j == 0) continue;
      const double h = 10e-6 * i, v = 10e-6 * j;
      worst_small = std::max(worst_small, std::abs(total_angular_offset(h, v) / std::hypot(h, v) - 1.0));
      const double H = 5e-3 * i, V = 5e-3 * j;
      const double exact = std::acos(std::cos(H) * std::cos(V));
      worst_large = std::max(worst_large, std::abs(total_angular_offset(H, V) - exact) / exact);
    }
  }
  const bool ok = worst_small <= 1e-9 && worst_large <= 1e-6;
  return {"gamma_combination", ok, worst_small, 1e-9,
          "quadrature sum for |theta| <= 100 urad; arccos form up to 50 mrad differs by " + io::fmt(worst_large)};
}

inline std::vector<Check> run_all(const Options& opt = {}) {
  std::vector<Check> out;
  out.push_back(closed_form_sweep(opt));
  for (auto& c : peak_checks()) out.push_back(std::move(c));
  for (auto& c : decoupling_checks()) out.push_back(std::move(c));
  out.push_back(fft_parseval());
  for (auto& c : turbulence_checks()) out.push_back(std::move(c));
  out.push_back(gamma_check());
  return out;
}

}  // namespace beamsim::verify
