#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "beamsim/error.hpp"
#include "beamsim/random.hpp"

namespace beamsim {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Receiver geometry and optical constants. Lengths in metres.
///
/// The effective mode-field radius at the collimator input is derived on
/// demand from the fiber mode radius, focal length and wavelength.
struct OpticalLayout {
  double d1 = 0.09;                  ///< FSM1 -> FSM2
  double d2 = 0.28;                  ///< FSM2 -> collimator (and PSD1)
  double d3 = 0.76;                  ///< FSM2 -> PSD2
  double focal_length = 8.1e-3;      ///< collimator focal length F
  double wavelength = 810e-9;        ///< signal wavelength
  double fiber_mode_radius = 2.5e-6; ///< w0
  double beam_waist = 0.6e-3;        ///< ws, incident beam waist radius

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(d1) || !positive(d2) || !positive(d3))
      throw InvalidLayout("layout distances must be positive and finite");
    if (!positive(focal_length) || !positive(wavelength) || !positive(fiber_mode_radius) ||
        !positive(beam_waist))
      throw InvalidLayout("optical constants must be positive and finite");
    if (d3 == d2)
      throw InvalidLayout("d3 == d2 makes the angle observable x1-x2 degenerate");
  }

  double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }

  /// w_m = lambda F / (pi w0)
  double mode_radius() const {
    return wavelength * focal_length / (std::numbers::pi * fiber_mode_radius);
  }
};

/// lambda F / (pi w0); throws InvalidLayout for non-positive inputs.
inline double derive_mode_radius(const OpticalLayout& layout) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(layout.focal_length) || !positive(layout.wavelength) ||
      !positive(layout.fiber_mode_radius))
    throw InvalidLayout("F, lambda and w0 must be positive");
  return layout.mode_radius();
}

// ---------------------------------------------------------------------------
// Mirrors
// ---------------------------------------------------------------------------

struct MirrorLimits {
  double range = 5e-3;         ///< symmetric angular range (rad)
  double resolution = 0.25e-6; ///< actuator step (rad)

  /// Clamp to +-range, then snap to the nearest step that is still in range.
  double quantize(double angle) const {
    if (!std::isfinite(angle)) angle = 0.0;
    const double max_steps = std::floor(range / resolution);
    double steps = std::nearbyint(std::clamp(angle, -range, range) / resolution);
    steps = std::clamp(steps, -max_steps, max_steps);
    return steps * resolution;
  }

  bool in_range(double angle) const { return std::abs(angle) <= range; }
};

/// Tilt angles of both fast-steering mirrors. Every stored angle is an integer
/// multiple of the resolution and lies within the range.
class MirrorState {
 public:
  enum Axis : std::size_t { kAlpha1 = 0, kBeta1 = 1, kAlpha2 = 2, kBeta2 = 3 };

  MirrorState() = default;
  MirrorState(double alpha1, double beta1, double alpha2, double beta2, MirrorLimits limits = {})
      : limits_(limits) {
    set(kAlpha1, alpha1);
    set(kBeta1, beta1);
    set(kAlpha2, alpha2);
    set(kBeta2, beta2);
  }

  double alpha1() const { return angles_[kAlpha1]; }
  double beta1() const { return angles_[kBeta1]; }
  double alpha2() const { return angles_[kAlpha2]; }
  double beta2() const { return angles_[kBeta2]; }
  double operator[](Axis a) const { return angles_[a]; }
  const MirrorLimits& limits() const { return limits_; }

  /// Commands one axis. Returns true when the request had to be clamped.
  bool set(Axis axis, double angle) {
    const double q = limits_.quantize(angle);
    angles_[axis] = q;
    return !limits_.in_range(angle) || !std::isfinite(angle);
  }

  MirrorState with(Axis axis, double angle) const {
    MirrorState out = *this;
    out.set(axis, angle);
    return out;
  }

  bool operator==(const MirrorState& o) const { return angles_ == o.angles_; }

 private:
  std::array<double, 4> angles_{};
  MirrorLimits limits_{};
};

// ---------------------------------------------------------------------------
// Beam state
// ---------------------------------------------------------------------------

/// Incoming-beam wander, referenced upstream of FSM1.
struct Disturbance {
  double tilt_x = 0.0;  ///< rad
  double tilt_y = 0.0;  ///< rad
  double shift_x = 0.0; ///< m, at FSM1
  double shift_y = 0.0; ///< m, at FSM1

  Disturbance operator+(const Disturbance& o) const {
    return {tilt_x + o.tilt_x, tilt_y + o.tilt_y, shift_x + o.shift_x, shift_y + o.shift_y};
  }
};

/// Total angle between beam axis and fiber axis for two planar tilts,
/// arccos(cos th * cos tv), evaluated through half-angle sines so that
/// microradian tilts keep full relative precision.
inline double total_angular_offset(double theta_h, double theta_v) {
  const double sh = std::sin(0.5 * theta_h);
  const double sv = std::sin(0.5 * theta_v);
  // 1 - cos h cos v = 2 sin^2(h/2) + 2 cos h sin^2(v/2)
  const double one_minus = 2.0 * sh * sh + 2.0 * std::cos(theta_h) * sv * sv;
  const double half = std::sqrt(std::max(0.0, 0.5 * one_minus));
  return 2.0 * std::asin(std::min(1.0, half));
}

/// Beam offsets at the collimator entrance.
struct BeamIncidence {
  double r_h = 0.0;
  double r_v = 0.0;
  double theta_h = 0.0;
  double theta_v = 0.0;
  double r_prime = 0.0;
  double gamma = 0.0;

  static BeamIncidence from_components(double r_h, double r_v, double theta_h, double theta_v) {
    return {r_h, r_v, theta_h, theta_v, std::hypot(r_h, r_v), total_angular_offset(theta_h, theta_v)};
  }
};

/// Beam centroids on the two position-sensitive detectors.
struct PsdPair {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double noise_sigma = 0.0;
};

/// Ray trace to the collimator. A mirror tilt deflects the beam by twice the
/// tilt; incoming tilt travels d1+d2 to the collimator, incoming shift adds
/// directly.
inline BeamIncidence trace_incidence(const OpticalLayout& layout, const MirrorState& m,
                                     const Disturbance& dist = {}) {
  const double lever = layout.d1 + layout.d2;
  const double r_h = 2.0 * layout.d1 * m.alpha1() + 2.0 * layout.d2 * (m.alpha1() - m.alpha2()) +
                     dist.tilt_x * lever + dist.shift_x;
  const double r_v = 2.0 * layout.d1 * m.beta1() + 2.0 * layout.d2 * (m.beta1() - m.beta2()) +
                     dist.tilt_y * lever + dist.shift_y;
  const double th = 2.0 * (m.alpha1() - m.alpha2()) + dist.tilt_x;
  const double tv = 2.0 * (m.beta1() - m.beta2()) + dist.tilt_y;
  return BeamIncidence::from_components(r_h, r_v, th, tv);
}

/// Noiseless detector positions. PSD1 sits at the collimator distance d2
/// behind FSM2, PSD2 at d3.
inline PsdPair psd_readings_noiseless(const OpticalLayout& layout, const MirrorState& m,
                                      const Disturbance& dist = {}) {
  const auto& L = layout;
  PsdPair p;
  p.x1 = 2.0 * (L.d1 + L.d2) * m.alpha1() - 2.0 * L.d2 * m.alpha2() + dist.tilt_x * (L.d1 + L.d2) +
         dist.shift_x;
  p.y1 = 2.0 * (L.d1 + L.d2) * m.beta1() - 2.0 * L.d2 * m.beta2() + dist.tilt_y * (L.d1 + L.d2) +
         dist.shift_y;
  p.x2 = 2.0 * L.d1 * m.alpha1() + 2.0 * L.d3 * (m.alpha1() - m.alpha2()) +
         dist.tilt_x * (L.d1 + L.d3) + dist.shift_x;
  p.y2 = 2.0 * L.d1 * m.beta1() + 2.0 * L.d3 * (m.beta1() - m.beta2()) +
         dist.tilt_y * (L.d1 + L.d3) + dist.shift_y;
  return p;
}

/// PSD readings with additive Gaussian read noise drawn from `rng`.
inline PsdPair psd_readings(const OpticalLayout& layout, const MirrorState& m,
                            const Disturbance& dist, double noise_sigma, Rng& rng) {
  PsdPair p = psd_readings_noiseless(layout, m, dist);
  p.noise_sigma = noise_sigma;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, noise_sigma);
    p.x1 += n(rng);
    p.y1 += n(rng);
    p.x2 += n(rng);
    p.y2 += n(rng);
  }
  return p;
}

inline PsdPair psd_readings(const OpticalLayout& layout, const MirrorState& m,
                            const Disturbance& dist, double noise_sigma, std::uint64_t noise_seed) {
  Rng rng = make_rng(noise_seed, 0x9Du);
  return psd_readings(layout, m, dist, noise_sigma, rng);
}

// ---------------------------------------------------------------------------
// Coupling efficiency
// ---------------------------------------------------------------------------

/// Closed-form single-mode-fiber coupling efficiency for a Gaussian beam with
/// radial offset r' and angular offset gamma, aperture assumed unbounded.
inline double coupling_efficiency(const OpticalLayout& layout, const BeamIncidence& inc) {
  const double wm = layout.mode_radius();
  const double ws = layout.beam_waist;
  const double k = layout.wavenumber();
  const double m2 = wm * wm;
  const double s2 = ws * ws;
  const double amp = 2.0 * wm * ws / (m2 + s2);
  const double arg =
      (4.0 * inc.r_prime * inc.r_prime + k * k * inc.gamma * inc.gamma * m2 * s2) / (4.0 * (m2 + s2));
  const double root = amp * std::exp(-arg);
  return root * root;
}

/// Highest efficiency the layout can reach (r' = gamma = 0).
inline double peak_efficiency(const OpticalLayout& layout) {
  return coupling_efficiency(layout, BeamIncidence{});
}

/// Square sampling grid for the overlap integral, symmetric about the axis.
struct GridSpec {
  double half_width = 4e-3;
  int n = 512;
};

/// Sampled complex field on a GridSpec, row-major (y outer, x inner).
struct FieldGrid {
  double half_width = 0.0;
  int n = 0;
  std::vector<std::complex<double>> values;

  double step() const { return 2.0 * half_width / (n - 1); }
  double coord(int i) const { return -half_width + i * step(); }
};

/// Misaligned incident Gaussian with waist ws, offset (r_h, r_v) and linear
/// phase tilt k(theta_h x + theta_v y).
inline FieldGrid incident_field(const OpticalLayout& layout, const BeamIncidence& inc,
                                const GridSpec& grid) {
  FieldGrid f{grid.half_width, grid.n, {}};
  f.values.resize(static_cast<std::size_t>(grid.n) * grid.n);
  const double ws = layout.beam_waist;
  const double k = layout.wavenumber();
  const double norm = std::sqrt(2.0 / (std::numbers::pi * ws * ws));
  std::vector<std::complex<double>> fx(grid.n), fy(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    const double c = f.coord(i);
    const double dx = c - inc.r_h;
    const double dy = c - inc.r_v;
    fx[i] = std::polar(std::exp(-dx * dx / (ws * ws)), k * inc.theta_h * c);
    fy[i] = std::polar(std::exp(-dy * dy / (ws * ws)), k * inc.theta_v * c);
  }
  for (int j = 0; j < grid.n; ++j)
    for (int i = 0; i < grid.n; ++i) f.values[static_cast<std::size_t>(j) * grid.n + i] = norm * fx[i] * fy[j];
  return f;
}

/// Fiber mode imaged to the collimator input, radius w_m.
inline FieldGrid fiber_mode_field(const OpticalLayout& layout, const GridSpec& grid) {
  FieldGrid f{grid.half_width, grid.n, {}};
  f.values.resize(static_cast<std::size_t>(grid.n) * grid.n);
  const double wm = layout.mode_radius();
  const double norm = std::sqrt(2.0 / (std::numbers::pi * wm * wm));
  for (int j = 0; j < grid.n; ++j) {
    const double y = f.coord(j);
    for (int i = 0; i < grid.n; ++i) {
      const double x = f.coord(i);
      f.values[static_cast<std::size_t>(j) * grid.n + i] = norm * std::exp(-(x * x + y * y) / (wm * wm));
    }
  }
  return f;
}

/// Smallest grid that satisfies the width and phase-resolution preconditions
/// of overlap_efficiency_numeric, never coarser than 512 samples over +-4 mm.
inline GridSpec default_grid(const OpticalLayout& layout, const BeamIncidence& inc) {
  GridSpec g;
  g.half_width = std::max(4e-3, 4.0 * std::max(layout.beam_waist, inc.r_prime + layout.beam_waist));
  const double tilt = std::max(std::abs(inc.theta_h), std::abs(inc.theta_v));
  const double k = layout.wavenumber();
  // phase advance per cell k*tilt*dx must stay under pi/8 for margin
  const double max_dx = tilt > 0.0 ? (std::numbers::pi / 8.0) / (k * tilt) : g.half_width;
  const int need = static_cast<int>(std::ceil(2.0 * g.half_width / max_dx)) + 1;
  g.n = std::max(512, need);
  return g;
}

/// Brute-force overlap efficiency |sum E* F|^2 / sum |E|^2 on a 2-D trapezoid
/// grid. Independent of the closed form; used as its oracle.
inline double overlap_efficiency_numeric(const OpticalLayout& layout, const BeamIncidence& inc,
                                         const GridSpec& grid) {
  if (grid.n < 16) throw GridResolutionError("overlap grid needs at least 16 samples per axis");
  const double need = 4.0 * std::max(layout.beam_waist, inc.r_prime + layout.beam_waist);
  if (grid.half_width < need)
    throw GridResolutionError("overlap grid half-width " + std::to_string(grid.half_width) +
                              " m is narrower than the required " + std::to_string(need) + " m");
  const double dx = 2.0 * grid.half_width / (grid.n - 1);
  const double tilt = std::max(std::abs(inc.theta_h), std::abs(inc.theta_v));
  if (layout.wavenumber() * tilt * dx > std::numbers::pi / 4.0)
    throw GridResolutionError("overlap grid under-resolves the tilt phase (> pi/4 per cell)");

  const FieldGrid e = incident_field(layout, inc, grid);
  const FieldGrid f = fiber_mode_field(layout, grid);
  auto weight = [&](int i) { return (i == 0 || i == grid.n - 1) ? 0.5 : 1.0; };

  std::complex<double> overlap{0.0, 0.0};
  double power = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const double wj = weight(j);
    for (int i = 0; i < grid.n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(j) * grid.n + i;
      const double w = wj * weight(i);
      overlap += w * std::conj(e.values[idx]) * f.values[idx];
      power += w * std::norm(e.values[idx]);
    }
  }
  const double area = dx * dx;
  return std::norm(overlap * area) / (power * area);
}

inline double overlap_efficiency_numeric(const OpticalLayout& layout, const BeamIncidence& inc) {
  return overlap_efficiency_numeric(layout, inc, default_grid(layout, inc));
}

// ---------------------------------------------------------------------------
// Static alignment helpers
// ---------------------------------------------------------------------------

/// Mirror angles that null both the offset and the tilt at the collimator for
/// a static disturbance (unquantized).
struct AlignedAngles {
  double alpha1, beta1, alpha2, beta2;
};

inline AlignedAngles analytic_optimum(const OpticalLayout& layout, const Disturbance& d) {
  // theta = 2(a1 - a2) + t = 0 and r = 2 d1 a1 + 2 d2 (a1 - a2) + t(d1 + d2) + s = 0
  auto solve = [&](double t, double s) {
    const double a1 = -(s + t * layout.d1) / (2.0 * layout.d1);
    return std::pair{a1, a1 + 0.5 * t};
  };
  const auto [a1, a2] = solve(d.tilt_x, d.shift_x);
  const auto [b1, b2] = solve(d.tilt_y, d.shift_y);
  return {a1, b1, a2, b2};
}

}  // namespace beamsim
