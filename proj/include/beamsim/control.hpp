#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "beamsim/error.hpp"
#include "beamsim/optics.hpp"

namespace beamsim {

// ---------------------------------------------------------------------------
// PID
// ---------------------------------------------------------------------------

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;  ///< 1/s
  double kd = 0.0;  ///< s
  double output_limit = std::numeric_limits<double>::infinity();
  /// Bound on the accumulated error integral. Infinite means output_limit/ki.
  double integrator_limit = std::numeric_limits<double>::infinity();

  double effective_integrator_limit() const {
    if (std::isfinite(integrator_limit)) return integrator_limit;
    if (ki > 0.0 && std::isfinite(output_limit)) return output_limit / ki;
    return std::numeric_limits<double>::infinity();
  }
};

struct PidState {
  double integrator = 0.0;  ///< sum of e*dt
  double prev_measurement = 0.0;
  bool has_prev = false;
  double last_output = 0.0;
  bool fault = false;
};

/// One discrete PID update. Rectangle-rule integral (the current error is
/// included), backward-difference derivative on the measurement, clamped
/// integrator and output. A non-finite error or measurement leaves the state
/// untouched, raises `fault` and returns the previous output.
inline double pid_step(const PidGains& g, PidState& st, double error, double measurement, double dt) {
  if (!(dt > 0.0)) throw ConfigError("pid_step needs dt > 0");
  if (!std::isfinite(error) || !std::isfinite(measurement)) {
    st.fault = true;
    return st.last_output;
  }
  st.fault = false;
  const double ilim = g.effective_integrator_limit();
  st.integrator = std::clamp(st.integrator + error * dt, -ilim, ilim);
  const double deriv = st.has_prev ? -(measurement - st.prev_measurement) / dt : 0.0;
  st.prev_measurement = measurement;
  st.has_prev = true;
  const double u = g.kp * error + g.ki * st.integrator + g.kd * deriv;
  st.last_output = std::clamp(u, -g.output_limit, g.output_limit);
  return st.last_output;
}

/// Zero-reference form: the measurement is taken as -error.
inline double pid_step(const PidGains& g, PidState& st, double error, double dt) {
  return pid_step(g, st, error, -error, dt);
}

// ---------------------------------------------------------------------------
// Decoupler and plant
// ---------------------------------------------------------------------------

struct Mat2 {
  double a, b, c, d;  // [[a, b], [c, d]]

  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  std::array<double, 2> operator*(const std::array<double, 2>& v) const {
    return {a * v[0] + b * v[1], c * v[0] + d * v[1]};
  }
  double det() const { return a * d - b * c; }
  double norm() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

/// D = [[1, 1], [(d1+d2)/d2, 1]]: maps control values (c1, c2) to the two
/// mirror commands of one axis.
struct Decoupler {
  double d1 = 0.09;
  double d2 = 0.28;

  Mat2 matrix() const { return {1.0, 1.0, (d1 + d2) / d2, 1.0}; }
  double det() const { return 1.0 - (d1 + d2) / d2; }
  std::array<double, 2> apply(double c1, double c2) const { return matrix() * std::array{c1, c2}; }
};

inline std::array<double, 2> decouple(double c1, double c2, const Decoupler& dec) { return dec.apply(c1, c2); }

/// P = [[d2-d3, -d2+d3], [d1+d2, -d2]]: mirror angles (a1, a2) to the
/// observables (x1-x2, x1) with the mirror-reflection factor 2 removed. The
/// physical readings are 2*P*(a1, a2).
struct PlantModel {
  double d1 = 0.09;
  double d2 = 0.28;
  double d3 = 0.76;

  Mat2 matrix() const { return {d2 - d3, -d2 + d3, d1 + d2, -d2}; }
  std::array<double, 2> apply(double a1, double a2) const { return matrix() * std::array{a1, a2}; }
};

struct DecouplingCheck {
  double diag_angle = 0.0;     ///< (P D)[0][0] = (d3 - d2) d1 / d2
  double diag_position = 0.0;  ///< (P D)[1][1] = d1
  double offdiag_relative = 0.0;
  bool degenerate = false;     ///< angle channel has zero gain (d3 == d2)
};

/// Forms P*D and checks that it is diagonal to 1e-12 relative.
inline DecouplingCheck verify_decoupling(const Decoupler& dec, const PlantModel& plant,
                                         double tolerance = 1e-12) {
  const Mat2 pd = plant.matrix() * dec.matrix();
  DecouplingCheck out;
  out.diag_angle = pd.a;
  out.diag_position = pd.d;
  const double scale = pd.norm();
  out.offdiag_relative = scale > 0.0 ? std::max(std::abs(pd.b), std::abs(pd.c)) / scale : 0.0;
  out.degenerate = std::abs(pd.a) <= tolerance * std::max(scale, 1e-300);
  if (out.offdiag_relative > tolerance)
    throw GeometryInconsistency("P*D off-diagonal " + std::to_string(out.offdiag_relative) +
                                " exceeds tolerance");
  return out;
}

inline DecouplingCheck verify_decoupling(const OpticalLayout& layout) {
  return verify_decoupling(Decoupler{layout.d1, layout.d2}, PlantModel{layout.d1, layout.d2, layout.d3});
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

/// Setpoints for (x1-x2, x1, y1-y2, y1), taken from the auto-coupled state.
struct LoopReference {
  double dx = 0.0;
  double x1 = 0.0;
  double dy = 0.0;
  double y1 = 0.0;

  static LoopReference from(const PsdPair& p) { return {p.x1 - p.x2, p.x1, p.y1 - p.y2, p.y1}; }
};

/// Default gains, in units where each decoupled channel has unit plant gain.
/// Tuned on the diagonalized plant with the 1 kHz lag at 10 kHz: with kd = 0
/// the proportional edge of oscillation is kp ~ 3.3; backed off 50% to 1.6,
/// then ki = 4000/s added for zero steady-state error.
inline PidGains default_channel_gains() {
  PidGains g;
  g.kp = 1.6;
  g.ki = 4000.0;
  g.kd = 0.0;
  g.output_limit = 10e-3;
  return g;
}

struct LoopConfig {
  bool enabled = true;
  double rate = 10'000.0;              ///< Hz
  double actuator_bandwidth = 1'000.0; ///< Hz, first-order lag; <= 0 disables the lag
  PidGains angle_gains = default_channel_gains();     ///< drives x1-x2 (y1-y2)
  PidGains position_gains = default_channel_gains();  ///< drives x1 (y1)

  void validate() const {
    if (!(rate > 0.0)) throw ConfigError("loop rate must be positive");
    if (!std::isfinite(actuator_bandwidth)) throw ConfigError("actuator bandwidth must be finite");
  }
  /// The lag is resolved by the loop only if the rate exceeds twice its bandwidth.
  bool undersampled() const { return actuator_bandwidth > 0.0 && rate <= 2.0 * actuator_bandwidth; }
};

struct LoopErrors {
  double e_dx = 0.0, e_x1 = 0.0, e_dy = 0.0, e_y1 = 0.0;
};

struct LoopStep {
  MirrorState commands;
  LoopErrors errors;
  bool saturated = false;
  bool fault = false;
};

/// Two decoupled PID channels per axis driving both FSMs about the
/// auto-coupled rest state. Single owner; step() is the only mutator.
class StabilizationLoop {
 public:
  StabilizationLoop(const OpticalLayout& layout, const LoopConfig& cfg, const MirrorState& rest,
                    const LoopReference& ref)
      : cfg_(cfg), rest_(rest), current_(rest), ref_(ref), dec_{layout.d1, layout.d2} {
    layout.validate();
    cfg.validate();
    // Normalize each channel by its physical diagonal gain 2*(P D)_ii so the
    // gains act on a unit plant.
    const DecouplingCheck chk = verify_decoupling(layout);
    angle_gain_ = 2.0 * chk.diag_angle;
    position_gain_ = 2.0 * chk.diag_position;
    lag_ = cfg.actuator_bandwidth > 0.0 ? std::exp(-2.0 * std::numbers::pi * cfg.actuator_bandwidth / cfg.rate)
                                        : 0.0;
  }

  const MirrorState& commands() const { return current_; }
  const LoopReference& reference() const { return ref_; }
  double dt() const { return 1.0 / cfg_.rate; }

  LoopStep step(const PsdPair& psd) {
    LoopStep out;
    out.commands = current_;
    if (!cfg_.enabled) return out;

    const double dx = psd.x1 - psd.x2, dy = psd.y1 - psd.y2;
    out.errors = {ref_.dx - dx, ref_.x1 - psd.x1, ref_.dy - dy, ref_.y1 - psd.y1};
    const double h = dt();
    const double c1x = pid_step(cfg_.angle_gains, pid_[0], out.errors.e_dx / angle_gain_, dx / angle_gain_, h);
    const double c2x = pid_step(cfg_.position_gains, pid_[1], out.errors.e_x1 / position_gain_, psd.x1 / position_gain_, h);
    const double c1y = pid_step(cfg_.angle_gains, pid_[2], out.errors.e_dy / angle_gain_, dy / angle_gain_, h);
    const double c2y = pid_step(cfg_.position_gains, pid_[3], out.errors.e_y1 / position_gain_, psd.y1 / position_gain_, h);
    out.fault = pid_[0].fault || pid_[1].fault || pid_[2].fault || pid_[3].fault;

    const auto [a1, a2] = dec_.apply(c1x, c2x);
    const auto [b1, b2] = dec_.apply(c1y, c2y);
    const std::array<double, 4> target{a1, b1, a2, b2};  // alpha1, beta1, alpha2, beta2 offsets
    for (std::size_t k = 0; k < 4; ++k) lagged_[k] += (1.0 - lag_) * (target[k] - lagged_[k]);

    MirrorState next = rest_;
    bool sat = false;
    sat |= next.set(MirrorState::kAlpha1, rest_.alpha1() + lagged_[0]);
    sat |= next.set(MirrorState::kBeta1, rest_.beta1() + lagged_[1]);
    sat |= next.set(MirrorState::kAlpha2, rest_.alpha2() + lagged_[2]);
    sat |= next.set(MirrorState::kBeta2, rest_.beta2() + lagged_[3]);
    current_ = next;
    out.commands = next;
    out.saturated = sat;
    return out;
  }

 private:
  LoopConfig cfg_;
  MirrorState rest_;
  MirrorState current_;
  LoopReference ref_;
  Decoupler dec_;
  double angle_gain_ = 1.0;
  double position_gain_ = 1.0;
  double lag_ = 0.0;
  std::array<PidState, 4> pid_{};
  std::array<double, 4> lagged_{};
};

}  // namespace beamsim
