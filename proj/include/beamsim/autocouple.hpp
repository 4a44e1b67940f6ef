#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "beamsim/error.hpp"
#include "beamsim/io.hpp"
#include "beamsim/optics.hpp"
#include "beamsim/random.hpp"

namespace beamsim {

enum class ObjectiveKind { power, g2_peak };

inline std::string_view to_string(ObjectiveKind k) { return k == ObjectiveKind::power ? "power" : "g2"; }

inline ObjectiveKind parse_objective_kind(std::string_view s) {
  if (s == "power") return ObjectiveKind::power;
  if (s == "g2" || s == "g2_peak") return ObjectiveKind::g2_peak;
  throw ConfigError("unknown objective '" + std::string(s) + "' (power|g2)");
}

struct Score {
  double value = 0.0;
  bool valid = true;
};

/// Scalar alignment signal as a function of the mirror state. Evaluations
/// may be noisy and stateful (each one commands the mirrors), so searches call
/// it strictly in sequence.
struct Objective {
  ObjectiveKind kind = ObjectiveKind::power;
  std::function<Score(const MirrorState&)> evaluate;
};

/// Wraps an objective and keeps count of evaluations plus the running best.
class CountingObjective {
 public:
  explicit CountingObjective(const Objective& obj) : obj_(obj) {}

  Score operator()(const MirrorState& m) {
    ++evaluations_;
    Score s = obj_.evaluate(m);
    if (s.valid && s.value > peak_) peak_ = s.value;
    return s;
  }

  long evaluations() const { return evaluations_; }
  double peak() const { return peak_; }

 private:
  const Objective& obj_;
  long evaluations_ = 0;
  double peak_ = -std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

struct RandomSearchConfig {
  double range = 5e-3;
  double threshold = 0.0;
  long max_iters = 20'000;
  std::uint64_t seed = 1;
};

struct StageResult {
  MirrorState state;
  double score = 0.0;
  long evaluations = 0;
};

/// Evaluates the start state, then uniform (alpha1, beta1) draws over
/// +-range with alpha2/beta2 held, until a score exceeds the threshold.
inline StageResult random_search(const Objective& obj, const MirrorState& start,
                                 const RandomSearchConfig& cfg) {
  CountingObjective f(obj);
  Score s = f(start);
  if (s.valid && s.value > cfg.threshold) return {start, s.value, f.evaluations()};

  Rng rng = make_rng(cfg.seed, 0xA5u);
  std::uniform_real_distribution<double> u(-cfg.range, cfg.range);
  while (f.evaluations() < cfg.max_iters) {
    const double a1 = u(rng);
    const double b1 = u(rng);
    MirrorState m = start.with(MirrorState::kAlpha1, a1).with(MirrorState::kBeta1, b1);
    s = f(m);
    if (s.valid && s.value > cfg.threshold) return {m, s.value, f.evaluations()};
  }
  throw NotFoundError("random search found no state above threshold " + io::fmt(cfg.threshold) +
                          " in " + std::to_string(f.evaluations()) + " evaluations",
                      f.evaluations());
}

// ---------------------------------------------------------------------------
// Angle search
// ---------------------------------------------------------------------------

struct AngleSearchConfig {
  double half_range = 1.5e-3;
  double step = 100e-6;
};

struct AngleSweepPoint {
  MirrorState::Axis axis;
  double angle;
  double score;
};

struct AngleSearchResult : StageResult {
  std::vector<AngleSweepPoint> trace;
};

/// Sequential 1-D sweeps: alpha1 over center +- half_range with beta1 fixed,
/// then beta1 with alpha1 set to its best value. The earliest maximum wins ties.
inline AngleSearchResult angle_search(const Objective& obj, const MirrorState& center,
                                      const AngleSearchConfig& cfg = {}) {
  if (!(cfg.step > 0.0) || cfg.half_range < 0.0) throw ConfigError("angle search needs step > 0");
  CountingObjective f(obj);
  AngleSearchResult res;
  const long half = std::lround(cfg.half_range / cfg.step);
  MirrorState state = center;
  double best_score = -std::numeric_limits<double>::infinity();

  for (MirrorState::Axis axis : {MirrorState::kAlpha1, MirrorState::kBeta1}) {
    const double c = center[axis];
    std::optional<MirrorState> best;
    double axis_best = -std::numeric_limits<double>::infinity();
    for (long i = -half; i <= half; ++i) {
      MirrorState m = state.with(axis, c + static_cast<double>(i) * cfg.step);
      Score s = f(m);
      res.trace.push_back({axis, m[axis], s.valid ? s.value : std::numeric_limits<double>::quiet_NaN()});
      if (s.valid && s.value > axis_best) {
        axis_best = s.value;
        best = m;
      }
    }
    if (best) {
      state = *best;
      best_score = axis_best;
    }
  }
  res.state = state;
  res.score = best_score;
  res.evaluations = f.evaluations();
  return res;
}

// ---------------------------------------------------------------------------
// Position search
// ---------------------------------------------------------------------------

/// Raster of scores over (alpha1, beta1). values/smoothed are row-major with
/// alpha1 as the row index. Invalid points hold NaN.
struct ScanMap {
  std::vector<double> axis1;  ///< alpha1 grid (rad)
  std::vector<double> axis2;  ///< beta1 grid (rad)
  std::vector<double> values;
  std::vector<double> smoothed;
  std::size_t argmax_i = 0;
  std::size_t argmax_j = 0;
  std::vector<double> gamma;  ///< angular offset recorded at each raster point

  double at(std::size_t i, std::size_t j) const { return values[i * axis2.size() + j]; }
  double smoothed_at(std::size_t i, std::size_t j) const { return smoothed[i * axis2.size() + j]; }
};

/// Separable Gaussian filter with replicated edges. NaN cells are left out of
/// the weighted average and stay NaN.
inline std::vector<double> gaussian_smooth(const std::vector<double>& values, std::size_t rows,
                                           std::size_t cols, double sigma) {
  if (values.size() != rows * cols) throw ConfigError("smoothing: matrix size mismatch");
  if (!(sigma > 0.0)) return values;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));

  auto clampi = [](long v, long n) { return std::clamp(v, 0L, n - 1); };
  // weighted values and weights, filtered separately (normalized convolution)
  std::vector<double> num(values.size()), den(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool ok = std::isfinite(values[i]);
    num[i] = ok ? values[i] : 0.0;
    den[i] = ok ? 1.0 : 0.0;
  }
  auto pass = [&](std::vector<double>& m, bool along_rows) {
    std::vector<double> out(m.size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const std::size_t rr = along_rows ? static_cast<std::size_t>(clampi(static_cast<long>(r) + k, static_cast<long>(rows))) : r;
          const std::size_t cc = along_rows ? c : static_cast<std::size_t>(clampi(static_cast<long>(c) + k, static_cast<long>(cols)));
          acc += kernel[k + radius] * m[rr * cols + cc];
        }
        out[r * cols + c] = acc;
      }
    m.swap(out);
  };
  pass(num, true);
  pass(num, false);
  pass(den, true);
  pass(den, false);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = std::isfinite(values[i]) && den[i] > 0.0 ? num[i] / den[i] : std::numeric_limits<double>::quiet_NaN();
  return out;
}

struct PositionSearchConfig {
  double range = 5e-3;
  double step = 0.5e-3;
  double smooth_sigma_steps = 1.0;  ///< Gaussian sigma in grid steps; 0 disables
};

struct PositionSearchResult {
  ScanMap map;
  MirrorState state;  ///< mirrors commanded to the smoothed argmax
  double score = 0.0; ///< raw score recorded at that raster point
  long evaluations = 0;
};

/// Full raster of alpha1 x beta1 over +-range with alpha2/beta2 following so
/// that alpha1-alpha2 and beta1-beta2 stay at their locked values. Points that
/// would push FSM2 out of range are still evaluated but marked invalid.
inline PositionSearchResult position_search(const Objective& obj, const MirrorState& angle_locked,
                                            const PositionSearchConfig& cfg = {},
                                            const OpticalLayout* layout = nullptr) {
  if (!(cfg.step > 0.0) || !(cfg.range > 0.0)) throw ConfigError("position search needs step, range > 0");
  CountingObjective f(obj);
  const MirrorLimits& lim = angle_locked.limits();
  const double da = angle_locked.alpha1() - angle_locked.alpha2();
  const double db = angle_locked.beta1() - angle_locked.beta2();
  const long half = std::lround(cfg.range / cfg.step);

  PositionSearchResult res;
  ScanMap& map = res.map;
  for (long i = -half; i <= half; ++i) map.axis1.push_back(lim.quantize(static_cast<double>(i) * cfg.step));
  map.axis2 = map.axis1;
  const std::size_t n1 = map.axis1.size(), n2 = map.axis2.size();
  map.values.assign(n1 * n2, std::numeric_limits<double>::quiet_NaN());
  map.gamma.assign(n1 * n2, std::numeric_limits<double>::quiet_NaN());
  std::vector<MirrorState> states(n1 * n2);

  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const double a1 = map.axis1[i], b1 = map.axis2[j];
      MirrorState m(a1, b1, a1 - da, b1 - db, lim);
      const bool feasible = lim.in_range(a1 - da) && lim.in_range(b1 - db);
      Score s = f(m);
      states[i * n2 + j] = m;
      if (feasible && s.valid) map.values[i * n2 + j] = s.value;
      if (layout) map.gamma[i * n2 + j] = trace_incidence(*layout, m).gamma;
    }

  map.smoothed = gaussian_smooth(map.values, n1, n2, cfg.smooth_sigma_steps);
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const double v = map.smoothed[i * n2 + j];
      if (std::isfinite(v) && v > best) {
        best = v;
        map.argmax_i = i;
        map.argmax_j = j;
        found = true;
      }
    }
  if (!found) throw NotFoundError("position scan produced no valid point", f.evaluations());
  res.state = states[map.argmax_i * n2 + map.argmax_j];
  res.score = map.at(map.argmax_i, map.argmax_j);
  res.evaluations = f.evaluations();
  return res;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

enum class Stage { random, angle, position };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::random: return "random";
    case Stage::angle: return "angle";
    case Stage::position: return "position";
  }
  return "?";
}

struct AutoCoupleConfig {
  MirrorState start;
  RandomSearchConfig random;
  AngleSearchConfig angle;
  PositionSearchConfig position;
  Stage last_stage = Stage::position;
};

struct SearchOutcome {
  ObjectiveKind objective = ObjectiveKind::power;
  Stage stage_reached = Stage::random;
  MirrorState best_state;
  double best_score = 0.0;      ///< score recorded at best_state
  double peak_observed = 0.0;   ///< highest raw score seen in any stage
  long evaluations = 0;
  StageResult random;
  std::optional<AngleSearchResult> angle;
  std::optional<PositionSearchResult> position;
};

/// Random search, then the sequential angle search, then the smoothed
/// position raster. NotFoundError from the random stage propagates.
inline SearchOutcome auto_couple(const Objective& obj, const AutoCoupleConfig& cfg,
                                 const OpticalLayout* layout = nullptr) {
  SearchOutcome out;
  out.objective = obj.kind;
  out.random = random_search(obj, cfg.start, cfg.random);
  out.best_state = out.random.state;
  out.best_score = out.random.score;
  out.peak_observed = out.random.score;
  out.evaluations = out.random.evaluations;
  out.stage_reached = Stage::random;
  if (cfg.last_stage == Stage::random) return out;

  out.angle = angle_search(obj, out.random.state, cfg.angle);
  out.best_state = out.angle->state;
  out.best_score = out.angle->score;
  out.evaluations += out.angle->evaluations;
  for (const auto& p : out.angle->trace)
    if (std::isfinite(p.score)) out.peak_observed = std::max(out.peak_observed, p.score);
  out.stage_reached = Stage::angle;
  if (cfg.last_stage == Stage::angle) return out;

  out.position = position_search(obj, out.angle->state, cfg.position, layout);
  out.best_state = out.position->state;
  out.best_score = out.position->score;
  out.evaluations += out.position->evaluations;
  for (double v : out.position->map.values)
    if (std::isfinite(v)) out.peak_observed = std::max(out.peak_observed, v);
  out.stage_reached = Stage::position;
  return out;
}

inline void write_scan_csv(std::ostream& out, const ScanMap& map) {
  out << "# beamsim position scan, argmax alpha1=" << io::fmt(map.axis1[map.argmax_i])
      << " beta1=" << io::fmt(map.axis2[map.argmax_j]) << "\n";
  out << "alpha1_rad,beta1_rad,score,smoothed_score\n";
  for (std::size_t i = 0; i < map.axis1.size(); ++i)
    for (std::size_t j = 0; j < map.axis2.size(); ++j)
      out << io::fmt(map.axis1[i]) << ',' << io::fmt(map.axis2[j]) << ',' << io::fmt(map.at(i, j))
          << ',' << io::fmt(map.smoothed_at(i, j)) << '\n';
}

}  // namespace beamsim
