#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beamsim/autocouple.hpp"
#include "beamsim/control.hpp"
#include "beamsim/detect.hpp"
#include "beamsim/error.hpp"
#include "beamsim/optics.hpp"
#include "beamsim/random.hpp"
#include "beamsim/turbulence.hpp"

namespace beamsim {

/// One additive wander source: a spectrum plus the angular gain from its
/// series to the incoming tilt at FSM1.
struct WanderComponent {
  bool enabled = false;
  SpectrumProfile profile;
  double gain = 1.0;
};

struct AutocoupleSettings {
  bool enabled = true;
  ObjectiveKind objective = ObjectiveKind::power;
  RandomSearchConfig random{5e-3, 0.0, 20'000, 0};
  AngleSearchConfig angle;
  PositionSearchConfig position;
  double threshold_power = 0.009;  ///< coupling-efficiency units, ~1% of peak
  double threshold_g2 = 20000.0;   ///< g2_peak units, ~0.5% of peak coupling at the default source
  double eval_dwell_power = 1e-3;  ///< s per photodiode evaluation
  double eval_dwell_g2 = 1.0;      ///< s per coincidence evaluation
};

struct Seeds {
  std::uint64_t turbulence = 1;
  std::uint64_t noise = 1;
  std::uint64_t counting = 1;
  std::uint64_t search = 1;

  static Seeds all(std::uint64_t s) { return {s, s, s, s}; }
};

/// Complete description of one experiment.
struct Scenario {
  std::string name = "custom";
  OpticalLayout layout;
  MirrorLimits limits;
  /// Static offset of the fiber axis, expressed as an incoming-beam
  /// disturbance; it hides the optimum away from zero mirror angles.
  Disturbance misalignment{-2.4e-3, 1.6e-3, -0.144e-3, 0.126e-3};
  MirrorState start;  ///< mirror state before auto-coupling
  WanderComponent turbulence;
  WanderComponent platform;
  double shift_lever = 0.5;  ///< m of transverse shift per rad of wander tilt
  double wander_clip = kDefaultWanderClip;
  double psd_noise = 1e-6;   ///< per-axis PSD read noise (m)
  SourceModel source;
  double target_cps = 0.0;   ///< >0: calibrate the pump to this count rate at peak efficiency
  LoopConfig controller;
  AutocoupleSettings autocouple;
  double duration = 60.0;    ///< s, stabilization / free-run phase
  double metric_rate = 10'000.0;
  double settle_fraction = 0.05;
  std::size_t telemetry_stride = 0;  ///< 0 = no telemetry
  Seeds seeds;

  std::size_t ticks_per_metric() const {
    return static_cast<std::size_t>(std::llround(controller.rate / metric_rate));
  }

  void validate() const {
    layout.validate();
    source.validate();
    controller.validate();
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (!(metric_rate > 0.0)) throw ConfigError("metric rate must be positive");
    if (metric_rate > controller.rate) throw ConfigError("metric rate exceeds the loop rate");
    const double ratio = controller.rate / metric_rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
      throw ConfigError("loop rate must be an integer multiple of the metric rate");
    if (settle_fraction < 0.0 || settle_fraction >= 1.0) throw ConfigError("settle fraction must be in [0, 1)");
    if (!(limits.range > 0.0) || !(limits.resolution > 0.0)) throw ConfigError("mirror limits must be positive");
    if (psd_noise < 0.0) throw ConfigError("psd noise must be non-negative");
    if (duration * metric_rate < 2.0) throw ConfigError("run yields fewer than two metric samples");
    if (autocouple.enabled && autocouple.objective == ObjectiveKind::g2_peak && source.kind != SourceKind::spdc)
      throw ConfigError("g2 objective needs an spdc source");
    for (const WanderComponent* w : {&turbulence, &platform})
      if (w->enabled) w->profile.validate();
  }

  bool counting() const { return source.kind == SourceKind::spdc; }
};

// ---------------------------------------------------------------------------
// Landscape objectives
// ---------------------------------------------------------------------------

/// Exact coupling efficiency at a static disturbance.
inline Objective noiseless_objective(const OpticalLayout& layout, const Disturbance& static_dist) {
  return {ObjectiveKind::power, [layout, static_dist](const MirrorState& m) {
            return Score{coupling_efficiency(layout, trace_incidence(layout, m, static_dist)), true};
          }};
}

/// Photodiode reading normalized back to coupling efficiency.
inline Objective power_objective(const OpticalLayout& layout, const Disturbance& static_dist,
                                 const SourceModel& src, std::shared_ptr<Rng> rng) {
  SourceModel s = src;
  if (!(s.input_power_w > 0.0)) s.input_power_w = 1e-3;
  return {ObjectiveKind::power, [layout, static_dist, s, rng](const MirrorState& m) {
            const double eta = coupling_efficiency(layout, trace_incidence(layout, m, static_dist));
            return Score{photodiode_power(s, eta, *rng) / (s.input_power_w * (1.0 - s.channel_loss)), true};
          }};
}

/// g2_peak from one counting dwell; undefined statistics score as invalid.
/// Once true coincidences dominate the dark counts this statistic saturates,
/// so it ranks mirror states well only at low brightness.
inline Objective g2_objective(const OpticalLayout& layout, const Disturbance& static_dist,
                              const SourceModel& src, double dwell, std::shared_ptr<Rng> rng) {
  return {ObjectiveKind::g2_peak, [layout, static_dist, src, dwell, rng](const MirrorState& m) {
            const double eta = coupling_efficiency(layout, trace_incidence(layout, m, static_dist));
            try {
              return Score{g2_peak(pair_counts(src, eta, dwell, *rng)), true};
            } catch (const UndefinedStatistic&) {
              return Score{0.0, false};
            }
          }};
}

/// Expected g2_peak: rates instead of counts, so the landscape is noise free.
inline Objective expected_g2_objective(const OpticalLayout& layout, const Disturbance& static_dist,
                                       const SourceModel& src) {
  return {ObjectiveKind::g2_peak, [layout, static_dist, src](const MirrorState& m) {
            const double eta = coupling_efficiency(layout, trace_incidence(layout, m, static_dist));
            const double idler = src.pair_rate() + src.dark_rate;
            const double signal = src.true_coincidence_rate(eta) + src.dark_rate;
            const double acc = signal * idler * src.coincidence_window;
            if (!(acc > 0.0)) return Score{0.0, false};
            return Score{(src.true_coincidence_rate(eta) + acc) / acc, true};
          }};
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

enum class Phase : int { autocouple = 0, run = 1 };

struct TelemetryRow {
  double time;
  LoopErrors errors;
  MirrorState commands;
  bool saturated;
};

struct RunSummary {
  std::string scenario;
  std::string metric;  ///< "eta" or "coincidences"
  bool stabilized = false;
  std::vector<double> time;
  std::vector<double> value;
  std::vector<Phase> phase;
  std::size_t window_begin = 0;  ///< index of the first analysed sample
  std::size_t window_size = 0;
  double window_start_s = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double eta_mean = 0.0;         ///< true coupling efficiency averaged over the run phase
  double autocouple_end_s = 0.0;
  double stabilization_start_s = std::numeric_limits<double>::quiet_NaN();
  long saturations = 0;
  double pump_mw = 0.0;
  MirrorState coupled_state;
  std::optional<SearchOutcome> search;
  std::vector<TelemetryRow> telemetry;
};

namespace detail {
inline std::uint64_t mix_seed(std::uint64_t s, std::uint64_t k) {
  std::uint64_t z = s + 0x9E3779B97F4A7C15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline void window_stats(RunSummary& s, std::size_t first_run_sample, double settle_fraction) {
  const std::size_t n_run = s.value.size() - first_run_sample;
  const auto skip = static_cast<std::size_t>(std::ceil(settle_fraction * static_cast<double>(n_run)));
  s.window_begin = first_run_sample + std::min(skip, n_run);
  s.window_size = s.value.size() - s.window_begin;
  s.window_start_s = s.window_size ? s.time[s.window_begin] : 0.0;
  if (s.window_size == 0) return;
  double sum = 0.0;
  for (std::size_t i = s.window_begin; i < s.value.size(); ++i) sum += s.value[i];
  s.mean = sum / static_cast<double>(s.window_size);
  double ss = 0.0;
  for (std::size_t i = s.window_begin; i < s.value.size(); ++i) ss += (s.value[i] - s.mean) * (s.value[i] - s.mean);
  s.std = s.window_size > 1 ? std::sqrt(ss / static_cast<double>(s.window_size - 1)) : 0.0;
}
}  // namespace detail

/// Summed wander tilt of all enabled components, per axis.
inline std::pair<std::vector<double>, std::vector<double>> scenario_wander(const Scenario& sc, std::size_t n) {
  std::vector<double> tx(n, 0.0), ty(n, 0.0);
  std::uint64_t k = 0;
  for (const WanderComponent* w : {&sc.turbulence, &sc.platform}) {
    ++k;
    if (!w->enabled || w->gain == 0.0) continue;
    const WanderSeries s = synthesize(w->profile, static_cast<double>(n) / sc.controller.rate, sc.controller.rate,
                                      detail::mix_seed(sc.seeds.turbulence, k), sc.wander_clip);
    for (std::size_t i = 0; i < n; ++i) {
      tx[i] += w->gain * s.x[i];
      ty[i] += w->gain * s.y[i];
    }
  }
  return {std::move(tx), std::move(ty)};
}

/// Runs one scenario: optional auto-coupling on the static landscape, then a
/// free-running or stabilized phase of `duration`. Per tick: sample wander,
/// trace to the collimator, read the PSDs, step the controller, sample the
/// metric. Deterministic for fixed seeds.
inline RunSummary run(const Scenario& sc) {
  sc.validate();
  RunSummary out;
  out.scenario = sc.name;
  out.metric = sc.counting() ? "coincidences" : "eta";
  out.stabilized = sc.controller.enabled;

  SourceModel src = sc.source;
  if (src.kind == SourceKind::spdc && sc.target_cps > 0.0)
    src.pump_mw = calibrate_pump_mw(src, peak_efficiency(sc.layout), sc.target_cps);
  out.pump_mw = src.pump_mw;

  // Auto-coupling phase.
  MirrorState coupled = MirrorState(sc.start.alpha1(), sc.start.beta1(), sc.start.alpha2(), sc.start.beta2(), sc.limits);
  double t = 0.0;
  if (sc.autocouple.enabled) {
    auto rng = std::make_shared<Rng>(make_rng(sc.seeds.search, 4));
    const bool g2 = sc.autocouple.objective == ObjectiveKind::g2_peak;
    const double dwell = g2 ? sc.autocouple.eval_dwell_g2 : sc.autocouple.eval_dwell_power;
    Objective base = g2 ? g2_objective(sc.layout, sc.misalignment, src, dwell, rng)
                        : power_objective(sc.layout, sc.misalignment, src, rng);
    // Record every evaluation as a phase-0 sample. The recorded value is the
    // metric the run phase reports (eta or coincidences), not the objective.
    Objective recorded{base.kind, [&, base](const MirrorState& m) {
                         Score s = base.evaluate(m);
                         const double eta = coupling_efficiency(sc.layout, trace_incidence(sc.layout, m, sc.misalignment));
                         t += dwell;
                         out.time.push_back(t);
                         out.value.push_back(g2 ? src.true_coincidence_rate(eta) * dwell : eta);
                         out.phase.push_back(Phase::autocouple);
                         return s;
                       }};
    AutoCoupleConfig cfg;
    cfg.start = coupled;
    cfg.random = sc.autocouple.random;
    cfg.random.threshold = g2 ? sc.autocouple.threshold_g2 : sc.autocouple.threshold_power;
    cfg.random.seed = sc.seeds.search;
    cfg.angle = sc.autocouple.angle;
    cfg.position = sc.autocouple.position;
    out.search = auto_couple(recorded, cfg, &sc.layout);
    coupled = out.search->best_state;
  }
  out.coupled_state = coupled;
  out.autocouple_end_s = t;
  if (sc.controller.enabled) out.stabilization_start_s = t;

  // Run phase.
  const double rate = sc.controller.rate;
  const auto n = static_cast<std::size_t>(std::llround(sc.duration * rate));
  const auto [tx, ty] = scenario_wander(sc, n);
  const LoopReference ref = LoopReference::from(psd_readings_noiseless(sc.layout, coupled, sc.misalignment));
  StabilizationLoop loop(sc.layout, sc.controller, coupled, ref);
  Rng psd_rng = make_rng(sc.seeds.noise, 1);
  Rng pd_rng = make_rng(sc.seeds.noise, 2);
  Rng count_rng = make_rng(sc.seeds.counting, 3);
  const std::size_t tpm = sc.ticks_per_metric();
  const double dwell = static_cast<double>(tpm) / rate;
  const std::size_t first_run_sample = out.value.size();
  out.time.reserve(out.time.size() + n / tpm + 1);
  out.value.reserve(out.time.capacity());

  MirrorState mirrors = coupled;
  double eta_acc = 0.0, eta_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Disturbance d = sc.misalignment + Disturbance{tx[i], ty[i], sc.shift_lever * tx[i], sc.shift_lever * ty[i]};
    const double eta = coupling_efficiency(sc.layout, trace_incidence(sc.layout, mirrors, d));
    const PsdPair psd = psd_readings(sc.layout, mirrors, d, sc.psd_noise, psd_rng);
    MirrorState next = mirrors;
    if (sc.controller.enabled) {
      const LoopStep st = loop.step(psd);
      next = st.commands;
      if (st.saturated) ++out.saturations;
      if (sc.telemetry_stride && i % sc.telemetry_stride == 0)
        out.telemetry.push_back({t + static_cast<double>(i) / rate, st.errors, st.commands, st.saturated});
    }
    eta_acc += eta;
    eta_total += eta;
    if ((i + 1) % tpm == 0) {
      double v;
      if (sc.counting()) {
        v = static_cast<double>(pair_counts(src, eta_acc / static_cast<double>(tpm), dwell, count_rng).coincidences);
      } else {
        v = photodiode_power(src, eta, pd_rng) / (src.input_power_w * (1.0 - src.channel_loss));
      }
      out.time.push_back(t + static_cast<double>(i + 1) / rate);
      out.value.push_back(v);
      out.phase.push_back(Phase::run);
      eta_acc = 0.0;
    }
    mirrors = next;
  }
  out.eta_mean = n ? eta_total / static_cast<double>(n) : 0.0;
  detail::window_stats(out, first_run_sample, sc.settle_fraction);
  return out;
}

struct Improvement {
  double mean_ratio = 1.0;  ///< mean(on) / mean(off)
  double std_ratio = 1.0;   ///< std(off) / std(on), larger is better
};

/// Ratios between an unstabilized and a stabilized run over the same window.
inline Improvement compare(const RunSummary& off, const RunSummary& on) {
  if (off.metric != on.metric) throw ComparisonError("runs report different metrics");
  if (off.window_size != on.window_size || off.window_start_s != on.window_start_s)
    throw ComparisonError("runs do not share an analysis window");
  if (off.window_size == 0) throw ComparisonError("empty analysis window");
  Improvement r;
  r.mean_ratio = off.mean != 0.0 ? on.mean / off.mean : std::numeric_limits<double>::infinity();
  r.std_ratio = on.std != 0.0 ? off.std / on.std : (off.std == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return r;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// fig6a: laser, turbulence simulator off, indoor channel wander only.
/// fig6b: laser, 2.6 km wander added at half angular gain.
/// fig7a: fig6b conditions with the pair source counted at 1 Hz for 600 s.
/// All presets auto-couple on photodiode power; see g2_objective for why a
/// CAR-type objective is only informative near the dark-count limit.
inline Scenario preset(std::string_view name) {
  Scenario sc;
  sc.name = std::string(name);
  sc.platform = {true, builtin_profile("indoor60m"), 1.0};
  sc.turbulence = {false, builtin_profile("outdoor2_6km"), 0.5};
  if (name == "fig6a") return sc;
  if (name == "fig6b") {
    sc.turbulence.enabled = true;
    return sc;
  }
  if (name == "fig7a") {
    sc.turbulence.enabled = true;
    sc.source.kind = SourceKind::spdc;
    sc.target_cps = 5834.0;
    sc.metric_rate = 1.0;
    sc.duration = 600.0;
    return sc;
  }
  throw LookupError("unknown preset '" + std::string(name) + "' (fig6a, fig6b, fig7a)");
}

/// Same scenario with the controller switched on or off.
inline Scenario with_controller(Scenario sc, bool enabled) {
  sc.controller.enabled = enabled;
  return sc;
}

}  // namespace beamsim
