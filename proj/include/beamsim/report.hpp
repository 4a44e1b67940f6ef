#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "beamsim/autocouple.hpp"
#include "beamsim/config.hpp"
#include "beamsim/io.hpp"
#include "beamsim/sim.hpp"

// File writers for runs and searches. Column orders are fixed.

namespace beamsim::report {

using json = nlohmann::ordered_json;

inline json to_json(const MirrorState& m) {
  return {{"alpha1_rad", m.alpha1()}, {"beta1_rad", m.beta1()}, {"alpha2_rad", m.alpha2()}, {"beta2_rad", m.beta2()}};
}

inline json to_json(const Seeds& s) {
  return {{"turbulence", s.turbulence}, {"noise", s.noise}, {"counting", s.counting}, {"search", s.search}};
}

inline json config_echo(const Scenario& sc) {
  json out = json::object();
  for (const auto& [k, v] : config::echo(sc)) out[k] = v;
  return out;
}

inline json to_json(const SearchOutcome& o) {
  json j{{"objective", std::string(to_string(o.objective))},
         {"stage_reached", std::string(to_string(o.stage_reached))},
         {"best_state", to_json(o.best_state)},
         {"best_score", o.best_score},
         {"peak_observed", o.peak_observed},
         {"evaluations", o.evaluations},
         {"random", {{"state", to_json(o.random.state)}, {"score", o.random.score}, {"evaluations", o.random.evaluations}}}};
  if (o.angle)
    j["angle"] = {{"state", to_json(o.angle->state)}, {"score", o.angle->score}, {"evaluations", o.angle->evaluations}};
  if (o.position) {
    const ScanMap& m = o.position->map;
    j["position"] = {{"state", to_json(o.position->state)},
                     {"score", o.position->score},
                     {"evaluations", o.position->evaluations},
                     {"argmax_alpha1_rad", m.axis1[m.argmax_i]},
                     {"argmax_beta1_rad", m.axis2[m.argmax_j]}};
  }
  return j;
}

/// Columns: time_s, metric, phase (0 auto-coupling, 1 free or stabilized run).
inline void write_series_csv(std::ostream& out, const RunSummary& s) {
  out << "# beamsim series scenario=" << s.scenario << " metric=" << s.metric
      << " stabilized=" << (s.stabilized ? 1 : 0) << "\n";
  out << "time_s," << s.metric << ",phase\n";
  for (std::size_t i = 0; i < s.value.size(); ++i)
    out << io::fmt(s.time[i]) << ',' << io::fmt(s.value[i]) << ',' << static_cast<int>(s.phase[i]) << '\n';
}

/// Columns: time_s, e_dx_m, e_x1_m, e_dy_m, e_y1_m, alpha1..beta2 commands, saturated.
inline void write_telemetry_csv(std::ostream& out, const RunSummary& s) {
  out << "# beamsim loop telemetry scenario=" << s.scenario << "\n";
  out << "time_s,e_dx_m,e_x1_m,e_dy_m,e_y1_m,alpha1_rad,beta1_rad,alpha2_rad,beta2_rad,saturated\n";
  for (const TelemetryRow& r : s.telemetry)
    out << io::fmt(r.time) << ',' << io::fmt(r.errors.e_dx) << ',' << io::fmt(r.errors.e_x1) << ','
        << io::fmt(r.errors.e_dy) << ',' << io::fmt(r.errors.e_y1) << ',' << io::fmt(r.commands.alpha1()) << ','
        << io::fmt(r.commands.beta1()) << ',' << io::fmt(r.commands.alpha2()) << ',' << io::fmt(r.commands.beta2())
        << ',' << (r.saturated ? 1 : 0) << '\n';
}

inline json run_json(const RunSummary& s) {
  json j{{"metric", s.metric},
         {"stabilized", s.stabilized},
         {"mean", s.mean},
         {"std", s.std},
         {"eta_mean", s.eta_mean},
         {"samples", s.value.size()},
         {"window", {{"first_sample", s.window_begin}, {"size", s.window_size}, {"start_s", s.window_start_s}}},
         {"markers", {{"autocouple_end_s", s.autocouple_end_s},
                      {"stabilization_start_s", std::isnan(s.stabilization_start_s) ? json() : json(s.stabilization_start_s)}}},
         {"saturations", s.saturations},
         {"pump_mw", s.pump_mw},
         {"coupled_state", to_json(s.coupled_state)}};
  if (s.search) j["search"] = to_json(*s.search);
  return j;
}

/// Summary of one run, or of an off/on pair when `on` is given.
inline json summary_json(const Scenario& sc, const RunSummary& primary, const RunSummary* on = nullptr) {
  json j{{"scenario", sc.name}, {"seeds", to_json(sc.seeds)}};
  if (on) {
    const Improvement r = compare(primary, *on);
    j["unstabilized"] = run_json(primary);
    j["stabilized"] = run_json(*on);
    j["ratios"] = {{"mean_on_over_off", r.mean_ratio}, {"std_off_over_on", r.std_ratio}};
  } else {
    j["run"] = run_json(primary);
  }
  j["config"] = config_echo(sc);
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  auto out = io::open_out(path);
  out << j.dump(2) << '\n';
  io::check_written(out, path);
}

template <class F>
void write_file(const std::string& path, F&& body) {
  auto out = io::open_out(path);
  body(out);
  io::check_written(out, path);
}

}  // namespace beamsim::report
