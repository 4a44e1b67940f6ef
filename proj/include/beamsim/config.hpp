#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "beamsim/error.hpp"
#include "beamsim/io.hpp"
#include "beamsim/sim.hpp"

// INI-style scenario files. Sections: layout, turbulence, source, controller,
// autocouple, run. Every physical key carries its unit in the name.

namespace beamsim::config {

namespace detail {

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

inline double parse_num(std::string_view key, std::string_view v) {
  try {
    return io::parse_double(v);
  } catch (const ConfigError&) {
    throw ConfigError("key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
  }
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

/// Builtin profile name, or a path to a profile CSV.
inline SpectrumProfile load_profile(std::string_view key, std::string_view v) {
  try {
    return builtin_profile(v);
  } catch (const LookupError&) {
  }
  try {
    SpectrumProfile p = read_profile_csv(std::string(v));
    p.label = std::string(v);
    return p;
  } catch (const IoError&) {
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) +
                      "' is neither a builtin profile nor a readable CSV");
  }
}

}  // namespace detail

struct Key {
  std::string section;
  std::string name;
  std::function<void(Scenario&, std::string_view)> set;
  std::function<std::string(const Scenario&)> get;

  std::string qualified() const { return section + "." + name; }
};

/// All recognised keys, in file order. `[run] preset` is handled separately.
inline const std::vector<Key>& keys() {
  using detail::fmt_bool;
  using detail::parse_bool;
  using detail::parse_num;
  using detail::parse_uint;
  using io::fmt;
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    auto num = [&k](std::string sec, std::string name, auto ref) {
      k.push_back({sec, name, [ref, name](Scenario& s, std::string_view v) { ref(s) = parse_num(name, v); },
                   [ref](const Scenario& s) { return fmt(ref(const_cast<Scenario&>(s))); }});
    };
    auto flag = [&k](std::string sec, std::string name, auto ref) {
      k.push_back({sec, name, [ref, name](Scenario& s, std::string_view v) { ref(s) = parse_bool(name, v); },
                   [ref](const Scenario& s) { return fmt_bool(ref(const_cast<Scenario&>(s))); }});
    };
    auto seed = [&k](std::string name, auto ref) {
      k.push_back({"run", name, [ref, name](Scenario& s, std::string_view v) { ref(s) = parse_uint(name, v); },
                   [ref](const Scenario& s) { return std::to_string(ref(const_cast<Scenario&>(s))); }});
    };
    auto mirror = [&k](std::string name, MirrorState::Axis axis) {
      k.push_back({"layout", name,
                   [name, axis](Scenario& s, std::string_view v) { s.start.set(axis, parse_num(name, v)); },
                   [axis](const Scenario& s) { return fmt(s.start[axis]); }});
    };
    auto profile = [&k](std::string name, WanderComponent Scenario::*w) {
      k.push_back({"turbulence", name,
                   [name, w](Scenario& s, std::string_view v) { (s.*w).profile = detail::load_profile(name, v); },
                   [w](const Scenario& s) { return (s.*w).profile.label; }});
    };
    using S = Scenario&;

    num("layout", "d1_m", [](S s) -> double& { return s.layout.d1; });
    num("layout", "d2_m", [](S s) -> double& { return s.layout.d2; });
    num("layout", "d3_m", [](S s) -> double& { return s.layout.d3; });
    num("layout", "focal_length_m", [](S s) -> double& { return s.layout.focal_length; });
    num("layout", "wavelength_m", [](S s) -> double& { return s.layout.wavelength; });
    num("layout", "fiber_mode_radius_m", [](S s) -> double& { return s.layout.fiber_mode_radius; });
    num("layout", "beam_waist_m", [](S s) -> double& { return s.layout.beam_waist; });
    num("layout", "mirror_range_rad", [](S s) -> double& { return s.limits.range; });
    num("layout", "mirror_resolution_rad", [](S s) -> double& { return s.limits.resolution; });
    num("layout", "misalign_tilt_x_rad", [](S s) -> double& { return s.misalignment.tilt_x; });
    num("layout", "misalign_tilt_y_rad", [](S s) -> double& { return s.misalignment.tilt_y; });
    num("layout", "misalign_shift_x_m", [](S s) -> double& { return s.misalignment.shift_x; });
    num("layout", "misalign_shift_y_m", [](S s) -> double& { return s.misalignment.shift_y; });
    mirror("start_alpha1_rad", MirrorState::kAlpha1);
    mirror("start_beta1_rad", MirrorState::kBeta1);
    mirror("start_alpha2_rad", MirrorState::kAlpha2);
    mirror("start_beta2_rad", MirrorState::kBeta2);
    num("layout", "psd_noise_m", [](S s) -> double& { return s.psd_noise; });

    flag("turbulence", "enabled", [](S s) -> bool& { return s.turbulence.enabled; });
    profile("profile", &Scenario::turbulence);
    num("turbulence", "gain", [](S s) -> double& { return s.turbulence.gain; });
    flag("turbulence", "platform_enabled", [](S s) -> bool& { return s.platform.enabled; });
    profile("platform_profile", &Scenario::platform);
    num("turbulence", "platform_gain", [](S s) -> double& { return s.platform.gain; });
    num("turbulence", "shift_lever_m_per_rad", [](S s) -> double& { return s.shift_lever; });
    num("turbulence", "clip_rad", [](S s) -> double& { return s.wander_clip; });

    k.push_back({"source", "kind",
                 [](Scenario& s, std::string_view v) {
                   try {
                     s.source.kind = parse_source_kind(v);
                   } catch (const Error& e) {
                     throw ConfigError("key 'kind': " + std::string(e.what()));
                   }
                 },
                 [](const Scenario& s) { return std::string(to_string(s.source.kind)); }});
    num("source", "input_power_w", [](S s) -> double& { return s.source.input_power_w; });
    num("source", "pump_mw", [](S s) -> double& { return s.source.pump_mw; });
    num("source", "pair_rate_hz_per_mw", [](S s) -> double& { return s.source.pair_rate_per_mw; });
    num("source", "channel_loss_fraction", [](S s) -> double& { return s.source.channel_loss; });
    num("source", "detector_efficiency_fraction",
        [](S s) -> double& { return s.source.detector_efficiency; });
    num("source", "dark_rate_hz", [](S s) -> double& { return s.source.dark_rate; });
    num("source", "coincidence_window_s", [](S s) -> double& { return s.source.coincidence_window; });
    num("source", "photodiode_noise_fraction", [](S s) -> double& { return s.source.photodiode_noise; });
    num("source", "target_cps", [](S s) -> double& { return s.target_cps; });

    flag("controller", "enabled", [](S s) -> bool& { return s.controller.enabled; });
    num("controller", "rate_hz", [](S s) -> double& { return s.controller.rate; });
    num("controller", "actuator_bandwidth_hz", [](S s) -> double& { return s.controller.actuator_bandwidth; });
    for (auto [prefix, member] : {std::pair{std::string("angle"), &LoopConfig::angle_gains},
                                  std::pair{std::string("position"), &LoopConfig::position_gains}}) {
      auto g = [member](S s) -> PidGains& { return s.controller.*member; };
      num("controller", prefix + "_kp", [g](S s) -> double& { return g(s).kp; });
      num("controller", prefix + "_ki_per_s", [g](S s) -> double& { return g(s).ki; });
      num("controller", prefix + "_kd_s", [g](S s) -> double& { return g(s).kd; });
      num("controller", prefix + "_output_limit_rad", [g](S s) -> double& { return g(s).output_limit; });
      num("controller", prefix + "_integrator_limit_rad_s",
          [g](S s) -> double& { return g(s).integrator_limit; });
    }

    flag("autocouple", "enabled", [](S s) -> bool& { return s.autocouple.enabled; });
    k.push_back({"autocouple", "objective",
                 [](Scenario& s, std::string_view v) {
                   try {
                     s.autocouple.objective = parse_objective_kind(v);
                   } catch (const Error& e) {
                     throw ConfigError("key 'objective': " + std::string(e.what()));
                   }
                 },
                 [](const Scenario& s) { return std::string(to_string(s.autocouple.objective)); }});
    num("autocouple", "random_range_rad", [](S s) -> double& { return s.autocouple.random.range; });
    k.push_back({"autocouple", "random_max_iters",
                 [](Scenario& s, std::string_view v) {
                   s.autocouple.random.max_iters = static_cast<long>(parse_uint("random_max_iters", v));
                 },
                 [](const Scenario& s) { return std::to_string(s.autocouple.random.max_iters); }});
    num("autocouple", "threshold_power_fraction",
        [](S s) -> double& { return s.autocouple.threshold_power; });
    num("autocouple", "threshold_g2", [](S s) -> double& { return s.autocouple.threshold_g2; });
    num("autocouple", "angle_half_range_rad", [](S s) -> double& { return s.autocouple.angle.half_range; });
    num("autocouple", "angle_step_rad", [](S s) -> double& { return s.autocouple.angle.step; });
    num("autocouple", "position_range_rad", [](S s) -> double& { return s.autocouple.position.range; });
    num("autocouple", "position_step_rad", [](S s) -> double& { return s.autocouple.position.step; });
    num("autocouple", "smooth_sigma_steps",
        [](S s) -> double& { return s.autocouple.position.smooth_sigma_steps; });
    num("autocouple", "eval_dwell_power_s", [](S s) -> double& { return s.autocouple.eval_dwell_power; });
    num("autocouple", "eval_dwell_g2_s", [](S s) -> double& { return s.autocouple.eval_dwell_g2; });

    k.push_back({"run", "name", [](Scenario& s, std::string_view v) { s.name = std::string(v); },
                 [](const Scenario& s) { return s.name; }});
    num("run", "duration_s", [](S s) -> double& { return s.duration; });
    num("run", "metric_rate_hz", [](S s) -> double& { return s.metric_rate; });
    num("run", "settle_fraction", [](S s) -> double& { return s.settle_fraction; });
    k.push_back({"run", "telemetry_stride",
                 [](Scenario& s, std::string_view v) {
                   s.telemetry_stride = static_cast<std::size_t>(parse_uint("telemetry_stride", v));
                 },
                 [](const Scenario& s) { return std::to_string(s.telemetry_stride); }});
    seed("seed_turbulence", [](S s) -> std::uint64_t& { return s.seeds.turbulence; });
    seed("seed_noise", [](S s) -> std::uint64_t& { return s.seeds.noise; });
    seed("seed_counting", [](S s) -> std::uint64_t& { return s.seeds.counting; });
    seed("seed_search", [](S s) -> std::uint64_t& { return s.seeds.search; });
    return k;
  }();
  return table;
}

inline const std::vector<std::string>& sections() {
  static const std::vector<std::string> s{"layout", "turbulence", "source", "controller", "autocouple", "run"};
  return s;
}

struct Loaded {
  Scenario scenario;
  std::vector<std::string> notices;  ///< one per key filled from defaults
};

/// Parses a scenario file. `[run] preset` selects the base scenario, `[run]
/// seed` sets all four seeds before the individual seed_* keys apply.
inline Loaded parse(std::istream& in, std::string_view origin = "config") {
  struct Entry {
    std::string value;
    int line;
  };
  std::map<std::string, Entry> entries;  // "section.key"
  std::string section, raw;
  int lineno = 0;
  auto where = [&](int l) { return std::string(origin) + ":" + std::to_string(l) + ": "; };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = io::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where(lineno) + "malformed section header");
      section = std::string(io::trim(line.substr(1, line.size() - 2)));
      if (std::find(sections().begin(), sections().end(), section) == sections().end())
        throw ConfigError(where(lineno) + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where(lineno) + "expected key = value");
    if (section.empty()) throw ConfigError(where(lineno) + "key outside any section");
    std::string key(io::trim(line.substr(0, eq)));
    std::string_view value = io::trim(line.substr(eq + 1));
    if (const auto c = value.find(" #"); c != std::string_view::npos) value = io::trim(value.substr(0, c));
    const std::string q = section + "." + key;
    const bool known = q == "run.preset" || q == "run.seed" ||
                       std::any_of(keys().begin(), keys().end(), [&](const Key& k) { return k.qualified() == q; });
    if (!known) throw ConfigError(where(lineno) + "unknown key '" + key + "' in [" + section + "]");
    if (!entries.emplace(q, Entry{std::string(value), lineno}).second)
      throw ConfigError(where(lineno) + "duplicate key '" + key + "' in [" + section + "]");
  }

  Loaded out;
  if (auto it = entries.find("run.preset"); it != entries.end()) {
    try {
      out.scenario = preset(it->second.value);
    } catch (const LookupError& e) {
      throw ConfigError(where(it->second.line) + "key 'preset': " + e.what());
    }
  }
  if (auto it = entries.find("run.seed"); it != entries.end())
    out.scenario.seeds = Seeds::all(detail::parse_uint("seed", it->second.value));
  for (const Key& k : keys()) {
    const auto it = entries.find(k.qualified());
    if (it == entries.end()) {
      out.notices.push_back("[" + k.section + "] " + k.name + " not set, using " + k.get(out.scenario));
      continue;
    }
    try {
      k.set(out.scenario, it->second.value);
    } catch (const ConfigError& e) {
      throw ConfigError(where(it->second.line) + e.what());
    }
  }
  out.scenario.validate();
  return out;
}

inline Loaded parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in, "config");
}

inline Loaded load(const std::string& path) {
  auto in = io::open_in(path);
  return parse(in, path);
}

/// Writes a complete scenario file; parse() of the result reproduces `sc`.
inline void write(std::ostream& out, const Scenario& sc) {
  for (const std::string& sec : sections()) {
    out << "[" << sec << "]\n";
    for (const Key& k : keys())
      if (k.section == sec) out << k.name << " = " << k.get(sc) << "\n";
    out << "\n";
  }
}

/// Flat key -> value map, suitable for a JSON echo.
inline std::vector<std::pair<std::string, std::string>> echo(const Scenario& sc) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : keys()) out.emplace_back(k.qualified(), k.get(sc));
  return out;
}

}  // namespace beamsim::config
