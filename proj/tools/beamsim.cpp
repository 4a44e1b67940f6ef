// beamsim command-line front end.
//
// Exit codes: 0 ok, 1 validation or usage error, 2 I/O error, 3 auto-coupling
// found nothing above threshold, 4 a verification check failed.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "beamsim/beamsim.hpp"

namespace fs = std::filesystem;
using namespace beamsim;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kIo = 2, kNotFound = 3, kVerifyFailed = 4 };

struct ScenarioArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

void add_scenario_args(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("config", a.config, "Scenario file (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--preset", a.preset, "Built-in scenario: fig6a, fig6b, fig7a")
      ->check(CLI::IsMember({"fig6a", "fig6b", "fig7a"}));
  cmd->add_option("--seed", a.seed, "Seed for all random streams (overrides the file)")->envname("BEAMSIM_SEED");
}

Scenario load_scenario(const ScenarioArgs& a) {
  if (!a.config.empty() && !a.preset.empty()) throw ConfigError("give either a config file or --preset, not both");
  Scenario sc;
  if (!a.config.empty()) {
    config::Loaded l = config::load(a.config);
    for (const std::string& n : l.notices) std::cerr << "note: " << n << "\n";
    sc = std::move(l.scenario);
  } else if (!a.preset.empty()) {
    sc = preset(a.preset);
  }
  if (a.seed) sc.seeds = Seeds::all(*a.seed);
  sc.validate();
  return sc;
}

std::string out_path(const std::string& dir, const std::string& name) {
  fs::path d(dir);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return (d / name).string();
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNotFound;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  ScenarioArgs scenario;
  std::string out_dir = ".";
  bool compare = false;
  std::size_t telemetry_stride = 0;
};

void print_run(const char* label, const RunSummary& s) {
  std::cout << label << ": " << s.metric << " mean " << io::fmt(s.mean) << " std " << io::fmt(s.std) << " over "
            << s.window_size << " samples\n";
}

int cmd_simulate(const SimulateArgs& a) {
  Scenario sc = load_scenario(a.scenario);
  if (a.telemetry_stride) sc.telemetry_stride = a.telemetry_stride;
  const std::string summary_path = out_path(a.out_dir, "summary.json");
  if (a.compare) {
    const RunSummary off = run(with_controller(sc, false));
    const RunSummary on = run(with_controller(sc, true));
    const Improvement r = compare(off, on);
    report::write_file(out_path(a.out_dir, "series_off.csv"), [&](std::ostream& o) { report::write_series_csv(o, off); });
    report::write_file(out_path(a.out_dir, "series_on.csv"), [&](std::ostream& o) { report::write_series_csv(o, on); });
    if (sc.telemetry_stride)
      report::write_file(out_path(a.out_dir, "telemetry.csv"), [&](std::ostream& o) { report::write_telemetry_csv(o, on); });
    report::write_json(summary_path, report::summary_json(with_controller(sc, true), off, &on));
    print_run("unstabilized", off);
    print_run("stabilized", on);
    std::cout << "mean ratio (on/off) " << io::fmt(r.mean_ratio) << "\nstd ratio (off/on) " << io::fmt(r.std_ratio)
              << "\n";
  } else {
    const RunSummary s = run(sc);
    report::write_file(out_path(a.out_dir, "series.csv"), [&](std::ostream& o) { report::write_series_csv(o, s); });
    if (sc.telemetry_stride && !s.telemetry.empty())
      report::write_file(out_path(a.out_dir, "telemetry.csv"), [&](std::ostream& o) { report::write_telemetry_csv(o, s); });
    report::write_json(summary_path, report::summary_json(sc, s));
    print_run(s.stabilized ? "stabilized" : "unstabilized", s);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct AutocoupleArgs {
  ScenarioArgs scenario;
  std::string objective = "power";
  std::string out_dir = ".";
  bool noiseless = false;
  std::optional<double> threshold;
};

int cmd_autocouple(const AutocoupleArgs& a) {
  Scenario sc = load_scenario(a.scenario);
  const ObjectiveKind kind = parse_objective_kind(a.objective);
  const bool g2 = kind == ObjectiveKind::g2_peak;
  SourceModel src = sc.source;
  if (g2) src.kind = SourceKind::spdc;
  if (g2 && sc.target_cps > 0.0) src.pump_mw = calibrate_pump_mw(src, peak_efficiency(sc.layout), sc.target_cps);

  auto rng = std::make_shared<Rng>(make_rng(sc.seeds.search, 4));
  Objective obj;
  if (a.noiseless)
    obj = g2 ? expected_g2_objective(sc.layout, sc.misalignment, src) : noiseless_objective(sc.layout, sc.misalignment);
  else
    obj = g2 ? g2_objective(sc.layout, sc.misalignment, src, sc.autocouple.eval_dwell_g2, rng)
             : power_objective(sc.layout, sc.misalignment, src, rng);

  AutoCoupleConfig cfg;
  cfg.start = MirrorState(sc.start.alpha1(), sc.start.beta1(), sc.start.alpha2(), sc.start.beta2(), sc.limits);
  cfg.random = sc.autocouple.random;
  cfg.random.threshold = a.threshold.value_or(g2 ? sc.autocouple.threshold_g2 : sc.autocouple.threshold_power);
  cfg.random.seed = sc.seeds.search;
  cfg.angle = sc.autocouple.angle;
  cfg.position = sc.autocouple.position;

  const SearchOutcome out = auto_couple(obj, cfg, &sc.layout);
  const double eta = coupling_efficiency(sc.layout, trace_incidence(sc.layout, out.best_state, sc.misalignment));
  const AlignedAngles opt = analytic_optimum(sc.layout, sc.misalignment);

  report::json j = report::to_json(out);
  j["noiseless"] = a.noiseless;
  j["eta_at_best"] = eta;
  j["eta_max"] = peak_efficiency(sc.layout);
  j["analytic_optimum"] = {{"alpha1_rad", opt.alpha1}, {"beta1_rad", opt.beta1}, {"alpha2_rad", opt.alpha2}, {"beta2_rad", opt.beta2}};
  j["seeds"] = report::to_json(sc.seeds);
  j["config"] = report::config_echo(sc);
  if (out.position)
    report::write_file(out_path(a.out_dir, "scan.csv"), [&](std::ostream& o) { write_scan_csv(o, out.position->map); });
  report::write_json(out_path(a.out_dir, "outcome.json"), j);
  std::cout << "objective " << to_string(out.objective) << ", " << out.evaluations << " evaluations\n"
            << "best (alpha1, beta1, alpha2, beta2) rad: " << io::fmt(out.best_state.alpha1()) << ' '
            << io::fmt(out.best_state.beta1()) << ' ' << io::fmt(out.best_state.alpha2()) << ' '
            << io::fmt(out.best_state.beta2()) << "\nscore " << io::fmt(out.best_score) << ", eta "
            << io::fmt(eta) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TurbulenceArgs {
  std::string profile = "outdoor2_6km";
  double duration = 10.0;
  double rate = 10'000.0;
  std::uint64_t seed = 1;
  bool estimate = false;
  double clip = kDefaultWanderClip;
  std::string out_dir = ".";
};

int cmd_turbulence(const TurbulenceArgs& a) {
  SpectrumProfile p;
  try {
    p = builtin_profile(a.profile);
  } catch (const LookupError&) {
    p = read_profile_csv(a.profile);
    p.label = a.profile;
  }
  const WanderSeries s = synthesize(p, a.duration, a.rate, a.seed, a.clip);
  report::write_file(out_path(a.out_dir, "wander.csv"), [&](std::ostream& o) { write_series_csv(o, s); });
  std::cout << "profile " << p.label << ": " << s.x.size() << " samples, rms x " << io::fmt(rms(s.x)) << " y "
            << io::fmt(rms(s.y)) << " rad (target " << io::fmt(std::sqrt(integrated_power(p))) << ")\n";
  if (a.estimate) {
    SpectrumProfile est = estimate_psd(s);
    est.label = p.label + " (welch)";
    write_profile_csv(out_path(a.out_dir, "spectrum.csv"), est);
    std::cout << "in-band deviation " << io::fmt(inband_deviation(p, est)) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(bool as_json, bool perturb) {
  verify::Options opt;
  opt.perturb_closed_form = perturb;
  const auto checks = verify::run_all(opt);
  bool ok = true;
  for (const auto& c : checks) ok = ok && c.passed;
  if (as_json) {
    report::json j = report::json::array();
    for (const auto& c : checks)
      j.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"bound", c.bound}, {"detail", c.detail}});
    std::cout << report::json{{"passed", ok}, {"checks", j}}.dump(2) << "\n";
  } else {
    for (const auto& c : checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << io::fmt(c.value) << " (bound "
                << io::fmt(c.bound) << ")" << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
  }
  for (const auto& c : checks)
    if (!c.passed) std::cerr << "failed check: " << c.name << "\n";
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam-wander correction simulator"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a scenario and write series CSV + summary JSON");
  add_scenario_args(s, sim.scenario);
  s->add_option("--out-dir", sim.out_dir, "Output directory");
  s->add_flag("--compare", sim.compare, "Run with the controller off and on and report ratios");
  s->add_option("--telemetry-stride", sim.telemetry_stride, "Write loop telemetry every N ticks");

  AutocoupleArgs ac;
  auto* a = app.add_subcommand("autocouple", "Run the three-stage coupling search on the static landscape");
  add_scenario_args(a, ac.scenario);
  a->add_option("--objective", ac.objective, "Search objective")->check(CLI::IsMember({"power", "g2"}));
  a->add_option("--out-dir", ac.out_dir, "Output directory");
  a->add_flag("--noiseless", ac.noiseless, "Use the noise-free expected objective");
  a->add_option("--threshold", ac.threshold, "Random-search threshold in objective units");

  TurbulenceArgs tu;
  auto* t = app.add_subcommand("turbulence", "Synthesize a wander series from a spectrum profile");
  t->add_option("--profile", tu.profile, "Builtin name (indoor60m, outdoor250m, outdoor2_6km) or profile CSV");
  t->add_option("--duration", tu.duration, "Series length in s")->check(CLI::PositiveNumber);
  t->add_option("--rate", tu.rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  t->add_option("--seed", tu.seed, "Seed")->envname("BEAMSIM_SEED");
  t->add_option("--clip", tu.clip, "Per-axis clip in rad");
  t->add_flag("--estimate", tu.estimate, "Also write the Welch spectrum estimate");
  t->add_option("--out-dir", tu.out_dir, "Output directory");

  bool verify_json = false, perturb = false;
  auto* v = app.add_subcommand("verify", "Run the built-in oracle checks");
  v->add_flag("--json", verify_json, "Machine-readable report");
  v->add_flag("--perturb-closed-form", perturb, "Test hook: perturb the closed-form coupling so the sweep fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (*s) return guarded([&] { return cmd_simulate(sim); });
  if (*a) return guarded([&] { return cmd_autocouple(ac); });
  if (*t) return guarded([&] { return cmd_turbulence(tu); });
  return guarded([&] { return cmd_verify(verify_json, perturb); });
}
