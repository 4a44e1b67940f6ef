// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "beamsim/beamsim.hpp"

using namespace beamsim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

Verdict from_checks(int id, const std::vector<verify::Check>& cs, std::string extra = {}) {
  bool ok = true;
  std::ostringstream os;
  for (const auto& c : cs) {
    ok &= c.passed;
    os << c.name << "=" << io::fmt(c.value) << (c.passed ? " " : " (over " + io::fmt(c.bound) + ") ");
  }
  return {id, ok, os.str() + extra};
}

struct PairResult {
  Improvement imp;
  double wall_s;
};

PairResult run_pair(std::string_view name, std::uint64_t seed) {
  Scenario sc = preset(name);
  sc.seeds = Seeds::all(seed);
  const auto t0 = Clock::now();
  const RunSummary off = run(with_controller(sc, false));
  const RunSummary on = run(with_controller(sc, true));
  return {compare(off, on), seconds_since(t0) / 2.0};
}

constexpr std::uint64_t kSeeds = 5;

Verdict c1() {
  const auto t0 = Clock::now();
  const verify::Check c = verify::closed_form_sweep({});
  const double wall = seconds_since(t0);
  Verdict v = from_checks(1, {c}, "runtime " + io::fmt(wall) + " s");
  v.pass &= wall < 60.0;
  return v;
}

Verdict c2() { return from_checks(2, verify::peak_checks()); }

Verdict c3() {
  const DecouplingCheck d = verify_decoupling(OpticalLayout{});
  Verdict v = from_checks(3, verify::decoupling_checks());
  v.pass &= std::abs(d.diag_angle - 0.15429) <= 5e-6 && std::abs(d.diag_position - 0.09) <= 1e-12;
  v.detail += "diag=(" + io::fmt(d.diag_angle) + ", " + io::fmt(d.diag_position) + ") m";
  return v;
}

// Property reproduction over seed sets 1..kSeeds; every seed must pass.
Verdict property(int id, std::string_view name, double std_lo, double std_hi, double mean_lo,
                 std::vector<double>* std_ratios = nullptr) {
  bool ok = true;
  std::ostringstream os;
  double worst_wall = 0.0;
  for (std::uint64_t s = 1; s <= kSeeds; ++s) {
    const PairResult r = run_pair(name, s);
    const bool pass = r.imp.std_ratio >= std_lo && r.imp.std_ratio <= std_hi && r.imp.mean_ratio >= mean_lo;
    ok &= pass;
    worst_wall = std::max(worst_wall, r.wall_s);
    if (std_ratios) std_ratios->push_back(r.imp.std_ratio);
    char buf[96];
    std::snprintf(buf, sizeof buf, "s%llu std %.2f mean %.3f%s; ", static_cast<unsigned long long>(s),
                  r.imp.std_ratio, r.imp.mean_ratio, pass ? "" : " !");
    os << buf;
  }
  ok &= worst_wall < 60.0;
  os << "max run wall " << io::fmt(worst_wall) << " s";
  return {id, ok, os.str()};
}

Verdict c6(const std::vector<double>& photodiode) {
  std::vector<double> counting;
  Verdict v = property(6, "fig7a", 1.5, 3.0, 1.10, &counting);
  bool slower = true;
  for (std::size_t i = 0; i < counting.size(); ++i) slower &= counting[i] < photodiode[i];
  v.pass &= slower;
  v.detail += slower ? "; counting std ratio below photodiode on every seed" : "; counting std ratio NOT below photodiode";
  return v;
}

Verdict c7() {
  const Scenario sc;
  const Objective obj = noiseless_objective(sc.layout, sc.misalignment);
  const double peak = peak_efficiency(sc.layout);
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    AutoCoupleConfig cfg;
    cfg.start = sc.start;
    cfg.random.threshold = 0.01 * peak;
    cfg.random.seed = seed;
    try {
      const SearchOutcome o = auto_couple(obj, cfg, &sc.layout);
      good += obj.evaluate(o.best_state).value >= 0.90 * peak;
    } catch (const NotFoundError&) {
    }
  }

  // Stage bounds on noiseless objectives, 100 seeded hidden optima.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2e-3, 2e-3), off(-1.4e-3, 1.4e-3);
  int angle_ok = 0, pos_ok = 0;
  double worst_angle = 0.0, worst_pos = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double a1 = u(rng), b1 = u(rng), a2 = u(rng), b2 = u(rng);
    const double tx = -2.0 * (a1 - a2), ty = -2.0 * (b1 - b2);
    const Disturbance d{tx, ty, -(2.0 * sc.layout.d1 * a1 + tx * sc.layout.d1),
                        -(2.0 * sc.layout.d1 * b1 + ty * sc.layout.d1)};
    const Objective f = noiseless_objective(sc.layout, d);
    const AngleSearchResult ar = angle_search(f, MirrorState(a1 + off(rng), b1 + off(rng), a2, b2));
    const double ea = std::max(std::abs(ar.state.alpha1() - a1), std::abs(ar.state.beta1() - b1));
    worst_angle = std::max(worst_angle, ea);
    angle_ok += ea <= 100e-6 + 1e-12;
    const double s1 = off(rng), s2 = off(rng);
    const MirrorState locked(a1 + s1, b1 + s2, a2 + s1, b2 + s2);
    const PositionSearchResult pr = position_search(f, locked, {}, &sc.layout);
    const double ep = std::max(std::abs(pr.state.alpha1() - a1), std::abs(pr.state.beta1() - b1));
    worst_pos = std::max(worst_pos, ep);
    pos_ok += ep <= 0.5e-3 + 1e-12;
  }
  std::ostringstream os;
  os << good << "/100 runs reach 0.90 eta_max; angle stage " << angle_ok << "/100 within 100 urad (worst "
     << io::fmt(worst_angle) << "); position stage " << pos_ok << "/100 within 0.5 mrad (worst " << io::fmt(worst_pos)
     << ")";
  return {7, good >= 95 && angle_ok == 100 && pos_ok == 100, os.str()};
}

Verdict c8() {
  std::vector<verify::Check> cs = verify::turbulence_checks();
  return from_checks(8, cs);
}

Verdict c9() {
  bool ok = true;
  std::ostringstream os;
  for (const char* name : {"fig6a", "fig6b", "fig7a"}) {
    std::string text[2];
    for (auto& t : text) {
      const Scenario sc = preset(name);
      const RunSummary off = run(with_controller(sc, false));
      const RunSummary on = run(with_controller(sc, true));
      std::ostringstream o;
      report::write_series_csv(o, off);
      report::write_series_csv(o, on);
      o << report::summary_json(sc, off, &on).dump(2);
      t = o.str();
    }
    const bool same = text[0] == text[1];
    ok &= same;
    os << name << (same ? " identical (" : " DIFFERS (") << text[0].size() << " bytes); ";
  }
  return {9, ok, os.str()};
}

}  // namespace

int main() {
  std::vector<Verdict> out;
  auto report_line = [&](Verdict v) {
    std::printf("criterion %d: %s  %s\n", v.id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    out.push_back(std::move(v));
  };
  report_line(c1());
  report_line(c2());
  report_line(c3());
  std::vector<double> photodiode;
  report_line(property(4, "fig6b", 4.0, 1e300, 1.30, &photodiode));
  report_line(property(5, "fig6a", 5.0, 1e300, 1.25));
  report_line(c6(photodiode));
  report_line(c7());
  report_line(c8());
  report_line(c9());
  int failed = 0;
  for (const auto& v : out) failed += !v.pass;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(out.size()) - failed, out.size());
  return failed ? 1 : 0;
}
