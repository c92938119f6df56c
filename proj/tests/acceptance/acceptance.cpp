// Acceptance run: one PASS/FAIL line per criterion, detail lines indented
// underneath. Exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/fv.hpp"
#include "aggdiff/kernel.hpp"
#include "aggdiff/particles.hpp"
#include "aggdiff/scenario.hpp"
#include "aggdiff/steady.hpp"

using namespace aggdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Builtin runs are shared between criteria.
struct Corpus {
  std::vector<Scenario> scenarios;
  std::map<std::string, RunReport> reports;

  const RunReport& at(const std::string& name) const { return reports.at(name); }
};

Density1D blocks(const Grid1D& g, std::initializer_list<Segment> segs) {
  const std::vector<Segment> v(segs);
  return density_from_segments(g, v);
}

// ---------------------------------------------------------------------------

Outcome conservation(const Corpus& c) {
  Outcome o;
  for (const auto& s : c.scenarios) {
    const RunReport& r = c.at(s.name);
    const double L = s.x_max - s.x_min;
    for (const auto* m : {&*r.fv, &*r.particles}) {
      const double mass = std::max(m->mass_drift_rho, m->mass_drift_eta);
      o.check(mass <= 1e-8 && m->cm_alpha_drift <= 1e-5 * L,
              fmt("%-16s %-9s mass drift %.2e (<= 1e-8), CM_alpha drift %.2e per unit time (<= %.2e)", s.name.c_str(),
                  method_name(m->method).c_str(), mass, m->cm_alpha_drift, 1e-5 * L));
    }
  }
  return o;
}

Outcome limiter_flux() {
  Outcome o;
  struct Row {
    double a, b, c, expect;
  };
  const Row table[] = {{1, 2, 3, 1},     {3, 2, 1, 1},     {2, 1, 3, 1},   {-1, -2, -3, -1}, {-3, -1, -2, -1},
                       {1, -2, 3, 0},    {-1, 2, -3, 0},   {0, 1, 2, 0},   {1, 1, 0, 0},     {0, 0, 0, 0},
                       {-0.5, -0.5, -0.5, -0.5},           {2, 2, 2, 2},   {1e-300, 1, 1, 1e-300}};
  bool exact = true;
  for (const auto& r : table) exact = exact && minmod(r.a, r.b, r.c) == r.expect;
  o.check(exact, "minmod truth table (13 rows, exact equality)");

  const Grid1D g = Grid1D::covering(-3, 3, 41);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_interior = [&] {
    std::vector<double> v(g.size(), 0.0);
    for (std::size_t i = 3; i + 3 < v.size(); ++i) v[i] = u(rng);
    return Density1D(g, v);
  };

  FvWorkspace zero(g, KernelTriple::zero(), 0.3, 0.0);
  double worst_zero = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto r = rhs(zero, {random_interior(), random_interior(), 0.3, 0.0});
    for (double v : r.rho) worst_zero = std::max(worst_zero, std::abs(v));
    for (double v : r.eta) worst_zero = std::max(worst_zero, std::abs(v));
  }
  o.check(worst_zero == 0.0, fmt("zero kernels, zero diffusion: max |rhs| = %.1e", worst_zero));

  FvWorkspace w(g, KernelTriple::gaussian(), 0.7, 0.4);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto r = rhs(w, {random_interior(), random_interior(), 0.7, 0.4});
    double mr = 0.0, me = 0.0;
    for (std::size_t i = 0; i < r.rho.size(); ++i) {
      mr += r.rho[i] * g.dx;
      me += r.eta[i] * g.dx;
    }
    worst = std::max({worst, std::abs(mr), std::abs(me)});
  }
  o.check(worst <= 1e-14, fmt("telescoping mass derivative: max |d mass/dt| = %.2e (<= 1e-14)", worst));
  return o;
}

Outcome lambda_oracle() {
  Outcome o;
  const BumpLayout single{{{1.0}, {0.0}}, {{1.0}, {40.0}}, 1.0};  // prey far enough for K'' to vanish
  const auto D = compute_D(single, KernelTriple::gaussian());
  const double lam = bump_lambda(1.0, D.rho[0]);
  const double closed = std::cbrt(3.0 * std::sqrt(std::numbers::pi) / 4.0);

  // half-mass balance  -z/2 + (D/3) l^3 = 0  with the curvature of the
  // self kernel at the origin, D = 2 / sqrt(pi), solved by bisection
  const double D_ref = 2.0 / std::sqrt(std::numbers::pi);
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (-0.5 + D_ref / 3.0 * mid * mid * mid < 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  o.check(std::abs(lam - root) <= 1e-10 && std::abs(closed - root) <= 1e-10,
          fmt("lambda %.15f, closed form %.15f, bisection %.15f", lam, closed, root));
  const double identity = std::abs(2.0 / 3.0 * D.rho[0] * lam * lam * lam - 1.0);
  o.check(identity <= 1e-12, fmt("|(2/3) D lambda^3 - z| = %.2e (<= 1e-12)", identity));
  return o;
}

Outcome steady_pipeline() {
  Outcome o;
  const auto k = KernelTriple::gaussian();
  const BumpLayout guess{{{1.0}, {0.0}}, {{0.5, 0.5}, {-1.0, 1.0}}, 0.2};
  BumpLayout l;
  try {
    l = solve_centers(guess, k, 0.0);
  } catch (const std::exception& e) {
    o.check(false, std::string("solve_centers threw: ") + e.what());
    return o;
  }
  const auto a = analyze(l, k);
  double maxB = 0.0, minD = INFINITY;
  for (const auto* v : {&a.B.rho, &a.B.eta})
    for (double b : *v) maxB = std::max(maxB, std::abs(b));
  for (const auto* v : {&a.D.rho, &a.D.eta})
    for (double d : *v) minD = std::min(minD, d);
  const double cm = 0.2 * l.rho.centers[0] - 0.5 * (l.eta.centers[0] + l.eta.centers[1]);
  o.check(maxB <= 1e-12 && minD > 0.0 && std::abs(cm) <= 1e-12,
          fmt("centres rho %.10f, eta %.10f %.10f; max |B| %.1e, min D %.4f, CM_alpha %.1e", l.rho.centers[0],
              l.eta.centers[0], l.eta.centers[1], maxB, minD, cm));

  const Grid1D g = Grid1D::covering(-1.5, 1.5, 200);
  MultiBumpState st;
  try {
    st = build_state(l, a, g, 1e-3);
    o.check(true, "build_state at d = 1e-3 on 200 cells");
  } catch (const std::exception& e) {
    o.check(false, std::string("build_state threw: ") + e.what());
    return o;
  }

  FvWorkspace w(g, k, 0.2, 1e-3);
  double w_rho = 0.0, w_eta = 0.0;
  try {
    simulate(w, st.densities, 10.0, {.report_dt = 0.5}, [&](double, const DensityPair& p, const Diagnostics&) {
      w_rho = std::max(w_rho, wasserstein(p.rho, st.densities.rho, 1.0));
      w_eta = std::max(w_eta, wasserstein(p.eta, st.densities.eta, 1.0));
    });
    o.check(w_rho <= 0.02 && w_eta <= 0.02,
            fmt("FV from the constructed profile, t in [0,10]: max W1 rho %.2e, eta %.2e (<= 0.02)", w_rho, w_eta));
  } catch (const std::exception& e) {
    o.check(false, std::string("FV evolution threw: ") + e.what());
  }

  const Grid1D fine = Grid1D::covering(-2.5, 2.5, 2500);
  double prev = INFINITY;
  for (double d : {1e-2, 1e-3, 1e-4}) {
    const double r = max_residual(stationarity_residual(build_state(l, a, fine, d).densities, k));
    o.check(r <= 0.02 && r < prev, fmt("stationarity residual at d = %.0e: %.3e (<= 0.02, decreasing)", d, r));
    prev = r;
  }
  return o;
}

double asymmetry(const DensityPair& p) {
  return l1_distance(p.rho, reflect(p.rho)) + l1_distance(p.eta, reflect(p.eta));
}

Outcome figures(const Corpus& c) {
  Outcome o;
  const double tol = 1e-6;
  auto steady = [&](const std::string& name) {
    const RunReport& r = c.at(name);
    const bool ok = r.fv->steady_time.has_value() && r.particles->steady_time.has_value();
    o.check(ok, fmt("%-16s steady at t = %s (fv), %s (particles)", name.c_str(),
                    r.fv->steady_time ? std::to_string(*r.fv->steady_time).c_str() : "never",
                    r.particles->steady_time ? std::to_string(*r.particles->steady_time).c_str() : "never"));
  };

  {
    const RunReport& r = c.at("initial1");
    const auto& p = r.fv->final_state;
    const auto sr = support_components(p.rho, tol);
    const auto se = support_components(p.eta, tol);
    const bool nested = sr.size() == 1 && se.size() == 1 && sr[0].first >= se[0].first && sr[0].second <= se[0].second;
    const double asym = asymmetry(p);
    const double centre = joint_center(p) / (p.alpha - 1.0);
    o.check(r.fv->classification.kind == Classification::Kind::Mixed && nested,
            "initial1         " + r.fv->classification.to_string() + (nested ? ", supp rho inside supp eta" : ", not nested"));
    o.check(asym <= 1e-3 && std::abs(centre) <= 1e-3,
            fmt("initial1         L1 reflection asymmetry %.2e (<= 1e-3) about common centre %.1e", asym, centre));
    steady("initial1");
  }
  {
    const RunReport& r = c.at("initial2");
    const auto& p = r.fv->final_state;
    const auto sr = support_components(p.rho, tol);
    const auto se = support_components(p.eta, tol);
    const bool flank = sr.size() == 1 && se.size() == 2 && se[0].second < sr[0].first && se[1].first > sr[0].second;
    o.check(r.fv->classification.kind == Classification::Kind::Separated && flank,
            "initial2         " + r.fv->classification.to_string() + (flank ? ", prey flank predators" : ", no flanking"));
    steady("initial2");
  }
  {
    const RunReport& r = c.at("initial1_alpha6");
    o.check(r.fv->classification.kind != Classification::Kind::Mixed &&
                r.particles->classification.kind != Classification::Kind::Mixed,
            "initial1_alpha6  " + r.fv->classification.to_string() + " (fv), " +
                r.particles->classification.to_string() + " (particles); must not be mixed");
    steady("initial1_alpha6");
  }
  for (const auto& [name, bumps] : {std::pair<std::string, int>{"initial3", 4}, {"initial4", 5}}) {
    const RunReport& r = c.at(name);
    o.check(r.fv->classification.total_bumps() == bumps,
            fmt("%-16s %s, %d bumps (want %d)", name.c_str(), r.fv->classification.to_string().c_str(),
                r.fv->classification.total_bumps(), bumps));
    steady(name);
  }
  return o;
}

Outcome agreement(const Corpus& c) {
  Outcome o;
  for (const auto& s : c.scenarios) {
    if (s.name == "initial5") continue;  // the travelling wave never settles
    const RunReport& r = c.at(s.name);
    const double dx = s.grid().dx;
    o.check(*r.w1_rho <= 2 * dx && *r.w1_eta <= 2 * dx,
            fmt("%-16s W1 rho %.4f, eta %.4f (<= 2 dx = %.4f)", s.name.c_str(), *r.w1_rho, *r.w1_eta, 2 * dx));
  }
  return o;
}

Outcome travelling_wave(const Corpus& c) {
  Outcome o;
  const RunReport& r = c.at("initial5");
  for (const auto* m : {&*r.fv, &*r.particles}) {
    const WaveFit& w = m->wave;
    const double rel = std::abs(w.speed_rho - w.speed_eta) / std::max(std::abs(w.speed_rho), std::abs(w.speed_eta));
    o.check(w.r2_rho >= 0.99 && w.r2_eta >= 0.99 && rel <= 0.05 && w.speed_rho != 0.0,
            fmt("%-9s speeds %.5f / %.5f (rel diff %.2e <= 0.05), R^2 %.6f / %.6f (>= 0.99)",
                method_name(m->method).c_str(), w.speed_rho, w.speed_eta, rel, w.r2_rho, w.r2_eta));
  }
  return o;
}

Outcome transport() {
  Outcome o;
  const Grid1D g = Grid1D::covering(-10, 10, 400);
  const Segment base[] = {{-1.3, -0.2, 0.4}, {0.5, 1.7, 0.3}};
  double worst = 0.0;
  for (double a : {0.05, 0.37, -1.234, 3.0}) {
    std::vector<Segment> moved;
    for (const auto& s : base) moved.push_back({s.a + a, s.b + a, s.height});
    const auto p = step_function_from_segments(base);
    const auto q = step_function_from_segments(moved);
    for (double order : {1.0, 2.0, 3.5}) worst = std::max(worst, std::abs(wasserstein(p, q, order) - std::abs(a)));
    // cell-aligned shift of the gridded density
    const int k = static_cast<int>(std::lround(a / g.dx));
    const auto pg = density_from_segments(g, base);
    std::vector<double> v(g.size(), 0.0);
    for (int i = 0; i < g.n_cells; ++i)
      if (i - k >= 0 && i - k < g.n_cells) v[i] = pg.values[i - k];
    for (double order : {1.0, 2.0})
      worst = std::max(worst, std::abs(wasserstein(pg, Density1D(g, v), order) - std::abs(k * g.dx)));
  }
  o.check(worst <= 1e-6, fmt("translation identity W_p(f, f(.-a)) = |a|: worst error %.2e (<= 1e-6)", worst));

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_density = [&] {
    std::vector<double> v(g.size(), 0.0);
    double m = 0.0;
    for (std::size_t i = 150; i < 250; ++i) m += (v[i] = u(rng) < 0.3 ? 0.0 : u(rng)) * g.dx;
    for (double& x : v) x /= m;
    return Density1D(g, v);
  };
  bool axioms = true;
  double slack = INFINITY;
  for (int t = 0; t < 50; ++t) {
    const auto p = random_density(), q = random_density(), r = random_density();
    for (double order : {1.0, 2.0}) {
      const double pq = wasserstein(p, q, order), qp = wasserstein(q, p, order);
      const double pr = wasserstein(p, r, order), rq = wasserstein(r, q, order);
      axioms = axioms && wasserstein(p, p, order) == 0.0 && pq > 0.0 && std::abs(pq - qp) <= 1e-14;
      axioms = axioms && pq <= pr + rq + 1e-14;
      slack = std::min(slack, pr + rq - pq);
    }
  }
  o.check(axioms, fmt("metric axioms on 50 random triples (p = 1, 2); smallest triangle slack %.2e", slack));

  const Grid1D h = Grid1D::covering(-10.0, 10.0, 200);
  const DensityPair a{blocks(h, {{0.0, 1.0, 1.0}}), blocks(h, {{1.0, 2.0, 1.0}}), 1.0, 0.0};
  const DensityPair b{blocks(h, {{3.0, 4.0, 1.0}}), blocks(h, {{5.0, 6.0, 1.0}}), 1.0, 0.0};
  const double d = product_w2(a, b);
  o.check(std::abs(d - 5.0) <= 1e-12, fmt("product metric 3-4-5 case: %.15f", d));
  return o;
}

Outcome equivariance(const Corpus& c, const std::map<std::string, RunReport>& reflected) {
  Outcome o;
  for (const auto& s : c.scenarios) {
    const RunReport& a = c.at(s.name);
    const RunReport& b = reflected.at(s.name);
    for (auto pick : {&RunReport::fv, &RunReport::particles}) {
      const auto& x = (a.*pick)->final_state;
      const auto& y = (b.*pick)->final_state;
      const double e = l1_distance(x.rho, reflect(y.rho)) + l1_distance(x.eta, reflect(y.eta));
      o.check(e <= 1e-10, fmt("%-16s %-9s L1(final, reflect(reflected final)) = %.2e (<= 1e-10)", s.name.c_str(),
                              method_name((a.*pick)->method).c_str(), e));
    }
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const Corpus& c, const fs::path& scratch) {
  Outcome o;
  for (const auto& s : c.scenarios) {
    const fs::path a = scratch / (s.name + "_a"), b = scratch / (s.name + "_b");
    export_report(c.at(s.name), a, true);
    export_report(run(s), b, true);
    int files = 0, differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++files;
      const fs::path other = b / fs::relative(e.path(), a);
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
    }
    int files_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file();
    o.check(files > 0 && differ == 0 && files == files_b,
            fmt("%-16s %d files, %d differ", s.name.c_str(), files, differ + std::abs(files - files_b)));
  }
  return o;
}

}  // namespace

int main() {
  Corpus corpus;
  corpus.scenarios = builtin_scenarios();
  std::map<std::string, RunReport> reflected;
  for (const auto& s : corpus.scenarios) {
    corpus.reports.emplace(s.name, run(s));
    reflected.emplace(s.name, run(s.reflected()));
  }
  const fs::path scratch = fs::temp_directory_path() / "aggdiff_acceptance";
  fs::remove_all(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"conservation of mass and joint centre", [&] { return conservation(corpus); }},
      {"limiter and flux identities", limiter_flux},
      {"bump radius oracle", lambda_oracle},
      {"multi-bump steady state pipeline", steady_pipeline},
      {"qualitative figure reproduction", [&] { return figures(corpus); }},
      {"method agreement", [&] { return agreement(corpus); }},
      {"travelling wave", [&] { return travelling_wave(corpus); }},
      {"transport metric suite", transport},
      {"reflection equivariance", [&] { return equivariance(corpus, reflected); }},
      {"determinism", [&] { return determinism(corpus, scratch); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : out.notes) std::printf("      %s\n", n.c_str());
    std::printf("%s criterion %zu: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
    std::fflush(stdout);
    failed += !out.pass;
  }
  fs::remove_all(scratch);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
