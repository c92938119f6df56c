#include "aggdiff/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aggdiff/error.hpp"
#include "json.hpp"

namespace aggdiff {

using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::Fv: return "fv";
    case Method::Particles: return "particles";
    case Method::Both: break;
  }
  return "both";
}

Method parse_method(const std::string& s) {
  if (s == "fv") return Method::Fv;
  if (s == "particles") return Method::Particles;
  if (s == "both") return Method::Both;
  throw ConfigError("unknown method '" + s + "' (expected fv, particles or both)");
}

// ---------------------------------------------------------------------------
// Scenario

void Scenario::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("scenario '" + name + "': " + msg); };
  if (!std::isfinite(alpha) || !(alpha > 0.0)) fail("alpha must be positive");
  if (!std::isfinite(d) || d < 0.0) fail("d must be >= 0");
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) fail("domain must satisfy x_min < x_max");
  if (n_cells < 3) fail("n_cells must be >= 3");
  if (n_particles < 3) fail("n_particles must be >= 3");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) fail("t_final must be positive");
  if (!(report_dt > 0.0) || report_dt > t_final) fail("report_dt must lie in (0, t_final]");
  if (snapshot_dt < 0.0) fail("snapshot_dt must be >= 0");
  if (!(cfl > 0.0 && cfl <= 1.0)) fail("cfl must lie in (0, 1]");
  if (!(rtol > 0.0) || !(atol > 0.0)) fail("rtol and atol must be positive");
  for (const auto* segs : {&rho0, &eta0}) {
    const char* sp = (segs == &rho0) ? "rho" : "eta";
    if (segs->empty()) fail(std::string("no initial segments for ") + sp);
    double m = 0.0;
    for (const auto& s : *segs) {
      if (!(s.b > s.a)) fail(std::string(sp) + " segment needs a < b");
      if (!(s.height >= 0.0)) fail(std::string(sp) + " segment height must be >= 0");
      if (s.a < x_min || s.b > x_max) fail(std::string(sp) + " segment lies outside the domain");
      m += s.height * (s.b - s.a);
    }
    if (!(m > 0.0)) fail(std::string(sp) + " has zero mass");
  }
  auto check_kernel_ok = [&](const Kernel& k, const char* label) {
    const auto c = check_kernel(k, 0.5 * (x_max - x_min), 201);
    if (!c.symmetric) fail(std::string("kernel ") + label + " is not even");
  };
  check_kernel_ok(kernels.s_rho, "s_rho");
  check_kernel_ok(kernels.s_eta, "s_eta");
  check_kernel_ok(kernels.k, "k");
}

Grid1D Scenario::grid() const { return Grid1D::covering(x_min, x_max, n_cells); }

DensityPair Scenario::initial_density() const {
  const Grid1D g = grid();
  return DensityPair{density_from_segments(g, rho0), density_from_segments(g, eta0), alpha, d};
}

ParticleState Scenario::initial_particles() const {
  return ParticleState{particles_from(step_function_from_segments(rho0), n_particles),
                       particles_from(step_function_from_segments(eta0), n_particles), alpha, d};
}

Scenario Scenario::reflected() const {
  Scenario r = *this;
  r.name = name + "_reflected";
  const double mid = grid().midpoint();
  auto flip = [&](const std::vector<Segment>& in) {
    std::vector<Segment> out;
    for (auto it = in.rbegin(); it != in.rend(); ++it) {
      out.push_back(mid == 0.0 ? Segment{-it->b, -it->a, it->height}
                               : Segment{2.0 * mid - it->b, 2.0 * mid - it->a, it->height});
    }
    return out;
  };
  r.rho0 = flip(rho0);
  r.eta0 = flip(eta0);
  return r;
}

// ---------------------------------------------------------------------------
// Builtins

namespace {

Scenario base(const std::string& name, double alpha, double d, double half_width, int n, double t_final) {
  Scenario s;
  s.name = name;
  s.kernels = KernelTriple::gaussian();
  s.alpha = alpha;
  s.d = d;
  s.x_min = -half_width;
  s.x_max = half_width;
  s.n_cells = n;
  s.n_particles = n;
  s.t_final = t_final;
  s.report_dt = 0.5;
  s.method = Method::Both;
  return s;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;

  Scenario s1 = base("initial1", 0.1, 0.4, 3.55, 71, 60.0);
  s1.description = "co-located unit-mass blocks; relaxes to a mixed state";
  s1.rho0 = {{-0.7, 0.7, 10.0 / 14.0}};
  s1.eta0 = {{-0.7, 0.7, 10.0 / 14.0}};
  out.push_back(s1);

  Scenario s1b = s1;
  s1b.name = "initial1_alpha6";
  s1b.description = "initial1 with strong prey escape; prey leaves the predator core";
  s1b.alpha = 6.0;
  s1b.x_min = -10.0;
  s1b.x_max = 10.0;
  s1b.t_final = 600.0;
  out.push_back(s1b);

  Scenario s2 = base("initial2", 0.2, 0.4, 8.0, 91, 350.0);
  s2.description = "predators between two prey blocks; relaxes to a separated state";
  s2.rho0 = {{-1.0, 1.0, 0.5}};
  s2.eta0 = {{-4.0, -3.0, 0.5}, {3.0, 4.0, 0.5}};
  out.push_back(s2);

  Scenario s3 = base("initial3", 0.05, 0.3, 9.05, 181, 200.0);
  s3.description = "central mixed block plus two outer prey blocks; four bumps";
  s3.rho0 = {{-0.7, 0.7, 10.0 / 14.0}};
  s3.eta0 = {{-6.0, -5.0, 1.0 / 3.0}, {-0.7, 0.7, 5.0 / 21.0}, {5.0, 6.0, 1.0 / 3.0}};
  out.push_back(s3);

  Scenario s4 = base("initial4", 1.0, 0.3, 12.05, 181, 150.0);
  s4.description = "two predator blocks among three prey blocks; five bumps";
  s4.rho0 = {{-5.0, -4.0, 0.5}, {4.0, 5.0, 0.5}};
  s4.eta0 = {{-9.0, -8.0, 1.0 / 3.0}, {-0.5, 0.5, 1.0 / 3.0}, {8.0, 9.0, 1.0 / 3.0}};
  out.push_back(s4);

  Scenario s5 = base("initial5", 1.0, 0.2, 6.0, 101, 40.0);
  s5.description = "predator block chasing an adjacent prey block; travelling wave";
  s5.rho0 = {{-0.6, 0.6, 10.0 / 12.0}};
  s5.eta0 = {{1.7, 2.9, 10.0 / 12.0}};
  out.push_back(s5);

  return out;
}

std::optional<Scenario> find_builtin(const std::string& name) {
  for (auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

CommonDiffusion rescale_to_common_diffusion(double d1, double d2, const KernelTriple& kernels, double alpha) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !std::isfinite(d1) || !std::isfinite(d2)) {
    throw ConfigError("rescale_to_common_diffusion: diffusion coefficients must be positive");
  }
  const double f = d2 / d1;
  KernelTriple k{kernels.s_rho.scaled(f), kernels.s_eta, kernels.k.scaled(f)};
  return {d2, std::move(k), alpha * (d1 / d2)};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return get_or<T>(j, key, T{});
}

Kernel kernel_from(const json& j) {
  if (!j.is_object()) throw ConfigError("kernel must be a JSON object");
  const std::string family = require<std::string>(j, "family");
  if (family == "gaussian") {
    return Kernel::gaussian(get_or<double>(j, "amplitude", Kernel::default_amplitude()), get_or<double>(j, "width", 1.0));
  }
  if (family == "tabulated") {
    return Kernel::tabulated(require<std::vector<double>>(j, "x"), require<std::vector<double>>(j, "y"));
  }
  throw ConfigError("unknown kernel family '" + family + "'");
}

json kernel_to(const Kernel& k) {
  if (const auto* g = k.as_gaussian()) return {{"family", "gaussian"}, {"amplitude", g->amplitude}, {"width", g->width}};
  const auto* t = k.as_tabulated();
  return {{"family", "tabulated"}, {"x", t->x()}, {"y", t->y()}};
}

std::vector<Segment> segments_from(const json& j, const char* label) {
  if (!j.is_array()) throw ConfigError(std::string("initial.") + label + " must be an array of segments");
  std::vector<Segment> out;
  for (const auto& s : j) {
    out.push_back({require<double>(s, "a"), require<double>(s, "b"), require<double>(s, "height")});
  }
  return out;
}

json bumps_to(const SpeciesBumps& b) { return {{"masses", b.masses}, {"centers", b.centers}}; }

SpeciesBumps bumps_from(const json& j) {
  return {require<std::vector<double>>(j, "masses"), require<std::vector<double>>(j, "centers")};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Kernel kernel_from_json(const std::string& text) {
  try {
    return kernel_from(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("kernel JSON: ") + e.what());
  }
}

std::string kernel_to_json(const Kernel& k) { return kernel_to(k).dump(); }

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario JSON must be an object");
  Scenario s;
  s.name = get_or<std::string>(j, "name", "custom");
  s.description = get_or<std::string>(j, "description", "");
  if (j.contains("kernels")) {
    const json& k = j.at("kernels");
    if (k.contains("s_rho")) s.kernels.s_rho = kernel_from(k.at("s_rho"));
    if (k.contains("s_eta")) s.kernels.s_eta = kernel_from(k.at("s_eta"));
    if (k.contains("k")) s.kernels.k = kernel_from(k.at("k"));
  }
  s.alpha = require<double>(j, "alpha");
  if (j.contains("d1") || j.contains("d2")) {
    if (j.contains("d")) throw ConfigError("give either d or the pair d1, d2");
    const auto c = rescale_to_common_diffusion(require<double>(j, "d1"), require<double>(j, "d2"), s.kernels, s.alpha);
    s.d = c.d;
    s.kernels = c.kernels;
    s.alpha = c.alpha;
  } else {
    s.d = require<double>(j, "d");
  }
  const auto domain = require<std::vector<double>>(j, "domain");
  if (domain.size() != 2) throw ConfigError("domain must be [x_min, x_max]");
  s.x_min = domain[0];
  s.x_max = domain[1];
  s.n_cells = require<int>(j, "n_cells");
  s.n_particles = get_or<int>(j, "n_particles", s.n_cells);
  s.t_final = require<double>(j, "t_final");
  s.report_dt = get_or<double>(j, "report_dt", std::min(0.5, s.t_final));
  s.snapshot_dt = get_or<double>(j, "snapshot_dt", 0.0);
  s.method = parse_method(get_or<std::string>(j, "method", "both"));
  s.cfl = get_or<double>(j, "cfl", 0.45);
  s.rtol = get_or<double>(j, "rtol", 1e-6);
  s.atol = get_or<double>(j, "atol", 1e-9);
  const std::string scheme = get_or<std::string>(j, "particle_scheme", "rosenbrock");
  if (scheme == "rosenbrock") {
    s.particle_scheme = ParticleScheme::Rosenbrock;
  } else if (scheme == "bogacki-shampine") {
    s.particle_scheme = ParticleScheme::BogackiShampine;
  } else {
    throw ConfigError("particle_scheme must be rosenbrock or bogacki-shampine");
  }
  const json& init = j.contains("initial") ? j.at("initial") : throw ConfigError("missing field 'initial'");
  s.rho0 = segments_from(init.contains("rho") ? init.at("rho") : json(), "rho");
  s.eta0 = segments_from(init.contains("eta") ? init.at("eta") : json(), "eta");
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

std::string layout_json(const BumpLayout& layout, const BumpAnalysis* analysis) {
  json j{{"rho", bumps_to(layout.rho)}, {"eta", bumps_to(layout.eta)}, {"alpha", layout.alpha}};
  if (analysis) {
    auto values = [](const BumpValues& v) {
      json a = json::array(), b = json::array();
      for (double x : v.rho) a.push_back(number_or_null(x));
      for (double x : v.eta) b.push_back(number_or_null(x));
      return json{{"rho", a}, {"eta", b}};
    };
    auto intervals = [](const std::vector<std::pair<double, double>>& iv) {
      json a = json::array();
      for (const auto& [l, r] : iv) a.push_back(json::array({number_or_null(l), number_or_null(r)}));
      return a;
    };
    j["B"] = values(analysis->B);
    j["D"] = values(analysis->D);
    j["lambda"] = values(analysis->lambda);
    j["intervals"] = {{"rho", intervals(analysis->intervals_rho)}, {"eta", intervals(analysis->intervals_eta)}};
    j["alpha_threshold"] = number_or_null(analysis->alpha_threshold);
  }
  return j.dump(2);
}

BumpLayout layout_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("layout JSON: ") + e.what());
  }
  BumpLayout l;
  l.rho = bumps_from(j.contains("rho") ? j.at("rho") : throw ConfigError("layout: missing 'rho'"));
  l.eta = bumps_from(j.contains("eta") ? j.at("eta") : throw ConfigError("layout: missing 'eta'"));
  l.alpha = require<double>(j, "alpha");
  l.validate();
  return l;
}

// ---------------------------------------------------------------------------
// Running

WaveFit fit_wave(const std::vector<double>& t, const std::vector<double>& cm_rho, const std::vector<double>& cm_eta,
                 double t_from) {
  auto line = [&](const std::vector<double>& y, double& slope, double& r2) {
    double n = 0.0, st = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < t_from) continue;
      n += 1.0;
      st += t[i];
      sy += y[i];
    }
    slope = 0.0;
    r2 = 0.0;
    if (n < 3.0) return;
    const double mt = st / n, my = sy / n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < t_from) continue;
      stt += (t[i] - mt) * (t[i] - mt);
      sty += (t[i] - mt) * (y[i] - my);
      syy += (y[i] - my) * (y[i] - my);
    }
    if (!(stt > 0.0)) return;
    slope = sty / stt;
    r2 = (syy > 0.0) ? (sty * sty) / (stt * syy) : 0.0;
  };
  WaveFit w;
  line(cm_rho, w.speed_rho, w.r2_rho);
  line(cm_eta, w.speed_eta, w.r2_eta);
  const double vmax = std::max(std::abs(w.speed_rho), std::abs(w.speed_eta));
  w.detected = w.r2_rho >= 0.99 && w.r2_eta >= 0.99 && std::abs(w.speed_rho - w.speed_eta) <= 0.05 * vmax &&
               std::min(std::abs(w.speed_rho), std::abs(w.speed_eta)) >= 1e-3;
  return w;
}

namespace {

int snapshot_stride(const Scenario& s) {
  const double dt = s.snapshot_dt > 0.0 ? s.snapshot_dt : s.t_final / 10.0;
  return std::max(1, static_cast<int>(std::lround(dt / s.report_dt)));
}

// Interior quantiles only: the levels 0 and M sit on the support edges, which
// the scheme's exponentially small upwind tails move by a cell at a time.
std::vector<double> quantile_frame(const DensityPair& p, int n) {
  std::vector<double> v;
  for (const auto* dens : {&p.rho, &p.eta}) {
    const auto q = pseudo_inverse(*dens, n).positions;
    v.insert(v.end(), q.begin() + 1, q.end() - 1);
  }
  return v;
}

void finish(MethodResult& r, const Scenario& s, const RunOptions& opt, const DensityPair& support) {
  const auto& d0 = r.diagnostics.front();
  for (const auto& d : r.diagnostics) {
    r.mass_drift_rho = std::max(r.mass_drift_rho, std::abs(d.mass_rho - d0.mass_rho) / d0.mass_rho);
    r.mass_drift_eta = std::max(r.mass_drift_eta, std::abs(d.mass_eta - d0.mass_eta) / d0.mass_eta);
  }
  r.cm_alpha_drift = std::abs(r.diagnostics.back().cm_alpha - d0.cm_alpha) / r.times.back();
  r.classification = classify(support, opt.support_tol);
  r.steady_time = steady_detect(r.frames, opt.steady_window, opt.steady_tol, s.x_max - s.x_min);
  std::vector<double> cr, ce;
  for (const auto& d : r.diagnostics) {
    cr.push_back(d.cm_rho);
    ce.push_back(d.cm_eta);
  }
  r.wave = fit_wave(r.times, cr, ce, 0.5 * s.t_final);
}

MethodResult run_fv(const Scenario& s, const RunOptions& opt) {
  MethodResult r;
  r.method = Method::Fv;
  FvWorkspace w(s.grid(), s.kernels, s.alpha, s.d, s.cfl);
  FvRunOptions fo;
  fo.report_dt = s.report_dt;
  const int stride = snapshot_stride(s);
  long k = 0;
  r.final_state = simulate(w, s.initial_density(), s.t_final, fo,
                           [&](double t, const DensityPair& p, const Diagnostics& d) {
                             r.times.push_back(t);
                             r.diagnostics.push_back(d);
                             r.frames.push_back({t, quantile_frame(p, s.n_particles)});
                             if (k % stride == 0 || t >= s.t_final) r.snapshots.emplace_back(t, p);
                             ++k;
                           });
  finish(r, s, opt, r.final_state);
  return r;
}

MethodResult run_particles(const Scenario& s, const RunOptions& opt) {
  MethodResult r;
  r.method = Method::Particles;
  const Grid1D grid = s.grid();
  ParticleRunOptions po;
  po.rtol = s.rtol;
  po.atol = s.atol;
  po.report_dt = s.report_dt;
  po.scheme = s.particle_scheme;
  const int stride = snapshot_stride(s);
  long k = 0;
  const ParticleObserver observer = [&](double t, const ParticleState& p) {
    if (p.rho.positions.front() < grid.x_min || p.rho.positions.back() > grid.x_max() ||
        p.eta.positions.front() < grid.x_min || p.eta.positions.back() > grid.x_max()) {
      throw BoundaryContact("particles left the domain at t = " + std::to_string(t) + "; enlarge the domain");
    }
    DensityPair dp{density_from_particles(p.rho, grid), density_from_particles(p.eta, grid), s.alpha, s.d};
    Diagnostics d;
    d.mass_rho = mass(dp.rho);
    d.mass_eta = mass(dp.eta);
    d.cm_rho = center_of_mass(p.rho);
    d.cm_eta = center_of_mass(p.eta);
    d.cm_alpha = s.alpha * d.cm_rho - d.cm_eta;
    d.energy = energy(dp, dp, s.kernels);
    r.times.push_back(t);
    r.diagnostics.push_back(d);
    std::vector<double> frame = p.rho.positions;
    frame.insert(frame.end(), p.eta.positions.begin(), p.eta.positions.end());
    r.frames.push_back({t, std::move(frame)});
    r.particle_reports.emplace_back(t, p);
    if (k % stride == 0 || t >= s.t_final) r.snapshots.emplace_back(t, dp);
    r.final_state = std::move(dp);
    ++k;
  };
  r.final_particles = integrate_rk23(s.initial_particles(), s.kernels, s.t_final, po, observer, &r.particle_stats);
  const DensityPair support{support_density(r.final_particles->rho, grid),
                            support_density(r.final_particles->eta, grid), s.alpha, s.d};
  finish(r, s, opt, support);
  return r;
}

}  // namespace

const MethodResult& RunReport::primary() const {
  if (fv) return *fv;
  if (particles) return *particles;
  throw Error("EmptyRun: report holds no method result");
}

RunReport run(const Scenario& s, const RunOptions& opt) {
  s.validate();
  RunReport rep;
  rep.scenario = s;
  if (s.method != Method::Particles) rep.fv = run_fv(s, opt);
  if (s.method != Method::Fv) rep.particles = run_particles(s, opt);
  if (rep.fv && rep.particles) {
    rep.w1_rho = wasserstein(rep.fv->final_state.rho, rep.particles->final_state.rho, 1.0);
    rep.w1_eta = wasserstein(rep.fv->final_state.eta, rep.particles->final_state.eta, 1.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string time_label(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", t);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + p.string());
}

json method_json(const MethodResult& r) {
  json wave{{"detected", r.wave.detected}, {"speed_rho", r.wave.speed_rho}, {"speed_eta", r.wave.speed_eta},
            {"r2_rho", r.wave.r2_rho}, {"r2_eta", r.wave.r2_eta}};
  const auto& last = r.diagnostics.back();
  json j{{"classification", r.classification.to_string()},
         {"bumps", {{"rho", r.classification.n_rho}, {"eta", r.classification.n_eta}}},
         {"steady_time", r.steady_time ? json(*r.steady_time) : json(nullptr)},
         {"wave", wave},
         {"masses", {{"rho", last.mass_rho}, {"eta", last.mass_eta}}},
         {"mass_drift", {{"rho", r.mass_drift_rho}, {"eta", r.mass_drift_eta}}},
         {"cm_alpha_drift", r.cm_alpha_drift},
         {"clipped_mass", last.clipped_mass}};
  if (r.method == Method::Particles) {
    j["steps"] = {{"accepted", r.particle_stats.accepted}, {"rejected", r.particle_stats.rejected},
                  {"evaluations", r.particle_stats.evaluations}};
  }
  return j;
}

void write_method(const MethodResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream diag;
  diag << "t,mass_rho,mass_eta,cm_rho,cm_eta,cm_alpha,energy,clipped_mass\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const auto& d = r.diagnostics[i];
    diag << fmt17(r.times[i]) << ',' << fmt17(d.mass_rho) << ',' << fmt17(d.mass_eta) << ',' << fmt17(d.cm_rho) << ','
         << fmt17(d.cm_eta) << ',' << fmt17(d.cm_alpha) << ',' << fmt17(d.energy) << ',' << fmt17(d.clipped_mass)
         << '\n';
  }
  write_text(dir / "diagnostics.csv", diag.str());
  for (const auto& [t, p] : r.snapshots) {
    std::ostringstream os;
    write_snapshot_csv(os, p);
    write_text(dir / ("snap_" + time_label(t) + ".csv"), os.str());
  }
  if (!r.particle_reports.empty()) {
    std::ostringstream os;
    write_trajectory_header(os);
    for (const auto& [t, p] : r.particle_reports) write_trajectory_rows(os, t, p);
    write_text(dir / "trajectory.csv", os.str());
  }
}

}  // namespace

std::string report_json(const RunReport& rep) {
  const MethodResult& p = rep.primary();
  json j = method_json(p);
  j["scenario"] = rep.scenario.name;
  j["primary_method"] = method_name(p.method);
  j["w1_rho"] = rep.w1_rho ? json(*rep.w1_rho) : json(nullptr);
  j["w1_eta"] = rep.w1_eta ? json(*rep.w1_eta) : json(nullptr);
  j["dx"] = rep.scenario.grid().dx;
  json methods = json::object();
  if (rep.fv) methods["fv"] = method_json(*rep.fv);
  if (rep.particles) methods["particles"] = method_json(*rep.particles);
  j["methods"] = methods;
  return j.dump(2) + "\n";
}

void export_report(const RunReport& rep, const std::filesystem::path& out_dir, bool with_layout) {
  const MethodResult& primary = rep.primary();
  if (primary.times.empty()) throw Error("EmptyRun: nothing to export");
  std::filesystem::create_directories(out_dir);
  const bool both = rep.fv && rep.particles;
  if (rep.fv) write_method(*rep.fv, both ? out_dir / "fv" : out_dir);
  if (rep.particles) write_method(*rep.particles, both ? out_dir / "particles" : out_dir);
  write_text(out_dir / "report.json", report_json(rep));
  if (with_layout) {
    const BumpLayout layout = layout_from_state(primary.final_state);
    std::string text;
    try {
      const BumpAnalysis a = analyze(layout, rep.scenario.kernels);
      text = layout_json(layout, &a);
    } catch (const ConfigError&) {
      text = layout_json(layout, nullptr);
    }
    write_text(out_dir / "layout.json", text + "\n");
  }
}

}  // namespace aggdiff
