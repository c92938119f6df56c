#include <cmath>
#include <limits>
#include <numbers>

#include "aggdiff/error.hpp"
#include "aggdiff/steady.hpp"
#include "doctest.h"

using namespace aggdiff;

namespace {

const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);

BumpLayout mixed(double alpha) { return BumpLayout{{{1.0}, {0.0}}, {{1.0}, {0.0}}, alpha}; }

BumpLayout predator_between(double c, double alpha) {
  return BumpLayout{{{1.0}, {0.0}}, {{0.5, 0.5}, {-c, c}}, alpha};
}

// root of S'(2c) / 2 = alpha K'(c) by bisection on (0, 3)
double bisect_prey_offset(double alpha) {
  const Kernel g = Kernel::gaussian();
  auto f = [&](double c) { return 0.5 * g.eval_d1(2 * c) - alpha * g.eval_d1(c); };
  double lo = 1e-3, hi = 3.0;
  REQUIRE(f(lo) * f(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double max_abs(const BumpValues& v) {
  double m = 0.0;
  for (double x : v.rho) m = std::max(m, std::abs(x));
  for (double x : v.eta) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("B vanishes for co-located single bumps") {
  const auto B = compute_B(mixed(0.3), KernelTriple::gaussian());
  CHECK(B.rho[0] == 0.0);
  CHECK(B.eta[0] == 0.0);
}

TEST_CASE("B is odd under mirrored layouts") {
  const BumpLayout l{{{0.4, 0.7, 0.4}, {-2.0, 0.0, 2.0}}, {{0.3, 0.3}, {-1.1, 1.1}}, 0.6};
  const auto B = compute_B(l, KernelTriple::gaussian());
  CHECK(B.rho[0] == -B.rho[2]);
  CHECK(B.rho[1] == 0.0);
  CHECK(B.eta[0] == doctest::Approx(-B.eta[1]).epsilon(1e-14));
}

TEST_CASE("B at the prey offset root (bisection oracle)") {
  const double c = bisect_prey_offset(0.2);
  CHECK(c == doctest::Approx(std::sqrt(std::log(5.0) / 3.0)).epsilon(1e-12));
  const auto B = compute_B(predator_between(c, 0.2), KernelTriple::gaussian());
  CHECK(std::abs(B.rho[0]) <= 1e-15);
  CHECK(std::abs(B.eta[0]) <= 1e-12);
  CHECK(std::abs(B.eta[1]) <= 1e-12);
}

TEST_CASE("D for mixed single bumps") {
  const auto D = compute_D(mixed(0.3), KernelTriple::gaussian());
  CHECK(D.rho[0] == doctest::Approx(2 * kInvSqrtPi * 2).epsilon(1e-14));
  CHECK(D.eta[0] == doctest::Approx(2 * kInvSqrtPi * 0.7).epsilon(1e-14));
  CHECK(compute_D(mixed(1.0), KernelTriple::gaussian()).eta[0] <= 0.0);
  CHECK(compute_D(mixed(1.5), KernelTriple::gaussian()).eta[0] < 0.0);

  SUBCASE("finite differences of B in the centre") {
    const double h = 1e-5;
    BumpLayout a{{{1.0}, {0.3 + h}}, {{1.0}, {-0.2}}, 0.3}, b{{{1.0}, {0.3 - h}}, {{1.0}, {-0.2}}, 0.3};
    const BumpLayout mid{{{1.0}, {0.3}}, {{1.0}, {-0.2}}, 0.3};
    const double fd = -(compute_B(a, KernelTriple::gaussian()).rho[0] - compute_B(b, KernelTriple::gaussian()).rho[0]) /
                      (2 * h);
    // D includes the self term S''(0) z, which a rigid shift does not see; add it back
    const double self = -Kernel::gaussian().eval_d2(0.0);
    CHECK(compute_D(mid, KernelTriple::gaussian()).rho[0] == doctest::Approx(fd + self).epsilon(1e-7));
  }
}

TEST_CASE("far-separated bumps see only their own curvature") {
  const BumpLayout l{{{0.5, 0.5}, {-40.0, 40.0}}, {{1.0}, {100.0}}, 0.5};
  const auto D = compute_D(l, KernelTriple::gaussian());
  CHECK(D.rho[0] == doctest::Approx(2 * kInvSqrtPi * 0.5).epsilon(1e-14));
  CHECK(D.eta[0] == doctest::Approx(2 * kInvSqrtPi * 1.0).epsilon(1e-14));
}

TEST_CASE("lambda and the parabola mass identity") {
  const double D = 2 * kInvSqrtPi;
  const double lam = bump_lambda(1.0, D);
  CHECK(lam == doctest::Approx(std::cbrt(3 * std::sqrt(std::numbers::pi) / 4)).epsilon(1e-15));
  CHECK((2.0 / 3.0) * D * lam * lam * lam == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(bump_lambda(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(bump_lambda(1.0, -1.0), DomainError);
}

TEST_CASE("build_state for a single gaussian bump") {
  // predators alone: prey far away and no cross interaction
  const KernelTriple k{Kernel::gaussian(), Kernel::gaussian(), Kernel::zero()};
  const BumpLayout l{{{1.0}, {0.0}}, {{1.0}, {30.0}}, 0.5};
  const auto a = analyze(l, k);
  const Grid1D g = Grid1D::covering(-5, 35, 4000);
  const auto st = build_state(l, a, g, 1.0);
  const double lam = std::cbrt(3 * std::sqrt(std::numbers::pi) / 4);
  CHECK(a.lambda.rho[0] == doctest::Approx(lam));
  CHECK(mass(st.densities.rho) == doctest::Approx(1.0).epsilon(1e-12));
  double peak = 0.0;
  for (double v : st.densities.rho.values) peak = std::max(peak, v);
  CHECK(peak == doctest::Approx(0.5 * a.D.rho[0] * lam * lam).epsilon(1e-4));
  // the cells just outside the radius are empty
  for (int i = 0; i < g.n_cells; ++i) {
    if (g.edge(i) >= lam || g.edge(i + 1) <= -lam) {
      if (g.center(i) < 10.0) CHECK(st.densities.rho.values[i] == 0.0);
    }
  }
}

TEST_CASE("build_state scales the radius with d") {
  const auto l = mixed(0.5);
  const auto a = analyze(l, KernelTriple::gaussian());
  const Grid1D g = Grid1D::covering(-3, 3, 3000);
  const auto st = build_state(l, a, g, 1e-3);
  CHECK(st.radius.rho[0] == doctest::Approx(0.1 * a.lambda.rho[0]).epsilon(1e-12));
  CHECK(mass(st.densities.rho) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mass(st.densities.eta) == doctest::Approx(1.0).epsilon(1e-10));
  // alpha = 0.5 gives the wider prey bump: predators nested inside prey
  CHECK(a.lambda.eta[0] > a.lambda.rho[0]);
  CHECK(a.lambda.eta[0] / a.lambda.rho[0] == doctest::Approx(std::cbrt(a.D.rho[0] / a.D.eta[0])));
  CHECK(classify(st.densities).kind == Classification::Kind::Mixed);
}

TEST_CASE("build_state errors") {
  const Grid1D g = Grid1D::covering(-3, 3, 600);
  SUBCASE("overlapping bumps within a species") {
    const BumpLayout l{{{1.0}, {0.0}}, {{0.5, 0.5}, {-0.5, 0.5}}, 0.2};
    CHECK_THROWS_AS(build_state(l, analyze(l, KernelTriple::gaussian()), g, 1.0), DisjointnessViolated);
  }
  SUBCASE("non-positive D") {
    const auto l = mixed(1.5);
    CHECK_THROWS_AS(build_state(l, analyze(l, KernelTriple::gaussian()), g, 1.0), DomainError);
  }
  SUBCASE("bump leaving the grid") {
    const BumpLayout l{{{1.0}, {2.9}}, {{1.0}, {2.9}}, 0.2};
    CHECK_THROWS_AS(build_state(l, analyze(l, KernelTriple::gaussian()), g, 1.0), DomainError);
  }
}

TEST_CASE("alpha threshold") {
  CHECK(alpha_threshold(mixed(0.3), KernelTriple::gaussian()) == doctest::Approx(1.0).epsilon(1e-14));
  const BumpLayout far{{{1.0}, {0.0}}, {{0.5, 0.5}, {-30.0, 30.0}}, 0.3};
  CHECK(alpha_threshold(far, KernelTriple::gaussian()) == std::numeric_limits<double>::infinity());
  const BumpLayout three{{{1.0}, {0.0}}, {{0.3, 0.4, 0.3}, {-4.0, 0.0, 4.0}}, 0.05};
  const double t = alpha_threshold(three, KernelTriple::gaussian());
  CHECK(std::isfinite(t));
  CHECK(t > 0.0);
}

TEST_CASE("solve_centers: co-location family") {
  const double alpha = 0.4, c = 1.3;
  BumpLayout guess{{{1.0}, {0.5}}, {{1.0}, {0.9}}, alpha};
  NewtonReport rep;
  const auto out = solve_centers(guess, KernelTriple::gaussian(), (alpha - 1.0) * c, {}, &rep);
  CHECK(out.rho.centers[0] == doctest::Approx(c).epsilon(1e-10));
  CHECK(out.eta.centers[0] == doctest::Approx(c).epsilon(1e-10));
  CHECK(rep.max_B <= 1e-12);
}

TEST_CASE("solve_centers: predator between two prey (bisection oracle)") {
  NewtonReport rep;
  const auto out = solve_centers(predator_between(1.0, 0.2), KernelTriple::gaussian(), 0.0, {}, &rep);
  const double c = bisect_prey_offset(0.2);
  CHECK(out.rho.centers[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(out.eta.centers[0] == doctest::Approx(-c).epsilon(1e-10));
  CHECK(out.eta.centers[1] == doctest::Approx(c).epsilon(1e-10));
  CHECK(max_abs(compute_B(out, KernelTriple::gaussian())) <= 1e-12);
  CHECK(rep.constraint_residual <= 1e-12);
  const auto D = compute_D(out, KernelTriple::gaussian());
  CHECK(D.rho[0] > 0.0);
  CHECK(D.eta[0] > 0.0);
  CHECK(D.eta[1] > 0.0);
}

TEST_CASE("solve_centers is translation covariant") {
  const double alpha = 0.2, shift = 2.5;
  const auto base = solve_centers(predator_between(0.8, alpha), KernelTriple::gaussian(), 0.0);
  BumpLayout moved = predator_between(0.8, alpha);
  for (auto* s : {&moved.rho, &moved.eta}) {
    for (double& x : s->centers) x += shift;
  }
  const auto out = solve_centers(moved, KernelTriple::gaussian(), (alpha - 1.0) * shift);
  CHECK(out.rho.centers[0] == doctest::Approx(base.rho.centers[0] + shift).epsilon(1e-10));
  for (int i = 0; i < 2; ++i) CHECK(out.eta.centers[i] == doctest::Approx(base.eta.centers[i] + shift).epsilon(1e-10));
}

TEST_CASE("solve_centers on a four-bump layout") {
  const BumpLayout guess{{{1.0}, {0.0}}, {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {-5.0, 0.0, 5.0}}, 0.05};
  const auto out = solve_centers(guess, KernelTriple::gaussian(), 0.0);
  CHECK(max_abs(compute_B(out, KernelTriple::gaussian())) <= 1e-12);
}

TEST_CASE("solve_centers reports collisions") {
  const BumpLayout guess{{{1.0}, {0.0}}, {{0.5, 0.5}, {-1e-10, 1e-10}}, 0.2};
  CHECK_THROWS_AS(solve_centers(guess, KernelTriple::gaussian(), 0.0), NumericalError);
}

TEST_CASE("analytic Jacobian matches central differences") {
  const BumpLayout l{{{0.6, 0.4}, {-1.0, 0.7}}, {{0.3, 0.5, 0.2}, {-2.0, 0.1, 1.9}}, 0.35};
  const KernelTriple k = KernelTriple::gaussian();
  const auto J = B_jacobian(l, k);
  const std::size_t n = 5;
  REQUIRE(J.size() == n * n);
  const double h = 1e-5;
  auto stacked = [&](const BumpLayout& x) {
    const auto B = compute_B(x, k);
    std::vector<double> v(B.rho);
    v.insert(v.end(), B.eta.begin(), B.eta.end());
    return v;
  };
  for (std::size_t c = 0; c < n; ++c) {
    BumpLayout p = l, m = l;
    double& xp = c < 2 ? p.rho.centers[c] : p.eta.centers[c - 2];
    double& xm = c < 2 ? m.rho.centers[c] : m.eta.centers[c - 2];
    xp += h;
    xm -= h;
    const auto bp = stacked(p), bm = stacked(m);
    for (std::size_t r = 0; r < n; ++r) CHECK(std::abs((bp[r] - bm[r]) / (2 * h) - J[r * n + c]) <= 1e-6);
  }
}

TEST_CASE("stationarity residual") {
  SUBCASE("constructed profile shrinks the residual as d decreases") {
    const auto l = solve_centers(predator_between(1.0, 0.2), KernelTriple::gaussian(), 0.0);
    const auto a = analyze(l, KernelTriple::gaussian());
    const Grid1D g = Grid1D::covering(-2.5, 2.5, 2500);
    double prev = std::numeric_limits<double>::infinity();
    for (double d : {1e-2, 1e-3, 1e-4}) {
      const auto st = build_state(l, a, g, d);
      const double r = max_residual(stationarity_residual(st.densities, KernelTriple::gaussian()));
      CHECK(r <= 0.02);
      CHECK(r <= 1.1 * prev);
      prev = r;
    }
  }
  SUBCASE("a uniform blob is far from stationary") {
    const Grid1D g = Grid1D::covering(-4, 4, 160);
    const Segment s{-2.0, 2.0, 0.25};
    const auto u = density_from_segments(g, std::span<const Segment>(&s, 1));
    const DensityPair p{u, u, 0.1, 0.01};
    CHECK(max_residual(stationarity_residual(p, KernelTriple::gaussian())) > 0.1);
  }
  SUBCASE("empty species") {
    const Grid1D g = Grid1D::covering(-1, 1, 10);
    const DensityPair p{Density1D::zeros(g), Density1D(g, std::vector<double>(10, 1.0)), 0.1, 0.1};
    CHECK_THROWS_AS(stationarity_residual(p, KernelTriple::gaussian()), DomainError);
  }
}

TEST_CASE("classification of synthetic supports") {
  const Grid1D g(0.0, 1.0, 20);
  auto on = [&](std::initializer_list<std::pair<int, int>> runs) {
    std::vector<double> v(20, 0.0);
    for (auto [a, b] : runs) {
      for (int i = a; i <= b; ++i) v[i] = 1.0;
    }
    return Density1D(g, v);
  };
  using K = Classification::Kind;
  CHECK(classify({on({{8, 11}}), on({{6, 13}}), 1, 0}).kind == K::Mixed);
  CHECK(classify({on({{8, 11}}), on({{2, 5}, {14, 17}}), 1, 0}).kind == K::Separated);
  CHECK(classify({on({{8, 11}}), on({{10, 15}}), 1, 0}).kind == K::Indeterminate);
  const auto c = classify({on({{8, 11}}), on({{1, 3}, {8, 11}, {15, 17}}), 1, 0});
  CHECK(c.kind == K::MultiBump);
  CHECK(c.n_rho == 1);
  CHECK(c.n_eta == 3);
  CHECK(c.total_bumps() == 4);
  CHECK(c.to_string() == "MultiBump(1,3)");
  // a mixed state whose prey sits inside the predators is not the mixed regime
  CHECK(classify({on({{6, 13}}), on({{8, 11}}), 1, 0}).kind == K::MultiBump);

  const auto comps = support_components(on({{1, 3}, {15, 17}}), 1e-6);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0] == std::pair{1, 3});
  CHECK(comps[1] == std::pair{15, 17});
}

TEST_CASE("layout extracted from a constructed state") {
  const auto l = solve_centers(predator_between(1.0, 0.2), KernelTriple::gaussian(), 0.0);
  const auto st = build_state(l, analyze(l, KernelTriple::gaussian()), Grid1D::covering(-2.5, 2.5, 1000), 1e-3);
  const auto back = layout_from_state(st.densities);
  REQUIRE(back.eta.size() == 2);
  CHECK(back.eta.masses[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(back.eta.centers[1] == doctest::Approx(l.eta.centers[1]).epsilon(1e-6));
  CHECK(back.rho.centers[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("layout validation") {
  CHECK_THROWS_AS(BumpLayout({{{1.0}, {0.0}}, {{}, {}}, 0.2}).validate(), ConfigError);
  CHECK_THROWS_AS(BumpLayout({{{1.0, 1.0}, {1.0, 0.0}}, {{1.0}, {0.0}}, 0.2}).validate(), ConfigError);
  CHECK_THROWS_AS(BumpLayout({{{-1.0}, {0.0}}, {{1.0}, {0.0}}, 0.2}).validate(), ConfigError);
  CHECK_THROWS_AS(BumpLayout({{{1.0}, {0.0}}, {{1.0}, {0.0}}, 0.0}).validate(), ConfigError);
}
