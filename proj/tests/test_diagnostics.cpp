#include <doctest.h>

#include <cmath>

#include "fdelab/diagnostics.hpp"
#include "fdelab/errors.hpp"

using namespace fdelab;

namespace {

const SteadyState& steady(double p = 2.0, double b = 0.0) {
  static std::map<std::pair<double, double>, SteadyState> cache;
  auto it = cache.find({p, b});
  if (it == cache.end()) it = cache.emplace(std::make_pair(p, b), solve_steady(p, b, build_grid(1, {{0, 1}}, {201}))).first;
  return it->second;
}

}  // namespace

TEST_CASE("Harnack ratio") {
  const auto g = build_grid(1, {{0, 1}}, {401});
  const DistanceField d = distance_field(g);
  const HarnackRatio r = harnack_ratio(d.function().with_values(3.0 * d.values()), d);
  CHECK_FALSE(r.degenerate);
  CHECK(r.min == doctest::Approx(3.0));
  CHECK(r.max == doctest::Approx(3.0));
  CHECK(r.c0 == doctest::Approx(3.0));

  const HarnackRatio sq = harnack_ratio(d.function().with_values(d.values().cwiseAbs2()), d);
  CHECK(sq.degenerate);
  CHECK(std::isinf(sq.c0));
}

TEST_CASE("energy of S matches the summation-by-parts identity") {
  for (double p : {1.5, 2.0, 3.0}) {
    const SteadyState& st = steady(p, 1.0);
    const Vector& S = st.S.values();
    // int |grad S|^2 = int (b S + S^p) S at a discrete solution
    const double mass = integrate(st.S.grid(), S.array().pow(p + 1.0).matrix());
    CHECK(energy_J(st.S, p, 1.0) == doctest::Approx((1.0 - 2.0 / (p + 1.0)) * mass).epsilon(1e-7));
    CHECK(energy_J(st.S, p, 1.0, false) == doctest::Approx(mass).epsilon(1e-7));
  }
}

TEST_CASE("three-point time derivative is exact on quadratics") {
  const SteadyState& st = steady();
  Trajectory tr(Frame::rescaled, 2.0, 0.0);
  auto q = [](double t) { return 1.0 + 0.5 * t + 0.25 * t * t; };
  const std::vector<double> ts{0.0, 0.1, 0.25, 0.3, 0.7};
  for (double t : ts) tr.append(t, st.S.with_values(q(t) * st.S.values()));
  for (std::size_t k = 1; k + 1 < ts.size(); ++k) {
    const Vector dv = time_derivative(tr, k);
    CHECK((dv - (0.5 + 0.5 * ts[k]) * st.S.values()).cwiseAbs().maxCoeff() <= 1e-12 * st.S.max_abs());
  }
}

TEST_CASE("curvature of S is one away from the mask") {
  const SteadyState& st = steady();
  const Curvature R = curvature_R(st.S, 2.0, 0.0);
  for (Index n : st.S.grid().interior_nodes()) {
    if (std::isnan(R.elliptic[n])) continue;
    CHECK(R.elliptic[n] == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(std::isnan(R.elliptic[0]) == false);
  CHECK(R.masked_fraction == 0.0);
  CHECK(moment_q(st.S, 2.0, 0.0, 2.0) <= 1e-12);

  // v = a S: elliptic part a^{1-p}, temporal part from d_t v = 0 is 1
  const Curvature R2 = curvature_R(st.S.with_values(2.0 * st.S.values()), 2.0, 0.0, Vector(Vector::Zero(st.S.size())));
  REQUIRE(R2.temporal.has_value());
  CHECK(R2.elliptic[100] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK((*R2.temporal)[100] == doctest::Approx(1.0));
}

TEST_CASE("curvature masks nodes where v is tiny relative to d") {
  const auto g = build_grid(1, {{0, 1}}, {101});
  const DistanceField d = distance_field(g);
  Vector v = d.values();
  v[50] = 1e-6;
  const Curvature R = curvature_R(d.function().with_values(v), 2.0, 0.0);
  CHECK(std::isnan(R.elliptic[50]));
  CHECK(R.masked.size() == 1);
}

TEST_CASE("Benilan-Crandall coefficient") {
  // p/(p-1)^2 / (1 - e^{-pt/(p-1)})
  CHECK(bc_coefficient(2.0, std::log(2.0) / 2.0) == doctest::Approx(4.0));
  CHECK(bc_coefficient(3.0, 100.0) == doctest::Approx(0.75));
  CHECK_THROWS_AS(bc_coefficient(2.0, 0.0), DomainError);
}

TEST_CASE("line fits") {
  const std::vector<double> x{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 - 0.5 * v);
  const LineFit ls = least_squares(x, y);
  CHECK(ls.slope == doctest::Approx(-0.5));
  CHECK(ls.intercept == doctest::Approx(3.0));
  CHECK(ls.r_squared == doctest::Approx(1.0));
  y[3] += 10.0;
  CHECK(theil_sen(x, y).slope == doctest::Approx(-0.5));
  CHECK(least_squares(x, y).slope != doctest::Approx(-0.5));
}

TEST_CASE("convergence rate on a synthetic exponential approach") {
  const SteadyState& st = steady();
  Trajectory tr(Frame::rescaled, 2.0, 0.0);
  const double gamma = 0.7;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.1 * k;
    tr.append(t, st.S.with_values((1.0 + 0.3 * std::exp(-gamma * t)) * st.S.values()));
  }
  const RateFit fit = convergence_rate(tr, st);
  CHECK_FALSE(fit.refused);
  CHECK(fit.gamma_sup == doctest::Approx(gamma).epsilon(1e-8));
  CHECK(fit.gamma_weighted == doctest::Approx(gamma).epsilon(1e-8));
  CHECK(fit.r_squared > 0.999);
  for (std::size_t k = 0; k < fit.err_sup.size(); ++k)
    CHECK(fit.err_weighted.value[k] <= fit.domination_constant * fit.err_sup.value[k] * (1 + 1e-12));

  Trajectory stuck(Frame::rescaled, 2.0, 0.0);
  for (int k = 0; k <= 10; ++k) stuck.append(0.1 * k, st.S.with_values(2.0 * st.S.values()));
  const RateFit r = convergence_rate(stuck, st);
  CHECK(r.refused);
}

TEST_CASE("scaling envelope of the separable solution is constant") {
  const SteadyState& st = steady();
  Trajectory tr(Frame::base, 2.0, 0.0);
  for (int k = 0; k <= 90; ++k) tr.append(0.01 * k, separable_solution(st, 1.0, 0.01 * k));
  const Envelope e0 = scaling_envelope(tr, 1.0, 0, 0.1);
  // u / (d (T-t)) = S / (2 d)
  const DistanceField d = distance_field(st.S.grid_ptr());
  double expect = 0.0;
  for (Index n : st.S.grid().interior_nodes()) expect = std::max(expect, st.S[n] / (2.0 * d[n]));
  for (double c : e0.C.value) CHECK(c == doctest::Approx(expect).epsilon(1e-12));
  const Envelope e1 = scaling_envelope(tr, 1.0, 1, 0.1);
  CHECK(e1.sup == doctest::Approx(expect).epsilon(1e-9));
  CHECK_THROWS_AS(scaling_envelope(tr, 0.5, 0, 0.1), DomainError);
}

TEST_CASE("report checks need registered tolerances") {
  DiagnosticsReport rep;
  CHECK_THROWS_AS(rep.check("x", true, 0.0, "missing"), ContractError);
  rep.tolerances["tol"] = 1.0;
  rep.check("x", true, 0.5, "tol");
  rep.check("y", false, 2.0, "tol");
  CHECK_FALSE(rep.all_passed());
  const auto j = rep.to_json();
  CHECK(j["flags"].size() == 2);
  CHECK(j["flags"][1]["tolerance"] == 1.0);
}
