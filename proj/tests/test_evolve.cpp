#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fdelab/errors.hpp"
#include "fdelab/evolve.hpp"

using namespace fdelab;

namespace {

// Scalar Newton for c1 in  k c1^p + dt c1 = c0^p.
double scalar_step(double c0, double dt, double p, double k) {
  double c = c0;
  for (int i = 0; i < 100; ++i) {
    const double f = k * std::pow(c, p) + dt * c - std::pow(c0, p);
    const double df = k * p * std::pow(c, p - 1.0) + dt;
    const double next = c - f / df;
    if (std::abs(next - c) <= 1e-16 * c) return next;
    c = next;
  }
  return c;
}

const SteadyState& steady_1d() {
  static const SteadyState st = solve_steady(2.0, 0.0, build_grid(1, {{0, 1}}, {101}));
  return st;
}

}  // namespace

TEST_CASE("one base step on a multiple of S follows the scalar recurrence") {
  const SteadyState& st = steady_1d();
  for (double p : {2.0}) {
    const double c0 = 0.7, dt = 1e-2;
    const auto u0 = st.S.with_values(c0 * st.S.values());
    const auto u1 = step_base(u0, dt, p, 0.0);
    // backward Euler in w = u^p: (c1^p - c0^p) S^p = dt c1 Lap S = -dt c1 S^p
    const double c1 = scalar_step(c0, dt, p, 1.0);
    CHECK((u1.values() - c1 * st.S.values()).cwiseAbs().maxCoeff() <= 1e-9 * st.S.max_abs());
  }
}

TEST_CASE("one rescaled step on a multiple of S follows the scalar recurrence") {
  const SteadyState& st = steady_1d();
  const double a0 = 1.2, dt = 1e-2;
  const auto v1 = step_rescaled(st.S.with_values(a0 * st.S.values()), dt, 2.0, 0.0);
  // (1 - dt) a1^p + dt a1 = a0^p
  const double a1 = scalar_step(a0, dt, 2.0, 1.0 - dt);
  CHECK((v1.values() - a1 * st.S.values()).cwiseAbs().maxCoeff() <= 1e-9 * st.S.max_abs());
  CHECK_THROWS_AS(step_rescaled(st.S, 1.5, 2.0, 0.0), ContractError);
}

TEST_CASE("S is a fixed point of the rescaled flow") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  pol.dt = 1e-2;
  pol.snapshot_interval = 0.5;
  const Trajectory tr = evolve_rescaled(st.S, 2.0, 0.0, pol, 2.0);
  CHECK(tr.back().t == doctest::Approx(2.0));
  CHECK((tr.back().u.values() - st.S.values()).cwiseAbs().maxCoeff() <= 1e-8 * st.S.max_abs());
}

TEST_CASE("base run from S/2 reaches the floor near T* = 1") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  pol.dt = 1e-3;
  const Trajectory tr = evolve_base(st.S.with_values(0.5 * st.S.values()), 2.0, 0.0, pol, StopCriteria{});
  CHECK(tr.reached_floor);
  const ExtinctionEstimate est = estimate_extinction_time(tr);
  CHECK(est.Tstar == doctest::Approx(1.0).epsilon(0.02));
  CHECK(est.r_squared > 0.999);
  for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr[k].u.max_abs() <= tr[k - 1].u.max_abs());

  // geometric snapshots accumulate toward T*
  const double gap_end = tr[tr.size() - 1].t - tr[tr.size() - 2].t;
  CHECK(gap_end < pol.snapshot_interval);
}

TEST_CASE("adaptive base run agrees with the fixed-step run") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  pol.kind = DtPolicy::Kind::adaptive;
  pol.dt = 1e-2;
  const Trajectory tr = evolve_base(st.S.with_values(0.5 * st.S.values()), 2.0, 0.0, pol, StopCriteria{});
  CHECK(estimate_extinction_time(tr).Tstar == doctest::Approx(1.0).epsilon(0.02));
  DtPolicy bad = pol;
  CHECK_THROWS_AS(evolve_rescaled(st.S, 2.0, 0.0, bad, 1.0), ConfigError);
}

TEST_CASE("zero data has T* = 0") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  const Trajectory tr = evolve_base(GridFunction::zeros(st.S.grid_ptr()), 2.0, 0.0, pol, StopCriteria{});
  CHECK(estimate_extinction_time(tr).Tstar == 0.0);
}

TEST_CASE("time maps are inverse to each other") {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double tau : {0.0, 0.1, 0.5, 0.99}) {
      const double t = rescaled_time(tau, 1.0, p);
      CHECK(base_time(t, 1.0, p) == doctest::Approx(tau).epsilon(1e-14));
    }
  }
  CHECK(rescaled_time(0.5, 1.0, 2.0) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK_THROWS_AS(rescaled_time(1.0, 1.0, 2.0), DomainError);
}

TEST_CASE("separable base trajectory maps onto S in the rescaled frame") {
  const SteadyState& st = steady_1d();
  Trajectory base(Frame::base, 2.0, 0.0);
  for (double t : {0.0, 0.2, 0.5, 0.8}) base.append(t, separable_solution(st, 1.0, t));
  const Trajectory r = frame_transform(base, 1.0, FrameDirection::to_rescaled);
  CHECK(r.frame() == Frame::rescaled);
  for (const auto& s : r.snapshots()) CHECK((s.u.values() - st.S.values()).cwiseAbs().maxCoeff() <= 1e-12 * st.S.max_abs());
  const Trajectory back = frame_transform(r, 1.0, FrameDirection::to_base);
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].t == doctest::Approx(base[k].t).epsilon(1e-13));
    CHECK((back[k].u.values() - base[k].u.values()).cwiseAbs().maxCoeff() <= 1e-12 * st.S.max_abs());
  }
  CHECK(truncate_before(base, 0.5).size() == 2);
}

TEST_CASE("trajectory append contract") {
  const SteadyState& st = steady_1d();
  Trajectory tr(Frame::base, 2.0, 0.0);
  tr.append(0.0, st.S);
  CHECK_THROWS_AS(tr.append(0.0, st.S), ContractError);
  CHECK_THROWS_AS(tr.append(1.0, st.S.with_values(-st.S.values())), ContractError);
  CHECK_THROWS_AS(tr.append(1.0, GridFunction(st.S.grid_ptr(), st.S.values(), Boundary::free)), ContractError);
}

TEST_CASE("trajectory directory round trip") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  pol.dt = 1e-2;
  pol.snapshot_interval = 0.1;
  const Trajectory tr = evolve_rescaled(st.S.with_values(0.9 * st.S.values()), 2.0, 0.0, pol, 0.5);
  const auto dir = (std::filesystem::temp_directory_path() / "fdelab_traj_rt").string();
  std::filesystem::remove_all(dir);
  write_trajectory(dir, tr);
  const Trajectory back = read_trajectory(dir);
  REQUIRE(back.size() == tr.size());
  CHECK(back.frame() == tr.frame());
  CHECK(back.steps == tr.steps);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(back[k].t == tr[k].t);
    CHECK((back[k].u.values().array() == tr[k].u.values().array()).all());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("amplitude calibration lands on the stable manifold") {
  const SteadyState& st = steady_1d();
  const Calibration cal = calibrate_rescaled_amplitude(st.S, st, 1e-2, 4.0);
  // for data proportional to S the only stable amplitude is 1
  CHECK(cal.amplitude == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("extinction time of scaled steady data") {
  const SteadyState& st = steady_1d();
  DtPolicy pol;
  pol.dt = 1e-3;
  for (double a : {0.25, 0.5, 1.0}) {
    const Trajectory tr = evolve_base(st.S.with_values(a * st.S.values()), 2.0, 0.0, pol, StopCriteria{});
    const ExtinctionEstimate est = estimate_extinction_time(tr);
    // T* = p a^{p-1} / (p - 1)
    CHECK(est.Tstar == doctest::Approx(2.0 * a).epsilon(0.02));
    CHECK(est.Tstar > tr.back().t);
  }
}
