// Acceptance run: one PASS/FAIL line per criterion, INFO lines for context.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fdelab/diagnostics.hpp"
#include "fdelab/evolve.hpp"
#include "fdelab/funcineq.hpp"
#include "fdelab/steady.hpp"

using namespace fdelab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class... A>
void info(const char* fmt, A... args) {
  std::printf("  INFO ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const Snapshot* at_time(const Trajectory& tr, double t) {
  for (const auto& s : tr.snapshots())
    if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, t)) return &s;
  return nullptr;
}

double sup_on(const TimeSeries& s, double a, double b) { return s.sup_on(a, b); }

// Shared runs ---------------------------------------------------------------

struct BaseRun {
  SteadyState st;
  Trajectory tr;
  ExtinctionEstimate est;
  double seconds;
};

const BaseRun& criterion1_run() {
  static const BaseRun run = [] {
    const auto t0 = Clock::now();
    SteadyState st = solve_steady(2.0, 0.0, build_grid(1, {{0, 1}}, {401}));
    DtPolicy pol;
    pol.dt = 1e-4;
    Trajectory tr = evolve_base(st.S.with_values(0.5 * st.S.values()), 2.0, 0.0, pol, StopCriteria{});
    const ExtinctionEstimate est = estimate_extinction_time(tr);
    return BaseRun{std::move(st), std::move(tr), est, seconds_since(t0)};
  }();
  return run;
}

// Rescaled run from 1.2 S on N = 401 to t = 10.
const Trajectory& rescaled_12_run() {
  static const Trajectory tr = [] {
    const SteadyState& st = criterion1_run().st;
    DtPolicy pol;
    pol.dt = 1e-3;
    pol.snapshot_interval = 0.05;
    return evolve_rescaled(st.S.with_values(1.2 * st.S.values()), 2.0, 0.0, pol, 10.0);
  }();
  return tr;
}

// Non-separable datum placed on the stable manifold of S, N = 201.
struct Calibrated {
  SteadyState st;
  Trajectory tr;
  double amplitude;
};

const Calibrated& calibrated_run() {
  static const Calibrated run = [] {
    SteadyState st = solve_steady(2.0, 0.0, build_grid(1, {{0, 1}}, {201}));
    InitialDataSpec spec;
    spec.kind = InitialKind::steady_plus_bump;
    spec.a = 0.8;
    spec.center = {0.35};
    spec.width = 0.2;
    spec.height = 0.5;
    const GridFunction shape = initial_data(spec, st).u;
    const double dt = 1e-3, t_end = 8.0;
    const Calibration cal = calibrate_rescaled_amplitude(shape, st, dt, t_end);
    DtPolicy pol;
    pol.dt = dt;
    pol.snapshot_interval = 0.05;
    Trajectory tr = evolve_rescaled(shape.with_values(cal.amplitude * shape.values()), 2.0, 0.0, pol, t_end);
    return Calibrated{std::move(st), std::move(tr), cal.amplitude};
  }();
  return run;
}

double harnack_sup(const Trajectory& tr, double t_from) {
  const DistanceField d = distance_field(tr.grid_ptr());
  double c0 = 0.0;
  for (const auto& s : tr.snapshots())
    if (s.t >= t_from) c0 = std::max(c0, harnack_ratio(s.u, d).c0);
  return c0;
}

// sup over [T/2, T] vs 2 x sup over [T/4, T/2] for q in {2, 4, 8}
bool moments_bounded(const Trajectory& tr, const char* label) {
  const double T = tr.back().t;
  bool ok = true;
  for (double q : {2.0, 4.0, 8.0}) {
    const Moments m = moments_Mq(tr, q);
    const double late = sup_on(m.Mq, 0.5 * T, T), early = sup_on(m.Mq, 0.25 * T, 0.5 * T);
    info("%s M_%g: sup[T/2,T] = %.4g, sup[T/4,T/2] = %.4g, ratio %.4g", label, q, late, early, late / early);
    ok = ok && late <= 2.0 * early;
  }
  return ok;
}

struct ConvergenceCheck {
  bool ok = false;
  RateFit fit;
  double domination_excess = 0.0;
};

ConvergenceCheck convergence_check(const Trajectory& tr, const SteadyState& st) {
  ConvergenceCheck c;
  c.fit = convergence_rate(tr, st);
  for (std::size_t k = 0; k < c.fit.err_sup.size(); ++k)
    c.domination_excess = std::max(c.domination_excess, c.fit.err_weighted.value[k] -
                                                            c.fit.domination_constant * c.fit.err_sup.value[k]);
  c.ok = !c.fit.refused && c.fit.gamma_sup > 0.0 && c.fit.r_squared >= 0.95 &&
         c.domination_excess <= 1e-12 * c.fit.domination_constant;
  return c;
}

// Criteria ------------------------------------------------------------------

void criterion1() {
  const BaseRun& r = criterion1_run();
  const double Smax = r.st.S.max_abs();
  const Snapshot* s = at_time(r.tr, 0.5);
  double rel = std::numeric_limits<double>::infinity();
  if (s) rel = std::abs(s->u.max_abs() - 0.25 * Smax) / (0.25 * Smax);
  const double terr = std::abs(r.est.Tstar - 1.0);
  info("u_max(0.5) relative error %.3e, T* = %.6f (fit R^2 %.6f), wall %.1f s", rel, r.est.Tstar, r.est.r_squared,
       r.seconds);
  verdict(1, rel <= 0.01 && terr <= 0.02 && r.seconds <= 60.0,
          "exact-solution tracking: rel err " + fmt("%.2e", rel) + " <= 1e-2, |T*-1| " + fmt("%.2e", terr) +
              " <= 2e-2, " + fmt("%.1f", r.seconds) + " s <= 60 s");
}

double observed_order(const std::vector<double>& step, const std::vector<double>& err) {
  double worst = std::numeric_limits<double>::infinity(), best = 0.0;
  for (std::size_t k = 1; k < step.size(); ++k) {
    const double o = std::log(err[k - 1] / err[k]) / std::log(step[k - 1] / step[k]);
    worst = std::min(worst, o);
    best = std::max(best, o);
  }
  return step.size() > 1 ? 0.5 * (worst + best) : 0.0;
}

void criterion2() {
  const auto t0 = Clock::now();
  const double p = 2.0, t_end = 0.5, a = 0.5;
  const double c_end = a - t_end / 2.0;  // c(t) = (1 - t)/2 for T* = 1

  // dt refinement at fixed N; the grid steady state is the exact semi-discrete profile.
  const SteadyState st = solve_steady(p, 0.0, build_grid(1, {{0, 1}}, {101}));
  std::vector<double> dts{4e-3, 2e-3, 1e-3}, e_dt;
  for (double dt : dts) {
    DtPolicy pol;
    pol.dt = dt;
    pol.snapshot_interval = 0.1;
    pol.extinction_guard = false;
    StopCriteria stop;
    stop.t_end = t_end;
    const Trajectory tr = evolve_base(st.S.with_values(a * st.S.values()), p, 0.0, pol, stop);
    const Snapshot* s = at_time(tr, t_end);
    e_dt.push_back(s ? (s->u.values() - c_end * st.S.values()).cwiseAbs().maxCoeff() / (c_end * st.S.max_abs())
                     : std::numeric_limits<double>::quiet_NaN());
  }
  const double o_dt = observed_order(dts, e_dt);

  // h refinement with data sampled from the continuum profile.
  const double t_h = 0.25, c_h = a - t_h / 2.0;
  const ShootingProfile& fine = *criterion1_run().st.profile;
  const int fine_cells = static_cast<int>(fine.x.size()) - 1;
  std::vector<double> hs, e_h;
  bool sampled = true;
  for (Index N : {26, 51, 101}) {
    const auto g = build_grid(1, {{0, 1}}, {N});
    const int stride = fine_cells / static_cast<int>(N - 1);
    sampled = sampled && stride * (N - 1) == fine_cells;
    Vector S(N);
    for (Index i = 0; i < N; ++i) S[i] = fine.s[static_cast<std::size_t>(i * stride)];
    S[0] = S[N - 1] = 0.0;
    const GridFunction Sx(g, S, Boundary::dirichlet);
    DtPolicy pol;
    pol.dt = 1e-5;
    pol.snapshot_interval = t_h;
    pol.extinction_guard = false;
    StopCriteria stop;
    stop.t_end = t_h;
    const Trajectory tr = evolve_base(Sx.with_values(a * S), p, 0.0, pol, stop);
    const Snapshot* s = at_time(tr, t_h);
    hs.push_back(1.0 / static_cast<double>(N - 1));
    e_h.push_back(s ? (s->u.values() - c_h * S).cwiseAbs().maxCoeff() / (c_h * S.maxCoeff())
                    : std::numeric_limits<double>::quiet_NaN());
  }
  const double o_h = observed_order(hs, e_h);
  const double secs = seconds_since(t0);
  info("dt errors %.3e %.3e %.3e -> order %.3f", e_dt[0], e_dt[1], e_dt[2], o_dt);
  info("h errors %.3e %.3e %.3e -> order %.3f (profile sampled on its own mesh: %s)", e_h[0], e_h[1], e_h[2], o_h,
       sampled ? "yes" : "no");
  verdict(2, o_dt >= 0.8 && o_dt <= 1.2 && o_h >= 1.7 && o_h <= 2.3 && secs <= 300.0,
          "integrator orders: dt " + fmt("%.3f", o_dt) + " in [0.8,1.2], h " + fmt("%.3f", o_h) + " in [1.7,2.3], " +
              fmt("%.1f", secs) + " s <= 300 s");
}

void criterion3() {
  const BaseRun& r = criterion1_run();
  const TimeSeries J = energy_series(r.tr);
  double worst_rise = 0.0;
  for (std::size_t k = 1; k < J.size(); ++k) worst_rise = std::max(worst_rise, J.value[k] - J.value[k - 1]);
  const Dissipation D = dissipation_residual(r.tr);
  // snapshot closest to mid-run
  const double mid = 0.5 * r.tr.back().t;
  std::size_t km = 0;
  for (std::size_t k = 0; k < D.relative.size(); ++k)
    if (std::abs(D.relative.t[k] - mid) < std::abs(D.relative.t[km] - mid)) km = k;
  const double rel = D.relative.value[km];
  info("J(0) = %.6g, J(end) = %.6g, largest increase %.3e; dissipation residual %.3e at t = %.4f", J.value.front(),
       J.value.back(), worst_rise, rel, D.relative.t[km]);
  verdict(3, worst_rise <= 0.0 && rel <= 0.05,
          "energy dissipation: J non-increasing (max rise " + fmt("%.1e", worst_rise) + "), mid-run residual " +
              fmt("%.2e", rel) + " <= 5e-2");
}

void criterion4() {
  const double c0 = harnack_sup(rescaled_12_run(), 0.5);

  // base frame from 1.2 S
  const SteadyState& st = criterion1_run().st;
  DtPolicy pol;
  pol.dt = 1e-4;
  const Trajectory base = evolve_base(st.S.with_values(1.2 * st.S.values()), 2.0, 0.0, pol, StopCriteria{});
  const double Tstar = estimate_extinction_time(base).Tstar;
  const DistanceField d = distance_field(base.grid_ptr());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : base.snapshots()) {
    if (s.t < 0.25 * Tstar || s.t > 0.9 * Tstar) continue;
    const double scale = std::pow(Tstar - s.t, 1.0 / (2.0 - 1.0));
    for (Index n : s.u.grid().interior_nodes()) {
      const double r = s.u[n] / (d[n] * scale);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  const double band = std::max(hi, 1.0 / lo);
  info("rescaled 1.2 S: sup_{t>=0.5} c0 = %.4g (v/S at t = 10 is %.4g)", c0,
       rescaled_12_run().back().u.max_abs() / st.S.max_abs());
  info("base 1.2 S: T* = %.5f, band [%.4g, %.4g] on [0.25T*, 0.9T*], c = %.4g", Tstar, lo, hi, band);
  const Calibrated& cal = calibrated_run();
  info("calibrated bump datum (A = %.8f): sup_{t>=0.5} c0 = %.4g; for S itself c0 = %.4g", cal.amplitude,
       harnack_sup(cal.tr, 0.5), harnack_ratio(cal.st.S, distance_field(cal.st.S.grid_ptr())).c0);
  verdict(4, c0 <= 10.0 && band <= 10.0,
          "global Harnack: rescaled c0 " + fmt("%.3g", c0) + " <= 10, base band c " + fmt("%.3g", band) + " <= 10");
}

void criterion5() {
  const SteadyState& st = criterion1_run().st;
  const Curvature R = curvature_R(st.S, 2.0, 0.0);
  double worst = 0.0;
  for (Index n : st.S.grid().interior_nodes())
    if (!std::isnan(R.elliptic[n])) worst = std::max(worst, std::abs(R.elliptic[n] - 1.0));
  const double tol = st.tolerance;

  // R_e vs R_t at t = 0.5 of a rescaled run from 1.2 S, N = 401, dt = 1e-4
  DtPolicy pol;
  pol.dt = 1e-4;
  pol.snapshot_interval = 0.01;
  const Trajectory tr = evolve_rescaled(st.S.with_values(1.2 * st.S.values()), 2.0, 0.0, pol, 0.6);
  std::size_t k = 0;
  while (k < tr.size() && std::abs(tr[k].t - 0.5) > 1e-9) ++k;
  double gap = std::numeric_limits<double>::infinity();
  std::size_t masked = 0;
  if (k + 1 < tr.size() && k > 0) {
    const Curvature C = curvature_R(tr[k].u, 2.0, 0.0, time_derivative(tr, k));
    gap = 0.0;
    for (Index n : tr[k].u.grid().interior_nodes())
      if (!std::isnan(C.elliptic[n])) gap = std::max(gap, std::abs(C.elliptic[n] - (*C.temporal)[n]));
    masked = C.masked.size();
  }
  info("v = S: max |R - 1| = %.3e, steady tolerance %.1e; R_e vs R_t gap %.3e (%zu masked nodes)", worst, tol, gap,
       masked);
  verdict(5, worst <= 10.0 * tol && gap <= 1e-2,
          "curvature: |R-1| " + fmt("%.2e", worst) + " <= 10 tol (" + fmt("%.1e", 10 * tol) + "), formula gap " +
              fmt("%.2e", gap) + " <= 1e-2");
}

void criterion6() {
  const bool ok = moments_bounded(rescaled_12_run(), "1.2 S");
  const Calibrated& cal = calibrated_run();
  const bool ok_cal = moments_bounded(cal.tr, "calibrated");
  info("calibrated bump datum: moment bound %s", ok_cal ? "holds" : "fails");
  verdict(6, ok, "moment boundedness on the v0 = 1.2 S run, q in {2,4,8}");
}

void criterion7() {
  struct Kind {
    const char* name;
    InitialDataSpec spec;
  };
  std::vector<Kind> kinds;
  for (double a : {0.8, 1.2}) {
    InitialDataSpec s;
    s.a = a;
    kinds.push_back({a < 1 ? "0.8 S" : "1.2 S", s});
  }
  {
    InitialDataSpec s;
    s.kind = InitialKind::steady_plus_bump;
    s.a = 0.8;
    s.width = 0.2;
    s.height = 0.5;
    kinds.push_back({"bump", s});
  }
  {
    InitialDataSpec s;
    s.kind = InitialKind::weighted_eigenfunction;
    kinds.push_back({"weighted eigenfunction", s});
  }
  bool ok = true;
  int runs = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (double p : {1.5, 2.0, 3.0}) {
    for (int dim : {1, 2}) {
      const auto g = dim == 1 ? build_grid(1, {{0, 1}}, {101}) : build_grid(2, {{0, 1}, {0, 1}}, {17, 17});
      const SteadyState st = solve_steady(p, 0.0, g);
      for (const Kind& k : kinds) {
        DtPolicy pol;
        pol.dt = 2e-3;
        pol.snapshot_interval = 0.05;
        const Trajectory tr = evolve_rescaled(initial_data(k.spec, st).u, p, 0.0, pol, 2.0);
        const double m = benilan_crandall_margin(tr).sup();
        ++runs;
        worst = std::max(worst, m);
        if (!(m <= 0.0)) {
          ok = false;
          info("margin %.3e > 0 for p = %g, %dD, %s", m, p, dim, k.name);
        }
      }
    }
  }
  info("%d rescaled runs, largest margin %.4g", runs, worst);
  verdict(7, ok, "Benilan-Crandall margin <= 0 at every snapshot of " + std::to_string(runs) + " runs");
}

void criterion8() {
  const ConvergenceCheck c = convergence_check(rescaled_12_run(), criterion1_run().st);
  info("1.2 S: %s, gamma_sup = %.4g, R^2 = %.4g, domination excess %.2e", c.fit.refused ? ("refused: " + c.fit.reason).c_str() : "fitted",
       c.fit.gamma_sup, c.fit.r_squared, c.domination_excess);
  const Calibrated& cal = calibrated_run();
  const ConvergenceCheck cc = convergence_check(cal.tr, cal.st);
  info("calibrated bump datum: %s, gamma_sup = %.4g, gamma_weighted = %.4g, R^2 = %.4g on [%.3g, %.3g]",
       cc.fit.refused ? "refused" : "fitted", cc.fit.gamma_sup, cc.fit.gamma_weighted, cc.fit.r_squared, cc.fit.t_a,
       cc.fit.t_b);
  verdict(8, c.ok, "exponential convergence from v0 = 1.2 S: gamma_sup > 0, R^2 >= 0.95, weighted <= C sup");
}

std::vector<double> unit_times(int levels) {
  std::vector<double> t;
  for (int k = 0; k < levels; ++k) t.push_back(static_cast<double>(k) / (levels - 1));
  return t;
}

void criterion9() {
  const auto t0 = Clock::now();
  struct Case {
    int n;
    double p, s, chi;
  };
  bool chi_ok = true;
  for (const Case& c : {Case{1, 2.0, std::nan(""), 1.5}, Case{3, 2.0, 1.0, 1.5}, Case{4, 3.0, 1.0, 4.0 / 3.0}}) {
    const ExponentPack e = chi_exponent(c.n, c.p);
    const bool ok = std::abs(e.chi - c.chi) <= 1e-14 && (std::isnan(c.s) ? !e.s : e.s && std::abs(*e.s - c.s) <= 1e-14);
    info("chi(n=%d, p=%g) = %.15g%s", c.n, c.p, e.chi, ok ? "" : "  MISMATCH");
    chi_ok = chi_ok && ok;
  }

  bool sob_ok = true;
  for (int dim : {1, 2}) {
    const auto g = dim == 1 ? build_grid(1, {{0, 1}}, {65}) : build_grid(2, {{0, 1}, {0, 1}}, {17, 17});
    const auto ts = unit_times(17);
    const double C = weighted_sobolev_constant(g, ts, 2.0);
    std::mt19937_64 rng(20240 + dim);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, weighted_sobolev_ratio(random_piecewise_linear(g, ts, rng), 2.0));
    info("%dD weighted Sobolev: empirical constant %.5g, max over 100 samples %.5g", dim, C, worst);
    sob_ok = sob_ok && worst <= C;
  }

  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double excess = ode_rk4_oracle(1.0, 1.0, 0.5, 1.0, 0.1, 1.0).worst_excess;
  for (int i = 0; i < 50; ++i) {
    const double a = 0.1 + 1.9 * U(rng), m1 = 0.1 + 1.9 * U(rng), m2 = 0.95 * U(rng);
    const double m3 = U(rng) < 0.2 ? 1.0 : 0.9 * U(rng), z0 = 0.05 + 2.0 * U(rng), I = 0.01 + U(rng);
    excess = std::max(excess, ode_rk4_oracle(a, m1, m2, m3, z0, I).worst_excess);
  }
  const double secs = seconds_since(t0);
  info("ode_bound vs RK4 on 50 tuples plus (1,1,0.5,1): worst relative excess %.3e", excess);
  verdict(9, chi_ok && sob_ok && excess <= 1e-9 && secs <= 120.0,
          "functional inequalities: chi cases, 2 x 100 Sobolev samples, 51 ODE tuples, " + fmt("%.1f", secs) +
              " s <= 120 s");
}

void criterion10() {
  const double alpha = 0.5, p = 2.0;
  bool ok = true;
  for (int dim : {1, 2}) {
    const auto g = dim == 1 ? build_grid(1, {{0, 1}}, {65}) : build_grid(2, {{0, 1}, {0, 1}}, {17, 17});
    const auto ts = unit_times(17);
    const double zero = campanato_seminorm(SpaceTimeFunction::sample(g, ts, [](double, double, double) { return 3.7; }),
                                           alpha, p)
                            .value;
    const auto xn = SpaceTimeFunction::sample(g, ts, [&](double x, double y, double) { return dim == 1 ? x : y; });
    const BridgeResult br = campanato_bridge(xn, alpha, p);
    const double ce = easy_direction_constant(alpha, p);
    double hard = 0.0, easy = 0.0;
    bool bridges = br.holds;
    for (int i = 0; i < 20; ++i) {
      const int k = i % 5, m = i / 5;
      const auto f = SpaceTimeFunction::sample(g, ts, [&](double x, double y, double t) {
        const double z = dim == 1 ? x : y;
        return std::pow(z, 0.3 + 0.35 * k) * (1 + 0.5 * m * t) +
               0.25 * std::sin(M_PI * (m + 1) * x) * std::cos(2.0 * (k + 1) * t);
      });
      const double c = campanato_seminorm(f, alpha, p).value, h = weighted_holder_seminorm(f, alpha, p).value;
      easy = std::max(easy, c / h);
      hard = std::max(hard, h / c);
      bridges = bridges && campanato_bridge(f, alpha, p).holds;
    }
    info("%dD: constant -> %g; bridge C(n,p) = %.5g, worst lhs/(C rhs) = %.4g over %zu centers", dim, zero, br.constant,
         br.worst_ratio, br.samples.size());
    info("%dD: [u]_C / [u]_Ctilde <= %.4g (asserted <= %.4g); measured [u]_Ctilde <= %.4g [u]_C", dim, easy, ce, hard);
    ok = ok && zero == 0.0 && bridges && easy <= ce && std::isfinite(hard);
  }
  verdict(10, ok, "Campanato: constants give 0, bridge holds at every center, equivalence direction holds (1D, 2D)");
}

void criterion11() {
  const BaseRun& r = criterion1_run();
  bool ok = true;
  for (int l : {0, 1}) {
    const Envelope e = scaling_envelope(r.tr, r.est.Tstar, l, 0.1);
    info("scaling envelope l = %d: sup C_l = %.5g on [%.3g, %.4g]", l, e.sup, e.t_a, e.t_b);
    ok = ok && std::isfinite(e.sup) && e.sup > 0.0;
  }
  std::printf("  NOT REPRODUCED: C^{2+p} boundary regularity; only finite l = 0, 1 scaling envelopes are checked\n");
  std::printf("  NOT REPRODUCED: the critical case needs n >= 3; only exponent formulas are checked there\n");
  std::printf("  NOT REPRODUCED: the sharp value of the decay rate gamma_p; only positivity and fit quality\n");
  verdict(11, ok, "desk-scale limits stated; finite scaling envelopes for l in {0,1}");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8,
                                                    criterion9, criterion10, criterion11};
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto ti = Clock::now();
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      verdict(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
    }
    info("criterion %zu took %.1f s", i + 1, seconds_since(ti));
  }
  std::printf("%d of %zu criteria failed, total %.1f s\n", failures, criteria.size(), seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
