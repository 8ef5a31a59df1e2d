#include "fdelab/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

namespace fdelab {

Trajectory::Trajectory(Frame frame, double p, double b, DtPolicy policy)
    : frame_(frame), p_(p), b_(b), policy_(policy) {}

const GridPtr& Trajectory::grid_ptr() const {
  if (snaps_.empty()) throw ContractError("empty trajectory has no grid");
  return snaps_.front().u.grid_ptr();
}

std::vector<double> Trajectory::times() const {
  std::vector<double> t;
  t.reserve(snaps_.size());
  for (const auto& s : snaps_) t.push_back(s.t);
  return t;
}

void Trajectory::append(double t, GridFunction u) {
  if (!snaps_.empty()) {
    if (!(t > snaps_.back().t)) throw ContractError("snapshot times must increase strictly");
    if (!u.grid().same_lattice(snaps_.front().u.grid())) {
      throw ContractError("snapshot grid differs from the trajectory grid");
    }
  }
  if (!u.is_dirichlet()) throw ContractError("snapshots must be Dirichlet-tagged");
  if (u.size() && u.values().minCoeff() < 0.0) throw ContractError("snapshot has negative values");
  snaps_.push_back({t, std::move(u)});
}

namespace {

// Implicit step for c |x|^{p-1} x - w_old + dt (A - b) x = 0 on interior unknowns,
// with c = 1 in the base frame and 1 - dt when the +v^p source is implicit.
class Stepper {
 public:
  Stepper(const Grid& grid, double p, double b, bool rescaled, NewtonOptions opts)
      : p_(p), rescaled_(rescaled), opts_(opts) {
    L_ = negative_laplacian_matrix(grid);
    SparseMatrix I(L_.rows(), L_.cols());
    I.setIdentity();
    L_ = (L_ - b * I).eval();
    L_.makeCompressed();
    J_ = L_;
    absL_ = L_.cwiseAbs();
    diag_.resize(L_.rows());
    for (Index j = 0; j < L_.outerSize(); ++j) {
      for (Index k = L_.outerIndexPtr()[j]; k < L_.outerIndexPtr()[j + 1]; ++k) {
        if (L_.innerIndexPtr()[k] == j) diag_[j] = k;
      }
    }
  }

  // Returns false if Newton failed; `residual` holds the last residual either way.
  bool step(const Vector& x_old, double dt, Vector& x, double& residual) {
    const double c = rescaled_ ? 1.0 - dt : 1.0;
    if (!(c > 0.0)) throw ContractError("rescaled step needs dt < 1");
    const Vector w_old = x_old.array().pow(p_).matrix();
    // Relative to the size of the terms being balanced, so the test neither
    // sits below roundoff for large data nor goes vacuous as u -> 0.
    const double scale =
        (w_old.cwiseAbs() + dt * (absL_ * x_old.cwiseAbs())).lpNorm<Eigen::Infinity>();
    const double tol = opts_.tol * scale;

    auto F = [&](const Vector& y) -> Vector {
      return c * y.array().pow(p_).matrix() - w_old + dt * (L_ * y);
    };

    x = x_old;
    Vector r = F(x);
    residual = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < opts_.max_iter; ++it) {
      if (residual <= tol) return true;
      const double* lv = L_.valuePtr();
      double* jv = J_.valuePtr();
      for (Index k = 0; k < L_.nonZeros(); ++k) jv[k] = dt * lv[k];
      for (Index i = 0; i < x.size(); ++i) jv[diag_[i]] += c * p_ * std::pow(x[i], p_ - 1.0);
      if (!analyzed_) {
        solver_.analyzePattern(J_);
        analyzed_ = true;
      }
      solver_.factorize(J_);
      if (solver_.info() != Eigen::Success) return false;
      const Vector dx = solver_.solve(r);

      double s = 1.0;
      bool accepted = false;
      for (int k = 0; k <= opts_.max_halvings; ++k, s *= 0.5) {
        Vector trial = (x - s * dx).cwiseMax(0.0);
        Vector rt = F(trial);
        const double nt = rt.lpNorm<Eigen::Infinity>();
        if (nt < residual) {
          x = std::move(trial);
          r = std::move(rt);
          residual = nt;
          accepted = true;
          break;
        }
      }
      if (!accepted) return residual <= 100.0 * tol;
    }
    return residual <= tol;
  }

 private:
  double p_;
  bool rescaled_;
  NewtonOptions opts_;
  SparseMatrix L_;
  SparseMatrix J_;
  SparseMatrix absL_;
  std::vector<Index> diag_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
  bool analyzed_ = false;
};

void check_state(const GridFunction& u) {
  if (!u.is_dirichlet()) throw ContractError("evolution needs a Dirichlet-tagged field");
  if (u.size() && u.values().minCoeff() < 0.0) throw ContractError("evolution needs u >= 0");
}

GridFunction one_step(const GridFunction& u, double dt, double p, double b, bool rescaled,
                      const NewtonOptions& newton) {
  check_state(u);
  check_parameters(u.grid(), p, b);
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
  Stepper stepper(u.grid(), p, b, rescaled, newton);
  Vector x;
  double residual = 0.0;
  if (!stepper.step(restrict_to_interior(u.grid(), u.values()), dt, x, residual)) {
    throw SolverError("Newton did not converge within " + std::to_string(newton.max_iter) +
                          " iterations",
                      residual);
  }
  return GridFunction(u.grid_ptr(), extend_from_interior(u.grid(), x), Boundary::dirichlet);
}

Trajectory evolve(const GridFunction& u0, double p, double b, const DtPolicy& policy,
                  const StopCriteria& stop, const NewtonOptions& newton, Frame frame) {
  check_state(u0);
  check_parameters(u0.grid(), p, b);
  if (!(policy.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(policy.snapshot_interval > 0.0)) throw ConfigError("snapshot interval must be positive");
  const bool rescaled = frame == Frame::rescaled;
  if (rescaled && policy.kind == DtPolicy::Kind::adaptive) {
    throw ConfigError("adaptive stepping is defined for the base frame only");
  }

  const Grid& grid = u0.grid();
  const GridPtr& gp = u0.grid_ptr();
  Trajectory traj(frame, p, b, policy);
  traj.append(0.0, u0);

  const double umax0 = u0.max_abs();
  const double floor = rescaled ? 0.0 : stop.floor_fraction * umax0;
  traj.extinction_floor = floor;
  if (!rescaled && umax0 <= floor) {
    traj.reached_floor = true;
    return traj;
  }

  double hmin2 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.dimension(); ++k) hmin2 = std::min(hmin2, grid.spacing(k) * grid.spacing(k));

  Stepper stepper(grid, p, b, rescaled, newton);
  Vector x = restrict_to_interior(grid, u0.values());
  Vector next;
  long double t = 0.0L;
  double last_snap = 0.0;
  double next_uniform = policy.snapshot_interval;
  double y_prev = std::pow(umax0, p - 1.0);
  std::optional<double> T_est;

  auto snapshot = [&](double at) {
    traj.append(at, GridFunction(gp, extend_from_interior(grid, x), Boundary::dirichlet));
    last_snap = at;
  };

  while (static_cast<double>(t) < stop.t_end) {
    const double now = static_cast<double>(t);
    double dt = policy.dt;
    if (policy.kind == DtPolicy::Kind::adaptive) dt = std::min(dt, hmin2);
    if (!rescaled && T_est && *T_est > now &&
        (policy.kind == DtPolicy::Kind::adaptive || policy.extinction_guard)) {
      dt = std::max(std::min(dt, (*T_est - now) / 100.0), policy.dt_min);
    }
    const double remaining = stop.t_end - now;
    if (dt >= remaining || remaining - dt < 1e-9 * dt) dt = remaining;

    double residual = 0.0;
    bool ok = false;
    for (int k = 0; k <= policy.max_halvings; ++k) {
      if (stepper.step(x, dt, next, residual)) {
        ok = true;
        break;
      }
      if (k == policy.max_halvings) break;
      dt *= 0.5;
      ++traj.halvings;
    }
    if (!ok) {
      throw RunFailure("step at t = " + format_double(now) + " failed after " +
                           std::to_string(policy.max_halvings) + " dt halvings",
                       residual, traj);
    }
    x.swap(next);
    t += dt;
    ++traj.steps;
    const double tn = static_cast<double>(t);
    const double umax = x.size() ? x.maxCoeff() : 0.0;

    if (!rescaled) {
      const double y = std::pow(umax, p - 1.0);
      const double slope = (y - y_prev) / dt;
      if (slope < 0.0) T_est = tn + y / -slope;
      y_prev = y;
      if (umax < floor) {
        snapshot(tn);
        traj.reached_floor = true;
        return traj;
      }
    }
    if (tn >= stop.t_end) {
      snapshot(tn);
      return traj;
    }

    bool take = tn >= next_uniform - 1e-9 * dt;
    if (take) {
      while (next_uniform <= tn + 1e-9 * dt) next_uniform += policy.snapshot_interval;
    }
    if (!rescaled && T_est && *T_est > tn &&
        *T_est - tn <= policy.geometric_ratio * (*T_est - last_snap)) {
      take = true;
    }
    if (take) snapshot(tn);
  }
  return traj;
}

}  // namespace

GridFunction step_base(const GridFunction& u, double dt, double p, double b,
                       const NewtonOptions& newton) {
  return one_step(u, dt, p, b, false, newton);
}

GridFunction step_rescaled(const GridFunction& v, double dt, double p, double b,
                           const NewtonOptions& newton) {
  return one_step(v, dt, p, b, true, newton);
}

Trajectory evolve_base(const GridFunction& u0, double p, double b, const DtPolicy& policy,
                       const StopCriteria& stop, const NewtonOptions& newton) {
  return evolve(u0, p, b, policy, stop, newton, Frame::base);
}

Trajectory evolve_rescaled(const GridFunction& v0, double p, double b, const DtPolicy& policy,
                           double t_end, const NewtonOptions& newton) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive and finite");
  StopCriteria stop;
  stop.t_end = t_end;
  return evolve(v0, p, b, policy, stop, newton, Frame::rescaled);
}

ExtinctionEstimate estimate_extinction_time(const Trajectory& traj) {
  if (traj.frame() != Frame::base) throw ContractError("extinction estimate needs a base trajectory");
  if (traj.empty()) throw EstimationError("empty trajectory");
  const double p = traj.p();
  if (traj[0].u.max_abs() == 0.0) return {0.0, 0.0, 0.0, 1.0, "identically_zero"};

  const double floor = traj.extinction_floor;
  if (!(traj.back().u.max_abs() < 10.0 * floor)) {
    throw EstimationError("trajectory never dropped below 10x the extinction floor");
  }
  std::vector<double> ts, ys;
  for (const auto& s : traj.snapshots()) {
    const double m = s.u.max_abs();
    if (m >= 10.0 * floor) {
      ts.push_back(s.t);
      ys.push_back(std::pow(m, p - 1.0));
    }
  }
  if (ts.size() < 8) {
    throw EstimationError("only " + std::to_string(ts.size()) + " usable snapshots, need 8");
  }
  // Prefer the band 1e-4 <= y/y0 <= 0.1: late enough to be asymptotic, early
  // enough that the guarded steps near T* do not bias the slope.
  std::size_t first = ts.size(), last = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ys[k] <= 0.1 * ys[0] && ys[k] >= 1e-4 * ys[0]) {
      first = std::min(first, k);
      last = k + 1;
    }
  }
  if (first >= last || last - first < 8) {
    last = ts.size();
    first = last - std::max<std::size_t>(8, ts.size() / 4);
  }
  const std::size_t take = last - first;
  Eigen::Map<const Vector> T(ts.data() + first, static_cast<Index>(take));
  Eigen::Map<const Vector> Y(ys.data() + first, static_cast<Index>(take));
  const double tm = T.mean(), ym = Y.mean();
  const double sxx = (T.array() - tm).square().sum();
  const double sxy = ((T.array() - tm) * (Y.array() - ym)).sum();
  const double syy = (Y.array() - ym).square().sum();
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) throw EstimationError("u_max^(p-1) is not decreasing over the fit window");
  const double r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  // fitted slope, anchored at the last usable snapshot
  const double Tstar = ts.back() + ys.back() / -slope;
  return {Tstar, T[0], T[T.size() - 1], r2, "band_slope_anchored_last"};
}

double rescaled_time(double tau, double Tstar, double p) {
  if (!(tau < Tstar)) {
    throw DomainError("base time " + format_double(tau) + " is not below T* = " + format_double(Tstar));
  }
  return p / (p - 1.0) * std::log(Tstar / (Tstar - tau));
}

double base_time(double t, double Tstar, double p) {
  return Tstar * -std::expm1(-(p - 1.0) * t / p);
}

Trajectory frame_transform(const Trajectory& traj, double Tstar, FrameDirection direction) {
  if (!(Tstar > 0.0)) throw DomainError("frame transform needs T* > 0");
  const double p = traj.p();
  const double e = 1.0 / (p - 1.0);
  if (direction == FrameDirection::to_rescaled) {
    if (traj.frame() != Frame::base) throw ContractError("to_rescaled needs a base trajectory");
    Trajectory out(Frame::rescaled, p, traj.b(), traj.policy());
    for (const auto& s : traj.snapshots()) {
      const double t = rescaled_time(s.t, Tstar, p);
      const double factor = std::pow(p / ((p - 1.0) * (Tstar - s.t)), e);
      out.append(t, s.u.with_values(factor * s.u.values()));
    }
    out.steps = traj.steps;
    out.halvings = traj.halvings;
    return out;
  }
  if (traj.frame() != Frame::rescaled) throw ContractError("to_base needs a rescaled trajectory");
  Trajectory out(Frame::base, p, traj.b(), traj.policy());
  for (const auto& s : traj.snapshots()) {
    const double tau = base_time(s.t, Tstar, p);
    const double factor = std::pow((p - 1.0) * (Tstar - tau) / p, e);
    out.append(tau, s.u.with_values(factor * s.u.values()));
  }
  out.steps = traj.steps;
  out.halvings = traj.halvings;
  return out;
}

Trajectory truncate_before(const Trajectory& traj, double t_max) {
  Trajectory out(traj.frame(), traj.p(), traj.b(), traj.policy());
  for (const auto& s : traj.snapshots())
    if (s.t < t_max) out.append(s.t, s.u);
  out.extinction_floor = traj.extinction_floor;
  out.steps = traj.steps;
  out.halvings = traj.halvings;
  return out;
}

Calibration calibrate_rescaled_amplitude(const GridFunction& shape, const SteadyState& steady,
                                         double dt, double t1, double tol, int max_iter) {
  if (!shape.grid().same_lattice(steady.S.grid())) throw ContractError("shape and S on different grids");
  const double p = steady.p;
  const Vector Sp = steady.S.values().array().pow(p).matrix();
  const double norm = integrate(steady.S.grid(), Sp.cwiseProduct(steady.S.values()));
  DtPolicy pol;
  pol.dt = dt;
  pol.snapshot_interval = t1;

  auto coefficient = [&](double A) {
    const Trajectory tr = evolve_rescaled(shape.with_values(A * shape.values()), p, steady.b, pol, t1);
    const Vector diff = tr.back().u.values() - steady.S.values();
    return integrate(steady.S.grid(), diff.cwiseProduct(Sp)) / norm;
  };

  double a0 = 1.0, a1 = 1.01;
  double g0 = coefficient(a0), g1 = coefficient(a1);
  int it = 0;
  while (it < max_iter && std::abs(g1) > tol) {
    ++it;
    if (g1 == g0) break;
    double a2 = a1 - g1 * (a1 - a0) / (g1 - g0);
    // stay positive; the map A -> g is monotone so halving toward 0 is safe
    if (!(a2 > 0.0)) a2 = 0.5 * a1;
    a0 = a1;
    g0 = g1;
    a1 = a2;
    g1 = coefficient(a1);
    if (std::abs(a1 - a0) <= 1e-15 * a1) break;
  }
  return {a1, g1, it};
}

std::string to_string(Frame frame) { return frame == Frame::base ? "base" : "rescaled"; }

Frame frame_from_string(const std::string& name) {
  if (name == "base") return Frame::base;
  if (name == "rescaled") return Frame::rescaled;
  throw ConfigError("unknown frame '" + name + "'");
}

}  // namespace fdelab
