#include "fdelab/steady.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <json.hpp>

#include "fdelab/errors.hpp"

namespace fdelab {

namespace {

double signed_pow(double s, double p) { return std::copysign(std::pow(std::abs(s), p), s); }

std::string sidecar_path(const std::string& csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".json").string();
}

// Damped Newton on F(S) = -Lap_h S - b S - |S|^{p-1} S over interior unknowns.
// The Jacobian is symmetric but indefinite, so LU rather than LDLT.
Vector newton_steady(const Grid& grid, Vector x, double p, double b, const SteadyOptions& opts,
                     double& residual) {
  SparseMatrix A = negative_laplacian_matrix(grid);
  const Index m = A.rows();
  SparseMatrix shift(m, m);
  shift.setIdentity();
  A -= b * shift;

  auto F = [&](const Vector& s) {
    Vector r = A * s;
    for (Index i = 0; i < m; ++i) r[i] -= signed_pow(s[i], p);
    return r;
  };

  Eigen::SparseLU<SparseMatrix> lu;
  Vector r = F(x);
  residual = r.lpNorm<Eigen::Infinity>();
  const double target = 1e-3 * opts.tol;
  for (int it = 0; it < opts.newton_max_iter && residual > target; ++it) {
    SparseMatrix J = A;
    for (Index i = 0; i < m; ++i) J.coeffRef(i, i) -= p * std::pow(std::abs(x[i]), p - 1.0);
    if (it == 0) lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw SolverError("steady Newton: singular Jacobian", residual);
    const Vector dx = lu.solve(r);

    double step = 1.0;
    bool improved = false;
    for (int k = 0; k <= opts.max_halvings; ++k, step *= 0.5) {
      const Vector trial = x - step * dx;
      const Vector rt = F(trial);
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (nt < residual) {
        x = trial;
        r = rt;
        residual = nt;
        improved = true;
        break;
      }
    }
    if (!improved) break;  // roundoff floor; judged against tol below
  }
  if (!(residual <= opts.tol)) {
    throw SolverError("steady Newton stagnated above tolerance", residual);
  }
  return x;
}

SteadyState finish(const GridPtr& grid, const Vector& interior, double p, double b, double residual,
                   const SteadyOptions& opts, SteadyMethod method) {
  for (Index i = 0; i < interior.size(); ++i) {
    if (!(interior[i] > 0.0)) {
      throw SolverError("steady solve converged to a profile that is not positive", residual);
    }
  }
  SteadyState st{GridFunction(grid, extend_from_interior(*grid, interior), Boundary::dirichlet),
                 p, b, residual, opts.tol, method, std::nullopt};
  return st;
}

}  // namespace

Vector steady_residual(const Grid& grid, const Vector& S, double p, double b) {
  Vector r = -apply_laplacian(grid, S);
  for (Index n : grid.interior_nodes()) r[n] -= b * S[n] + signed_pow(S[n], p);
  return r;
}

void check_parameters(const Grid& grid, double p, double b) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw ParameterError("p must be > 1, got " + format_double(p));
  }
  const double lambda1 = discrete_lambda1(grid);
  if (!(b < lambda1)) {
    throw ParameterError("b = " + format_double(b) + " is not below lambda_1 = " +
                         format_double(lambda1) + " of the grid");
  }
}

ShootingProfile shoot(double p, double b, double lo, double hi, double slope, int cells) {
  ShootingProfile prof;
  prof.slope = slope;
  prof.x.resize(cells + 1);
  prof.s.resize(cells + 1);
  prof.ds.resize(cells + 1);
  const double h = (hi - lo) / cells;
  auto acc = [&](double s) { return -signed_pow(s, p) - b * s; };
  double s = 0.0, v = slope;
  prof.x[0] = lo;
  prof.s[0] = s;
  prof.ds[0] = v;
  for (int i = 0; i < cells; ++i) {
    const double k1s = v, k1v = acc(s);
    const double k2s = v + 0.5 * h * k1v, k2v = acc(s + 0.5 * h * k1s);
    const double k3s = v + 0.5 * h * k2v, k3v = acc(s + 0.5 * h * k2s);
    const double k4s = v + h * k3v, k4v = acc(s + h * k3s);
    s += h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    prof.x[i + 1] = i + 1 == cells ? hi : lo + (hi - lo) * (i + 1) / cells;
    prof.s[i + 1] = s;
    prof.ds[i + 1] = v;
  }
  return prof;
}

SteadyState solve_steady_1d(double p, double b, const GridPtr& grid, const SteadyOptions& opts) {
  if (grid->dimension() != 1) throw ContractError("solve_steady_1d needs a 1D grid");
  check_parameters(*grid, p, b);
  const auto& ax = grid->axis(0);
  const int refine = std::max(1, opts.shooting_refinement);
  const int cells = static_cast<int>(ax.nodes - 1) * refine;

  auto crosses = [&](const ShootingProfile& pr) {
    for (std::size_t i = 1; i < pr.s.size(); ++i)
      if (pr.s[i] <= 0.0) return true;
    return false;
  };

  double mlo = opts.slope_lo, mhi = opts.slope_hi;
  ShootingProfile plo = shoot(p, b, ax.lo, ax.hi, mlo, cells);
  const ShootingProfile phi = shoot(p, b, ax.lo, ax.hi, mhi, cells);
  if (crosses(plo) || !crosses(phi)) {
    throw SolverError("shooting bracket [" + format_double(mlo) + ", " + format_double(mhi) +
                          "] does not straddle the zero at the right endpoint",
                      plo.s.back());
  }
  for (int it = 0; it < 200 && mhi - mlo > 4e-16 * mhi; ++it) {
    const double mid = 0.5 * (mlo + mhi);
    ShootingProfile pm = shoot(p, b, ax.lo, ax.hi, mid, cells);
    if (crosses(pm)) {
      mhi = mid;
    } else {
      mlo = mid;
      plo = std::move(pm);
    }
  }

  Vector interior(grid->interior_size());
  for (Index r = 0; r < interior.size(); ++r) {
    const Index n = grid->interior_nodes()[r];
    interior[r] = plo.s[static_cast<std::size_t>(n) * refine];
  }
  // The RK profile is only O(h^2) close to the discrete problem; polish it so
  // the residual invariant holds on the grid itself.
  double residual = 0.0;
  interior = newton_steady(*grid, interior, p, b, opts, residual);
  SteadyState st = finish(grid, interior, p, b, residual, opts, SteadyMethod::shooting);
  st.profile = std::move(plo);
  return st;
}

SteadyState solve_steady_2d(double p, double b, const GridPtr& grid, const SteadyOptions& opts) {
  if (grid->dimension() != 2) throw ContractError("solve_steady_2d needs a 2D grid");
  check_parameters(*grid, p, b);
  const EigenPair e = first_eigenpair(grid);
  // Galerkin amplitude on psi_1: c (lambda_1 - b) = c^p int psi^{p+1}.
  const double moment = integrate(*grid, e.psi.values().array().pow(p + 1.0).matrix());
  const double c = std::pow((e.value - b) / moment, 1.0 / (p - 1.0));
  double residual = 0.0;
  Vector x = newton_steady(*grid, c * restrict_to_interior(*grid, e.psi.values()), p, b, opts,
                           residual);
  return finish(grid, x, p, b, residual, opts, SteadyMethod::newton);
}

SteadyState solve_steady(double p, double b, const GridPtr& grid, const SteadyOptions& opts) {
  return grid->dimension() == 1 ? solve_steady_1d(p, b, grid, opts)
                                : solve_steady_2d(p, b, grid, opts);
}

namespace {

EigenPair inverse_iteration(const GridPtr& grid, const SparseMatrix& A, const Vector& weight,
                            bool weighted, double exponent, const EigenOptions& opts) {
  Eigen::SimplicialLDLT<SparseMatrix> solver(A);
  if (solver.info() != Eigen::Success) {
    throw SolverError("eigen solve: operator is not positive definite", 0.0);
  }
  const Index m = A.rows();
  Vector x = Vector::Ones(m);
  double lambda = 0.0, prev = 0.0, residual = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector rhs = weight.cwiseProduct(x);
    x = solver.solve(rhs);
    x /= std::sqrt(x.dot(weight.cwiseProduct(x)));
    const Vector Ax = A * x;
    lambda = x.dot(Ax);  // x is W-normalized
    residual = (Ax - lambda * weight.cwiseProduct(x)).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(lambda)) throw SolverError("eigen iteration diverged", residual);
    if (it > 1 && std::abs(lambda - prev) <= opts.rayleigh_tol * std::abs(lambda)) {
      Vector full = extend_from_interior(*grid, x);
      if (full.sum() < 0) full = -full;
      const double norm = std::sqrt(integrate(*grid, full.cwiseAbs2().eval()));
      full /= norm;
      full = full.cwiseMax(0.0);  // clears -0.0 and roundoff negatives
      // residual of the normalized pair, which is what callers see
      const Vector xi = restrict_to_interior(*grid, full);
      residual = (A * xi - lambda * weight.cwiseProduct(xi)).lpNorm<Eigen::Infinity>();
      if (residual <= opts.residual_tol) {
        EigenPair out{lambda, GridFunction(grid, std::move(full), Boundary::dirichlet), weighted,
                      exponent, residual, opts.residual_tol, it};
        return out;
      }
    }
    prev = lambda;
  }
  throw SolverError("eigen iteration did not converge", residual);
}

}  // namespace

EigenPair first_eigenpair(const GridPtr& grid, const EigenOptions& opts) {
  const SparseMatrix A = negative_laplacian_matrix(*grid);
  return inverse_iteration(grid, A, Vector::Ones(A.rows()), false, 0.0, opts);
}

EigenPair weighted_eigenpair(const GridPtr& grid, double p, double b, const EigenOptions& opts) {
  check_parameters(*grid, p, b);
  SparseMatrix A = negative_laplacian_matrix(*grid);
  SparseMatrix I(A.rows(), A.cols());
  I.setIdentity();
  A -= b * I;
  const DistanceField d = distance_field(grid);
  Vector w(A.rows());
  for (Index r = 0; r < w.size(); ++r) w[r] = std::pow(d[grid->interior_nodes()[r]], p - 1.0);
  return inverse_iteration(grid, A, w, true, p - 1.0, opts);
}

GridFunction separable_solution(const SteadyState& steady, double Tstar, double t) {
  if (!(Tstar > 0.0)) throw DomainError("separable solution needs T* > 0");
  if (t > Tstar || t < 0.0) {
    throw DomainError("separable solution evaluated at t = " + format_double(t) +
                      " outside [0, T*]");
  }
  const double p = steady.p;
  const double factor = std::pow((p - 1.0) * (Tstar - t) / p, 1.0 / (p - 1.0));
  return steady.S.with_values(factor * steady.S.values());
}

InitialData initial_data(const InitialDataSpec& spec, const SteadyState& steady) {
  const GridPtr& grid = steady.S.grid_ptr();
  const Vector& S = steady.S.values();
  Vector u;
  switch (spec.kind) {
    case InitialKind::scaled_steady:
      if (!(spec.a > 0.0)) throw ConstructionError("scaled_steady needs a > 0");
      u = spec.a * S;
      break;
    case InitialKind::steady_plus_bump: {
      if (!(spec.a > 0.0 && spec.a <= 1.0)) throw ConstructionError("steady_plus_bump needs a in (0,1]");
      if (!(spec.width > 0.0)) throw ConstructionError("bump width must be positive");
      std::vector<double> c = spec.center;
      if (c.empty()) {
        for (int k = 0; k < grid->dimension(); ++k)
          c.push_back(0.5 * (grid->axis(k).lo + grid->axis(k).hi));
      }
      if (c.size() != static_cast<std::size_t>(grid->dimension())) {
        throw ConstructionError("bump center has the wrong dimension");
      }
      for (int k = 0; k < grid->dimension(); ++k) {
        if (c[k] - spec.width <= grid->axis(k).lo || c[k] + spec.width >= grid->axis(k).hi) {
          throw ConstructionError("bump support is not inside the domain");
        }
      }
      // u = a S + (1-a)(S + B) with B a smooth bump of height `height * max S`
      const double amp = spec.height * steady.S.max_abs();
      u = S;
      for (Index n : grid->interior_nodes()) {
        const auto x = grid->point(n);
        double r2 = 0.0;
        for (int k = 0; k < grid->dimension(); ++k) r2 += (x[k] - c[k]) * (x[k] - c[k]);
        const double q = r2 / (spec.width * spec.width);
        if (q < 1.0) u[n] += (1.0 - spec.a) * amp * std::exp(1.0 - 1.0 / (1.0 - q));
      }
      break;
    }
    case InitialKind::weighted_eigenfunction: {
      if (!(spec.scale > 0.0)) throw ConstructionError("weighted_eigenfunction needs scale > 0");
      const EigenPair e = weighted_eigenpair(grid, steady.p, steady.b);
      u = spec.scale * e.psi.values();
      break;
    }
  }

  const DistanceField d = distance_field(grid);
  const Vector Lu = -apply_laplacian(*grid, u) - steady.b * u;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0, src = 0.0;
  for (Index n : grid->interior_nodes()) {
    if (!(u[n] > 0.0)) throw ConstructionError("initial data is not positive at interior node " + std::to_string(n));
    const double r = u[n] / d[n];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    src = std::max(src, std::abs(std::pow(u[n], 1.0 - steady.p) * Lu[n]));
  }
  for (Index n = 0; n < grid->size(); ++n)
    if (grid->on_boundary(n)) u[n] = 0.0;
  InitialData out{GridFunction(grid, std::move(u), Boundary::dirichlet), std::max(hi, 1.0 / lo), src};
  return out;
}

std::string to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::scaled_steady: return "scaled_steady";
    case InitialKind::steady_plus_bump: return "steady_plus_bump";
    case InitialKind::weighted_eigenfunction: return "weighted_eigenfunction";
  }
  return "?";
}

InitialKind initial_kind_from_string(const std::string& name) {
  if (name == "scaled_steady") return InitialKind::scaled_steady;
  if (name == "steady_plus_bump") return InitialKind::steady_plus_bump;
  if (name == "weighted_eigenfunction") return InitialKind::weighted_eigenfunction;
  throw ConfigError("unknown initial-data kind '" + name + "'");
}

std::string to_string(SteadyMethod method) {
  return method == SteadyMethod::shooting ? "shooting" : "newton";
}

void write_steady(const std::string& csv_path, const SteadyState& steady) {
  write_csv(csv_path, steady.S);
  nlohmann::ordered_json j;
  j["p"] = steady.p;
  j["b"] = steady.b;
  j["residual_norm"] = steady.residual_norm;
  j["method"] = to_string(steady.method);
  std::ofstream(sidecar_path(csv_path)) << j.dump(2) << '\n';
}

void write_eigenpair(const std::string& csv_path, const EigenPair& pair) {
  write_csv(csv_path, pair.psi);
  nlohmann::ordered_json j;
  j["lambda"] = pair.value;
  j["weighted"] = pair.weighted;
  if (pair.weighted) j["weight_exponent"] = pair.weight_exponent;
  j["residual_norm"] = pair.residual_norm;
  j["method"] = "inverse_power_iteration";
  std::ofstream(sidecar_path(csv_path)) << j.dump(2) << '\n';
}

}  // namespace fdelab
