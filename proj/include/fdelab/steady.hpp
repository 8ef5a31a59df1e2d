#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdelab/grid.hpp"

namespace fdelab {

enum class SteadyMethod { shooting, newton };

// Profile produced by the shooting integrator on its own fine mesh.
struct ShootingProfile {
  double slope = 0.0;
  std::vector<double> x;
  std::vector<double> s;
  std::vector<double> ds;
};

struct SteadyState {
  GridFunction S;
  double p = 2.0;
  double b = 0.0;
  double residual_norm = 0.0;
  double tolerance = 0.0;
  SteadyMethod method = SteadyMethod::newton;
  std::optional<ShootingProfile> profile;
};

struct SteadyOptions {
  double tol = 1e-8;
  int shooting_refinement = 16;  // auxiliary RK4 cells per grid cell
  double slope_lo = 1e-6;
  double slope_hi = 1e3;
  int newton_max_iter = 50;
  int max_halvings = 30;
};

// Discrete residual -Lap_h S - b S - |S|^{p-1} S at interior nodes (zero on the boundary).
Vector steady_residual(const Grid& grid, const Vector& S, double p, double b);

// Throws ParameterError unless p > 1 and b < lambda_1 of the grid.
void check_parameters(const Grid& grid, double p, double b);

SteadyState solve_steady_1d(double p, double b, const GridPtr& grid,
                            const SteadyOptions& opts = {});
SteadyState solve_steady_2d(double p, double b, const GridPtr& grid,
                            const SteadyOptions& opts = {});
SteadyState solve_steady(double p, double b, const GridPtr& grid,
                         const SteadyOptions& opts = {});

// RK4 shooting for S'' = -|S|^{p-1}S - bS, S(lo)=0, S'(lo)=m over `cells` steps.
// Returns the trajectory; used both by the solver and by its tests.
ShootingProfile shoot(double p, double b, double lo, double hi, double slope, int cells);

struct EigenPair {
  double value = 0.0;
  GridFunction psi;
  bool weighted = false;
  double weight_exponent = 0.0;  // p-1 for the distance-weighted problem
  double residual_norm = 0.0;
  double tolerance = 0.0;
  int iterations = 0;
};

struct EigenOptions {
  double rayleigh_tol = 1e-10;
  double residual_tol = 1e-8;
  int max_iter = 2000;
};

// Smallest eigenpair of -Lap_h with Dirichlet data, normalized so that the
// trapezoid integral of psi^2 is 1 and psi >= 0.
EigenPair first_eigenpair(const GridPtr& grid, const EigenOptions& opts = {});

// (-Lap_h - b) psi = lambda d^{p-1} psi on interior nodes.
EigenPair weighted_eigenpair(const GridPtr& grid, double p, double b,
                             const EigenOptions& opts = {});

// [(p-1)(T*-t)/p]^{1/(p-1)} S
GridFunction separable_solution(const SteadyState& steady, double Tstar, double t);

enum class InitialKind { scaled_steady, steady_plus_bump, weighted_eigenfunction };

struct InitialDataSpec {
  InitialKind kind = InitialKind::scaled_steady;
  double a = 1.0;              // scaled_steady factor, or convex weight on S for the bump
  std::vector<double> center;  // bump center, defaults to the domain midpoint
  double width = 0.25;         // bump radius
  double height = 1.0;         // bump height relative to max S
  double scale = 1.0;          // weighted_eigenfunction multiplier
};

struct InitialData {
  GridFunction u;
  double harnack_c = 0.0;         // max(max u/d, 1/min u/d) over interior nodes
  double source_ratio_max = 0.0;  // max |u^{1-p} L_h u| over interior nodes (reported only)
};

InitialData initial_data(const InitialDataSpec& spec, const SteadyState& steady);

std::string to_string(InitialKind kind);
InitialKind initial_kind_from_string(const std::string& name);
std::string to_string(SteadyMethod method);

// JSON sidecars written next to the GridFunction CSV.
void write_steady(const std::string& csv_path, const SteadyState& steady);
void write_eigenpair(const std::string& csv_path, const EigenPair& pair);

}  // namespace fdelab
