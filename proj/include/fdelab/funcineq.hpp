#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdelab/grid.hpp"

namespace fdelab {

// Nodal values on a grid at an increasing list of time levels. The last axis
// plays the role of x_n, measured from the low end of that axis.
class SpaceTimeFunction {
 public:
  SpaceTimeFunction(GridPtr grid, std::vector<double> times, std::vector<Vector> levels,
                    Boundary tag = Boundary::free);

  // f(x, t) in 1D, f(x, y, t) in 2D.
  template <class F>
  static SpaceTimeFunction sample(GridPtr grid, std::vector<double> times, F&& f,
                                  Boundary tag = Boundary::free) {
    std::vector<Vector> levels;
    for (double t : times) {
      Vector v(grid->size());
      for (Index n = 0; n < grid->size(); ++n) {
        if (tag == Boundary::dirichlet && grid->on_boundary(n)) {
          v[n] = 0.0;
          continue;
        }
        const auto x = grid->point(n);
        if constexpr (std::is_invocable_v<F, double, double> && !std::is_invocable_v<F, double, double, double>) {
          v[n] = f(x[0], t);
        } else {
          v[n] = f(x[0], x[1], t);
        }
      }
      levels.push_back(std::move(v));
    }
    return SpaceTimeFunction(std::move(grid), std::move(times), std::move(levels), tag);
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vector>& levels() const { return levels_; }
  const Vector& level(std::size_t k) const { return levels_[k]; }
  std::size_t time_levels() const { return times_.size(); }
  bool is_dirichlet() const { return tag_ == Boundary::dirichlet; }
  double xn(Index node) const;  // distance to the face {x_n = 0}

  SpaceTimeFunction scaled(double c) const;

 private:
  GridPtr grid_;
  std::vector<double> times_;
  std::vector<Vector> levels_;
  Boundary tag_;
};

struct ExponentPack {
  int n = 1;
  double p = 2.0;
  std::optional<double> s;  // only for n >= 3
  double chi = 1.5;
};

ExponentPack chi_exponent(int n, double p);

// (int |f|^r / x_n^s)^{2/r} / int |grad f|^2 on a 1D or 2D grid whose last axis
// starts at the face x_n = 0. Requires s in (0,2), r >= s; n >= 3 is rejected.
double hardy_sobolev_ratio(const GridFunction& f, int n, double r, double s);
// 2(n-s)/(n-2), the integrability exponent for n >= 3 (formula level only).
double hardy_sobolev_exponent(int n, double s);

// (int int |f|^{2 chi})^{1/chi} / (sup_t int f^2 x_n^{p-1} + int int |grad f|^2).
double weighted_sobolev_ratio(const SpaceTimeFunction& f, double p);

// Max of the ratio over a fixed calibration family (products of sines and
// bumps with several time profiles) on the given space-time lattice.
double weighted_sobolev_constant(const GridPtr& grid, const std::vector<double>& times, double p);

// Dirichlet-in-space function, piecewise linear on a coarse random knot lattice
// in space and time, interpolated onto the grid.
SpaceTimeFunction random_piecewise_linear(const GridPtr& grid, const std::vector<double>& times,
                                          std::mt19937_64& rng, int knots = 5);

struct CampanatoPolicy {
  int time_stride = 4;   // centers at every time_stride-th level
  int space_stride = 1;  // centers at every space_stride-th node per axis
  std::vector<double> radii{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};

  nlohmann::ordered_json to_json() const;
  // Twice the density: half the strides, radii refined by sqrt(2).
  CampanatoPolicy refined() const;
};

struct CampanatoResult {
  double value = 0.0;     // interior part + boundary part
  double interior = 0.0;  // sqrt of the sup of interior terms
  double boundary = 0.0;  // sqrt of the sup of boundary terms
  std::size_t samples = 0;
  std::size_t skipped = 0;
};

CampanatoResult campanato_seminorm(const SpaceTimeFunction& u, double alpha, double p,
                                   const CampanatoPolicy& policy = {});

struct BridgeSample {
  Index node = 0;
  std::size_t level = 0;
  double lhs = 0.0;       // interior term at rho = 1/2 (Lebesgue mean)
  double rhs = 0.0;       // boundary term at R = 2 x_n, centered below the node
  double constant = 0.0;  // chain constant for this center
};

struct BridgeResult {
  std::vector<BridgeSample> samples;
  double constant = 0.0;  // max chain constant, the measured C(n,p)
  bool holds = true;      // lhs <= constant_center * rhs at every center
  double worst_ratio = 0.0;
};

BridgeResult campanato_bridge(const SpaceTimeFunction& u, double alpha, double p,
                              const CampanatoPolicy& policy = {});

struct HolderResult {
  double value = 0.0;
  double spatial = 0.0;
  double temporal = 0.0;  // exponent alpha/(p+1)
  double weighted = 0.0;  // x_n^{(p-1)alpha/2}, exponent alpha/2
};

HolderResult weighted_holder_seminorm(const SpaceTimeFunction& u, double alpha, double p);

// [u]_C <= easy_direction_constant * [u]_Ctilde holds exactly, also discretely.
double easy_direction_constant(double alpha, double p);

// Inverse of H(z) = int_0^z ds / (s^mu2 + s^mu3) at H(zeta0) + alpha * integral.
double ode_bound(double alpha, double mu1, double mu2, double mu3, double zeta0,
                 double integral_zeta_mu1);
double ode_H(double mu2, double mu3, double zeta);

// Classical RK4 on (zeta, int zeta^mu1) with equality in the differential
// inequality, run until the integral reaches `integral`; the bound is
// compared at checkpoints along the way.
struct OdeOracle {
  double zeta_end = 0.0;
  double integral_end = 0.0;
  double worst_excess = -1.0;  // max (zeta - bound) / bound over checkpoints
  int steps = 0;
  int checkpoints = 0;
};
OdeOracle ode_rk4_oracle(double alpha, double mu1, double mu2, double mu3, double zeta0, double integral);

// {value, policy, refinement_series}
nlohmann::ordered_json norm_json(double value, const nlohmann::ordered_json& policy,
                                 const std::vector<std::pair<std::string, double>>& refinement);

}  // namespace fdelab
