#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdelab/evolve.hpp"
#include "fdelab/grid.hpp"
#include "fdelab/steady.hpp"

namespace fdelab {

struct TimeSeries {
  std::string name;
  std::vector<double> t;
  std::vector<double> value;
  std::string note;

  void push(double time, double v);
  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double sup() const;
  // Sup over t in [a, b]; -inf when the window is empty.
  double sup_on(double a, double b) const;
};

void write_series_csv(const std::string& path, const TimeSeries& s);

struct HarnackRatio {
  double min = 0.0;
  double max = 0.0;
  double c0 = 0.0;  // max(max, 1/min); +inf when degenerate
  bool degenerate = false;
};

// Below this min/max spread the two-sided bound is considered lost.
inline constexpr double kHarnackDegenerateSpread = 1e-2;

HarnackRatio harnack_ratio(const GridFunction& v, const DistanceField& d);

// Dirichlet energy minus b int v^2, minus 2/(p+1) int |v|^{p+1} when the
// source is included (rescaled frame).
double energy_J(const GridFunction& v, double p, double b, bool with_source = true);

// J along a trajectory; the source term is included in the rescaled frame only.
TimeSeries energy_series(const Trajectory& traj);

// Three-point (nonuniform) time derivative at snapshot k, one-sided at the ends.
Vector time_derivative(const Trajectory& traj, std::size_t k);

struct Dissipation {
  TimeSeries dJdt;      // three-point derivative of J
  TimeSeries rate;      // 2p int v^{p-1} (d_t v)^2
  TimeSeries absolute;  // |dJ/dt + rate|
  TimeSeries relative;  // absolute / |dJ/dt|
};

Dissipation dissipation_residual(const Trajectory& traj);

inline constexpr double kCurvatureMask = 1e-3;  // nodes with v < kCurvatureMask * d are masked

struct Curvature {
  GridFunction elliptic;                // (-Lap_h v - b v) / v^p
  std::optional<GridFunction> temporal; // 1 - p (d_t v) / v
  std::vector<Index> masked;            // interior nodes excluded (values are NaN there)
  double masked_fraction = 0.0;
};

// dvdt, when present, is a nodal estimate of d_t v (rescaled frame).
Curvature curvature_R(const GridFunction& v, double p, double b,
                      const std::optional<Vector>& dvdt = std::nullopt);
// Convenience form with one neighboring snapshot at signed offset dt.
Curvature curvature_R(const GridFunction& v, double p, double b, const GridFunction& neighbor,
                      double dt);

// int |R_e - 1|^q v^{p+1} over unmasked nodes.
double moment_q(const GridFunction& v, double p, double b, double q, double* masked_fraction = nullptr);

struct Moments {
  TimeSeries Mq;
  TimeSeries masked_fraction;
};
Moments moments_Mq(const Trajectory& traj, double q);

// p/(p-1)^2 [1 - e^{-pt/(p-1)}]^{-1}
double bc_coefficient(double p, double t);
TimeSeries benilan_crandall_margin(const Trajectory& traj);

struct RateOptions {
  double tail_threshold = 0.5;
  double noise_floor = 1e-10;
  double window_decades = 1.0;  // fit over the last this-many decades of decay
  bool robust = false;          // Theil-Sen slope instead of least squares
};

struct RateFit {
  double gamma_sup = 0.0;
  double gamma_weighted = 0.0;
  double r_squared = 0.0;
  double r_squared_weighted = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  std::size_t points = 0;
  bool refused = false;
  std::string reason;
  TimeSeries err_sup;       // max |v/S - 1| over interior nodes
  TimeSeries err_weighted;  // (int |v/S - 1|^2 S^{p+1})^{1/2}
  double domination_constant = 0.0;  // (int S^{p+1})^{1/2}
};

RateFit convergence_rate(const Trajectory& traj, const SteadyState& steady,
                         const RateOptions& opts = {});

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);
LineFit theil_sen(const std::vector<double>& x, const std::vector<double>& y);

struct Envelope {
  int l = 0;
  TimeSeries C;
  double sup = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
};

// C_l(t) = max |d_t^l u| / (d (T*-t)^{1/(p-1)-l}) over interior nodes, t in [delta, T* - 5 dt].
Envelope scaling_envelope(const Trajectory& traj, double Tstar, int l, double delta);

struct Flag {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string tolerance_name;
  double tolerance = 0.0;
};

struct DiagnosticsReport {
  std::vector<TimeSeries> series;
  std::map<std::string, double> constants;
  std::map<std::string, double> tolerances;
  std::vector<Flag> flags;

  // Records a check; the tolerance must already be registered by name.
  void check(const std::string& name, bool passed, double value, const std::string& tolerance_name);
  bool all_passed() const;
  const TimeSeries* find(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
};

}  // namespace fdelab
