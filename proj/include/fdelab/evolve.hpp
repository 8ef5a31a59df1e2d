#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdelab/errors.hpp"
#include "fdelab/grid.hpp"
#include "fdelab/steady.hpp"

namespace fdelab {

enum class Frame { base, rescaled };

struct DtPolicy {
  enum class Kind { fixed, adaptive } kind = Kind::fixed;
  double dt = 1e-4;                 // fixed step, or the cap for adaptive stepping
  double dt_min = 1e-14;
  double snapshot_interval = 1e-2;  // uniform cadence
  double geometric_ratio = 0.8;     // base frame: next snapshot when T*-t shrinks by this factor
  int max_halvings = 10;
  // Fixed stepping still shrinks dt to (T*_est - t)/100 near extinction.
  bool extinction_guard = true;
};

struct StopCriteria {
  double t_end = 1e300;
  double floor_fraction = 1e-8;  // extinction floor relative to the initial max
};

struct NewtonOptions {
  double tol = 1e-12;  // max-norm of the w-residual relative to max(|w_old| + dt |L| |u_old|)
  int max_iter = 50;
  int max_halvings = 30;
};

struct Snapshot {
  double t;
  GridFunction u;
};

class Trajectory {
 public:
  Trajectory(Frame frame, double p, double b, DtPolicy policy = {});

  Frame frame() const { return frame_; }
  double p() const { return p_; }
  double b() const { return b_; }
  const DtPolicy& policy() const { return policy_; }
  const std::vector<Snapshot>& snapshots() const { return snaps_; }
  const Snapshot& operator[](std::size_t k) const { return snaps_[k]; }
  std::size_t size() const { return snaps_.size(); }
  bool empty() const { return snaps_.empty(); }
  const Snapshot& back() const { return snaps_.back(); }
  const GridPtr& grid_ptr() const;
  std::vector<double> times() const;

  // Enforces strictly increasing times, same grid, Dirichlet and nonnegative values.
  void append(double t, GridFunction u);

  double extinction_floor = 0.0;  // base frame only; 0 when unused
  long steps = 0;
  long halvings = 0;
  bool reached_floor = false;

 private:
  Frame frame_;
  double p_;
  double b_;
  DtPolicy policy_;
  std::vector<Snapshot> snaps_;
};

// Thrown when a step keeps failing after the allowed dt halvings; carries
// everything computed up to that point.
class RunFailure : public SolverError {
 public:
  RunFailure(const std::string& what, double last_residual, Trajectory partial)
      : SolverError(what, last_residual), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// One backward-Euler step for w = u^p. Throws SolverError if Newton fails.
GridFunction step_base(const GridFunction& u, double dt, double p, double b,
                       const NewtonOptions& newton = {});
GridFunction step_rescaled(const GridFunction& v, double dt, double p, double b,
                           const NewtonOptions& newton = {});

Trajectory evolve_base(const GridFunction& u0, double p, double b, const DtPolicy& policy,
                       const StopCriteria& stop, const NewtonOptions& newton = {});
Trajectory evolve_rescaled(const GridFunction& v0, double p, double b, const DtPolicy& policy,
                           double t_end, const NewtonOptions& newton = {});

struct ExtinctionEstimate {
  double Tstar = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  double r_squared = 1.0;
  std::string method;
};

ExtinctionEstimate estimate_extinction_time(const Trajectory& traj);

enum class FrameDirection { to_rescaled, to_base };

// Base time tau and rescaled time t are related by t = (p/(p-1)) ln(T*/(T*-tau)).
double rescaled_time(double tau, double Tstar, double p);
double base_time(double t, double Tstar, double p);

Trajectory frame_transform(const Trajectory& traj, double Tstar, FrameDirection direction);

// Snapshots with t < t_max (strict).
Trajectory truncate_before(const Trajectory& traj, double t_max);

// Finds A such that the rescaled flow from A * shape has no component along
// the unstable direction S at time t1, i.e. sits on the stable manifold of S.
struct Calibration {
  double amplitude = 1.0;
  double coefficient = 0.0;  // remaining projection onto S at t1, relative
  int iterations = 0;
};
Calibration calibrate_rescaled_amplitude(const GridFunction& shape, const SteadyState& steady,
                                         double dt, double t1, double tol = 1e-10,
                                         int max_iter = 30);

std::string to_string(Frame frame);
Frame frame_from_string(const std::string& name);

// Directory layout: meta.json, times.csv (k,t), snap_<k>.csv.
void write_trajectory(const std::string& dir, const Trajectory& traj);
Trajectory read_trajectory(const std::string& dir);

}  // namespace fdelab
