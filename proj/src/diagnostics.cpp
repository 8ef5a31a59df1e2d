#include "fdelab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fdelab/errors.hpp"

namespace fdelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Nearest interior node, used to extend interior quantities onto the boundary.
Index inward(const Grid& g, Index n) {
  auto ij = g.lattice(n);
  for (int k = 0; k < g.dimension(); ++k) ij[k] = std::clamp<Index>(ij[k], 1, g.nodes(k) - 2);
  return g.index(ij[0], g.dimension() == 2 ? ij[1] : 0);
}

}  // namespace

void TimeSeries::push(double time, double v) {
  if (!t.empty() && !(time > t.back())) throw ContractError("time series '" + name + "' times must increase");
  t.push_back(time);
  value.push_back(v);
}

double TimeSeries::sup() const {
  double s = -kInf;
  for (double v : value) s = std::max(s, v);
  return s;
}

double TimeSeries::sup_on(double a, double b) const {
  double s = -kInf;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= a && t[i] <= b) s = std::max(s, value[i]);
  return s;
}

void write_series_csv(const std::string& path, const TimeSeries& s) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t,value\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_double(s.t[i]) << ',' << format_double(s.value[i]) << '\n';
  }
}

HarnackRatio harnack_ratio(const GridFunction& v, const DistanceField& d) {
  if (!v.grid().same_lattice(d.grid())) throw ContractError("v and d live on different grids");
  const Grid& g = v.grid();
  HarnackRatio h{kInf, 0.0, 0.0, false};
  for (Index n : g.interior_nodes()) {
    if (!(v[n] > 0.0)) {
      h.degenerate = true;
      h.min = 0.0;
    }
    const double r = v[n] / d[n];
    if (!h.degenerate) h.min = std::min(h.min, r);
    h.max = std::max(h.max, r);
  }
  if (g.interior_size() == 0) return {0.0, 0.0, kInf, true};
  if (!h.degenerate && h.min < kHarnackDegenerateSpread * h.max) h.degenerate = true;
  h.c0 = h.degenerate ? kInf : std::max(h.max, 1.0 / h.min);
  return h;
}

double energy_J(const GridFunction& v, double p, double b, bool with_source) {
  if (!v.is_dirichlet()) throw ContractError("energy needs a Dirichlet-tagged field");
  const Grid& g = v.grid();
  double J = dirichlet_energy(v) - b * integrate(g, v.values().cwiseAbs2().eval());
  if (with_source) {
    J -= 2.0 / (p + 1.0) * integrate(g, v.values().cwiseAbs().array().pow(p + 1.0).matrix().eval());
  }
  return J;
}

TimeSeries energy_series(const Trajectory& traj) {
  TimeSeries s{"J", {}, {}, traj.frame() == Frame::base ? "base frame, no source term" : "rescaled frame"};
  for (const auto& snap : traj.snapshots())
    s.push(snap.t, energy_J(snap.u, traj.p(), traj.b(), traj.frame() == Frame::rescaled));
  return s;
}

namespace {

// Weights of the three-point derivative at the middle of (t0, t1, t2).
std::array<double, 3> three_point(double t0, double t1, double t2) {
  const double h1 = t1 - t0, h2 = t2 - t1;
  return {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))};
}

}  // namespace

Vector time_derivative(const Trajectory& traj, std::size_t k) {
  const std::size_t n = traj.size();
  if (n < 2) throw EstimationError("time derivative needs at least 2 snapshots");
  if (k >= n) throw ContractError("snapshot index out of range");
  if (k == 0) return (traj[1].u.values() - traj[0].u.values()) / (traj[1].t - traj[0].t);
  if (k == n - 1) return (traj[k].u.values() - traj[k - 1].u.values()) / (traj[k].t - traj[k - 1].t);
  const auto w = three_point(traj[k - 1].t, traj[k].t, traj[k + 1].t);
  return w[0] * traj[k - 1].u.values() + w[1] * traj[k].u.values() + w[2] * traj[k + 1].u.values();
}

Dissipation dissipation_residual(const Trajectory& traj) {
  if (traj.size() < 3) throw EstimationError("dissipation residual needs at least 3 snapshots");
  const double p = traj.p();
  const TimeSeries J = energy_series(traj);
  Dissipation out{{"dJdt", {}, {}, "three-point"},
                  {"dissipation_rate", {}, {}, "2p int v^{p-1} (d_t v)^2"},
                  {"dissipation_residual", {}, {}, "|dJ/dt + rate|"},
                  {"dissipation_residual_rel", {}, {}, "|dJ/dt + rate| / |dJ/dt|"}};
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const auto w = three_point(traj[k - 1].t, traj[k].t, traj[k + 1].t);
    const double dJ = w[0] * J.value[k - 1] + w[1] * J.value[k] + w[2] * J.value[k + 1];
    const Vector vt = time_derivative(traj, k);
    const Vector& v = traj[k].u.values();
    const Vector integrand = (v.cwiseAbs().array().pow(p - 1.0) * vt.array().square()).matrix();
    const double rate = 2.0 * p * integrate(traj[k].u.grid(), integrand);
    const double r = std::abs(dJ + rate);
    const double t = traj[k].t;
    out.dJdt.push(t, dJ);
    out.rate.push(t, rate);
    out.absolute.push(t, r);
    out.relative.push(t, dJ != 0.0 ? r / std::abs(dJ) : (r == 0.0 ? 0.0 : kInf));
  }
  return out;
}

Curvature curvature_R(const GridFunction& v, double p, double b, const std::optional<Vector>& dvdt) {
  const GridPtr& gp = v.grid_ptr();
  const Grid& g = *gp;
  if (dvdt && dvdt->size() != g.size()) throw ContractError("time derivative has the wrong size");
  const DistanceField d = distance_field(gp);
  const Vector lap = apply_laplacian(g, v.values());
  Vector Re = Vector::Constant(g.size(), kNaN);
  Vector Rt = Vector::Constant(g.size(), kNaN);
  Curvature out{GridFunction(gp, Vector::Zero(g.size())), std::nullopt, {}, 0.0};
  for (Index n : g.interior_nodes()) {
    const double vn = v[n];
    if (!(vn >= kCurvatureMask * d[n]) || !(vn > 0.0)) {
      out.masked.push_back(n);
      continue;
    }
    Re[n] = (-lap[n] - b * vn) / std::pow(vn, p);
    if (dvdt) Rt[n] = 1.0 - p * (*dvdt)[n] / vn;
  }
  for (Index n = 0; n < g.size(); ++n) {
    if (!g.on_boundary(n)) continue;
    const Index m = inward(g, n);
    Re[n] = Re[m];
    Rt[n] = Rt[m];
  }
  out.elliptic = GridFunction(gp, std::move(Re));
  if (dvdt) out.temporal = GridFunction(gp, std::move(Rt));
  out.masked_fraction = g.interior_size() ? static_cast<double>(out.masked.size()) / g.interior_size() : 0.0;
  return out;
}

Curvature curvature_R(const GridFunction& v, double p, double b, const GridFunction& neighbor, double dt) {
  if (!(dt != 0.0)) throw ContractError("neighbor snapshot needs a nonzero time offset");
  if (!neighbor.grid().same_lattice(v.grid())) throw ContractError("neighbor lives on another grid");
  return curvature_R(v, p, b, Vector((neighbor.values() - v.values()) / dt));
}

double moment_q(const GridFunction& v, double p, double b, double q, double* masked_fraction) {
  if (!(q >= 1.0)) throw ContractError("moments need q >= 1");
  const Curvature R = curvature_R(v, p, b);
  const Grid& g = v.grid();
  const Vector& w = g.quadrature_weights();
  double M = 0.0;
  for (Index n : g.interior_nodes()) {
    const double r = R.elliptic[n];
    if (std::isnan(r)) continue;
    M += w[n] * std::pow(std::abs(r - 1.0), q) * std::pow(v[n], p + 1.0);
  }
  if (masked_fraction) *masked_fraction = R.masked_fraction;
  return M;
}

Moments moments_Mq(const Trajectory& traj, double q) {
  Moments out{{"M_" + format_double(q), {}, {}, "int |R_e - 1|^q v^{p+1}, masked nodes excluded"},
              {"M_" + format_double(q) + "_masked_fraction", {}, {}, ""}};
  for (const auto& s : traj.snapshots()) {
    double frac = 0.0;
    out.Mq.push(s.t, moment_q(s.u, traj.p(), traj.b(), q, &frac));
    out.masked_fraction.push(s.t, frac);
  }
  return out;
}

double bc_coefficient(double p, double t) {
  if (!(t > 0.0)) throw DomainError("Benilan-Crandall bound needs t > 0");
  return p / ((p - 1.0) * (p - 1.0)) / -std::expm1(-p * t / (p - 1.0));
}

TimeSeries benilan_crandall_margin(const Trajectory& traj) {
  if (traj.size() < 2) throw EstimationError("Benilan-Crandall margin needs at least 2 snapshots");
  TimeSeries s{"bc_margin", {}, {}, "max(d_t v - bound v) over interior nodes; <= 0 means satisfied"};
  const Grid& g = traj[0].u.grid();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj[k].t;
    if (!(t > 0.0)) continue;
    const double c = bc_coefficient(traj.p(), t);
    const Vector vt = time_derivative(traj, k);
    const Vector& v = traj[k].u.values();
    double m = -kInf;
    for (Index n : g.interior_nodes()) m = std::max(m, vt[n] - c * v[n]);
    s.push(t, m);
  }
  return s;
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw EstimationError("line fit needs at least 2 points");
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < n; ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= n;
  ym /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
    syy += (y[i] - ym) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) throw EstimationError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

LineFit theil_sen(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw EstimationError("line fit needs at least 2 points");
  std::vector<double> slopes;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[j] != x[i]) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
  if (slopes.empty()) throw EstimationError("line fit needs distinct abscissae");
  auto median = [](std::vector<double> v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    double med = v[m];
    if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), v.begin() + m));
    return med;
  };
  LineFit f;
  f.slope = median(slopes);
  std::vector<double> icpt(n);
  for (std::size_t i = 0; i < n; ++i) icpt[i] = y[i] - f.slope * x[i];
  f.intercept = median(icpt);
  // R^2 of the robust line, for comparability with the OLS report
  double ym = 0;
  for (double v : y) ym += v;
  ym /= n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ym) * (y[i] - ym);
  }
  f.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return f;
}

RateFit convergence_rate(const Trajectory& traj, const SteadyState& steady, const RateOptions& opts) {
  if (traj.empty()) throw EstimationError("empty trajectory");
  const Grid& g = steady.S.grid();
  if (!traj[0].u.grid().same_lattice(g)) throw ContractError("trajectory and S live on different grids");
  const double p = steady.p;
  const Vector& S = steady.S.values();
  const Vector& w = g.quadrature_weights();

  RateFit fit;
  fit.err_sup = {"rel_err_sup", {}, {}, "max |v/S - 1| over interior nodes"};
  fit.err_weighted = {"rel_err_weighted", {}, {}, "(int |v/S - 1|^2 S^{p+1})^{1/2}"};
  double mass = 0.0;
  for (Index n : g.interior_nodes()) mass += w[n] * std::pow(S[n], p + 1.0);
  fit.domination_constant = std::sqrt(mass);

  for (const auto& s : traj.snapshots()) {
    double sup = 0.0, acc = 0.0;
    for (Index n : g.interior_nodes()) {
      const double e = s.u[n] / S[n] - 1.0;
      sup = std::max(sup, std::abs(e));
      acc += w[n] * e * e * std::pow(S[n], p + 1.0);
    }
    fit.err_sup.push(s.t, sup);
    fit.err_weighted.push(s.t, std::sqrt(acc));
  }

  const auto& e = fit.err_sup.value;
  std::size_t start = 0;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e[k] >= opts.tail_threshold) start = k + 1;
  std::vector<std::size_t> tail;
  for (std::size_t k = start; k < e.size(); ++k)
    if (e[k] > opts.noise_floor) tail.push_back(k);
  if (start >= e.size()) {
    fit.refused = true;
    fit.reason = "relative error never drops below the tail threshold";
    return fit;
  }
  if (tail.size() < 3) {
    fit.refused = true;
    fit.reason = "error at the solver noise floor";
    return fit;
  }
  double emin = kInf;
  for (auto k : tail) emin = std::min(emin, e[k]);
  const double cap = emin * std::pow(10.0, opts.window_decades);
  std::vector<double> ts, ls, lw;
  for (auto k : tail) {
    if (e[k] > cap) continue;
    ts.push_back(fit.err_sup.t[k]);
    ls.push_back(std::log(e[k]));
    lw.push_back(std::log(fit.err_weighted.value[k]));
  }
  if (ts.size() < 3) {
    fit.refused = true;
    fit.reason = "fewer than 3 points in the fit window";
    return fit;
  }
  const LineFit a = opts.robust ? theil_sen(ts, ls) : least_squares(ts, ls);
  const LineFit b = opts.robust ? theil_sen(ts, lw) : least_squares(ts, lw);
  fit.gamma_sup = -a.slope;
  fit.gamma_weighted = -b.slope;
  fit.r_squared = a.r_squared;
  fit.r_squared_weighted = b.r_squared;
  fit.t_a = ts.front();
  fit.t_b = ts.back();
  fit.points = ts.size();
  if (!(a.slope < 0.0) || !(ls.back() < ls.front())) {
    fit.refused = true;
    fit.reason = "error is not decreasing over the tail";
  }
  return fit;
}

Envelope scaling_envelope(const Trajectory& traj, double Tstar, int l, double delta) {
  if (l != 0 && l != 1) throw ContractError("envelope order l must be 0 or 1");
  if (traj.frame() != Frame::base) throw ContractError("envelope needs a base trajectory");
  if (!(Tstar > 0.0) || !std::isfinite(Tstar)) throw DomainError("envelope needs a finite T* > 0");
  if (traj.size() < 3) throw EstimationError("envelope needs at least 3 snapshots");
  for (const auto& s : traj.snapshots()) {
    if (s.t >= Tstar && s.u.max_abs() >= 10.0 * traj.extinction_floor) {
      throw DomainError("solution is still alive at t = " + format_double(s.t) + " >= T* = " +
                        format_double(Tstar));
    }
  }
  const double p = traj.p();
  const double t_b = Tstar - 5.0 * traj.policy().dt;
  Envelope env{l, {"C_" + std::to_string(l), {}, {}, "max |d_t^l u| / (d (T*-t)^{1/(p-1)-l})"}, 0.0, delta, t_b};
  const GridPtr& gp = traj.grid_ptr();
  const DistanceField d = distance_field(gp);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj[k].t;
    if (t < delta || t > t_b) continue;
    const Vector f = l == 0 ? traj[k].u.values() : time_derivative(traj, k);
    const double scale = std::pow(Tstar - t, 1.0 / (p - 1.0) - l);
    double c = 0.0;
    for (Index n : gp->interior_nodes()) c = std::max(c, std::abs(f[n]) / (d[n] * scale));
    env.C.push(t, c);
  }
  if (env.C.empty()) throw EstimationError("no snapshots inside the envelope window");
  env.sup = env.C.sup();
  return env;
}

void DiagnosticsReport::check(const std::string& name, bool passed, double value,
                              const std::string& tolerance_name) {
  const auto it = tolerances.find(tolerance_name);
  if (it == tolerances.end()) throw ContractError("flag '" + name + "' names unknown tolerance '" + tolerance_name + "'");
  flags.push_back({name, passed, value, tolerance_name, it->second});
}

bool DiagnosticsReport::all_passed() const {
  return std::all_of(flags.begin(), flags.end(), [](const Flag& f) { return f.passed; });
}

const TimeSeries* DiagnosticsReport::find(const std::string& name) const {
  for (const auto& s : series)
    if (s.name == name) return &s;
  return nullptr;
}

nlohmann::ordered_json DiagnosticsReport::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json js = nlohmann::ordered_json::object();
  for (const auto& s : series) js[s.name] = {{"note", s.note}, {"t", s.t}, {"value", s.value}};
  j["series"] = js;
  j["constants"] = constants;
  j["tolerances"] = tolerances;
  nlohmann::ordered_json jf = nlohmann::ordered_json::array();
  for (const auto& f : flags) {
    jf.push_back({{"name", f.name},
                  {"passed", f.passed},
                  {"value", f.value},
                  {"tolerance_name", f.tolerance_name},
                  {"tolerance", f.tolerance}});
  }
  j["flags"] = jf;
  j["all_passed"] = all_passed();
  return j;
}

}  // namespace fdelab
