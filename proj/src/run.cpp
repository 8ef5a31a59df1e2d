#include "fdelab/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fdelab/funcineq.hpp"

namespace fdelab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kUnbounded = std::numeric_limits<double>::max();

// Diagnostics available per experiment, with default tolerances.
const std::map<std::string, double>& defaults_for(Experiment e) {
  static const std::map<std::string, double> steady{{"steady_residual", 1e-8}, {"curvature", 1e-6}};
  static const std::map<std::string, double> base{{"extinction", 0.02},      {"exact_tracking", 0.01},
                                                  {"energy_monotone", 1e-12}, {"dissipation", 0.05},
                                                  {"harnack_band", 10.0},     {"envelope", kUnbounded}};
  static const std::map<std::string, double> rescaled{{"energy_monotone", 1e-12}, {"dissipation", 0.05},
                                                      {"harnack", 10.0},          {"bc_margin", 0.0},
                                                      {"moments", 2.0},           {"convergence", 0.95},
                                                      {"curvature", 1e-2}};
  static const std::map<std::string, double> diagnose = [] {
    std::map<std::string, double> m = base;
    m.erase("exact_tracking");
    for (const auto& [k, v] : rescaled) m.emplace(k, v);
    return m;
  }();
  static const std::map<std::string, double> funcineq{{"chi", 1e-14},
                                                      {"weighted_sobolev", 1.0},
                                                      {"campanato", 0.05},
                                                      {"bridge", 1.0},
                                                      {"holder_equivalence", 1.0},
                                                      {"ode_bound", 1e-9}};
  switch (e) {
    case Experiment::steady: return steady;
    case Experiment::evolve_base: return base;
    case Experiment::evolve_rescaled: return rescaled;
    case Experiment::diagnose: return diagnose;
    case Experiment::funcineq: return funcineq;
  }
  return steady;
}

Experiment experiment_from_string(const std::string& s, const std::string& path) {
  for (auto e : {Experiment::steady, Experiment::evolve_base, Experiment::evolve_rescaled, Experiment::diagnose,
                 Experiment::funcineq})
    if (to_string(e) == s) return e;
  throw ConfigError(path + ": unknown experiment '" + s +
                    "' (steady | evolve_base | evolve_rescaled | diagnose | funcineq)");
}

// Field access with path-qualified errors and unknown-field detection.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key) + ": must be finite");
    return x;
  }
  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v.get<long>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string required_string(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key) + ": required field is missing");
    return string(key, "");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ConfigError(where + ": " + what);
}

GridSpec parse_grid(const json& j, const std::string& path) {
  Reader r(j, path);
  GridSpec g;
  g.dimension = static_cast<int>(r.integer("dimension", 1));
  require(g.dimension == 1 || g.dimension == 2, r.at("dimension"), "must be 1 or 2");
  g.extents.assign(g.dimension, Interval{0.0, 1.0});
  g.nodes.assign(g.dimension, 101);
  if (r.has("nodes")) {
    const json& n = r.raw("nodes");
    if (n.is_number_integer()) {
      g.nodes.assign(g.dimension, n.get<Index>());
    } else {
      require(n.is_array() && static_cast<int>(n.size()) == g.dimension, r.at("nodes"),
              "expected an integer or one integer per axis");
      for (int k = 0; k < g.dimension; ++k) {
        require(n[k].is_number_integer(), r.at("nodes") + "[" + std::to_string(k) + "]", "expected an integer");
        g.nodes[k] = n[k].get<Index>();
      }
    }
    for (int k = 0; k < g.dimension; ++k) require(g.nodes[k] >= 3, r.at("nodes"), "need at least 3 nodes per axis");
  }
  if (r.has("extents")) {
    const json& e = r.raw("extents");
    require(e.is_array() && static_cast<int>(e.size()) == g.dimension, r.at("extents"),
            "expected one [lo, hi] pair per axis");
    for (int k = 0; k < g.dimension; ++k) {
      const std::string where = r.at("extents") + "[" + std::to_string(k) + "]";
      require(e[k].is_array() && e[k].size() == 2 && e[k][0].is_number() && e[k][1].is_number(), where,
              "expected [lo, hi]");
      g.extents[k] = {e[k][0].get<double>(), e[k][1].get<double>()};
      require(g.extents[k].lo < g.extents[k].hi, where, "lo must be below hi");
    }
  }
  r.finish();
  return g;
}

InitialDataSpec parse_initial(const json& j, const std::string& path, int dimension) {
  Reader r(j, path);
  InitialDataSpec s;
  const std::string kind = r.string("kind", "scaled_steady");
  try {
    s.kind = initial_kind_from_string(kind);
  } catch (const Error&) {
    throw ConfigError(r.at("kind") + ": unknown initial kind '" + kind +
                      "' (scaled_steady | steady_plus_bump | weighted_eigenfunction)");
  }
  s.a = r.number("a", s.a);
  require(s.a > 0.0, r.at("a"), "must be positive");
  if (r.has("center")) {
    const json& c = r.raw("center");
    require(c.is_array() && static_cast<int>(c.size()) == dimension, r.at("center"), "expected one coordinate per axis");
    for (const auto& x : c) {
      require(x.is_number(), r.at("center"), "expected numbers");
      s.center.push_back(x.get<double>());
    }
  }
  s.width = r.number("width", s.width);
  require(s.width > 0.0, r.at("width"), "must be positive");
  s.height = r.number("height", s.height);
  require(s.height >= 0.0, r.at("height"), "must be >= 0");
  s.scale = r.number("scale", s.scale);
  require(s.scale > 0.0, r.at("scale"), "must be positive");
  r.finish();
  return s;
}

DtPolicy parse_dt(const json& j, const std::string& path) {
  Reader r(j, path);
  DtPolicy d;
  const std::string kind = r.string("kind", "fixed");
  require(kind == "fixed" || kind == "adaptive", r.at("kind"), "must be 'fixed' or 'adaptive'");
  d.kind = kind == "fixed" ? DtPolicy::Kind::fixed : DtPolicy::Kind::adaptive;
  d.dt = r.number("dt", d.dt);
  require(d.dt > 0.0, r.at("dt"), "must be positive");
  d.dt_min = r.number("dt_min", d.dt_min);
  require(d.dt_min > 0.0 && d.dt_min <= d.dt, r.at("dt_min"), "must lie in (0, dt]");
  d.snapshot_interval = r.number("snapshot_interval", d.snapshot_interval);
  require(d.snapshot_interval > 0.0, r.at("snapshot_interval"), "must be positive");
  d.geometric_ratio = r.number("geometric_ratio", d.geometric_ratio);
  require(d.geometric_ratio > 0.0 && d.geometric_ratio < 1.0, r.at("geometric_ratio"), "must lie in (0,1)");
  d.max_halvings = static_cast<int>(r.integer("max_halvings", d.max_halvings));
  require(d.max_halvings >= 0 && d.max_halvings <= 60, r.at("max_halvings"), "must lie in [0, 60]");
  d.extinction_guard = r.boolean("extinction_guard", d.extinction_guard);
  r.finish();
  return d;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GridPtr make_grid(const GridSpec& g) { return build_grid(g.dimension, g.extents, g.nodes); }

// ---------------------------------------------------------------------------
// pipelines

struct Context {
  const RunConfig& cfg;
  fs::path dir;
  DiagnosticsReport& rep;
  std::map<std::string, double> tol;  // requested diagnostics only

  bool wants(const std::string& name) const { return tol.count(name) > 0; }

  // Runs one diagnostic; estimation trouble becomes a failed check.
  template <class F>
  void guarded(const std::string& name, F&& f) {
    if (!wants(name)) return;
    try {
      f();
    } catch (const SolverError&) {
      throw;
    } catch (const Error& e) {
      rep.check(name, false, std::numeric_limits<double>::quiet_NaN(), name);
      rep.constants[name + ".error"] = 1.0;
      std::cerr << "diagnostic '" << name << "' could not be evaluated: " << e.what() << '\n';
    }
  }

  void add(TimeSeries s) {
    write_series_csv((dir / "series" / (s.name + ".csv")).string(), s);
    rep.series.push_back(std::move(s));
  }
};

std::size_t nearest_index(const Trajectory& traj, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < traj.size(); ++k)
    if (std::abs(traj[k].t - t) < std::abs(traj[best].t - t)) best = k;
  return best;
}

void energy_checks(Context& c, const Trajectory& traj) {
  c.guarded("energy_monotone", [&] {
    TimeSeries J = energy_series(traj);
    double worst = -kUnbounded;
    for (std::size_t k = 0; k + 1 < J.size(); ++k) {
      const double scale = std::max(std::abs(J.value[k]), std::numeric_limits<double>::min());
      worst = std::max(worst, (J.value[k + 1] - J.value[k]) / scale);
    }
    c.add(std::move(J));
    c.rep.check("energy_monotone", worst <= c.tol.at("energy_monotone"), worst, "energy_monotone");
  });
  c.guarded("dissipation", [&] {
    Dissipation d = dissipation_residual(traj);
    const double t_mid = 0.5 * (traj[0].t + traj.back().t);
    std::size_t best = 0;
    for (std::size_t k = 1; k < d.relative.size(); ++k)
      if (std::abs(d.relative.t[k] - t_mid) < std::abs(d.relative.t[best] - t_mid)) best = k;
    const double v = d.relative.value.at(best);
    c.rep.constants["dissipation.t_mid"] = d.relative.t.at(best);
    c.add(std::move(d.dJdt));
    c.add(std::move(d.rate));
    c.add(std::move(d.absolute));
    c.add(std::move(d.relative));
    c.rep.check("dissipation", v <= c.tol.at("dissipation"), v, "dissipation");
  });
}

void base_checks(Context& c, const Trajectory& traj, const SteadyState& steady, bool known_initial) {
  const RunConfig& cfg = c.cfg;
  const double p = traj.p();
  std::optional<ExtinctionEstimate> est;
  try {
    est = estimate_extinction_time(traj);
    c.rep.constants["Tstar"] = est->Tstar;
    c.rep.constants["Tstar.r_squared"] = est->r_squared;
  } catch (const EstimationError& e) {
    std::cerr << "extinction time not estimated: " << e.what() << '\n';
  }
  const bool separable = known_initial && cfg.initial.kind == InitialKind::scaled_steady;
  const double T_exact = p * std::pow(cfg.initial.a, p - 1.0) / (p - 1.0);

  TimeSeries umax{"u_max", {}, {}, "max over nodes"};
  for (const auto& s : traj.snapshots()) umax.push(s.t, s.u.max_abs());
  c.add(umax);

  c.guarded("extinction", [&] {
    if (!est) throw EstimationError("no extinction estimate");
    if (separable) {
      const double rel = std::abs(est->Tstar - T_exact) / T_exact;
      c.rep.constants["Tstar.exact"] = T_exact;
      c.rep.check("extinction", rel <= c.tol.at("extinction"), rel, "extinction");
    } else {
      c.rep.check("extinction", std::isfinite(est->Tstar), est->Tstar, "extinction");
    }
  });
  c.guarded("exact_tracking", [&] {
    if (!separable) throw EstimationError("exact tracking needs scaled_steady initial data");
    const double Smax = steady.S.max_abs();
    TimeSeries err{"tracking_rel_err", {}, {}, "|u_max - c(t) S_max| / (c(t) S_max), t <= T*/2"};
    for (const auto& s : traj.snapshots()) {
      if (s.t > 0.5 * T_exact) break;
      const double ct = std::pow((p - 1.0) * (T_exact - s.t) / p, 1.0 / (p - 1.0));
      err.push(s.t, std::abs(s.u.max_abs() - ct * Smax) / (ct * Smax));
    }
    const double worst = err.sup();
    c.add(std::move(err));
    c.rep.check("exact_tracking", worst <= c.tol.at("exact_tracking"), worst, "exact_tracking");
  });
  energy_checks(c, traj);
  c.guarded("harnack_band", [&] {
    if (!est) throw EstimationError("no extinction estimate");
    const double T = est->Tstar;
    const DistanceField d = distance_field(traj.grid_ptr());
    TimeSeries lo{"harnack_band_min", {}, {}, "min u / (d (T*-t)^{1/(p-1)})"};
    TimeSeries hi{"harnack_band_max", {}, {}, "max u / (d (T*-t)^{1/(p-1)})"};
    for (const auto& s : traj.snapshots()) {
      if (s.t < 0.25 * T || s.t > 0.9 * T) continue;
      const double scale = std::pow(T - s.t, 1.0 / (p - 1.0));
      double a = kUnbounded, b = 0.0;
      for (Index n : traj.grid_ptr()->interior_nodes()) {
        const double q = s.u[n] / (d[n] * scale);
        a = std::min(a, q);
        b = std::max(b, q);
      }
      lo.push(s.t, a);
      hi.push(s.t, b);
    }
    if (lo.empty()) throw EstimationError("no snapshots in [T*/4, 0.9 T*]");
    double mn = kUnbounded;
    for (double v : lo.value) mn = std::min(mn, v);
    const double band = std::max(hi.sup(), mn > 0.0 ? 1.0 / mn : kUnbounded);
    c.add(std::move(lo));
    c.add(std::move(hi));
    c.rep.check("harnack_band", band <= c.tol.at("harnack_band"), band, "harnack_band");
  });
  c.guarded("envelope", [&] {
    if (!est) throw EstimationError("no extinction estimate");
    double worst = 0.0;
    for (int l : {0, 1}) {
      Envelope env = scaling_envelope(traj, est->Tstar, l, 0.1 * est->Tstar);
      c.rep.constants["envelope.C_" + std::to_string(l)] = env.sup;
      worst = std::max(worst, env.sup);
      c.add(std::move(env.C));
    }
    c.rep.check("envelope", std::isfinite(worst) && worst <= c.tol.at("envelope"), worst, "envelope");
  });
}

void rescaled_checks(Context& c, const Trajectory& traj, const SteadyState& steady) {
  const double p = traj.p(), b = traj.b();
  const double t0 = traj[0].t, t1 = traj.back().t;
  energy_checks(c, traj);
  c.guarded("harnack", [&] {
    const DistanceField d = distance_field(traj.grid_ptr());
    TimeSeries s{"harnack_c0", {}, {}, "max(max v/d, 1/min v/d); inf when degenerate"};
    for (const auto& snap : traj.snapshots()) s.push(snap.t, harnack_ratio(snap.u, d).c0);
    const double v = s.sup_on(std::min(0.5, t1), t1);
    c.add(std::move(s));
    c.rep.check("harnack", v <= c.tol.at("harnack"), v, "harnack");
  });
  c.guarded("bc_margin", [&] {
    TimeSeries s = benilan_crandall_margin(traj);
    const double v = s.sup();
    c.add(std::move(s));
    c.rep.check("bc_margin", v <= c.tol.at("bc_margin"), v, "bc_margin");
  });
  c.guarded("moments", [&] {
    for (double q : {2.0, 4.0, 8.0}) {
      Moments m = moments_Mq(traj, q);
      const double late = m.Mq.sup_on(0.5 * (t0 + t1), t1);
      const double quarter = m.Mq.sup_on(t0 + 0.25 * (t1 - t0), 0.5 * (t0 + t1));
      const double ratio = late / quarter;
      c.rep.constants["moments." + m.Mq.name + ".ratio"] = ratio;
      const std::string name = "moments_" + m.Mq.name;
      c.add(std::move(m.Mq));
      c.add(std::move(m.masked_fraction));
      c.rep.check(name, ratio <= c.tol.at("moments"), ratio, "moments");
    }
  });
  c.guarded("convergence", [&] {
    RateFit fit = convergence_rate(traj, steady);
    c.rep.constants["gamma_sup"] = fit.gamma_sup;
    c.rep.constants["gamma_weighted"] = fit.gamma_weighted;
    c.rep.constants["convergence.r_squared"] = fit.r_squared;
    c.rep.constants["convergence.domination_constant"] = fit.domination_constant;
    c.rep.tolerances["domination_slack"] = 1e-12;
    double excess = -kUnbounded;
    for (std::size_t k = 0; k < fit.err_sup.size(); ++k) {
      const double bound = fit.domination_constant * fit.err_sup.value[k];
      excess = std::max(excess, (fit.err_weighted.value[k] - bound) / std::max(bound, 1e-300));
    }
    if (fit.refused) std::cerr << "convergence fit refused: " << fit.reason << '\n';
    const bool ok = !fit.refused && fit.gamma_sup > 0.0 && fit.r_squared >= c.tol.at("convergence");
    c.add(std::move(fit.err_sup));
    c.add(std::move(fit.err_weighted));
    c.rep.check("convergence", ok, fit.r_squared, "convergence");
    c.rep.check("convergence_domination", excess <= 1e-12, excess, "domination_slack");
  });
  c.guarded("curvature", [&] {
    if (traj.size() < 3) throw EstimationError("curvature comparison needs 3 snapshots");
    const std::size_t k = std::clamp<std::size_t>(nearest_index(traj, 0.5 * (t0 + t1)), 1, traj.size() - 2);
    const Curvature R = curvature_R(traj[k].u, p, b, time_derivative(traj, k));
    double worst = 0.0;
    for (Index n : traj.grid_ptr()->interior_nodes()) {
      const double e = R.elliptic[n], tt = (*R.temporal)[n];
      if (std::isfinite(e) && std::isfinite(tt)) worst = std::max(worst, std::abs(e - tt));
    }
    c.rep.constants["curvature.t"] = traj[k].t;
    c.rep.constants["curvature.masked_fraction"] = R.masked_fraction;
    c.rep.check("curvature", worst <= c.tol.at("curvature"), worst, "curvature");
  });
}

void steady_checks(Context& c, const SteadyState& steady) {
  c.guarded("steady_residual", [&] {
    c.rep.check("steady_residual", steady.residual_norm <= c.tol.at("steady_residual"), steady.residual_norm,
                "steady_residual");
  });
  c.guarded("curvature", [&] {
    const Curvature R = curvature_R(steady.S, steady.p, steady.b);
    double worst = 0.0;
    for (Index n : steady.S.grid().interior_nodes())
      if (std::isfinite(R.elliptic[n])) worst = std::max(worst, std::abs(R.elliptic[n] - 1.0));
    c.rep.constants["curvature.masked_fraction"] = R.masked_fraction;
    c.rep.check("curvature", worst <= c.tol.at("curvature"), worst, "curvature");
  });
}

void funcineq_checks(Context& c) {
  const RunConfig& cfg = c.cfg;
  const GridPtr grid = make_grid(cfg.grid);
  const double p = cfg.p, alpha = 0.5;
  std::vector<double> times;
  for (int k = 0; k <= 16; ++k) times.push_back(k / 16.0);
  ordered_json out;
  out["p"] = p;
  out["alpha"] = alpha;
  std::mt19937_64 rng(cfg.seed);

  c.guarded("chi", [&] {
    struct Case {
      int n;
      double p, s, chi;
    };
    double worst = 0.0;
    for (const Case& k : {Case{1, 2.0, 0.0, 1.5}, Case{3, 2.0, 1.0, 1.5}, Case{4, 3.0, 1.0, 4.0 / 3.0}}) {
      const ExponentPack e = chi_exponent(k.n, k.p);
      worst = std::max(worst, std::abs(e.chi - k.chi));
      if (e.s) worst = std::max(worst, std::abs(*e.s - k.s));
    }
    c.rep.check("chi", worst <= c.tol.at("chi"), worst, "chi");
  });
  c.guarded("weighted_sobolev", [&] {
    const double C = weighted_sobolev_constant(grid, times, p);
    double worst = 0.0;
    std::vector<std::pair<std::string, double>> series;
    for (int i = 0; i < 100; ++i) {
      const double r = weighted_sobolev_ratio(random_piecewise_linear(grid, times, rng), p);
      worst = std::max(worst, r);
    }
    c.rep.constants["weighted_sobolev.constant"] = C;
    c.rep.constants["weighted_sobolev.max_sample"] = worst;
    out["weighted_sobolev"] = {{"constant", C}, {"max_sample_ratio", worst}, {"samples", 100}, {"seed", cfg.seed}};
    c.rep.check("weighted_sobolev", worst / C <= c.tol.at("weighted_sobolev"), worst / C, "weighted_sobolev");
  });
  const int last = grid->dimension() - 1;
  const auto xn = SpaceTimeFunction::sample(grid, times, [&](double x, double y, double) { return last == 0 ? x : y; });
  c.guarded("campanato", [&] {
    const CampanatoPolicy pol;
    const CampanatoResult a = campanato_seminorm(xn, alpha, p, pol);
    const CampanatoResult b = campanato_seminorm(xn, alpha, p, pol.refined());
    const double change = std::abs(b.value - a.value) / a.value;
    out["campanato_xn"] = norm_json(a.value, pol.to_json(), {{"policy", a.value}, {"refined", b.value}});
    c.rep.constants["campanato.xn"] = a.value;
    c.rep.check("campanato", change <= c.tol.at("campanato") && b.value >= a.value, change, "campanato");
  });
  c.guarded("bridge", [&] {
    const BridgeResult br = campanato_bridge(xn, alpha, p);
    c.rep.constants["bridge.constant"] = br.constant;
    out["bridge"] = {{"constant", br.constant}, {"worst_ratio", br.worst_ratio}, {"centers", br.samples.size()}};
    c.rep.check("bridge", br.holds && br.worst_ratio <= c.tol.at("bridge"), br.worst_ratio, "bridge");
  });
  c.guarded("holder_equivalence", [&] {
    const double ce = easy_direction_constant(alpha, p);
    double easy = 0.0, hard = 0.0;
    for (int i = 0; i < 20; ++i) {
      const int k = i % 5, m = i / 5;
      const auto f = SpaceTimeFunction::sample(grid, times, [&](double x, double y, double t) {
        const double z = last == 0 ? x : y;
        return std::pow(z, 0.3 + 0.35 * k) * (1.0 + 0.5 * m * t) + 0.25 * std::sin(M_PI * (m + 1) * x) * std::cos(2.0 * (k + 1) * t);
      });
      const double cn = campanato_seminorm(f, alpha, p).value;
      const double hn = weighted_holder_seminorm(f, alpha, p).value;
      easy = std::max(easy, cn / (ce * hn));
      hard = std::max(hard, hn / cn);
    }
    c.rep.constants["holder_equivalence.easy_constant"] = ce;
    c.rep.constants["holder_equivalence.measured_constant"] = hard;
    out["holder_equivalence"] = {{"easy_constant", ce}, {"measured_constant", hard}, {"functions", 20}};
    c.rep.check("holder_equivalence", easy <= c.tol.at("holder_equivalence"), easy, "holder_equivalence");
  });
  c.guarded("ode_bound", [&] {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = -kUnbounded;
    for (int i = 0; i < 50; ++i) {
      const double a = 0.1 + 1.9 * U(rng), m1 = 0.1 + 1.9 * U(rng), m2 = 0.95 * U(rng);
      const double m3 = U(rng) < 0.2 ? 1.0 : 0.9 * U(rng), z0 = 0.05 + 2.0 * U(rng), I = 0.01 + U(rng);
      worst = std::max(worst, ode_rk4_oracle(a, m1, m2, m3, z0, I).worst_excess);
    }
    out["ode_bound"] = {{"tuples", 50}, {"worst_relative_excess", worst}};
    c.rep.check("ode_bound", worst <= c.tol.at("ode_bound"), worst, "ode_bound");
  });
  std::ofstream(c.dir / "funcineq.json") << out.dump(2) << '\n';
}

std::vector<ManifestEntry> build_manifest(const fs::path& dir) {
  std::vector<ManifestEntry> m;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "report.json") continue;
    m.push_back({rel, e.file_size(), fnv1a64_file(e.path().string())});
  }
  std::sort(m.begin(), m.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return m;
}

void write_report(const RunReport& rep) {
  std::ofstream(fs::path(rep.config.output) / "report.json") << rep.to_json().dump(2) << '\n';
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::steady: return "steady";
    case Experiment::evolve_base: return "evolve_base";
    case Experiment::evolve_rescaled: return "evolve_rescaled";
    case Experiment::diagnose: return "diagnose";
    case Experiment::funcineq: return "funcineq";
  }
  return "?";
}

RunConfig parse_config(const json& j, const std::string& path) {
  Reader r(j, path);
  RunConfig c;
  c.echo = ordered_json::parse(j.dump());
  if (r.has("schema")) {
    const json& s = r.raw("schema");
    require(s.is_number_integer() && s.get<int>() == 1, r.at("schema"), "only schema 1 is supported");
  } else if (path == "$") {
    throw ConfigError(r.at("schema") + ": required field is missing");
  }
  c.name = r.string("name", "");
  c.experiment = experiment_from_string(r.required_string("experiment"), r.at("experiment"));
  if (r.has("grid")) c.grid = parse_grid(r.raw("grid"), r.at("grid"));
  c.p = r.number("p", c.p);
  require(c.p > 1.0, r.at("p"), "must exceed 1 (got " + format_double(c.p) + ")");
  c.b = r.number("b", c.b);
  if (r.has("initial")) c.initial = parse_initial(r.raw("initial"), r.at("initial"), c.grid.dimension);
  if (r.has("dt_policy")) c.dt = parse_dt(r.raw("dt_policy"), r.at("dt_policy"));
  if (r.has("t_end")) {
    c.t_end = r.number("t_end", 0.0);
    require(*c.t_end > 0.0, r.at("t_end"), "must be positive");
  }
  require(c.experiment != Experiment::evolve_rescaled || c.t_end, r.at("t_end"),
          "required for evolve_rescaled");
  require(c.experiment == Experiment::evolve_base || c.dt.kind == DtPolicy::Kind::fixed, r.at("dt_policy.kind"),
          "adaptive stepping is available for evolve_base only");
  c.floor_fraction = r.number("floor_fraction", c.floor_fraction);
  require(c.floor_fraction > 0.0 && c.floor_fraction < 1.0, r.at("floor_fraction"), "must lie in (0,1)");
  c.output = r.string("output", c.output);
  require(!c.output.empty(), r.at("output"), "must not be empty");
  if (r.has("seed")) {
    const json& s = r.raw("seed");
    require(s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0), r.at("seed"),
            "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.trajectory = r.string("trajectory", "");
  require(c.experiment != Experiment::diagnose || !c.trajectory.empty(), r.at("trajectory"),
          "required for diagnose");

  const auto& allowed = defaults_for(c.experiment);
  if (r.has("diagnostics")) {
    const json& d = r.raw("diagnostics");
    require(d.is_array(), r.at("diagnostics"), "expected an array");
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::string where = r.at("diagnostics") + "[" + std::to_string(i) + "]";
      DiagnosticRequest req;
      if (d[i].is_string()) {
        req.name = d[i].get<std::string>();
      } else {
        Reader dr(d[i], where);
        req.name = dr.required_string("name");
        if (dr.has("tol")) req.tol = dr.number("tol", 0.0);
        dr.finish();
      }
      if (!allowed.count(req.name)) {
        std::string names;
        for (const auto& [k, v] : allowed) names += (names.empty() ? "" : ", ") + k;
        throw ConfigError(where + ": diagnostic '" + req.name + "' is not available for " +
                          to_string(c.experiment) + " (" + names + ")");
      }
      c.diagnostics.push_back(req);
    }
  }
  r.finish();
  return c;
}

std::vector<RunConfig> load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("$: expected an object");
  if (!j.contains("experiments")) return {parse_config(j)};
  Reader r(j, "$");
  require(r.has("schema") && r.raw("schema") == 1, r.at("schema"), "schema 1 is required");
  const std::string out = r.string("output", "out");
  const json& list = r.raw("experiments");
  require(list.is_array() && !list.empty(), r.at("experiments"), "expected a non-empty array");
  r.finish();
  std::vector<RunConfig> cfgs;
  std::set<std::string> names;
  for (std::size_t i = 0; i < list.size(); ++i) {
    RunConfig c = parse_config(list[i], "$.experiments[" + std::to_string(i) + "]");
    if (c.name.empty()) c.name = "exp" + std::to_string(i);
    if (!names.insert(c.name).second) throw ConfigError("$.experiments[" + std::to_string(i) + "].name: duplicate name");
    c.output = (fs::path(out) / c.name).string();
    cfgs.push_back(std::move(c));
  }
  return cfgs;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

ordered_json RunReport::to_json() const {
  ordered_json j;
  j["schema"] = 1;
  j["experiment"] = fdelab::to_string(config.experiment);
  j["config"] = config.echo;
  j["status"] = status;
  j["exit_code"] = exit_code;
  if (!message.empty()) j["message"] = message;
  j["diagnostics"] = diagnostics.to_json();
  ordered_json m = ordered_json::array();
  for (const auto& e : manifest) m.push_back({{"path", e.path}, {"bytes", e.bytes}, {"fnv1a64", hex64(e.fnv1a64)}});
  j["manifest"] = m;
  j["wall_clock_s"] = wall_seconds;
  return j;
}

RunReport run(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = cfg;
  const fs::path dir(cfg.output);
  fs::create_directories(dir / "series");
  fs::create_directories(dir / "steady");
  std::ofstream(dir / "config.json") << cfg.echo.dump(2) << '\n';

  Context ctx{cfg, dir, rep.diagnostics, {}};
  const auto& defaults = defaults_for(cfg.experiment);
  if (cfg.diagnostics.empty()) {
    ctx.tol = defaults;
  } else {
    for (const auto& d : cfg.diagnostics) ctx.tol[d.name] = d.tol.value_or(defaults.at(d.name));
  }
  for (const auto& [k, v] : ctx.tol) rep.diagnostics.tolerances[k] = v;

  auto finish = [&](int code, std::string status, std::string message) {
    rep.exit_code = code;
    rep.status = std::move(status);
    rep.message = std::move(message);
    rep.manifest = build_manifest(dir);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_report(rep);
    return rep;
  };

  try {
    if (cfg.experiment == Experiment::funcineq) {
      funcineq_checks(ctx);
    } else if (cfg.experiment == Experiment::diagnose) {
      const Trajectory traj = read_trajectory(cfg.trajectory);
      if (traj.empty()) throw EstimationError("trajectory " + cfg.trajectory + " has no snapshots");
      const SteadyState steady = solve_steady(traj.p(), traj.b(), traj.grid_ptr());
      if (traj.frame() == Frame::base) base_checks(ctx, traj, steady, false);
      else rescaled_checks(ctx, traj, steady);
    } else {
      const GridPtr grid = make_grid(cfg.grid);
      const SteadyState steady = solve_steady(cfg.p, cfg.b, grid);
      write_steady((dir / "steady" / "S.csv").string(), steady);
      rep.diagnostics.constants["S_max"] = steady.S.max_abs();
      rep.diagnostics.constants["steady.residual"] = steady.residual_norm;
      if (cfg.experiment == Experiment::steady) {
        steady_checks(ctx, steady);
      } else {
        const InitialData init = initial_data(cfg.initial, steady);
        write_csv((dir / "initial.csv").string(), init.u);
        rep.diagnostics.constants["initial.harnack_c"] = init.harnack_c;
        rep.diagnostics.constants["initial.source_ratio_max"] = init.source_ratio_max;
        std::optional<Trajectory> traj;
        try {
          if (cfg.experiment == Experiment::evolve_base) {
            StopCriteria stop;
            if (cfg.t_end) stop.t_end = *cfg.t_end;
            stop.floor_fraction = cfg.floor_fraction;
            traj = evolve_base(init.u, cfg.p, cfg.b, cfg.dt, stop);
          } else {
            traj = evolve_rescaled(init.u, cfg.p, cfg.b, cfg.dt, *cfg.t_end);
          }
        } catch (const RunFailure& f) {
          write_trajectory((dir / "trajectory").string(), f.partial());
          return finish(3, "solver_failure",
                        std::string(f.what()) + " (last residual " + format_double(f.last_residual()) + ")");
        }
        write_trajectory((dir / "trajectory").string(), *traj);
        rep.diagnostics.constants["steps"] = static_cast<double>(traj->steps);
        rep.diagnostics.constants["halvings"] = static_cast<double>(traj->halvings);
        if (cfg.experiment == Experiment::evolve_base) base_checks(ctx, *traj, steady, true);
        else rescaled_checks(ctx, *traj, steady);
      }
    }
  } catch (const ConfigError& e) {
    return finish(2, "config_error", e.what());
  } catch (const ParameterError& e) {
    return finish(2, "parameter_error", e.what());
  } catch (const ConstructionError& e) {
    return finish(2, "parameter_error", e.what());
  } catch (const SolverError& e) {
    return finish(3, "solver_failure", e.what());
  } catch (const Error& e) {
    return finish(1, "failed", e.what());
  } catch (const std::exception& e) {
    return finish(3, "internal_error", e.what());
  }

  std::string failed;
  for (const auto& f : rep.diagnostics.flags)
    if (!f.passed)
      failed += (failed.empty() ? "" : "; ") + f.name + " (value " + format_double(f.value) + ", tolerance " +
                format_double(f.tolerance) + ")";
  if (!failed.empty()) return finish(1, "failed", "failed check: " + failed);
  return finish(0, "ok", "");
}

int thread_cap() {
  if (const char* s = std::getenv("FDE_LAB_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return 1;
}

int run_all(const std::vector<RunConfig>& configs, int threads) {
  std::vector<int> codes(configs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const RunReport rep = run(configs[i]);
      codes[i] = rep.exit_code;
      std::lock_guard lock(io);
      std::cout << rep.config.output << ": " << rep.status;
      if (!rep.message.empty()) std::cout << ": " << rep.message;
      std::cout << '\n';
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  auto rank = [](int c) { return c == 2 ? 3 : c == 3 ? 2 : c; };
  int worst = 0;
  for (int c : codes)
    if (rank(c) > rank(worst)) worst = c;
  return worst;
}

void emit_plotdata(const std::string& report_path, const std::string& quantity, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw ConfigError(report_path + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(report_path + ": invalid JSON: " + e.what());
  }
  const json* series = nullptr;
  if (j.contains("diagnostics") && j["diagnostics"].contains("series")) series = &j["diagnostics"]["series"];
  if (!series || !series->contains(quantity)) {
    std::string names;
    if (series)
      for (auto it = series->begin(); it != series->end(); ++it) names += (names.empty() ? "" : ", ") + it.key();
    throw ContractError("quantity '" + quantity + "' is not in the report (available: " + names + ")");
  }
  const json& s = (*series)[quantity];
  const auto& t = s.at("t");
  const auto& v = s.at("value");
  std::ofstream out(out_path);
  out << "t,value\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double val = v[k].is_null() ? std::numeric_limits<double>::infinity() : v[k].get<double>();
    out << format_double(t[k].get<double>()) << ',' << format_double(val) << '\n';
  }
  if (!out) throw ConfigError("failed writing " + out_path);
}

}  // namespace fdelab
