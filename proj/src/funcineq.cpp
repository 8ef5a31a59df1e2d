#include "fdelab/funcineq.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fdelab/errors.hpp"

namespace fdelab {

using nlohmann::ordered_json;

SpaceTimeFunction::SpaceTimeFunction(GridPtr grid, std::vector<double> times, std::vector<Vector> levels,
                                     Boundary tag)
    : grid_(std::move(grid)), times_(std::move(times)), levels_(std::move(levels)), tag_(tag) {
  if (!grid_) throw ContractError("space-time function needs a grid");
  if (times_.empty()) throw ContractError("space-time function needs at least one time level");
  if (times_.size() != levels_.size()) throw ContractError("one value vector per time level expected");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k])) throw ContractError("non-finite time level");
    if (k > 0 && !(times_[k] > times_[k - 1])) throw ContractError("time levels must be strictly increasing");
    if (levels_[k].size() != grid_->size()) throw ContractError("level size does not match the grid");
    if (!levels_[k].allFinite()) throw ContractError("non-finite value in a time level");
    if (tag_ == Boundary::dirichlet) {
      for (Index n = 0; n < grid_->size(); ++n) {
        if (grid_->on_boundary(n) && levels_[k][n] != 0.0) {
          throw ContractError("Dirichlet-tagged space-time function is nonzero on the boundary");
        }
      }
    }
  }
}

double SpaceTimeFunction::xn(Index node) const {
  const int last = grid_->dimension() - 1;
  return grid_->coordinate(node, last) - grid_->axis(last).lo;
}

SpaceTimeFunction SpaceTimeFunction::scaled(double c) const {
  std::vector<Vector> lv;
  lv.reserve(levels_.size());
  for (const auto& v : levels_) lv.push_back(c * v);
  return SpaceTimeFunction(grid_, times_, std::move(lv), tag_);
}

ExponentPack chi_exponent(int n, double p) {
  if (n < 1) throw ParameterError("dimension n must be >= 1, got " + std::to_string(n));
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("p must exceed 1, got " + format_double(p));
  ExponentPack e;
  e.n = n;
  e.p = p;
  if (n <= 2) {
    e.chi = (p + 1.0) / p;
    return e;
  }
  const double s = 2.0 * (p - 1.0) / (n + p - 3.0);
  if (!(s > 0.0 && s < 2.0)) {
    throw ParameterError("s = " + format_double(s) + " leaves the admissible range s in (0,2)");
  }
  e.s = s;
  e.chi = (n + 2.0 - 2.0 * s) / (n - s);
  return e;
}

namespace {

std::vector<double> time_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  if (t.size() == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double dt = t[k + 1] - t[k];
    w[k] += 0.5 * dt;
    w[k + 1] += 0.5 * dt;
  }
  return w;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0,1), got " + format_double(alpha));
}

void check_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("p must exceed 1, got " + format_double(p));
}

bool all_zero(const SpaceTimeFunction& f) {
  for (const auto& v : f.levels())
    if (v.cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

// Lattice stride of the last axis.
Index normal_stride(const Grid& g) { return g.dimension() == 1 ? 1 : g.nodes(0); }

}  // namespace

double hardy_sobolev_exponent(int n, double s) {
  if (n < 3) throw ParameterError("the integrability exponent 2(n-s)/(n-2) needs n >= 3");
  if (!(s > 0.0 && s < 2.0)) throw ParameterError("s must lie in (0,2), got " + format_double(s));
  return 2.0 * (n - s) / (n - 2.0);
}

double hardy_sobolev_ratio(const GridFunction& f, int n, double r, double s) {
  if (n >= 3) throw ParameterError("Hardy-Sobolev ratio is only evaluated for n = 1, 2; n >= 3 is exponent-level only");
  if (n < 1) throw ParameterError("dimension n must be >= 1");
  if (!(s > 0.0 && s < 2.0)) throw ParameterError("s must lie in (0,2), got " + format_double(s));
  if (!(r >= s) || !std::isfinite(r)) throw ParameterError("r must satisfy s <= r < inf, got " + format_double(r));
  const Grid& g = f.grid();
  if (g.dimension() != n) throw ContractError("grid dimension does not match n");
  const int last = n - 1;
  const double lo = g.axis(last).lo, h = g.spacing(last);
  const Index stride = normal_stride(g);
  const Vector& w = g.quadrature_weights();

  double lhs = 0.0;
  for (Index node = 0; node < g.size(); ++node) {
    const double xn = g.coordinate(node, last) - lo;
    const double fv = std::abs(f[node]);
    if (g.lattice(node)[last] == 0) {
      if (fv != 0.0) throw ContractError("f must vanish on the face x_n = 0");
      // |f|^r / x_n^s -> |d_n f|^r x_n^{r-s}
      if (r == s) lhs += w[node] * std::pow(std::abs(f[node + stride]) / h, r);
      continue;
    }
    lhs += w[node] * std::pow(fv, r) / std::pow(xn, s);
  }
  const double rhs = dirichlet_energy(g, f.values());
  if (!(rhs > 0.0)) throw EstimationError("Hardy-Sobolev ratio undefined: f is identically zero");
  return std::pow(lhs, 2.0 / r) / rhs;
}

double weighted_sobolev_ratio(const SpaceTimeFunction& f, double p) {
  check_p(p);
  const Grid& g = f.grid();
  const double chi = chi_exponent(g.dimension(), p).chi;
  if (f.time_levels() < 2) throw EstimationError("weighted Sobolev ratio needs at least two time levels");
  for (const auto& v : f.levels())
    for (Index node = 0; node < g.size(); ++node)
      if (g.on_boundary(node) && v[node] != 0.0)
        throw ContractError("weighted Sobolev ratio needs f = 0 on the spatial boundary");
  if (all_zero(f)) throw EstimationError("weighted Sobolev ratio undefined: f is identically zero");

  Vector weight(g.size());
  for (Index node = 0; node < g.size(); ++node) weight[node] = std::pow(f.xn(node), p - 1.0);
  const auto wt = time_weights(f.times());
  double lhs = 0.0, sup_mass = 0.0, grad = 0.0;
  for (std::size_t k = 0; k < f.time_levels(); ++k) {
    const Vector& v = f.level(k);
    lhs += wt[k] * integrate(g, v.cwiseAbs().array().pow(2.0 * chi).matrix());
    sup_mass = std::max(sup_mass, integrate(g, v.cwiseAbs2().cwiseProduct(weight)));
    grad += wt[k] * dirichlet_energy(g, v);
  }
  return std::pow(lhs, 1.0 / chi) / (sup_mass + grad);
}

double weighted_sobolev_constant(const GridPtr& grid, const std::vector<double>& times, double p) {
  const Grid& g = *grid;
  const int last = g.dimension() - 1;
  const double T0 = times.front(), T1 = times.back();
  auto unit = [&](int k, double x) { return (x - g.axis(k).lo) / (g.axis(k).hi - g.axis(k).lo); };

  // Spatial profiles in the normal variable; tangential factor is sin(pi y).
  const std::vector<std::pair<double, double>> powers{{1, 1}, {0.5, 1}, {2, 1}, {1, 0.5}, {1, 2}, {3, 1}, {0.5, 0.5}};
  const std::vector<int> modes{1, 2};
  auto profile_t = [&](int kind, double t) {
    const double s = T1 > T0 ? (t - T0) / (T1 - T0) : 0.0;
    switch (kind) {
      case 0: return 1.0;
      case 1: return 1.0 - 0.5 * s;
      case 2: return 0.5 + 0.5 * s;
      default: return std::sin(M_PI * (0.25 + 0.5 * s));
    }
  };
  double best = 0.0;
  for (const auto& [a, c] : powers) {
    for (int m : modes) {
      if (last == 0 && m > 1) continue;
      for (int kind = 0; kind < 4; ++kind) {
        auto f = SpaceTimeFunction::sample(
            grid, times,
            [&](double x, double y, double t) {
              const double z = unit(last, last == 0 ? x : y);
              double v = std::pow(z, a) * std::pow(1.0 - z, c) * profile_t(kind, t);
              if (last == 1) v *= std::pow(std::sin(M_PI * unit(0, x)), m);
              return v;
            },
            Boundary::dirichlet);
        best = std::max(best, weighted_sobolev_ratio(f, p));
      }
    }
  }
  return best;
}

SpaceTimeFunction random_piecewise_linear(const GridPtr& grid, const std::vector<double>& times,
                                          std::mt19937_64& rng, int knots) {
  if (knots < 2) throw ParameterError("random piecewise-linear sample needs at least 2 knot intervals");
  const Grid& g = *grid;
  const int d = g.dimension();
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int K = knots + 1;
  const int nt = static_cast<int>(times.size()) > 1 ? K : 1;
  // values[t][iy][ix], zero on spatial knot boundary
  const int ky = d == 2 ? K : 1;
  std::vector<double> val(static_cast<std::size_t>(nt) * ky * K, 0.0);
  auto at = [&](int it, int iy, int ix) -> double& { return val[(static_cast<std::size_t>(it) * ky + iy) * K + ix]; };
  for (int it = 0; it < nt; ++it)
    for (int iy = 0; iy < ky; ++iy)
      for (int ix = 0; ix < K; ++ix) {
        const bool edge = ix == 0 || ix == K - 1 || (d == 2 && (iy == 0 || iy == K - 1));
        at(it, iy, ix) = edge ? 0.0 : U(rng);
      }

  auto locate = [&](double u, int& i0, double& frac) {
    const double s = std::clamp(u, 0.0, 1.0) * knots;
    i0 = std::min(static_cast<int>(s), knots - 1);
    frac = s - i0;
  };
  const double T0 = times.front(), T1 = times.back();
  std::vector<Vector> levels;
  for (double t : times) {
    int it = 0;
    double ft = 0.0;
    if (nt > 1) locate((t - T0) / (T1 - T0), it, ft);
    Vector v = Vector::Zero(g.size());
    for (Index node = 0; node < g.size(); ++node) {
      if (g.on_boundary(node)) continue;
      int ix, iy = 0;
      double fx, fy = 0.0;
      locate((g.coordinate(node, 0) - g.axis(0).lo) / (g.axis(0).hi - g.axis(0).lo), ix, fx);
      if (d == 2) locate((g.coordinate(node, 1) - g.axis(1).lo) / (g.axis(1).hi - g.axis(1).lo), iy, fy);
      double acc = 0.0;
      for (int a = 0; a < (nt > 1 ? 2 : 1); ++a)
        for (int b = 0; b < (d == 2 ? 2 : 1); ++b)
          for (int c = 0; c < 2; ++c) {
            const double wa = nt > 1 ? (a ? ft : 1.0 - ft) : 1.0;
            const double wb = d == 2 ? (b ? fy : 1.0 - fy) : 1.0;
            const double wc = c ? fx : 1.0 - fx;
            acc += wa * wb * wc * at(it + a, iy + b, ix + c);
          }
      v[node] = acc;
    }
    levels.push_back(std::move(v));
  }
  return SpaceTimeFunction(grid, times, std::move(levels), Boundary::dirichlet);
}

// ---------------------------------------------------------------------------
// Campanato machinery

ordered_json CampanatoPolicy::to_json() const {
  return {{"centers", "interior nodes"},
          {"time_stride", time_stride},
          {"space_stride", space_stride},
          {"radii", radii}};
}

CampanatoPolicy CampanatoPolicy::refined() const {
  CampanatoPolicy r;
  r.time_stride = std::max(1, time_stride / 2);
  r.space_stride = std::max(1, space_stride / 2);
  r.radii.clear();
  for (double rho : radii) {
    r.radii.push_back(rho);
    r.radii.push_back(rho / std::sqrt(2.0));
  }
  std::sort(r.radii.rbegin(), r.radii.rend());
  r.radii.erase(std::unique(r.radii.begin(), r.radii.end()), r.radii.end());
  return r;
}

namespace {

struct Cylinders {
  const SpaceTimeFunction& u;
  const Grid& g;
  double p;
  std::vector<double> wt;
  Vector mu;  // x_n^{p-1}
  double t_scale;

  Cylinders(const SpaceTimeFunction& f, double p_)
      : u(f), g(f.grid()), p(p_), wt(time_weights(f.times())), mu(f.grid().size()) {
    for (Index n = 0; n < g.size(); ++n) mu[n] = std::pow(u.xn(n), p - 1.0);
    t_scale = std::max({1.0, std::abs(f.times().front()), std::abs(f.times().back())});
  }

  std::vector<Index> ball(Index center, double r) const {
    std::vector<Index> out;
    const auto c = g.lattice(center);
    const double tol = 1e-12 * std::max(r, g.spacing(0));
    const Index rx = static_cast<Index>(std::floor(r / g.spacing(0) + 1e-9));
    const Index ry = g.dimension() == 2 ? static_cast<Index>(std::floor(r / g.spacing(1) + 1e-9)) : 0;
    const auto xc = g.point(center);
    for (Index iy = std::max<Index>(0, c[1] - ry); iy <= std::min(g.dimension() == 2 ? g.nodes(1) - 1 : 0, c[1] + ry); ++iy) {
      for (Index ix = std::max<Index>(0, c[0] - rx); ix <= std::min(g.nodes(0) - 1, c[0] + rx); ++ix) {
        const Index n = g.index(ix, iy);
        const auto x = g.point(n);
        const double dist = std::hypot(x[0] - xc[0], g.dimension() == 2 ? x[1] - xc[1] : 0.0);
        if (dist <= r + tol) out.push_back(n);
      }
    }
    return out;
  }

  // Levels with t in [a, b].
  std::pair<std::size_t, std::size_t> window(double a, double b) const {
    const auto& t = u.times();
    const double eps = 1e-13 * t_scale;
    const auto lo = std::lower_bound(t.begin(), t.end(), a - eps);
    const auto hi = std::upper_bound(t.begin(), t.end(), b + eps);
    return {static_cast<std::size_t>(lo - t.begin()), static_cast<std::size_t>(hi - t.begin())};
  }

  struct Sums {
    double w = 0.0, wu = 0.0, ref = 0.0;  // wu accumulates u - ref
    double mean() const { return ref + wu / w; }
  };

  Sums sums(const std::vector<Index>& nodes, std::pair<std::size_t, std::size_t> lv, bool weighted) const {
    Sums s;
    if (!nodes.empty() && lv.first < lv.second) s.ref = u.level(lv.first)[nodes.front()];
    const Vector& qw = g.quadrature_weights();
    for (std::size_t k = lv.first; k < lv.second; ++k) {
      const Vector& v = u.level(k);
      for (Index n : nodes) {
        const double w = qw[n] * wt[k] * (weighted ? mu[n] : 1.0);
        s.w += w;
        s.wu += w * (v[n] - s.ref);
      }
    }
    return s;
  }

  double mean_square(const std::vector<Index>& nodes, std::pair<std::size_t, std::size_t> lv, bool weighted,
                     double m, double* total = nullptr) const {
    const Vector& qw = g.quadrature_weights();
    double w_sum = 0.0, acc = 0.0;
    for (std::size_t k = lv.first; k < lv.second; ++k) {
      const Vector& v = u.level(k);
      for (Index n : nodes) {
        const double w = qw[n] * wt[k] * (weighted ? mu[n] : 1.0);
        w_sum += w;
        acc += w * (v[n] - m) * (v[n] - m);
      }
    }
    if (total) *total = w_sum;
    return w_sum > 0.0 ? acc / w_sum : 0.0;
  }

  // |xn rho|^{-2 alpha} mean_{Dtilde} |u - (u)_D|^2; nullopt when the cylinder has no measure.
  std::optional<double> interior(Index c, std::size_t k, double rho, double alpha) const {
    const double xn = u.xn(c);
    const double r = rho * xn, tau = std::pow(xn, p + 1.0) * rho * rho;
    const double tc = u.times()[k];
    const auto nodes = ball(c, r);
    const auto D = window(tc - tau, tc);
    const auto Dt = window(tc - tau, tc + tau);
    const Sums sD = sums(nodes, D, false);
    if (!(sD.w > 0.0)) return std::nullopt;
    const double osc = mean_square(nodes, Dt, false, sD.mean());
    return std::pow(r, -2.0 * alpha) * osc;
  }

  // R^{-2 alpha} mu-mean |u - (u)^mu|^2 over Qtilde_R(c); c on the face.
  std::optional<double> boundary(Index c, std::size_t k, double R, double alpha, double* mu_total = nullptr) const {
    const double tau = std::pow(R, p + 1.0);
    const double tc = u.times()[k];
    const auto nodes = ball(c, R);
    const auto Q = window(tc - tau, tc + tau);
    const Sums s = sums(nodes, Q, true);
    if (mu_total) *mu_total = s.w;
    if (!(s.w > 0.0)) return std::nullopt;
    return std::pow(R, -2.0 * alpha) * mean_square(nodes, Q, true, s.mean());
  }

  bool sampled(Index node, int space_stride) const {
    const auto l = g.lattice(node);
    return l[0] % space_stride == 0 && (g.dimension() == 1 || l[1] % space_stride == 0);
  }

  Index face_below(Index node) const {
    const auto l = g.lattice(node);
    return g.dimension() == 1 ? g.index(0) : g.index(l[0], 0);
  }
};

void check_policy(const CampanatoPolicy& pol) {
  if (pol.time_stride < 1 || pol.space_stride < 1) throw ParameterError("sampling strides must be >= 1");
  if (pol.radii.empty()) throw ParameterError("sampling policy needs at least one radius");
  for (double r : pol.radii)
    if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("sampling radii must be positive");
}

}  // namespace

CampanatoResult campanato_seminorm(const SpaceTimeFunction& u, double alpha, double p,
                                   const CampanatoPolicy& policy) {
  check_alpha(alpha);
  check_p(p);
  check_policy(policy);
  const Cylinders cyl(u, p);
  const Grid& g = u.grid();
  const int last = g.dimension() - 1;
  double sup_int = 0.0, sup_bdy = 0.0;
  CampanatoResult res;
  for (std::size_t k = 0; k < u.time_levels(); k += policy.time_stride) {
    for (Index c : g.interior_nodes()) {
      if (!cyl.sampled(c, policy.space_stride) || !(u.xn(c) > 0.0)) continue;
      for (double rho : policy.radii) {
        if (rho > 0.5) continue;
        const auto term = cyl.interior(c, k, rho, alpha);
        if (!term) {
          ++res.skipped;
          continue;
        }
        ++res.samples;
        sup_int = std::max(sup_int, *term);
      }
    }
    for (Index c = 0; c < g.size(); ++c) {
      if (g.lattice(c)[last] != 0 || !cyl.sampled(c, policy.space_stride)) continue;
      for (double R : policy.radii) {
        const auto term = cyl.boundary(c, k, R, alpha);
        if (!term) {
          ++res.skipped;
          continue;
        }
        ++res.samples;
        sup_bdy = std::max(sup_bdy, *term);
      }
    }
  }
  if (res.samples == 0) throw EstimationError("every Campanato sample had an empty intersection with Q");
  res.interior = std::sqrt(sup_int);
  res.boundary = std::sqrt(sup_bdy);
  res.value = res.interior + res.boundary;
  return res;
}

BridgeResult campanato_bridge(const SpaceTimeFunction& u, double alpha, double p, const CampanatoPolicy& policy) {
  check_alpha(alpha);
  check_p(p);
  check_policy(policy);
  const Cylinders cyl(u, p);
  const Grid& g = u.grid();
  BridgeResult res;
  for (std::size_t k = 0; k < u.time_levels(); k += policy.time_stride) {
    for (Index c : g.interior_nodes()) {
      const double xn = u.xn(c);
      if (!cyl.sampled(c, policy.space_stride) || !(xn > 0.0)) continue;
      const double tc = u.times()[k];
      const double tau = std::pow(xn, p + 1.0) / 4.0;
      const auto nodes = cyl.ball(c, xn / 2.0);
      const auto D = cyl.window(tc - tau, tc);
      const auto Dt = cyl.window(tc - tau, tc + tau);
      const auto sD = cyl.sums(nodes, D, false);
      const auto sDt = cyl.sums(nodes, Dt, false);
      const auto mDt = cyl.sums(nodes, Dt, true);
      double mu_Q = 0.0;
      const auto rhs = cyl.boundary(cyl.face_below(c), k, 2.0 * xn, alpha, &mu_Q);
      if (!(sD.w > 0.0) || !rhs || !(mDt.w > 0.0)) continue;

      BridgeSample s;
      s.node = c;
      s.level = k;
      s.lhs = std::pow(xn / 2.0, -2.0 * alpha) * cyl.mean_square(nodes, Dt, false, sD.mean());
      s.rhs = *rhs;
      double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
      for (Index n : nodes) {
        wmin = std::min(wmin, cyl.mu[n]);
        wmax = std::max(wmax, cyl.mu[n]);
      }
      // mean shift D -> Dtilde, Lebesgue -> mu, Dtilde -> Qtilde, radius 1/2 x_n -> 2 x_n
      s.constant = 2.0 * (1.0 + sDt.w / sD.w) * (wmax / wmin) * (mu_Q / mDt.w) * std::pow(4.0, 2.0 * alpha);
      res.constant = std::max(res.constant, s.constant);
      const double bound = s.constant * s.rhs;
      if (s.lhs > bound * (1.0 + 1e-12) + 1e-300) res.holds = false;
      if (bound > 0.0) res.worst_ratio = std::max(res.worst_ratio, s.lhs / bound);
      res.samples.push_back(s);
    }
  }
  if (res.samples.empty()) throw EstimationError("no interior center admitted a bridge comparison");
  return res;
}

HolderResult weighted_holder_seminorm(const SpaceTimeFunction& u, double alpha, double p) {
  check_alpha(alpha);
  check_p(p);
  if (u.time_levels() < 2) throw EstimationError("time quotients need at least two time levels");
  const Grid& g = u.grid();
  const Index N = g.size();
  std::vector<std::array<double, 2>> x(N);
  Vector wx(N);
  for (Index n = 0; n < N; ++n) {
    x[n] = g.point(n);
    wx[n] = std::pow(u.xn(n), (p - 1.0) * alpha / 2.0);
  }
  HolderResult r;
  for (const Vector& v : u.levels()) {
    for (Index a = 0; a < N; ++a) {
      for (Index b = a + 1; b < N; ++b) {
        const double d = std::hypot(x[a][0] - x[b][0], x[a][1] - x[b][1]);
        r.spatial = std::max(r.spatial, std::abs(v[a] - v[b]) / std::pow(d, alpha));
      }
    }
  }
  const auto& t = u.times();
  const double e_t = alpha / (p + 1.0), e_w = alpha / 2.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double dt = t[j] - t[i];
      const double qt = std::pow(dt, e_t), qw = std::pow(dt, e_w);
      const Vector diff = (u.level(j) - u.level(i)).cwiseAbs();
      r.temporal = std::max(r.temporal, diff.maxCoeff() / qt);
      r.weighted = std::max(r.weighted, diff.cwiseProduct(wx).maxCoeff() / qw);
    }
  }
  r.value = r.spatial + r.temporal + r.weighted;
  return r;
}

double easy_direction_constant(double alpha, double p) {
  check_alpha(alpha);
  check_p(p);
  return std::max(std::pow(2.0, alpha), std::pow(2.0, p * alpha / 2.0)) + std::pow(2.0, alpha);
}

// ---------------------------------------------------------------------------
// ODE comparison

namespace {

void check_ode(double alpha, double mu1, double mu2, double mu3, double zeta0, double I) {
  auto bad = [](const std::string& what) { throw ParameterError(what); };
  if (!(alpha > 0.0) || !std::isfinite(alpha)) bad("alpha must be positive");
  if (!(mu1 > 0.0) || !std::isfinite(mu1)) bad("mu1 must be positive");
  if (!(mu2 >= 0.0 && mu2 < 1.0)) bad("mu2 must lie in [0,1)");
  if (!(mu3 >= 0.0 && mu3 <= 1.0)) bad("mu3 must lie in [0,1]");
  if (!(zeta0 >= 0.0) || !std::isfinite(zeta0)) bad("zeta0 must be >= 0");
  if (!(I >= 0.0) || !std::isfinite(I)) bad("the integral of zeta^mu1 must be >= 0");
}

}  // namespace

double ode_H(double mu2, double mu3, double zeta) {
  if (!(mu2 >= 0.0 && mu2 < 1.0) || !(mu3 >= 0.0 && mu3 <= 1.0)) throw ParameterError("mu2 in [0,1), mu3 in [0,1] required");
  if (!(zeta >= 0.0)) throw DomainError("H is defined for zeta >= 0");
  if (zeta == 0.0) return 0.0;
  if (mu2 == 0.0 && mu3 == 1.0) return std::log1p(zeta);
  if (mu2 == mu3) return std::pow(zeta, 1.0 - mu2) / (2.0 * (1.0 - mu2));
  using boost::math::quadrature::gauss_kronrod;
  // s = y^q with q = 1/(1-m), m = min(mu2, mu3), turns the integrand on [0, min(zeta,1)]
  // into q / (1 + y^{q(M-m)}), bounded and continuous.
  const double m = std::min(mu2, mu3), M = std::max(mu2, mu3), q = 1.0 / (1.0 - m);
  auto gy0 = [&](double y) { return q / (1.0 + std::pow(y, q * (M - m))); };
  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  double H = ts.integrate(gy0, 0.0, std::pow(std::min(zeta, 1.0), 1.0 / q), 1e-13);
  if (zeta > 1.0) {
    // s = e^y on [1, zeta]
    auto gy = [&](double y) { return 1.0 / (std::exp((mu2 - 1.0) * y) + std::exp((mu3 - 1.0) * y)); };
    H += gauss_kronrod<double, 31>::integrate(gy, 0.0, std::log(zeta), 15, 1e-13);
  }
  return H;
}

double ode_bound(double alpha, double mu1, double mu2, double mu3, double zeta0, double integral_zeta_mu1) {
  check_ode(alpha, mu1, mu2, mu3, zeta0, integral_zeta_mu1);
  const double target = ode_H(mu2, mu3, zeta0) + alpha * integral_zeta_mu1;
  if (mu2 == 0.0 && mu3 == 1.0) return std::expm1(target);
  if (mu2 == mu3) return std::pow(2.0 * (1.0 - mu2) * target, 1.0 / (1.0 - mu2));
  double lo = 0.0, hi = 1e3 * (zeta0 + 1.0) * std::exp(alpha * integral_zeta_mu1);
  if (!std::isfinite(hi)) throw DomainError("ode bound bracket overflows");
  while (ode_H(mu2, mu3, hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw DomainError("ode bound bracket overflows");
  }
  while (hi - lo > 1e-12 * std::max(hi, 1e-300)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (ode_H(mu2, mu3, mid) < target ? lo : hi) = mid;
  }
  return hi;
}

OdeOracle ode_rk4_oracle(double alpha, double mu1, double mu2, double mu3, double zeta0, double integral) {
  check_ode(alpha, mu1, mu2, mu3, zeta0, integral);
  if (!(zeta0 > 0.0)) throw ParameterError("RK oracle needs zeta0 > 0");
  auto rhs = [&](double z) {
    const double zp = std::pow(z, mu1);
    return std::array<double, 2>{alpha * zp * (std::pow(z, mu2) + std::pow(z, mu3)), zp};
  };
  OdeOracle out;
  double z = zeta0, J = 0.0, next_mark = 0.1 * integral;
  auto checkpoint = [&] {
    const double bound = ode_bound(alpha, mu1, mu2, mu3, zeta0, J);
    out.worst_excess = std::max(out.worst_excess, (z - bound) / bound);
    ++out.checkpoints;
  };
  while (J < integral) {
    const auto k0 = rhs(z);
    // 1e-3 relative growth per step, and at least 2000 steps over the integral
    double h = std::min(1e-3 * z / k0[0], integral / (2000.0 * k0[1]));
    bool last = false;
    if (J + h * k0[1] >= integral) {
      h = (integral - J) / k0[1];
      last = true;
    }
    const auto k1 = rhs(z + 0.5 * h * k0[0]);
    const auto k2 = rhs(z + 0.5 * h * k1[0]);
    const auto k3 = rhs(z + h * k2[0]);
    z += h / 6.0 * (k0[0] + 2.0 * k1[0] + 2.0 * k2[0] + k3[0]);
    J += h / 6.0 * (k0[1] + 2.0 * k1[1] + 2.0 * k2[1] + k3[1]);
    ++out.steps;
    // one checkpoint per tenth of the integral, plus the end
    if (last || J >= next_mark) {
      checkpoint();
      next_mark += 0.1 * integral;
    }
    if (last || out.steps > 10000000) break;
  }
  out.zeta_end = z;
  out.integral_end = J;
  return out;
}

ordered_json norm_json(double value, const ordered_json& policy,
                       const std::vector<std::pair<std::string, double>>& refinement) {
  ordered_json series = ordered_json::array();
  for (const auto& [label, v] : refinement) series.push_back({{"label", label}, {"value", v}});
  return {{"value", value}, {"policy", policy}, {"refinement_series", series}};
}

}  // namespace fdelab
