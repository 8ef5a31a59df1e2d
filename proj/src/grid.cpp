#include "fdelab/grid.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fdelab/errors.hpp"

namespace fdelab {

Grid::Grid(int dimension, const std::vector<Interval>& extents,
           const std::vector<Index>& nodes)
    : dimension_(dimension) {
  if (dimension != 1 && dimension != 2) {
    throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dimension));
  }
  if (extents.size() != static_cast<std::size_t>(dimension) ||
      nodes.size() != static_cast<std::size_t>(dimension)) {
    throw ConfigError("grid needs one extent and one node count per axis");
  }
  size_ = 1;
  for (int k = 0; k < dimension; ++k) {
    const auto& e = extents[k];
    if (!(std::isfinite(e.lo) && std::isfinite(e.hi)) || !(e.hi > e.lo)) {
      throw ConfigError("degenerate extent on axis " + std::to_string(k));
    }
    if (nodes[k] < 3) {
      throw ConfigError("need at least 3 nodes per axis, got " + std::to_string(nodes[k]) +
                        " on axis " + std::to_string(k));
    }
    axes_.push_back({e.lo, e.hi, nodes[k], (e.hi - e.lo) / static_cast<double>(nodes[k] - 1)});
    size_ *= nodes[k];
  }

  boundary_.assign(size_, false);
  slot_.assign(size_, -1);
  weights_.resize(size_);
  for (Index n = 0; n < size_; ++n) {
    const auto ij = lattice(n);
    bool edge = false;
    double w = 1.0;
    for (int k = 0; k < dimension_; ++k) {
      const bool end = ij[k] == 0 || ij[k] == axes_[k].nodes - 1;
      edge = edge || end;
      w *= end ? 0.5 * axes_[k].h : axes_[k].h;
    }
    boundary_[n] = edge;
    weights_[n] = w;
    if (!edge) {
      slot_[n] = static_cast<Index>(interior_.size());
      interior_.push_back(n);
    }
  }
}

std::array<Index, 2> Grid::lattice(Index node) const {
  const Index nx = axes_[0].nodes;
  return {node % nx, node / nx};
}

double Grid::coordinate(Index node, int k) const {
  const auto ij = lattice(node);
  const auto& a = axes_[k];
  if (ij[k] == a.nodes - 1) return a.hi;
  return a.lo + (a.hi - a.lo) * static_cast<double>(ij[k]) / static_cast<double>(a.nodes - 1);
}

std::array<double, 2> Grid::point(Index node) const {
  std::array<double, 2> x{0.0, 0.0};
  for (int k = 0; k < dimension_; ++k) x[k] = coordinate(node, k);
  return x;
}

double Grid::cell_measure() const {
  double m = 1.0;
  for (const auto& a : axes_) m *= a.h;
  return m;
}

bool Grid::same_lattice(const Grid& other) const {
  if (this == &other) return true;
  if (dimension_ != other.dimension_) return false;
  for (int k = 0; k < dimension_; ++k) {
    const auto& a = axes_[k];
    const auto& b = other.axes_[k];
    if (a.lo != b.lo || a.hi != b.hi || a.nodes != b.nodes) return false;
  }
  return true;
}

std::string Grid::describe() const {
  std::ostringstream os;
  os << dimension_ << "D";
  for (const auto& a : axes_) os << " [" << a.lo << "," << a.hi << "]x" << a.nodes;
  return os.str();
}

GridPtr build_grid(int dimension, const std::vector<Interval>& extents,
                   const std::vector<Index>& nodes) {
  return std::make_shared<const Grid>(dimension, extents, nodes);
}

GridFunction::GridFunction(GridPtr grid, Vector values, Boundary tag)
    : grid_(std::move(grid)), values_(std::move(values)), tag_(tag) {
  if (!grid_) throw ContractError("grid function without a grid");
  if (values_.size() != grid_->size()) {
    throw ContractError("grid function has " + std::to_string(values_.size()) +
                        " values for a grid of " + std::to_string(grid_->size()) + " nodes");
  }
  if (tag_ == Boundary::dirichlet) {
    for (Index n = 0; n < grid_->size(); ++n) {
      if (grid_->on_boundary(n) && values_[n] != 0.0) {
        throw ContractError("Dirichlet-tagged function is nonzero on boundary node " +
                            std::to_string(n));
      }
    }
  }
}

GridFunction GridFunction::zeros(GridPtr grid, Boundary tag) {
  const Index n = grid->size();
  return GridFunction(std::move(grid), Vector::Zero(n), tag);
}

GridFunction GridFunction::with_values(Vector values) const {
  return GridFunction(grid_, std::move(values), tag_);
}

DistanceField distance_field(const GridPtr& grid) {
  Vector d(grid->size());
  for (Index n = 0; n < grid->size(); ++n) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid->dimension(); ++k) {
      const double x = grid->coordinate(n, k);
      const auto& a = grid->axis(k);
      best = std::min({best, x - a.lo, a.hi - x});
    }
    d[n] = grid->on_boundary(n) ? 0.0 : best;
  }
  return DistanceField(GridFunction(grid, std::move(d), Boundary::dirichlet));
}

double discrete_lambda1(const Grid& grid) {
  double lambda = 0.0;
  for (int k = 0; k < grid.dimension(); ++k) {
    const auto& a = grid.axis(k);
    const double s = std::sin(std::numbers::pi * a.h / (2.0 * (a.hi - a.lo)));
    lambda += 4.0 / (a.h * a.h) * s * s;
  }
  return lambda;
}

Vector apply_laplacian(const Grid& grid, const Vector& f) {
  Vector out = Vector::Zero(grid.size());
  const Index nx = grid.nodes(0);
  const double ix2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
  const double iy2 = grid.dimension() == 2 ? 1.0 / (grid.spacing(1) * grid.spacing(1)) : 0.0;
  for (Index n : grid.interior_nodes()) {
    double v = (f[n + 1] - 2.0 * f[n] + f[n - 1]) * ix2;
    if (grid.dimension() == 2) v += (f[n + nx] - 2.0 * f[n] + f[n - nx]) * iy2;
    out[n] = v;
  }
  return out;
}

SparseMatrix negative_laplacian_matrix(const Grid& grid) {
  const Index m = grid.interior_size();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(m) * (1 + 2 * grid.dimension()));
  const Index nx = grid.nodes(0);
  for (int k = 0; k < grid.dimension(); ++k) {
    const double c = 1.0 / (grid.spacing(k) * grid.spacing(k));
    const Index stride = k == 0 ? 1 : nx;
    for (Index r = 0; r < m; ++r) {
      const Index n = grid.interior_nodes()[r];
      entries.emplace_back(r, r, 2.0 * c);
      for (Index nb : {n - stride, n + stride}) {
        const Index s = grid.interior_slot(nb);
        if (s >= 0) entries.emplace_back(r, s, -c);
      }
    }
  }
  SparseMatrix A(m, m);
  A.setFromTriplets(entries.begin(), entries.end());
  A.makeCompressed();
  return A;
}

Vector restrict_to_interior(const Grid& grid, const Vector& full) {
  Vector out(grid.interior_size());
  for (Index r = 0; r < out.size(); ++r) out[r] = full[grid.interior_nodes()[r]];
  return out;
}

Vector extend_from_interior(const Grid& grid, const Vector& interior) {
  Vector out = Vector::Zero(grid.size());
  for (Index r = 0; r < interior.size(); ++r) out[grid.interior_nodes()[r]] = interior[r];
  return out;
}

GridFunction laplacian(const GridFunction& f) {
  if (!f.is_dirichlet()) throw ContractError("laplacian needs a Dirichlet-tagged function");
  return GridFunction(f.grid_ptr(), apply_laplacian(f.grid(), f.values()), Boundary::dirichlet);
}

double integrate(const Grid& grid, const Vector& f) {
  if (f.size() != grid.size()) throw ContractError("integrand size does not match grid");
  return grid.quadrature_weights().dot(f);
}

double integrate(const GridFunction& f) { return integrate(f.grid(), f.values()); }

double integrate(const GridFunction& f, const GridFunction& weight) {
  if (!f.grid().same_lattice(weight.grid())) {
    throw ContractError("integrand and weight live on different grids");
  }
  return f.grid().quadrature_weights().dot(f.values().cwiseProduct(weight.values()));
}

double dirichlet_energy(const Grid& grid, const Vector& f) {
  const double hx = grid.spacing(0);
  const Index nx = grid.nodes(0);
  if (grid.dimension() == 1) {
    double e = 0.0;
    for (Index i = 0; i + 1 < nx; ++i) {
      const double g = (f[i + 1] - f[i]) / hx;
      e += g * g * hx;
    }
    return e;
  }
  const double hy = grid.spacing(1);
  const Index ny = grid.nodes(1);
  double e = 0.0;
  for (Index j = 0; j + 1 < ny; ++j) {
    for (Index i = 0; i + 1 < nx; ++i) {
      const Index a = grid.index(i, j), b = grid.index(i + 1, j);
      const Index c = grid.index(i, j + 1), d = grid.index(i + 1, j + 1);
      const double gx0 = (f[b] - f[a]) / hx, gx1 = (f[d] - f[c]) / hx;
      const double gy0 = (f[c] - f[a]) / hy, gy1 = (f[d] - f[b]) / hy;
      e += 0.5 * (gx0 * gx0 + gx1 * gx1 + gy0 * gy0 + gy1 * gy1) * hx * hy;
    }
  }
  return e;
}

double dirichlet_energy(const GridFunction& f) { return dirichlet_energy(f.grid(), f.values()); }

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const GridFunction& f) {
  const Grid& g = f.grid();
  out << (g.dimension() == 1 ? "x,value\n" : "x,y,value\n");
  for (Index n = 0; n < g.size(); ++n) {
    const auto x = g.point(n);
    out << format_double(x[0]) << ',';
    if (g.dimension() == 2) out << format_double(x[1]) << ',';
    out << format_double(f[n]) << '\n';
  }
}

void write_csv(const std::string& path, const GridFunction& f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  write_csv(out, f);
}

namespace {

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("malformed number in CSV: '" + token + "'");
  }
  return v;
}

}  // namespace

GridFunction read_csv(std::istream& in, GridPtr grid, Boundary tag) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty grid function CSV");
  const std::string expected = grid->dimension() == 1 ? "x,value" : "x,y,value";
  if (line != expected) throw ConfigError("unexpected CSV header '" + line + "'");
  Vector v(grid->size());
  Index n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (n >= grid->size()) throw ConfigError("CSV has more rows than grid nodes");
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(parse_double(tok));
    if (cols.size() != static_cast<std::size_t>(grid->dimension() + 1)) {
      throw ConfigError("CSV row " + std::to_string(n) + " has the wrong column count");
    }
    const auto x = grid->point(n);
    for (int k = 0; k < grid->dimension(); ++k) {
      const auto& a = grid->axis(k);
      if (std::abs(cols[k] - x[k]) > 1e-12 * (a.hi - a.lo)) {
        throw ConfigError("CSV row " + std::to_string(n) + " is not at the expected node");
      }
    }
    v[n++] = cols.back();
  }
  if (n != grid->size()) throw ConfigError("CSV has fewer rows than grid nodes");
  return GridFunction(std::move(grid), std::move(v), tag);
}

GridFunction read_csv(const std::string& path, GridPtr grid, Boundary tag) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_csv(in, std::move(grid), tag);
}

}  // namespace fdelab
