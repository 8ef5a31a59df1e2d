#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace fdelab {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct Axis {
  double lo;
  double hi;
  Index nodes;
  double h;
};

/// Uniform tensor lattice over a closed interval or rectangle.
///
/// Nodes are numbered row-major over the lattice with the x index running
/// fastest: node = iy * nx + ix. The boundary mask is the topological
/// boundary of the lattice.
class Grid {
 public:
  Grid(int dimension, const std::vector<Interval>& extents,
       const std::vector<Index>& nodes);

  int dimension() const { return dimension_; }
  const Axis& axis(int k) const { return axes_[k]; }
  Index nodes(int k) const { return axes_[k].nodes; }
  double spacing(int k) const { return axes_[k].h; }
  Index size() const { return size_; }

  Index index(Index ix, Index iy = 0) const { return iy * axes_[0].nodes + ix; }
  std::array<Index, 2> lattice(Index node) const;
  std::array<double, 2> point(Index node) const;
  double coordinate(Index node, int k) const;

  bool on_boundary(Index node) const { return boundary_[node]; }
  const std::vector<bool>& boundary_mask() const { return boundary_; }
  const std::vector<Index>& interior_nodes() const { return interior_; }
  Index interior_size() const { return static_cast<Index>(interior_.size()); }
  /// Position of a node in interior_nodes(), or -1 for boundary nodes.
  Index interior_slot(Index node) const { return slot_[node]; }

  /// Trapezoidal (tensor-trapezoidal in 2D) quadrature weights per node.
  const Vector& quadrature_weights() const { return weights_; }
  double cell_measure() const;

  bool same_lattice(const Grid& other) const;
  std::string describe() const;

 private:
  int dimension_;
  std::vector<Axis> axes_;
  Index size_;
  std::vector<bool> boundary_;
  std::vector<Index> interior_;
  std::vector<Index> slot_;
  Vector weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(int dimension, const std::vector<Interval>& extents,
                   const std::vector<Index>& nodes);

enum class Boundary { free, dirichlet };

/// Nodal values on a grid. Immutable once constructed.
class GridFunction {
 public:
  GridFunction(GridPtr grid, Vector values, Boundary tag = Boundary::free);

  static GridFunction zeros(GridPtr grid, Boundary tag = Boundary::dirichlet);

  /// Samples f at every node. Dirichlet-tagged samples are forced to zero on
  /// boundary nodes. f is called as f(x) in 1D and f(x, y) in 2D.
  template <class F>
  static GridFunction sample(GridPtr grid, F&& f, Boundary tag = Boundary::free) {
    Vector v(grid->size());
    for (Index n = 0; n < grid->size(); ++n) {
      if (tag == Boundary::dirichlet && grid->on_boundary(n)) {
        v[n] = 0.0;
        continue;
      }
      const auto x = grid->point(n);
      if constexpr (std::is_invocable_v<F, double>) {
        v[n] = f(x[0]);
      } else {
        v[n] = f(x[0], x[1]);
      }
    }
    return GridFunction(std::move(grid), std::move(v), tag);
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Vector& values() const { return values_; }
  double operator[](Index n) const { return values_[n]; }
  Index size() const { return values_.size(); }
  bool is_dirichlet() const { return tag_ == Boundary::dirichlet; }
  Boundary tag() const { return tag_; }
  double max_abs() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

  /// Same grid and tag, new values (validated like the constructor).
  GridFunction with_values(Vector values) const;

 private:
  GridPtr grid_;
  Vector values_;
  Boundary tag_;
};

/// d(x) = dist(x, boundary) sampled at the nodes.
class DistanceField {
 public:
  explicit DistanceField(GridFunction d) : d_(std::move(d)) {}
  const GridFunction& function() const { return d_; }
  const Vector& values() const { return d_.values(); }
  double operator[](Index n) const { return d_[n]; }
  const Grid& grid() const { return d_.grid(); }

 private:
  GridFunction d_;
};

DistanceField distance_field(const GridPtr& grid);

/// Smallest eigenvalue of the 5-point (3-point in 1D) Dirichlet Laplacian,
/// in closed form for the uniform rectangle lattice.
double discrete_lambda1(const Grid& grid);

/// Applies the centered second-difference Laplacian at interior nodes of a
/// full nodal vector. Boundary entries of the result are zero.
Vector apply_laplacian(const Grid& grid, const Vector& f);

/// -Delta_h restricted to interior unknowns (ordered as interior_nodes()).
SparseMatrix negative_laplacian_matrix(const Grid& grid);

Vector restrict_to_interior(const Grid& grid, const Vector& full);
Vector extend_from_interior(const Grid& grid, const Vector& interior);

GridFunction laplacian(const GridFunction& f);

double integrate(const GridFunction& f);
double integrate(const GridFunction& f, const GridFunction& weight);
/// Raw quadrature of a nodal vector on the grid.
double integrate(const Grid& grid, const Vector& f);

/// Cell-averaged squared forward differences times the cell measure. For
/// Dirichlet f this equals integrate(-laplacian(f) * f) exactly.
double dirichlet_energy(const GridFunction& f);
double dirichlet_energy(const Grid& grid, const Vector& f);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

void write_csv(std::ostream& out, const GridFunction& f);
void write_csv(const std::string& path, const GridFunction& f);
/// Reads a CSV written by write_csv; coordinates must match `grid` node by node.
GridFunction read_csv(std::istream& in, GridPtr grid, Boundary tag = Boundary::free);
GridFunction read_csv(const std::string& path, GridPtr grid, Boundary tag = Boundary::free);

}  // namespace fdelab
