#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "fdelab/errors.hpp"
#include "fdelab/grid.hpp"

using namespace fdelab;

TEST_CASE("grid construction rejects bad layouts") {
  CHECK_THROWS_AS(build_grid(3, {{0, 1}, {0, 1}, {0, 1}}, {5, 5, 5}), ConfigError);
  CHECK_THROWS_AS(build_grid(1, {{0, 1}}, {2}), ConfigError);
  CHECK_THROWS_AS(build_grid(1, {{1, 1}}, {5}), ConfigError);
  CHECK_THROWS_AS(build_grid(2, {{0, 1}}, {5}), ConfigError);
}

TEST_CASE("lattice indexing and boundary mask") {
  const auto g = build_grid(2, {{0, 1}, {0, 2}}, {5, 9});
  CHECK(g->size() == 45);
  CHECK(g->interior_size() == 3 * 7);
  const Index n = g->index(2, 3);
  CHECK(g->lattice(n)[0] == 2);
  CHECK(g->lattice(n)[1] == 3);
  CHECK(g->point(n)[0] == doctest::Approx(0.5));
  CHECK(g->point(n)[1] == doctest::Approx(0.75));
  CHECK(g->coordinate(g->index(4, 8), 1) == 2.0);
  CHECK(g->on_boundary(g->index(0, 3)));
  CHECK_FALSE(g->on_boundary(n));
  CHECK(g->interior_slot(g->index(0, 0)) == -1);
}

TEST_CASE("trapezoid weights integrate bilinear functions exactly") {
  const auto g = build_grid(2, {{0, 1}, {0, 2}}, {5, 9});
  CHECK(g->quadrature_weights().sum() == doctest::Approx(2.0).epsilon(1e-14));
  const auto f = GridFunction::sample(g, [](double x, double y) { return 1.0 + x + 2.0 * y + x * y; });
  // int_0^1 int_0^2 (1 + x + 2y + xy) dy dx = 2 + 1 + 4 + 1
  CHECK(integrate(f) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("discrete Laplacian is exact on quadratics") {
  const auto g1 = build_grid(1, {{-1, 2}}, {13});
  const Vector l1 = apply_laplacian(*g1, GridFunction::sample(g1, [](double x) { return x * x; }).values());
  for (Index n : g1->interior_nodes()) CHECK(l1[n] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(l1[0] == 0.0);

  const auto g2 = build_grid(2, {{0, 1}, {0, 1}}, {7, 11});
  const Vector l2 = apply_laplacian(*g2, GridFunction::sample(g2, [](double x, double y) { return x * x + 3 * y * y; }).values());
  for (Index n : g2->interior_nodes()) CHECK(l2[n] == doctest::Approx(8.0).epsilon(1e-10));
}

TEST_CASE("closed-form lambda_1 agrees with a dense eigen-solve") {
  for (const auto& g : {build_grid(1, {{0, 1}}, {21}), build_grid(2, {{0, 1}, {0, 2}}, {9, 13})}) {
    const Eigen::MatrixXd A = Eigen::MatrixXd(negative_laplacian_matrix(*g));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    CHECK(discrete_lambda1(*g) == doctest::Approx(es.eigenvalues()[0]).epsilon(1e-12));
  }
  // continuum limit on the unit interval
  CHECK(discrete_lambda1(*build_grid(1, {{0, 1}}, {1001})) == doctest::Approx(M_PI * M_PI).epsilon(1e-5));
}

TEST_CASE("Dirichlet energy equals the summed-by-parts form") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (const auto& g : {build_grid(1, {{0, 2}}, {17}), build_grid(2, {{0, 1}, {0, 1}}, {9, 7})}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto f = GridFunction::sample(g, [&](double, double = 0) { return U(rng); }, Boundary::dirichlet);
      const double lhs = dirichlet_energy(f);
      const double rhs = integrate(*g, (-laplacian(f).values()).cwiseProduct(f.values()));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("Dirichlet tag is enforced") {
  const auto g = build_grid(1, {{0, 1}}, {5});
  Vector v = Vector::Ones(5);
  CHECK_THROWS_AS(GridFunction(g, v, Boundary::dirichlet), ContractError);
  v[0] = v[4] = 0.0;
  CHECK_NOTHROW(GridFunction(g, v, Boundary::dirichlet));
  CHECK_THROWS_AS(GridFunction(g, Vector::Ones(4)), ContractError);
}

TEST_CASE("distance field") {
  const auto g = build_grid(2, {{0, 1}, {0, 2}}, {5, 9});
  const DistanceField d = distance_field(g);
  CHECK(d[g->index(1, 4)] == doctest::Approx(0.25));
  CHECK(d[g->index(2, 4)] == doctest::Approx(0.5));
  CHECK(d[g->index(0, 4)] == 0.0);
}

TEST_CASE("CSV round trip is bit exact") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1e3, 1e3);
  const auto g = build_grid(2, {{-1, 1}, {0, 0.3}}, {6, 5});
  const auto f = GridFunction::sample(g, [&](double, double) { return U(rng) * std::exp(U(rng) / 50.0); });
  std::stringstream ss;
  write_csv(ss, f);
  const auto back = read_csv(ss, g);
  CHECK((back.values().array() == f.values().array()).all());

  std::stringstream again;
  write_csv(again, f);
  CHECK_THROWS_AS(read_csv(again, build_grid(2, {{-1, 1}, {0, 0.4}}, {6, 5})), ConfigError);
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-300, 300);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::pow(10.0, U(rng)) * (i % 2 ? -1 : 1);
    CHECK(std::stod(format_double(x)) == x);
  }
}
