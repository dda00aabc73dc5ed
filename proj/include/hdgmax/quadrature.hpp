#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

#include "hdgmax/types.hpp"

namespace hdgmax {

enum class Domain { tetrahedron, triangle };

/// Highest polynomial degree make_quadrature accepts.
inline constexpr int max_quadrature_degree = 40;

/// Integration rule on the reference tetrahedron {x, y, z >= 0, x + y + z <= 1}
/// (measure 1/6) or the reference triangle {s, t >= 0, s + t <= 1} (measure 1/2;
/// the third coordinate of each point is zero).
struct QuadratureRule {
  Domain domain = Domain::tetrahedron;
  std::vector<Vec3> points;
  std::vector<real> weights;
  int exactness_degree = 0;

  std::size_t size() const { return weights.size(); }
};

namespace detail {

struct GaussRule1d {
  std::vector<real> x; // in [0, 1]
  std::vector<real> w;
};

/// m-point Gauss-Jacobi rule for the weight (1 - x)^alpha on [0, 1], from the
/// Golub-Welsch eigenvalue problem of the Jacobi recurrence (beta = 0).
inline GaussRule1d gauss_jacobi_unit(int m, int alpha) {
  const real a = alpha;
  const real b = 0.0;
  Eigen::VectorXd diag(m), off(m > 1 ? m - 1 : 0);
  for (int k = 0; k < m; ++k) {
    const real s = 2.0 * k + a + b;
    diag(k) = (k == 0) ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
  }
  for (int k = 1; k < m; ++k) {
    const real s = 2.0 * k + a + b;
    off(k - 1) = std::sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0)));
  }
  GaussRule1d rule;
  rule.x.resize(m);
  rule.w.resize(m);
  // Integral of (1-t)^alpha over [-1, 1].
  const real mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);
  if (m == 1) {
    rule.x[0] = 0.5 * (1.0 + diag(0));
    rule.w[0] = mu0 * std::pow(0.5, a + 1.0);
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  for (int i = 0; i < m; ++i) {
    const real v0 = eig.eigenvectors()(0, i);
    rule.x[i] = 0.5 * (1.0 + eig.eigenvalues()(i));
    rule.w[i] = mu0 * v0 * v0 * std::pow(0.5, a + 1.0);
  }
  return rule;
}

} // namespace detail

/// Conical-product (collapsed coordinate) rule exact for total degree
/// >= degree_needed. Weights are positive.
inline QuadratureRule make_quadrature(Domain domain, int degree_needed) {
  if (degree_needed < 0) throw invalid_argument("quadrature degree must be >= 0");
  if (degree_needed > max_quadrature_degree)
    throw invalid_argument("quadrature degree " + std::to_string(degree_needed) + " exceeds the implemented maximum " +
                           std::to_string(max_quadrature_degree));
  const int m = (degree_needed + 2) / 2;
  QuadratureRule rule;
  rule.domain = domain;
  rule.exactness_degree = 2 * m - 1;

  if (domain == Domain::triangle) {
    const auto ga = detail::gauss_jacobi_unit(m, 1);
    const auto gb = detail::gauss_jacobi_unit(m, 0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const real a = ga.x[i], b = gb.x[j];
        rule.points.emplace_back(a, b * (1.0 - a), 0.0);
        rule.weights.push_back(ga.w[i] * gb.w[j]);
      }
    return rule;
  }

  const auto ga = detail::gauss_jacobi_unit(m, 2);
  const auto gb = detail::gauss_jacobi_unit(m, 1);
  const auto gc = detail::gauss_jacobi_unit(m, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const real a = ga.x[i], b = gb.x[j], c = gc.x[k];
        rule.points.emplace_back(a, b * (1.0 - a), c * (1.0 - a) * (1.0 - b));
        rule.weights.push_back(ga.w[i] * gb.w[j] * gc.w[k]);
      }
  return rule;
}

} // namespace hdgmax
