#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hdgmax/quadrature.hpp"
#include "hdgmax/types.hpp"

namespace hdgmax {

/// Highest polynomial order make_basis accepts. Orders above 3 work but are untuned.
inline constexpr int max_basis_degree = 6;

constexpr int volume_dimension(int p) { return (p + 1) * (p + 2) * (p + 3) / 6; }
constexpr int face_dimension(int p) { return (p + 1) * (p + 2) / 2; }

/// Values and reference gradients of the volume basis at the points of a rule.
struct VolumeTable {
  RMatrix values;                 // nq x dim
  std::array<RMatrix, 3> grads;   // d/dxi_c, each nq x dim
};

/// L2-orthonormal modal bases of P_p on the reference tetrahedron and the
/// reference triangle. Basis functions are ordered by degree, so the leading
/// dim(P_k) functions span P_k.
class ReferenceBasis {
public:
  int degree = 0;
  int dim_volume = 0;
  int dim_face = 0;

  /// phi_i = sum_m volume_coefficients(i, m) * monomial_m(xi - 1/4).
  RMatrix volume_coefficients;
  /// psi_k = sum_m face_coefficients(k, m) * monomial_m((s, t) - 1/3).
  RMatrix face_coefficients;
  std::vector<std::array<int, 3>> volume_exponents;
  std::vector<std::array<int, 2>> face_exponents;

  RVector eval_volume(const Vec3& xi) const { return volume_coefficients * volume_monomials(xi); }

  /// dim_volume x 3 matrix of reference gradients.
  Eigen::Matrix<real, Eigen::Dynamic, 3> grad_volume(const Vec3& xi) const {
    Eigen::Matrix<real, Eigen::Dynamic, 3> g(dim_volume, 3);
    for (int c = 0; c < 3; ++c) g.col(c) = volume_coefficients * volume_monomial_derivative(xi, c);
    return g;
  }

  RVector eval_face(real s, real t) const { return face_coefficients * face_monomials(s, t); }

  VolumeTable tabulate_volume(const QuadratureRule& rule) const {
    const auto nq = static_cast<Eigen::Index>(rule.size());
    VolumeTable table;
    table.values.resize(nq, dim_volume);
    for (auto& g : table.grads) g.resize(nq, dim_volume);
    for (Eigen::Index q = 0; q < nq; ++q) {
      const Vec3& xi = rule.points[q];
      table.values.row(q) = eval_volume(xi).transpose();
      for (int c = 0; c < 3; ++c) table.grads[c].row(q) = (volume_coefficients * volume_monomial_derivative(xi, c)).transpose();
    }
    return table;
  }

  /// nq x dim_face values at the points of a triangle rule.
  RMatrix tabulate_face(const QuadratureRule& rule) const {
    RMatrix values(static_cast<Eigen::Index>(rule.size()), dim_face);
    for (std::size_t q = 0; q < rule.size(); ++q) values.row(q) = eval_face(rule.points[q].x(), rule.points[q].y()).transpose();
    return values;
  }

  RVector volume_monomials(const Vec3& xi) const {
    const Vec3 y = xi - Vec3::Constant(0.25);
    RVector m(static_cast<Eigen::Index>(volume_exponents.size()));
    for (std::size_t i = 0; i < volume_exponents.size(); ++i) {
      const auto& e = volume_exponents[i];
      m(i) = ipow(y.x(), e[0]) * ipow(y.y(), e[1]) * ipow(y.z(), e[2]);
    }
    return m;
  }

  RVector volume_monomial_derivative(const Vec3& xi, int c) const {
    const Vec3 y = xi - Vec3::Constant(0.25);
    RVector m(static_cast<Eigen::Index>(volume_exponents.size()));
    for (std::size_t i = 0; i < volume_exponents.size(); ++i) {
      const auto& e = volume_exponents[i];
      real v = 1.0;
      for (int d = 0; d < 3; ++d) {
        if (d == c)
          v *= e[d] == 0 ? 0.0 : e[d] * ipow(y(d), e[d] - 1);
        else
          v *= ipow(y(d), e[d]);
      }
      m(i) = v;
    }
    return m;
  }

  RVector face_monomials(real s, real t) const {
    const real a = s - 1.0 / 3.0, b = t - 1.0 / 3.0;
    RVector m(static_cast<Eigen::Index>(face_exponents.size()));
    for (std::size_t i = 0; i < face_exponents.size(); ++i) m(i) = ipow(a, face_exponents[i][0]) * ipow(b, face_exponents[i][1]);
    return m;
  }

private:
  static real ipow(real x, int k) {
    real r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
  }
};

namespace detail {

// Rows of `values` are the functions sampled at the rule points. Returns the
// lower-triangular T with T * values orthonormal in the weighted inner product.
inline RMatrix orthonormalizer(const RMatrix& values, const QuadratureRule& rule) {
  const Eigen::Map<const RVector> w(rule.weights.data(), static_cast<Eigen::Index>(rule.size()));
  const RMatrix gram = values * w.asDiagonal() * values.transpose();
  const Eigen::LLT<RMatrix> llt(gram);
  const RMatrix lower = llt.matrixL();
  return lower.triangularView<Eigen::Lower>().solve(RMatrix::Identity(values.rows(), values.rows()));
}

} // namespace detail

inline ReferenceBasis make_basis(int p) {
  if (p < 1 || p > max_basis_degree)
    throw invalid_argument("polynomial order " + std::to_string(p) + " unsupported (1.." + std::to_string(max_basis_degree) + ")");
  ReferenceBasis b;
  b.degree = p;
  b.dim_volume = volume_dimension(p);
  b.dim_face = face_dimension(p);
  for (int d = 0; d <= p; ++d) {
    for (int i = d; i >= 0; --i)
      for (int j = d - i; j >= 0; --j) b.volume_exponents.push_back({i, j, d - i - j});
    for (int i = d; i >= 0; --i) b.face_exponents.push_back({i, d - i});
  }

  const auto tet = make_quadrature(Domain::tetrahedron, 2 * p + 2);
  const auto tri = make_quadrature(Domain::triangle, 2 * p + 2);

  RMatrix mono(b.dim_volume, static_cast<Eigen::Index>(tet.size()));
  for (std::size_t q = 0; q < tet.size(); ++q) mono.col(q) = b.volume_monomials(tet.points[q]);
  b.volume_coefficients = detail::orthonormalizer(mono, tet);
  // Second pass removes the round-off left by the first Cholesky factor.
  b.volume_coefficients = detail::orthonormalizer(b.volume_coefficients * mono, tet) * b.volume_coefficients;

  RMatrix fmono(b.dim_face, static_cast<Eigen::Index>(tri.size()));
  for (std::size_t q = 0; q < tri.size(); ++q) fmono.col(q) = b.face_monomials(tri.points[q].x(), tri.points[q].y());
  b.face_coefficients = detail::orthonormalizer(fmono, tri);
  b.face_coefficients = detail::orthonormalizer(b.face_coefficients * fmono, tri) * b.face_coefficients;
  return b;
}

} // namespace hdgmax
