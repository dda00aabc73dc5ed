#pragma once

#include <cmath>
#include <concepts>
#include <type_traits>

#include "hdgmax/basis.hpp"
#include "hdgmax/mesh.hpp"

namespace hdgmax {

template <class F>
concept ScalarField = std::invocable<const F&, const Vec3&> &&
    std::convertible_to<std::invoke_result_t<const F&, const Vec3&>, complex>;

template <class F>
concept VectorField = std::invocable<const F&, const Vec3&> &&
    std::convertible_to<std::invoke_result_t<const F&, const Vec3&>, CVec3>;

enum class ProjectionSpace { volume, face };

/// Coefficients of the L2-best approximation of f in P_p(T). The physical
/// mass matrix is |det J| * I, so each coefficient is a weighted inner product.
template <ScalarField F>
CVector project_volume(const F& f, const ElementGeometry& geo, const ReferenceBasis& basis, const QuadratureRule& rule) {
  CVector c = CVector::Zero(basis.dim_volume);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const complex fx = f(geo.to_physical(rule.points[q]));
    c += (rule.weights[q] * fx) * basis.eval_volume(rule.points[q]).cast<complex>();
  }
  return c;
}

/// Componentwise projection of a vector field; returns [x; y; z] blocks of dim_volume.
template <VectorField F>
CVector project_volume_vector(const F& f, const ElementGeometry& geo, const ReferenceBasis& basis, const QuadratureRule& rule) {
  const int nv = basis.dim_volume;
  CVector c = CVector::Zero(3 * nv);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const CVec3 fx = f(geo.to_physical(rule.points[q]));
    const RVector phi = basis.eval_volume(rule.points[q]);
    for (int a = 0; a < 3; ++a) c.segment(a * nv, nv) += (rule.weights[q] * fx(a)) * phi.cast<complex>();
  }
  return c;
}

/// Coefficients in P_p(F) under the face parametrization of Mesh::face_point.
/// The face mass matrix is 2|F| * I, matching the reference-triangle weights.
template <ScalarField F>
CVector project_face(const F& f, const Mesh& mesh, std::size_t face, const ReferenceBasis& basis, const QuadratureRule& tri) {
  CVector c = CVector::Zero(basis.dim_face);
  for (std::size_t q = 0; q < tri.size(); ++q) {
    const real s = tri.points[q].x(), t = tri.points[q].y();
    c += (tri.weights[q] * complex(f(mesh.face_point(face, s, t)))) * basis.eval_face(s, t).cast<complex>();
  }
  return c;
}

template <ScalarField F>
CVector local_l2_project(const F& f, const Mesh& mesh, std::size_t index, ProjectionSpace space,
                         const ReferenceBasis& basis, const QuadratureRule& rule) {
  if (space == ProjectionSpace::volume) return project_volume(f, mesh.geometry(index), basis, rule);
  return project_face(f, mesh, index, basis, rule);
}

/// ||f - sum_i c_i phi_i||_{L2(T)} evaluated with the given rule.
template <ScalarField F>
real volume_projection_error(const F& f, const CVector& coeffs, const ElementGeometry& geo, const ReferenceBasis& basis,
                             const QuadratureRule& rule) {
  real err2 = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const complex fh = basis.eval_volume(rule.points[q]).cast<complex>().dot(coeffs);
    err2 += rule.weights[q] * std::norm(complex(f(geo.to_physical(rule.points[q]))) - fh);
  }
  return std::sqrt(std::abs(geo.det_jacobian) * err2);
}

} // namespace hdgmax
