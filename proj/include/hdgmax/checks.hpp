#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "hdgmax/local_assembly.hpp"
#include "hdgmax/projection.hpp"

namespace hdgmax {

/// Outcome of one runtime invariant check: the worst observed deviation
/// against its tolerance.
struct CheckResult {
  std::string name;
  bool passed = false;
  real worst = 0.0;
  real tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

namespace checks {

inline CheckResult make(std::string name, real worst, real tol, std::string detail) {
  return {std::move(name), worst <= tol, worst, tol, std::move(detail), 0.0};
}

/// Positive volumes tiling the cube, every interior face shared by two
/// elements seeing the same vertex triple with opposite normals, outward
/// boundary normals, orthonormal tangent frames.
inline CheckResult mesh_conformity(const std::vector<int>& ns = {1, 2, 3, 4}) {
  real worst = 0.0;
  for (int n : ns) {
    const Mesh m = build_structured_cube_mesh(n);
    real vol = 0.0;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      const real v = m.signed_volume(e);
      if (!(v > 0.0)) return make("mesh conformity", 1.0, 0.0, "non-positive element volume at n=" + std::to_string(n));
      vol += v;
    }
    worst = std::max(worst, std::abs(vol - 1.0));
    const std::size_t n3 = static_cast<std::size_t>(n) * n * n, n2 = static_cast<std::size_t>(n) * n;
    if (m.num_faces() != 12 * n3 + 6 * n2 || m.num_boundary_faces() != 12 * n2)
      return make("mesh conformity", 1.0, 0.0, "face counts wrong at n=" + std::to_string(n));
    std::vector<int> seen(m.num_faces(), 0);
    for (std::size_t e = 0; e < m.num_elements(); ++e)
      for (int l = 0; l < 4; ++l) {
        const auto [f, orient] = m.face_of(e, l);
        ++seen[f];
        std::array<std::size_t, 3> local;
        for (int k = 0; k < 3; ++k) local[k] = m.elements[e][local_face_vertices[l][k]];
        std::array<std::size_t, 3> sorted = local;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != m.faces[f].vertex_indices) return make("mesh conformity", 1.0, 0.0, "face vertex mismatch");
        for (int k = 0; k < 3; ++k)
          if (local[Mesh::face_permutation[orient][k]] != m.faces[f].vertex_indices[k])
            return make("mesh conformity", 1.0, 0.0, "orientation flag mismatch");
      }
    const Vec3 center(0.5, 0.5, 0.5);
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
      const Face& face = m.faces[f];
      if (seen[f] != (face.is_boundary ? 1 : 2)) return make("mesh conformity", 1.0, 0.0, "face incidence mismatch");
      const auto& v = face.vertex_indices;
      const Vec3 c = (m.vertices[v[0]] + m.vertices[v[1]] + m.vertices[v[2]]) / 3.0;
      if (face.is_boundary && !(face.unit_normal.dot(c - center) > 0.0)) return make("mesh conformity", 1.0, 0.0, "inward boundary normal");
      if (!face.is_boundary) {
        const std::size_t nb = *face.neighbor_element;
        for (int l = 0; l < 4; ++l)
          if (m.face_of(nb, l).first == f) worst = std::max(worst, (m.outward_normal(nb, l) + face.unit_normal).norm());
      }
      const auto& t = face.tangent_frame;
      worst = std::max({worst, std::abs(t[0].norm() - 1.0), std::abs(t[1].norm() - 1.0), std::abs(t[0].dot(t[1])),
                        std::abs(t[0].dot(face.unit_normal)), std::abs(t[1].dot(face.unit_normal))});
    }
  }
  return make("mesh conformity", worst, 1e-12, "volumes, incidence, orientation, normals, frames on n=1..4");
}

/// Monomials up to each rule's degree against exact simplex moments.
inline CheckResult quadrature_exactness(int max_degree = 14) {
  auto fact = [](int k) { return std::tgamma(static_cast<real>(k) + 1.0); };
  real worst = 0.0;
  for (int d = 1; d <= max_degree; ++d) {
    const QuadratureRule tet = make_quadrature(Domain::tetrahedron, d), tri = make_quadrature(Domain::triangle, d);
    for (int a = 0; a <= d; ++a)
      for (int b = 0; a + b <= d; ++b) {
        real st = 0.0;
        for (std::size_t q = 0; q < tri.size(); ++q) st += tri.weights[q] * std::pow(tri.points[q].x(), a) * std::pow(tri.points[q].y(), b);
        const real et = fact(a) * fact(b) / fact(a + b + 2);
        worst = std::max(worst, std::abs(st - et) / et);
        for (int c = 0; a + b + c <= d; ++c) {
          real s = 0.0;
          for (std::size_t q = 0; q < tet.size(); ++q)
            s += tet.weights[q] * std::pow(tet.points[q].x(), a) * std::pow(tet.points[q].y(), b) * std::pow(tet.points[q].z(), c);
          const real e = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
          worst = std::max(worst, std::abs(s - e) / e);
        }
      }
  }
  return make("quadrature exactness", worst, 1e-12, "all monomials of degree <= d, d = 1.." + std::to_string(max_degree));
}

/// Gram matrices of the volume and face bases under exact rules.
inline CheckResult basis_orthonormality() {
  real worst = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const ReferenceBasis b = make_basis(p);
    const QuadratureRule tet = make_quadrature(Domain::tetrahedron, 2 * p), tri = make_quadrature(Domain::triangle, 2 * p);
    const VolumeTable vt = b.tabulate_volume(tet);
    const Eigen::Map<const RVector> wv(tet.weights.data(), static_cast<Eigen::Index>(tet.size()));
    const RMatrix gv = vt.values.transpose() * wv.asDiagonal() * vt.values;
    const RMatrix ft = b.tabulate_face(tri);
    const Eigen::Map<const RVector> wf(tri.weights.data(), static_cast<Eigen::Index>(tri.size()));
    const RMatrix gf = ft.transpose() * wf.asDiagonal() * ft;
    worst = std::max(worst, (gv - RMatrix::Identity(b.dim_volume, b.dim_volume)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (gf - RMatrix::Identity(b.dim_face, b.dim_face)).cwiseAbs().maxCoeff());
  }
  return make("basis orthonormality", worst, 1e-12, "volume and face Gram matrices, p = 1..3");
}

/// L2 projection of each basis function, mapped to a physical element, returns a unit vector.
inline CheckResult projection_reproduction() {
  const Mesh m = build_structured_cube_mesh(2);
  real worst = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const ReferenceBasis b = make_basis(p);
    const QuadratureRule rule = make_quadrature(Domain::tetrahedron, 2 * p + 2);
    for (std::size_t e : {std::size_t{0}, std::size_t{13}, m.num_elements() - 1}) {
      const ElementGeometry g = m.geometry(e);
      for (int i = 0; i < b.dim_volume; ++i) {
        auto phi = [&](const Vec3& x) { return complex(b.eval_volume(g.to_reference(x))(i), 0.0); };
        CVector c = project_volume(phi, g, b, rule);
        c(i) -= 1.0;
        worst = std::max(worst, c.cwiseAbs().maxCoeff());
      }
    }
  }
  return make("projection reproduction", worst, 1e-12, "volume basis functions on three elements, p = 1..3");
}

/// Swapping the arguments of every assembled sesquilinear pair conjugate-
/// transposes the block, up to the sign carried by the form.
inline CheckResult conjugation_symmetry() {
  const Mesh m = build_structured_cube_mesh(2);
  real worst = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const AssemblyContext ctx(p);
    for (std::size_t e : {std::size_t{5}, std::size_t{30}}) {
      const LocalBlocks lb = assemble_local(make_local_element(m, e), ctx, 4.0, {2.0, 0.5}, SignConvention::minus_iwt);
      const real s = std::max<real>(1.0, lb.A.cwiseAbs().maxCoeff());
      auto dev = [&](const CMatrix& a, const CMatrix& b, real sign) { return (a - sign * b.adjoint()).cwiseAbs().maxCoeff() / s; };
      using G = Group;
      worst = std::max({worst, dev(lb.block(G::W, G::U), lb.block(G::U, G::W), -1.0), dev(lb.block(G::U, G::S), lb.block(G::S, G::U), -1.0),
                        dev(lb.block(G::W, G::Ut), lb.block(G::Ut, G::W), -1.0), dev(lb.block(G::U, G::Sf), lb.block(G::Sf, G::U), 1.0),
                        dev(lb.block(G::U, G::Ut), lb.block(G::Ut, G::U), 1.0), dev(lb.block(G::S, G::Sf), lb.block(G::Sf, G::S), -1.0)});
      const CMatrix uu = lb.block(G::U, G::U);
      worst = std::max(worst, (uu.real() - uu.real().transpose()).cwiseAbs().maxCoeff() / s);
      worst = std::max(worst, (uu.imag() - uu.imag().transpose()).cwiseAbs().maxCoeff() / s);
    }
  }
  return make("conjugation symmetry", worst, 1e-12, "adjoint pairs of local blocks, p = 1..3");
}

} // namespace checks

/// The invariant suite run by `check` and by the acceptance binary.
inline std::vector<CheckResult> run_invariant_checks() {
  std::vector<CheckResult> out;
  auto run = [&](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{"invariant check", false, 0.0, 0.0, "", 0.0};
    try {
      r = f();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  };
  run([] { return checks::mesh_conformity(); });
  run([] { return checks::quadrature_exactness(); });
  run([] { return checks::basis_orthonormality(); });
  run([] { return checks::projection_reproduction(); });
  run([] { return checks::conjugation_symmetry(); });
  return out;
}

} // namespace hdgmax
