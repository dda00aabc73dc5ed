#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "hdgmax/block_sparse.hpp"
#include "hdgmax/dof_map.hpp"
#include "hdgmax/local_assembly.hpp"
#include "hdgmax/manufactured.hpp"

namespace hdgmax {

struct GlobalSystem {
  BlockSparseMatrix matrix;
  CVector rhs;
  DofMap dofs;
  real kappa = 0.0;
  SignConvention convention = SignConvention::minus_iwt;

  std::size_t size() const { return dofs.total_unknowns; }
};

/// Face-block sparsity: face f couples with every face of its incident elements.
inline std::vector<std::vector<std::size_t>> face_block_pattern(const Mesh& mesh) {
  std::vector<std::vector<std::size_t>> pattern(mesh.num_faces());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) pattern[mesh.element_faces[e][a].face].push_back(mesh.element_faces[e][b].face);
  return pattern;
}

/// Scatters trace DOFs between the local layout of LocalBlocks and the global DofMap.
inline CVector gather_local_traces(const Mesh& mesh, const DofMap& dofs, std::size_t e, const CVector& global) {
  const int nf = dofs.dim_face;
  CVector local = CVector::Zero(12 * nf);
  for (int l = 0; l < 4; ++l) {
    const std::size_t f = mesh.element_faces[e][l].face;
    const auto n = static_cast<Eigen::Index>(dofs.face_dofs(f));
    local.segment(3 * nf * l, n) = global.segment(static_cast<Eigen::Index>(dofs.offset(f)), n);
  }
  return local;
}

/// Accumulates condensed elements in call order; element-index order gives a
/// fixed summation order and therefore bitwise reproducible systems.
class GlobalAssembler {
public:
  GlobalAssembler(const Mesh& mesh, int p, real kappa, SignConvention convention)
    : mesh_(mesh), kappa_(kappa), convention_(convention) {
    if (!(kappa > 0.0)) throw invalid_argument("kappa must be positive");
    system_.dofs = build_dof_map(mesh, p);
    system_.matrix = BlockSparseMatrix(system_.dofs.offsets, face_block_pattern(mesh));
    system_.rhs = CVector::Zero(static_cast<Eigen::Index>(system_.dofs.total_unknowns));
    system_.kappa = kappa;
    system_.convention = convention;
  }

  void add_element(std::size_t e, const CondensedElement& ce) {
    if (ce.kappa != kappa_ || ce.convention != convention_)
      throw configuration_error("condensed element " + std::to_string(e) +
                                " was built with a different kappa or sign convention than the global system");
    if (tau_ && tau_->mode == TauMode::global_h && !(*tau_ == ce.tau))
      throw configuration_error("condensed element " + std::to_string(e) + " uses different stabilization parameters");
    if (!tau_) tau_ = ce.tau;
    const int nf = system_.dofs.dim_face;
    for (int a = 0; a < 4; ++a) {
      const std::size_t fa = mesh_.element_faces[e][a].face;
      const auto na = static_cast<Eigen::Index>(system_.dofs.face_dofs(fa));
      system_.rhs.segment(static_cast<Eigen::Index>(system_.dofs.offset(fa)), na) += ce.schur_rhs.segment(3 * nf * a, na);
      for (int b = 0; b < 4; ++b) {
        const std::size_t fb = mesh_.element_faces[e][b].face;
        system_.matrix.add_block(fa, fb, ce.schur.block(3 * nf * a, 3 * nf * b, na, system_.dofs.face_dofs(fb)));
      }
    }
  }

  /// Impedance coupling s kappa <u^, eta> and the load <g, eta> on every boundary face.
  /// `g` receives the point and the outward normal; a null g means g = 0.
  void add_boundary(const ReferenceBasis& basis, const QuadratureRule& tri, const BoundaryFunction* g) {
    const int nf = basis.dim_face;
    const RMatrix psi = basis.tabulate_face(tri);
    const real s = impedance_sign(convention_);
    for (std::size_t f = 0; f < mesh_.num_faces(); ++f) {
      const Face& face = mesh_.faces[f];
      if (!face.is_boundary) continue;
      const Eigen::Map<const RVector> w(tri.weights.data(), static_cast<Eigen::Index>(tri.size()));
      const RMatrix mass = (2.0 * face.area) * (psi.transpose() * w.asDiagonal() * psi);
      CMatrix block = CMatrix::Zero(2 * nf, 2 * nf);
      block.topLeftCorner(nf, nf) = (s * kappa_) * mass.cast<complex>();
      block.bottomRightCorner(nf, nf) = (s * kappa_) * mass.cast<complex>();
      system_.matrix.add_block(f, f, block);
      if (g) system_.rhs.segment(static_cast<Eigen::Index>(system_.dofs.offset(f)), 2 * nf) += boundary_load(f, basis, tri, *g);
    }
  }

  /// <g, psi_k t_m>_F for m = 1, 2.
  CVector boundary_load(std::size_t f, const ReferenceBasis& basis, const QuadratureRule& tri, const BoundaryFunction& g) const {
    const int nf = basis.dim_face;
    const Face& face = mesh_.faces[f];
    CVector load = CVector::Zero(2 * nf);
    for (std::size_t q = 0; q < tri.size(); ++q) {
      const real st = tri.points[q].x(), tt = tri.points[q].y();
      const CVec3 gx = g(mesh_.face_point(f, st, tt), face.unit_normal);
      const RVector psi = basis.eval_face(st, tt);
      const real wq = 2.0 * face.area * tri.weights[q];
      for (int m = 0; m < 2; ++m) {
        const complex gt = gx.cwiseProduct(face.tangent_frame[m].cast<complex>()).sum();
        load.segment(m * nf, nf) += (wq * gt) * psi.cast<complex>();
      }
    }
    return load;
  }

  GlobalSystem finish() && { return std::move(system_); }
  const GlobalSystem& system() const { return system_; }

private:
  const Mesh& mesh_;
  real kappa_;
  SignConvention convention_;
  std::optional<StabilizationParams> tau_;
  GlobalSystem system_;
};

/// Assembles the trace system from condensed elements (indexed like mesh.elements).
inline GlobalSystem assemble_global(const Mesh& mesh, const std::vector<CondensedElement>& condensed, const ReferenceBasis& basis,
                                    const QuadratureRule& data_tri, const BoundaryFunction* g, real kappa,
                                    SignConvention convention) {
  if (condensed.size() != mesh.num_elements()) throw invalid_argument("one condensed element per mesh element required");
  GlobalAssembler assembler(mesh, basis.degree, kappa, convention);
  for (std::size_t e = 0; e < condensed.size(); ++e) assembler.add_element(e, condensed[e]);
  assembler.add_boundary(basis, data_tri, g);
  return std::move(assembler).finish();
}

/// Coordinate listing "row col re im" (0-based), one nonzero per line.
inline void export_matrix_coordinates(const GlobalSystem& sys, std::ostream& out) {
  const auto csr = sys.matrix.to_csr();
  out.precision(17);
  out << "% rows " << csr.rows() << " cols " << csr.cols() << " nnz " << csr.nonZeros() << '\n';
  for (long r = 0; r < csr.outerSize(); ++r)
    for (decltype(csr)::InnerIterator it(csr, r); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

} // namespace hdgmax
