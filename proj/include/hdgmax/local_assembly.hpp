#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdgmax/basis.hpp"
#include "hdgmax/manufactured.hpp"
#include "hdgmax/mesh.hpp"
#include "hdgmax/quadrature.hpp"

namespace hdgmax {

enum class TauMode { global_h, local_h };

inline TauMode parse_tau_mode(std::string_view s) {
  if (s == "global" || s == "global_h") return TauMode::global_h;
  if (s == "local" || s == "local_h") return TauMode::local_h;
  throw invalid_argument("unknown tau mode '" + std::string(s) + "' (expected global|local)");
}

/// Face penalty weights of the numerical traces:
///   w^ = w + sign tau_t (u^t - u^t^) x n,   u^n^ = u^n + sign tau_n (sigma - sigma^) n.
/// tau_t and tau_n stay positive; `sign` is -1 only for the conjugate form of
/// the e^{-iwt} scheme (see penalty_sign).
struct StabilizationParams {
  real tau_t = 1.0; // 1/length
  real tau_n = 1.0; // length
  TauMode mode = TauMode::global_h;
  real sign = 1.0;

  /// tau_t = p/h and tau_n = (1 + kappa) h / p.
  static StabilizationParams from_mesh_size(int p, real h, real kappa, TauMode mode = TauMode::global_h, real sign = 1.0) {
    if (!(h > 0.0)) throw invalid_argument("mesh size must be positive");
    return {p / h, (1.0 + kappa) * h / p, mode, sign};
  }

  real signed_t() const { return sign * tau_t; }
  real signed_n() const { return sign * tau_n; }

  bool operator==(const StabilizationParams&) const = default;
};

/// How the e^{-iwt} problem is discretized.
///   conjugate: the complex conjugate of the e^{+iwt} scheme. The impedance
///     coupling and both penalties change sign, which keeps the energy
///     identity sign-definite and the scheme uniquely solvable.
///   boundary_only: only the impedance coupling changes sign; the penalties
///     keep their sign and the real part of the energy identity is indefinite.
enum class MinusVariant { conjugate, boundary_only };

inline MinusVariant parse_minus_variant(std::string_view s) {
  if (s == "conjugate") return MinusVariant::conjugate;
  if (s == "boundary_only" || s == "boundary-only") return MinusVariant::boundary_only;
  throw invalid_argument("unknown minus-convention variant '" + std::string(s) + "' (expected conjugate|boundary-only)");
}

inline std::string_view to_string(MinusVariant v) noexcept { return v == MinusVariant::conjugate ? "conjugate" : "boundary-only"; }

constexpr real penalty_sign(SignConvention c, MinusVariant v) noexcept {
  return c == SignConvention::minus_iwt && v == MinusVariant::conjugate ? -1.0 : 1.0;
}

/// Geometry of one element as seen by the local solver. Face frames and face
/// parametrizations follow the global mesh so that traces are single valued.
struct LocalFace {
  Vec3 normal = Vec3::Zero(); // outward from this element
  std::array<Vec3, 2> tangents{Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, 3> vertices{}; // parametrization x(s,t) = v0 + s (v1 - v0) + t (v2 - v0)
  real area = 0.0;

  Vec3 point(real s, real t) const { return vertices[0] + s * (vertices[1] - vertices[0]) + t * (vertices[2] - vertices[0]); }
};

struct LocalElement {
  ElementGeometry geometry;
  std::array<LocalFace, 4> faces;
  real diameter = 0.0;
};

inline LocalElement make_local_element(const Mesh& mesh, std::size_t e) {
  LocalElement el;
  el.geometry = mesh.geometry(e);
  el.diameter = mesh.element_diameter(e);
  for (int l = 0; l < 4; ++l) {
    const auto [fid, orient] = mesh.face_of(e, l);
    (void)orient;
    const Face& f = mesh.faces[fid];
    LocalFace& lf = el.faces[l];
    lf.normal = mesh.outward_normal(e, l);
    lf.tangents = f.tangent_frame;
    lf.area = f.area;
    for (int a = 0; a < 3; ++a) lf.vertices[a] = mesh.vertices[f.vertex_indices[a]];
  }
  return el;
}

/// Standalone tetrahedron; each face is parametrized in ascending local vertex
/// order and its frame built by the same rule the mesh uses.
inline LocalElement make_local_element(const std::array<Vec3, 4>& x) {
  LocalElement el;
  el.geometry = make_geometry(x);
  if (el.geometry.det_jacobian < 0.0) throw geometry_error("element has negative orientation");
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) el.diameter = std::max(el.diameter, (x[a] - x[b]).norm());
  for (int l = 0; l < 4; ++l) {
    LocalFace& lf = el.faces[l];
    for (int a = 0; a < 3; ++a) lf.vertices[a] = x[local_face_vertices[l][a]];
    Vec3 n = (lf.vertices[1] - lf.vertices[0]).cross(lf.vertices[2] - lf.vertices[0]);
    lf.area = 0.5 * n.norm();
    n.normalize();
    if (n.dot(lf.vertices[0] - x[l]) < 0.0) n = -n;
    lf.normal = n;
    const Vec3 t1 = (lf.vertices[1] - lf.vertices[0]).normalized();
    lf.tangents = {t1, n.cross(t1)};
  }
  return el;
}

/// Reference data shared by every element at a fixed polynomial order.
struct AssemblyContext {
  ReferenceBasis basis;
  QuadratureRule tet_rule;  // exactness 2p + 2, scheme integrands
  QuadratureRule tri_rule;
  QuadratureRule data_tet;  // exactness 2p + 6, data and error integrands
  QuadratureRule data_tri;  // exactness 2p + 10, boundary data g (oscillatory at large kappa h)
  RMatrix face_values;      // face basis at tri_rule points (nq x dim_face)
  /// derivative_moments[c](i, j) = int_ref phi_i d(phi_j)/d(xi_c).
  std::array<RMatrix, 3> derivative_moments;

  explicit AssemblyContext(int p)
    : basis(make_basis(p)),
      tet_rule(make_quadrature(Domain::tetrahedron, 2 * p + 2)),
      tri_rule(make_quadrature(Domain::triangle, 2 * p + 2)),
      data_tet(make_quadrature(Domain::tetrahedron, 2 * p + 6)),
      data_tri(make_quadrature(Domain::triangle, 2 * p + 10)) {
    face_values = basis.tabulate_face(tri_rule);
    const VolumeTable t = basis.tabulate_volume(tet_rule);
    const Eigen::Map<const RVector> w(tet_rule.weights.data(), static_cast<Eigen::Index>(tet_rule.size()));
    for (int c = 0; c < 3; ++c) derivative_moments[c] = t.values.transpose() * w.asDiagonal() * t.grads[c];
  }

  int degree() const { return basis.degree; }
  int nv() const { return basis.dim_volume; }
  int nf() const { return basis.dim_face; }
  int interior_size() const { return 7 * nv(); }
  int trace_size() const { return 12 * nf(); }
};

/// Unknown groups of one element. W, U, S are interior (w_h, u_h, sigma_h);
/// Ut and Sf are the tangential and scalar traces on the four faces.
enum class Group { W, U, S, Ut, Sf };

inline bool is_interior(Group g) { return g == Group::W || g == Group::U || g == Group::S; }

/// Element-local HDG operator. Interior unknowns are ordered [w_x, w_y, w_z,
/// u_x, u_y, u_z, sigma] in blocks of dim_volume; trace unknowns per local face
/// l are [u^ along t1, u^ along t2, sigma^] in blocks of dim_face at offset
/// 3 * dim_face * l.
///
///   [A B] [X]   [F]   local equations (test functions r, v, q)
///   [C D] [L] = [.]   element contribution to the trace equations
struct LocalBlocks {
  CMatrix A, B, C, D;
  CVector F;
  int nv = 0, nf = 0;
  real kappa = 0.0;
  StabilizationParams tau;
  SignConvention convention = SignConvention::minus_iwt;

  std::vector<int> indices(Group g) const {
    std::vector<int> idx;
    switch (g) {
      case Group::W: for (int i = 0; i < 3 * nv; ++i) idx.push_back(i); break;
      case Group::U: for (int i = 3 * nv; i < 6 * nv; ++i) idx.push_back(i); break;
      case Group::S: for (int i = 6 * nv; i < 7 * nv; ++i) idx.push_back(i); break;
      case Group::Ut:
        for (int l = 0; l < 4; ++l)
          for (int i = 0; i < 2 * nf; ++i) idx.push_back(3 * nf * l + i);
        break;
      case Group::Sf:
        for (int l = 0; l < 4; ++l)
          for (int i = 0; i < nf; ++i) idx.push_back(3 * nf * l + 2 * nf + i);
        break;
    }
    return idx;
  }

  /// Rows of group `row`, columns of group `col`.
  CMatrix block(Group row, Group col) const {
    const CMatrix& m = is_interior(row) ? (is_interior(col) ? A : B) : (is_interior(col) ? C : D);
    const auto ri = indices(row), ci = indices(col);
    CMatrix out(static_cast<Eigen::Index>(ri.size()), static_cast<Eigen::Index>(ci.size()));
    for (std::size_t i = 0; i < ri.size(); ++i)
      for (std::size_t j = 0; j < ci.size(); ++j) out(i, j) = m(ri[i], ci[j]);
    return out;
  }
};

namespace detail {

inline real levi_civita(int a, int b, int c) {
  if (a == b || b == c || a == c) return 0.0;
  return ((a + 1) % 3 == b) ? 1.0 : -1.0;
}

/// Face moments of one local face: vv(i,j) = int phi_i phi_j, vf(i,k) =
/// int phi_i psi_k, ff(k,l) = int psi_k psi_l.
struct FaceMoments {
  RMatrix vv, vf, ff;
};

inline FaceMoments face_moments(const LocalElement& el, int l, const AssemblyContext& ctx) {
  const LocalFace& f = el.faces[l];
  const auto nq = static_cast<Eigen::Index>(ctx.tri_rule.size());
  RMatrix phi(nq, ctx.nv());
  RVector w(nq);
  for (Eigen::Index q = 0; q < nq; ++q) {
    const Vec3& st = ctx.tri_rule.points[q];
    phi.row(q) = ctx.basis.eval_volume(el.geometry.to_reference(f.point(st.x(), st.y()))).transpose();
    w(q) = 2.0 * f.area * ctx.tri_rule.weights[q];
  }
  FaceMoments m;
  m.vv = phi.transpose() * w.asDiagonal() * phi;
  m.vf = phi.transpose() * w.asDiagonal() * ctx.face_values;
  m.ff = ctx.face_values.transpose() * w.asDiagonal() * ctx.face_values;
  return m;
}

} // namespace detail

/// Load vector (f, v)_T for the U rows, evaluated with the data rule.
inline CVector assemble_load(const LocalElement& el, const AssemblyContext& ctx, const VectorFunction& f) {
  const int nv = ctx.nv();
  CVector F = CVector::Zero(7 * nv);
  const real dj = std::abs(el.geometry.det_jacobian);
  for (std::size_t q = 0; q < ctx.data_tet.size(); ++q) {
    const Vec3& xi = ctx.data_tet.points[q];
    const CVec3 fx = f(el.geometry.to_physical(xi));
    const RVector phi = ctx.basis.eval_volume(xi);
    for (int b = 0; b < 3; ++b) F.segment(3 * nv + b * nv, nv) += (dj * ctx.data_tet.weights[q] * fx(b)) * phi.cast<complex>();
  }
  return F;
}

/// Element blocks of the HDG scheme with the numerical traces substituted.
/// Inner products conjugate their second (test) argument; the bases are real,
/// so the complex coefficients of each term sit on the trial side.
inline LocalBlocks assemble_local(const LocalElement& el, const AssemblyContext& ctx, real kappa,
                                  const StabilizationParams& tau, SignConvention convention,
                                  const VectorFunction* f = nullptr) {
  if (!(kappa > 0.0)) throw invalid_argument("kappa must be positive");
  if (std::abs(el.geometry.det_jacobian) < 1e-14) throw geometry_error("degenerate element");
  const int nv = ctx.nv(), nf = ctx.nf();
  const int W = 0, U = 3 * nv, S = 6 * nv;
  const real dj = std::abs(el.geometry.det_jacobian);
  const real tau_t = tau.signed_t(), tau_n = tau.signed_n();

  LocalBlocks lb;
  lb.nv = nv;
  lb.nf = nf;
  lb.kappa = kappa;
  lb.tau = tau;
  lb.convention = convention;
  lb.A = CMatrix::Zero(7 * nv, 7 * nv);
  lb.B = CMatrix::Zero(7 * nv, 12 * nf);
  lb.C = CMatrix::Zero(12 * nf, 7 * nv);
  lb.D = CMatrix::Zero(12 * nf, 12 * nf);
  lb.F = f ? assemble_load(el, ctx, *f) : CVector::Zero(7 * nv);

  // grad_t[d](i, j) = int_T phi_j d(phi_i)/dx_d: test derivative, trial value.
  std::array<RMatrix, 3> grad_t;
  for (int d = 0; d < 3; ++d) {
    RMatrix g = RMatrix::Zero(nv, nv);
    for (int c = 0; c < 3; ++c) g += el.geometry.inverse_jacobian(c, d) * ctx.derivative_moments[c];
    grad_t[d] = dj * g.transpose();
  }

  const complex ik2 = I * kappa * kappa;
  for (int i = 0; i < nv; ++i) {
    lb.A(W + 0 * nv + i, W + 0 * nv + i) = I * dj;
    lb.A(W + 1 * nv + i, W + 1 * nv + i) = I * dj;
    lb.A(W + 2 * nv + i, W + 2 * nv + i) = I * dj;
    for (int a = 0; a < 3; ++a) lb.A(U + a * nv + i, U + a * nv + i) = ik2 * dj;
  }

  // Volume couplings through curl, div and grad.
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      RMatrix curl = RMatrix::Zero(nv, nv); // int_T phi_j e_a . curl(phi_i e_b)
      for (int d = 0; d < 3; ++d) {
        const real eps = detail::levi_civita(a, d, b);
        if (eps != 0.0) curl += eps * grad_t[d];
      }
      lb.A.block(W + b * nv, U + a * nv, nv, nv) -= curl.cast<complex>(); // -(u, curl r)
      lb.A.block(U + b * nv, W + a * nv, nv, nv) += curl.cast<complex>(); // (w, curl v)
    }
  for (int b = 0; b < 3; ++b) {
    lb.A.block(U + b * nv, S, nv, nv) -= grad_t[b].cast<complex>(); // -(sigma, div v)
    lb.A.block(S, U + b * nv, nv, nv) -= grad_t[b].cast<complex>(); // -(u, grad q)
  }

  for (int l = 0; l < 4; ++l) {
    const LocalFace& face = el.faces[l];
    const detail::FaceMoments m = detail::face_moments(el, l, ctx);
    const Vec3& n = face.normal;
    const int T = 3 * nf * l;
    const CMatrix vv = m.vv.cast<complex>(), vf = m.vf.cast<complex>(), fv = m.vf.transpose().cast<complex>();

    for (int a = 0; a < 3; ++a) {
      const Vec3 ea_x_n = Vec3::Unit(a).cross(n);
      for (int b = 0; b < 3; ++b) {
        // -<w x n, v> from (w, curl v) - <w^ t x n, v>.
        lb.A.block(U + b * nv, W + a * nv, nv, nv) -= ea_x_n(b) * vv;
        // tau_t <u^t, v^t>
        lb.A.block(U + b * nv, U + a * nv, nv, nv) += (tau_t * ((a == b ? 1.0 : 0.0) - n(a) * n(b))) * vv;
      }
      // <u.n, q>
      lb.A.block(S, U + a * nv, nv, nv) += n(a) * vv;
    }
    lb.A.block(S, S, nv, nv) += tau_n * vv;

    for (int t = 0; t < 2; ++t) {
      const Vec3& tm = face.tangents[t];
      const Vec3 tm_x_n = tm.cross(n);
      for (int b = 0; b < 3; ++b) {
        lb.B.block(W + b * nv, T + t * nf, nv, nf) += tm_x_n(b) * vf;        // <u^ x n, r>
        lb.B.block(U + b * nv, T + t * nf, nv, nf) -= (tau_t * tm(b)) * vf; // -tau_t <u^, v>
      }
      for (int a = 0; a < 3; ++a) {
        // Trace equation tested with eta = psi_k t_m: <w x n - tau_t (u^t - u^), eta>.
        lb.C.block(T + t * nf, W + a * nv, nf, nv) += Vec3::Unit(a).cross(n).dot(tm) * fv;
        lb.C.block(T + t * nf, U + a * nv, nf, nv) -= (tau_t * tm(a)) * fv;
      }
      lb.D.block(T + t * nf, T + t * nf, nf, nf) += tau_t * m.ff.cast<complex>();
    }
    for (int b = 0; b < 3; ++b) lb.B.block(U + b * nv, T + 2 * nf, nv, nf) += n(b) * vf; // <sigma^, v.n>
    lb.B.block(S, T + 2 * nf, nv, nf) -= tau_n * vf;                                   // -tau_n <sigma^, q>

    // Trace equation tested with xi = psi_k: <u.n + tau_n (sigma - sigma^), xi>.
    for (int a = 0; a < 3; ++a) lb.C.block(T + 2 * nf, U + a * nv, nf, nv) += n(a) * fv;
    lb.C.block(T + 2 * nf, S, nf, nv) += tau_n * fv;
    lb.D.block(T + 2 * nf, T + 2 * nf, nf, nf) -= tau_n * m.ff.cast<complex>();
  }
  return lb;
}

/// Factorized interior block and the pieces needed to rebuild interior fields
/// and numerical traces. Shared between elements with identical local blocks.
struct InteriorSolver {
  Eigen::PartialPivLU<CMatrix> lu;
  CMatrix AinvB; // A^{-1} B
  CMatrix C, D;
};

struct CondensedElement {
  /// S = D - C A^{-1} B over the 4 faces' trace unknowns (12 dim_face square).
  CMatrix schur;
  /// -C A^{-1} F.
  CVector schur_rhs;
  std::shared_ptr<const InteriorSolver> recovery;
  CVector AinvF;
  real kappa = 0.0;
  StabilizationParams tau;
  SignConvention convention = SignConvention::minus_iwt;
};

/// Reciprocal condition estimate below which the interior block counts as singular.
inline constexpr real singular_rcond = 1e-14;

inline std::shared_ptr<const InteriorSolver> factor_interior(const LocalBlocks& lb, std::size_t element_index = 0) {
  auto solver = std::make_shared<InteriorSolver>();
  solver->lu.compute(lb.A);
  // PartialPivLU cannot report exact singularity; fall back to the estimate.
  const real rc = solver->lu.rcond();
  if (!(rc > singular_rcond)) throw condensation_error(element_index, rc > 0.0 ? 1.0 / rc : std::numeric_limits<real>::infinity());
  solver->AinvB = solver->lu.solve(lb.B);
  solver->C = lb.C;
  solver->D = lb.D;
  return solver;
}

/// Static condensation with an interior factorization computed elsewhere.
inline CondensedElement condense_with(const LocalBlocks& lb, std::shared_ptr<const InteriorSolver> solver,
                                      const CMatrix* schur = nullptr) {
  CondensedElement ce;
  ce.AinvF = solver->lu.solve(lb.F);
  ce.schur = schur ? *schur : CMatrix(solver->D - solver->C * solver->AinvB);
  ce.schur_rhs = -(solver->C * ce.AinvF);
  ce.recovery = std::move(solver);
  ce.kappa = lb.kappa;
  ce.tau = lb.tau;
  ce.convention = lb.convention;
  return ce;
}

inline CondensedElement condense(const LocalBlocks& lb, std::size_t element_index = 0) {
  return condense_with(lb, factor_interior(lb, element_index));
}

/// Interior fields of one element plus its numerical traces projected onto the
/// face spaces: per local face, (w^ t x n) in the (t1, t2) frame (2 dim_face)
/// and u^n . n (dim_face).
struct RecoveredElement {
  CVector w, u, sigma;
  std::array<CVector, 4> flux_tangential;
  std::array<CVector, 4> flux_normal;
};

/// `trace_values` follows the local trace layout of LocalBlocks; face_areas
/// scale the projected numerical traces (face mass = 2 |F| I).
inline RecoveredElement recover(const InteriorSolver& r, const CVector& AinvF, const CVector& trace_values,
                                const std::array<real, 4>& face_areas) {
  const auto nt = r.C.rows();
  if (trace_values.size() != nt)
    throw invalid_argument("trace vector has size " + std::to_string(trace_values.size()) + ", expected " + std::to_string(nt));
  const int nf = static_cast<int>(nt / 12);
  const int nv = static_cast<int>(AinvF.size() / 7);
  const CVector X = AinvF - r.AinvB * trace_values;
  RecoveredElement out;
  out.w = X.segment(0, 3 * nv);
  out.u = X.segment(3 * nv, 3 * nv);
  out.sigma = X.segment(6 * nv, nv);
  const CVector R = r.C * X + r.D * trace_values;
  for (int l = 0; l < 4; ++l) {
    const real mass = 2.0 * face_areas[l];
    out.flux_tangential[l] = R.segment(3 * nf * l, 2 * nf) / mass;
    out.flux_normal[l] = R.segment(3 * nf * l + 2 * nf, nf) / mass;
  }
  return out;
}

inline RecoveredElement recover(const CondensedElement& ce, const CVector& trace_values, const std::array<real, 4>& face_areas) {
  return recover(*ce.recovery, ce.AinvF, trace_values, face_areas);
}

inline std::array<real, 4> face_areas(const LocalElement& el) {
  return {el.faces[0].area, el.faces[1].area, el.faces[2].area, el.faces[3].area};
}

} // namespace hdgmax
