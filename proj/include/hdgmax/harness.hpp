#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdgmax/global_system.hpp"
#include "hdgmax/linear_solver.hpp"
#include "hdgmax/local_assembly.hpp"
#include "hdgmax/manufactured.hpp"
#include "hdgmax/mesh.hpp"

namespace hdgmax {

struct RunConfig {
  int n = 4;
  int p = 1;
  real kappa = 5.0;
  SignConvention convention = SignConvention::minus_iwt;
  MinusVariant minus_variant = MinusVariant::conjugate;
  TauMode tau_mode = TauMode::global_h;
  SolverKind solver = SolverKind::direct;
  SolverOptions solver_options;
  /// Exactness of the error quadrature is 2p + error_quadrature_extra.
  int error_quadrature_extra = 6;
  /// Reuse condensed operators between congruent elements with equal face frames.
  bool reuse_local_operators = true;

  void validate() const {
    if (n < 1 || n > max_subdivisions) throw invalid_argument("n must lie in 1.." + std::to_string(max_subdivisions));
    if (p < 1 || p > max_basis_degree) throw invalid_argument("p must lie in 1.." + std::to_string(max_basis_degree));
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw invalid_argument("kappa must be positive and finite");
    if (!(solver_options.tol > 0.0)) throw invalid_argument("solver tolerance must be positive");
    if (error_quadrature_extra < 0) throw invalid_argument("error quadrature increment must be nonnegative");
  }
};

/// Wall-clock seconds per pipeline stage; `local` covers assembly and condensation.
struct StageTimings {
  double mesh = 0.0, local = 0.0, global = 0.0, solve = 0.0, recover = 0.0, metrics = 0.0;
  double total() const { return mesh + local + global + solve + recover + metrics; }
};

/// Discrete state after recovery. Coefficients are per element in the
/// interior layout of LocalBlocks (component-major blocks of dim_volume).
struct DiscreteSolution {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const AssemblyContext> context;
  int p = 1;
  real kappa = 1.0;
  SignConvention convention = SignConvention::minus_iwt;
  std::vector<StabilizationParams> tau; // per element
  DofMap dofs;
  CVector traces;
  std::vector<ElementGeometry> geometry;
  std::vector<CVector> w, u, sigma;
  /// (f, v) load vectors per element, U rows only (3 dim_volume).
  std::vector<CVector> load;
  /// <g, eta> per boundary face (2 dim_face), empty on interior faces.
  std::vector<CVector> boundary_load;
  TraceSolution solver;
  std::size_t distinct_local_operators = 0;

  /// u_h at physical point x of element e.
  CVec3 eval_u(std::size_t e, const Vec3& x) const { return eval_field(u[e], e, x); }
  CVec3 eval_w(std::size_t e, const Vec3& x) const { return eval_field(w[e], e, x); }

private:
  CVec3 eval_field(const CVector& c, std::size_t e, const Vec3& x) const {
    const RVector phi = context->basis.eval_volume(geometry[e].to_reference(x));
    const int nv = context->nv();
    CVec3 out;
    for (int a = 0; a < 3; ++a) out(a) = phi.cast<complex>().dot(c.segment(a * nv, nv)); // phi real: no conjugation effect
    return out;
  }
};

struct ErrorReport {
  std::string case_name;
  int n = 0, p = 0;
  real kappa = 0.0, h = 0.0;
  SignConvention convention = SignConvention::minus_iwt;
  std::size_t elements = 0, faces = 0, dofs = 0, dofs_all_faces = 0;
  real err_u = 0.0, err_w = 0.0;
  real norm_u = 0.0, norm_w = 0.0; // exact solution norms
  real rel_u = 0.0, rel_w = 0.0;
  real norm_uh = 0.0, norm_wh = 0.0;
  complex energy_residual{0.0, 0.0};
  real energy_scale = 0.0; // kappa^2 ||u_h||^2 + ||w_h||^2
  real curl_uh = 0.0, div_uh = 0.0;
  real jump_t = 0.0, jump_n = 0.0;
  real solver_residual = 0.0;
  SolverStats solver;
  StageTimings timings;

  /// |residual| / scale, or |residual| when the scale vanishes.
  real energy_relative() const { return energy_scale > 0.0 ? std::abs(energy_residual) / energy_scale : std::abs(energy_residual); }
};

namespace detail {

template <class F>
auto timed(double& seconds, const char* stage, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Stop {
    double& s;
    std::chrono::steady_clock::time_point t0;
    ~Stop() { s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
  } stop{seconds, t0};
  try {
    return body();
  } catch (const stage_error&) {
    throw;
  } catch (const std::exception& e) {
    throw stage_error(stage, e.what());
  }
}

/// Quantized element signature: Jacobian, tau and face frames. Elements with
/// equal keys share interior factorizations and Schur complements.
inline std::vector<long long> operator_key(const LocalElement& el, const StabilizationParams& tau) {
  const real q = 1e-10 * el.diameter;
  std::vector<long long> key;
  key.reserve(9 + 4 * 9 + 2);
  const auto put = [&key](real v, real scale) { key.push_back(std::llround(v / scale)); };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) put(el.geometry.jacobian(i, j), q);
  for (const LocalFace& f : el.faces) {
    for (int c = 0; c < 3; ++c) put(f.normal(c), 1e-10);
    for (const Vec3& t : f.tangents)
      for (int c = 0; c < 3; ++c) put(t(c), 1e-10);
    // The face parametrization fixes the face basis; record its first vertex relative to the element.
    const Vec3 v0 = el.geometry.to_reference(f.vertices[0]);
    const Vec3 v1 = el.geometry.to_reference(f.vertices[1]);
    for (int c = 0; c < 3; ++c) put(v0(c), 1e-10);
    for (int c = 0; c < 3; ++c) put(v1(c), 1e-10);
  }
  put(tau.tau_t * el.diameter, 1e-10);
  put(tau.tau_n / el.diameter, 1e-10);
  return key;
}

struct CondensedCase {
  GlobalSystem system;
  std::vector<std::shared_ptr<const InteriorSolver>> solvers;
  std::vector<CVector> ainvf;
  std::vector<std::array<real, 4>> areas;
};

/// Mesh, local assembly, condensation and global assembly; fills the
/// geometric and data parts of `sol`.
inline CondensedCase condense_case(const RunConfig& cfg, const ManufacturedCase& mc, StageTimings& t, DiscreteSolution& sol) {
  cfg.validate();
  if (mc.kappa != cfg.kappa || mc.convention != cfg.convention)
    throw stage_error("config", "manufactured case kappa/convention differ from the run configuration");
  sol.p = cfg.p;
  sol.kappa = cfg.kappa;
  sol.convention = cfg.convention;
  sol.mesh = detail::timed(t.mesh, "mesh", [&] { return std::make_shared<const Mesh>(build_structured_cube_mesh(cfg.n)); });
  const Mesh& mesh = *sol.mesh;
  const ScaledData data = scale_data(mc);

  CondensedCase out;
  auto& solvers = out.solvers;
  auto& ainvf = out.ainvf;
  auto& areas = out.areas;
  solvers.resize(mesh.num_elements());
  ainvf.resize(mesh.num_elements());
  areas.resize(mesh.num_elements());

  out.system = [&] {
    auto ctx = detail::timed(t.local, "local", [&] { return std::make_shared<const AssemblyContext>(cfg.p); });
    sol.context = ctx;
    GlobalAssembler assembler(mesh, cfg.p, cfg.kappa, cfg.convention);
    struct Cached {
      std::shared_ptr<const InteriorSolver> solver;
      CMatrix schur;
    };
    std::map<std::vector<long long>, Cached> cache;
    const real h = mesh_size(mesh);
    const int nv = ctx->nv();
    sol.tau.resize(mesh.num_elements());
    sol.geometry.resize(mesh.num_elements());
    sol.load.resize(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      CondensedElement ce = detail::timed(t.local, "local", [&] {
        const LocalElement el = make_local_element(mesh, e);
        const StabilizationParams tau = StabilizationParams::from_mesh_size(
            cfg.p, cfg.tau_mode == TauMode::global_h ? h : el.diameter, cfg.kappa, cfg.tau_mode,
            penalty_sign(cfg.convention, cfg.minus_variant));
        sol.tau[e] = tau;
        sol.geometry[e] = el.geometry;
        areas[e] = face_areas(el);
        if (!cfg.reuse_local_operators) {
          const LocalBlocks lb = assemble_local(el, *ctx, cfg.kappa, tau, cfg.convention, &data.f);
          sol.load[e] = lb.F.segment(3 * nv, 3 * nv);
          return condense(lb, e);
        }
        auto key = detail::operator_key(el, tau);
        auto it = cache.find(key);
        LocalBlocks shell;
        shell.F = assemble_load(el, *ctx, data.f);
        shell.kappa = cfg.kappa;
        shell.tau = tau;
        shell.convention = cfg.convention;
        sol.load[e] = shell.F.segment(3 * nv, 3 * nv);
        if (it == cache.end()) {
          const LocalBlocks lb = assemble_local(el, *ctx, cfg.kappa, tau, cfg.convention);
          auto solver = factor_interior(lb, e);
          CMatrix schur = solver->D - solver->C * solver->AinvB;
          it = cache.emplace(std::move(key), Cached{std::move(solver), std::move(schur)}).first;
        }
        return condense_with(shell, it->second.solver, &it->second.schur);
      });
      detail::timed(t.global, "global", [&] {
        assembler.add_element(e, ce);
        return 0;
      });
      solvers[e] = ce.recovery;
      ainvf[e] = std::move(ce.AinvF);
    }
    sol.distinct_local_operators = cfg.reuse_local_operators ? cache.size() : mesh.num_elements();
    return detail::timed(t.global, "global", [&] {
      assembler.add_boundary(ctx->basis, ctx->data_tri, &data.g);
      sol.boundary_load.resize(mesh.num_faces());
      for (std::size_t f = 0; f < mesh.num_faces(); ++f)
        if (mesh.faces[f].is_boundary) sol.boundary_load[f] = assembler.boundary_load(f, ctx->basis, ctx->data_tri, data.g);
      return std::move(assembler).finish();
    });
  }();
  return out;
}

} // namespace detail

/// Condensed global trace system of a run, without solving it.
inline GlobalSystem assemble_system(const RunConfig& cfg, const ManufacturedCase& mc) {
  StageTimings t;
  DiscreteSolution scratch;
  return detail::condense_case(cfg, mc, t, scratch).system;
}

/// mesh -> local assembly -> condensation -> global system -> solve -> recovery.
/// Failures are rethrown as stage_error tagged with the failing stage.
inline DiscreteSolution solve_case(const RunConfig& cfg, const ManufacturedCase& mc, StageTimings* timings = nullptr) {
  StageTimings local_timings;
  StageTimings& t = timings ? *timings : local_timings;
  DiscreteSolution sol;
  detail::CondensedCase cc = detail::condense_case(cfg, mc, t, sol);
  const GlobalSystem& system = cc.system;
  const Mesh& mesh = *sol.mesh;
  const auto& solvers = cc.solvers;
  const auto& ainvf = cc.ainvf;
  const auto& areas = cc.areas;

  sol.solver = detail::timed(t.solve, "solve", [&] { return solve(system, cfg.solver, cfg.solver_options); });
  sol.dofs = system.dofs;
  sol.traces = sol.solver.x;

  detail::timed(t.recover, "recover", [&] {
    sol.w.resize(mesh.num_elements());
    sol.u.resize(mesh.num_elements());
    sol.sigma.resize(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      const CVector lam = gather_local_traces(mesh, sol.dofs, e, sol.traces);
      RecoveredElement r = recover(*solvers[e], ainvf[e], lam, areas[e]);
      sol.w[e] = std::move(r.w);
      sol.u[e] = std::move(r.u);
      sol.sigma[e] = std::move(r.sigma);
    }
    return 0;
  });
  return sol;
}

namespace detail {

/// Calls body(e, l, face, x_q, weight_q, u_h(x_q), sigma_h(x_q), u^(x_q), sigma^(x_q))
/// at the scheme's face quadrature points of every element face.
template <class Body>
void for_each_face_point(const DiscreteSolution& s, Body&& body) {
  const Mesh& mesh = *s.mesh;
  const AssemblyContext& ctx = *s.context;
  const int nv = ctx.nv(), nf = ctx.nf();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const LocalElement el = make_local_element(mesh, e);
    const CVector lam = gather_local_traces(mesh, s.dofs, e, s.traces);
    for (int l = 0; l < 4; ++l) {
      const LocalFace& f = el.faces[l];
      const bool boundary = mesh.faces[mesh.element_faces[e][l].face].is_boundary;
      for (std::size_t q = 0; q < ctx.tri_rule.size(); ++q) {
        const Vec3& st = ctx.tri_rule.points[q];
        const Vec3 x = f.point(st.x(), st.y());
        const RVector phi = ctx.basis.eval_volume(el.geometry.to_reference(x));
        const RVector psi = ctx.face_values.row(static_cast<Eigen::Index>(q)).transpose();
        CVec3 uh;
        for (int a = 0; a < 3; ++a) uh(a) = (phi.transpose().cast<complex>() * s.u[e].segment(a * nv, nv))(0);
        const complex sh = (phi.transpose().cast<complex>() * s.sigma[e])(0);
        CVec3 uhat = CVec3::Zero();
        for (int m = 0; m < 2; ++m)
          uhat += (psi.transpose().cast<complex>() * lam.segment(3 * nf * l + m * nf, nf))(0) * f.tangents[m].cast<complex>();
        const complex shat = boundary ? complex{0.0, 0.0} : (psi.transpose().cast<complex>() * lam.segment(3 * nf * l + 2 * nf, nf))(0);
        body(e, l, f, boundary, 2.0 * f.area * ctx.tri_rule.weights[q], uh, sh, uhat, shat);
      }
    }
  }
}

} // namespace detail

/// Residual of the discrete energy identity obtained by testing the scheme with
/// the discrete solution itself:
///   -i||w_h||^2 + i k^2 ||u_h||^2 + c ||tau_t^1/2 (u_h^t - u^)||^2 + c ||tau_n^1/2 (sigma_h - sigma^)||^2
///   + s k ||u^||^2_bdry - (f, u_h) - <g, u^>_bdry,
/// with s the impedance sign and c the penalty sign (c = s for the conjugate
/// e^{-iwt} scheme, c = 1 otherwise).
/// Every term uses the rule the scheme was assembled with, so the residual is
/// zero up to the solver tolerance.
inline complex energy_identity_check(const DiscreteSolution& s) {
  const Mesh& mesh = *s.mesh;
  const int nf = s.context->nf();
  real ww = 0.0, uu = 0.0;
  complex fu{0.0, 0.0};
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const real dj = std::abs(s.geometry[e].det_jacobian);
    ww += dj * s.w[e].squaredNorm();
    uu += dj * s.u[e].squaredNorm();
    fu += s.u[e].dot(s.load[e]); // sum conj(u_i) F_i = (f, u_h)
  }
  real jt = 0.0, jn = 0.0;
  detail::for_each_face_point(s, [&](std::size_t e, int, const LocalFace& f, bool, real wq, const CVec3& uh, complex sh,
                                     const CVec3& uhat, complex shat) {
    const CVec3 d = tangential(uh, f.normal) - uhat;
    jt += s.tau[e].signed_t() * wq * d.squaredNorm();
    jn += s.tau[e].signed_n() * wq * std::norm(sh - shat);
  });
  real ub = 0.0;
  complex gu{0.0, 0.0};
  for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
    if (!mesh.faces[fi].is_boundary) continue;
    const CVector lam = s.traces.segment(static_cast<Eigen::Index>(s.dofs.offset(fi)), 2 * nf);
    ub += 2.0 * mesh.faces[fi].area * lam.squaredNorm();
    gu += lam.dot(s.boundary_load[fi]);
  }
  const real sk = impedance_sign(s.convention) * s.kappa;
  return -I * ww + I * (s.kappa * s.kappa) * uu + jt + jn + sk * ub - fu - gu;
}

struct Diagnostics {
  real curl_uh = 0.0, div_uh = 0.0; // broken L2 norms
  real jump_t = 0.0, jump_n = 0.0;  // ||tau_t^1/2 (u^t - u^)||, ||tau_n^1/2 (sigma - sigma^)|| over all element boundaries
  real norm_uh = 0.0, norm_wh = 0.0;
};

inline Diagnostics diagnostics(const DiscreteSolution& s) {
  const Mesh& mesh = *s.mesh;
  const AssemblyContext& ctx = *s.context;
  const int nv = ctx.nv();
  Diagnostics d;
  const VolumeTable tab = ctx.basis.tabulate_volume(ctx.data_tet);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = s.geometry[e];
    const real dj = std::abs(g.det_jacobian);
    d.norm_uh += dj * s.u[e].squaredNorm();
    d.norm_wh += dj * s.w[e].squaredNorm();
    // grad[a](q, b) = d(u_a)/dx_b at point q.
    std::array<CMatrix, 3> grad;
    for (int a = 0; a < 3; ++a) {
      grad[a] = CMatrix::Zero(static_cast<Eigen::Index>(ctx.data_tet.size()), 3);
      for (int c = 0; c < 3; ++c) {
        const CVector dref = tab.grads[c].cast<complex>() * s.u[e].segment(a * nv, nv);
        for (int b = 0; b < 3; ++b) grad[a].col(b) += g.inverse_jacobian(c, b) * dref;
      }
    }
    for (std::size_t q = 0; q < ctx.data_tet.size(); ++q) {
      const auto Q = static_cast<Eigen::Index>(q);
      const complex div = grad[0](Q, 0) + grad[1](Q, 1) + grad[2](Q, 2);
      const CVec3 curl(grad[2](Q, 1) - grad[1](Q, 2), grad[0](Q, 2) - grad[2](Q, 0), grad[1](Q, 0) - grad[0](Q, 1));
      const real wq = dj * ctx.data_tet.weights[q];
      d.div_uh += wq * std::norm(div);
      d.curl_uh += wq * curl.squaredNorm();
    }
  }
  detail::for_each_face_point(s, [&](std::size_t e, int, const LocalFace& f, bool, real wq, const CVec3& uh, complex sh,
                                     const CVec3& uhat, complex shat) {
    d.jump_t += s.tau[e].tau_t * wq * (tangential(uh, f.normal) - uhat).squaredNorm();
    d.jump_n += s.tau[e].tau_n * wq * std::norm(sh - shat);
  });
  for (real* v : {&d.curl_uh, &d.div_uh, &d.jump_t, &d.jump_n, &d.norm_uh, &d.norm_wh}) *v = std::sqrt(*v);
  return d;
}

struct FieldErrors {
  real err_u = 0.0, err_w = 0.0, norm_u = 0.0, norm_w = 0.0;
};

/// L2(Omega) errors with a rule of exactness `degree`. Exact norms take the
/// analytic values of the case when it provides them.
inline FieldErrors l2_errors(const DiscreteSolution& s, const ManufacturedCase& mc, int degree) {
  const QuadratureRule rule = make_quadrature(Domain::tetrahedron, degree);
  const RMatrix phi = [&] {
    RMatrix m(static_cast<Eigen::Index>(rule.size()), s.context->nv());
    for (std::size_t q = 0; q < rule.size(); ++q) m.row(static_cast<Eigen::Index>(q)) = s.context->basis.eval_volume(rule.points[q]).transpose();
    return m;
  }();
  const int nv = s.context->nv();
  FieldErrors r;
  for (std::size_t e = 0; e < s.mesh->num_elements(); ++e) {
    const ElementGeometry& g = s.geometry[e];
    const real dj = std::abs(g.det_jacobian);
    std::array<CVector, 3> uh, wh;
    for (int a = 0; a < 3; ++a) {
      uh[a] = phi.cast<complex>() * s.u[e].segment(a * nv, nv);
      wh[a] = phi.cast<complex>() * s.w[e].segment(a * nv, nv);
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto Q = static_cast<Eigen::Index>(q);
      const Vec3 x = g.to_physical(rule.points[q]);
      const CVec3 u = mc.u_exact(x), w = mc.w_exact(x);
      const real wq = dj * rule.weights[q];
      for (int a = 0; a < 3; ++a) {
        r.err_u += wq * std::norm(u(a) - uh[a](Q));
        r.err_w += wq * std::norm(w(a) - wh[a](Q));
      }
      r.norm_u += wq * u.squaredNorm();
      r.norm_w += wq * w.squaredNorm();
    }
  }
  r.err_u = std::sqrt(r.err_u);
  r.err_w = std::sqrt(r.err_w);
  r.norm_u = mc.u_norm ? *mc.u_norm : std::sqrt(r.norm_u);
  r.norm_w = mc.w_norm ? *mc.w_norm : std::sqrt(r.norm_w);
  return r;
}

inline ErrorReport make_report(const DiscreteSolution& s, const ManufacturedCase& mc, const RunConfig& cfg, StageTimings t) {
  ErrorReport r;
  detail::timed(t.metrics, "metrics", [&] {
    r.case_name = mc.name;
    r.n = cfg.n;
    r.p = cfg.p;
    r.kappa = cfg.kappa;
    r.h = mesh_size(*s.mesh);
    r.convention = cfg.convention;
    r.elements = s.mesh->num_elements();
    r.faces = s.mesh->num_faces();
    r.dofs = s.dofs.total_unknowns;
    r.dofs_all_faces = all_face_dofs(*s.mesh, cfg.p);
    const FieldErrors fe = l2_errors(s, mc, 2 * cfg.p + cfg.error_quadrature_extra);
    r.err_u = fe.err_u;
    r.err_w = fe.err_w;
    r.norm_u = fe.norm_u;
    r.norm_w = fe.norm_w;
    r.rel_u = fe.norm_u > 0.0 ? fe.err_u / fe.norm_u : std::numeric_limits<real>::quiet_NaN();
    r.rel_w = fe.norm_w > 0.0 ? fe.err_w / fe.norm_w : std::numeric_limits<real>::quiet_NaN();
    const Diagnostics d = diagnostics(s);
    r.norm_uh = d.norm_uh;
    r.norm_wh = d.norm_wh;
    r.curl_uh = d.curl_uh;
    r.div_uh = d.div_uh;
    r.jump_t = d.jump_t;
    r.jump_n = d.jump_n;
    r.energy_residual = energy_identity_check(s);
    r.energy_scale = cfg.kappa * cfg.kappa * d.norm_uh * d.norm_uh + d.norm_wh * d.norm_wh;
    r.solver_residual = s.solver.relative_residual;
    r.solver = s.solver.stats;
    return 0;
  });
  r.timings = t;
  return r;
}

inline ErrorReport run_case(const RunConfig& cfg, const ManufacturedCase& mc) {
  StageTimings t;
  const DiscreteSolution s = solve_case(cfg, mc, &t);
  return make_report(s, mc, cfg, t);
}

/// Case by name: "plane_wave" or "polynomial" (degree p_target).
inline ManufacturedCase make_case(std::string_view name, real kappa, SignConvention convention, int p_target) {
  if (name == "plane_wave" || name == "plane") return plane_wave_case(kappa, convention);
  if (name == "polynomial" || name == "poly") return polynomial_case(p_target, kappa, convention);
  throw invalid_argument("unknown case '" + std::string(name) + "' (expected plane_wave|polynomial)");
}

enum class MeshRuleKind { fixed, kappa_h, kappa3_h2 };

/// fixed: use the listed n. kh=c: h = c / kappa. k3h2=c: h = sqrt(c / kappa^3).
/// The target h becomes the n >= 1 whose diameter sqrt(3)/n is nearest to it,
/// so kappa h lands as close to c as the structured mesh allows.
struct MeshRule {
  MeshRuleKind kind = MeshRuleKind::fixed;
  real c = 0.0;

  static MeshRule parse(std::string_view s) {
    if (s == "fixed") return {};
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw invalid_argument("mesh rule '" + std::string(s) + "' must be fixed, kh=C or k3h2=C");
    const std::string lhs(s.substr(0, eq)), rhs(s.substr(eq + 1));
    real c = 0.0;
    try {
      std::size_t used = 0;
      c = std::stod(rhs, &used);
      if (used != rhs.size()) throw std::invalid_argument(rhs);
    } catch (const std::exception&) {
      throw invalid_argument("mesh rule constant '" + rhs + "' is not a number");
    }
    if (!(c > 0.0)) throw invalid_argument("mesh rule constant must be positive");
    if (lhs == "kh") return {MeshRuleKind::kappa_h, c};
    if (lhs == "k3h2") return {MeshRuleKind::kappa3_h2, c};
    throw invalid_argument("unknown mesh rule '" + lhs + "' (expected kh or k3h2)");
  }

  std::string label() const {
    switch (kind) {
      case MeshRuleKind::fixed: return "fixed";
      case MeshRuleKind::kappa_h: return "kh=" + format(c);
      case MeshRuleKind::kappa3_h2: return "k3h2=" + format(c);
    }
    return "?";
  }

  real target_h(real kappa) const {
    switch (kind) {
      case MeshRuleKind::kappa_h: return c / kappa;
      case MeshRuleKind::kappa3_h2: return std::sqrt(c / (kappa * kappa * kappa));
      case MeshRuleKind::fixed: break;
    }
    return std::numeric_limits<real>::quiet_NaN();
  }

  int subdivisions(real kappa) const {
    const real h = target_h(kappa), x = std::sqrt(3.0) / h;
    const long lo = std::clamp<long>(static_cast<long>(std::floor(x)), 1, max_subdivisions);
    const long hi = std::min<long>(lo + 1, max_subdivisions);
    const long n = std::abs(std::sqrt(3.0) / static_cast<real>(hi) - h) < std::abs(std::sqrt(3.0) / static_cast<real>(lo) - h) ? hi : lo;
    return static_cast<int>(n);
  }

private:
  static std::string format(real v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

struct StudyConfig {
  std::vector<real> kappas;
  std::vector<int> ns; // used by the fixed rule
  std::vector<int> ps;
  MeshRule rule;
  std::string case_name = "plane_wave";
  RunConfig base;
};

struct StudyRow {
  real kappa = 0.0;
  int p = 0, n = 0;
  real target_h = std::numeric_limits<real>::quiet_NaN(); // NaN under the fixed rule
  std::string mesh_note;                                   // how n was chosen
  ErrorReport report;
  std::optional<real> rate_u, rate_w; // against the previous row of the same (kappa, p)
  bool ok = false;
  std::string failure;
};

struct StudyTable {
  std::vector<StudyRow> rows;
  bool complete = true;
};

/// Rows in config order: kappa outer, p middle, n inner. Rates compare
/// successive rows sharing (kappa, p): log(e_prev / e) / log(h_prev / h),
/// which is log2(e_coarse / e_fine) for mesh doubling. A failing run ends the
/// table; the failed row is kept with ok = false.
inline StudyTable convergence_study(const StudyConfig& sc) {
  if (sc.kappas.empty() || sc.ps.empty()) throw invalid_argument("study needs nonempty kappa and p lists");
  if (sc.rule.kind == MeshRuleKind::fixed && sc.ns.empty()) throw invalid_argument("fixed mesh rule needs a nonempty n list");
  StudyTable table;
  for (real kappa : sc.kappas)
    for (int p : sc.ps) {
      std::vector<int> ns = sc.ns;
      StudyRow proto;
      proto.kappa = kappa;
      proto.p = p;
      if (sc.rule.kind != MeshRuleKind::fixed) {
        ns = {sc.rule.subdivisions(kappa)};
        proto.target_h = sc.rule.target_h(kappa);
      }
      const StudyRow* prev = nullptr;
      for (int n : ns) {
        StudyRow row = proto;
        row.n = n;
        if (sc.rule.kind == MeshRuleKind::fixed) {
          row.mesh_note = "fixed";
        } else {
          const real h = std::sqrt(3.0) / n;
          row.mesh_note = sc.rule.label() + ": target h=" + std::to_string(row.target_h) + " -> n=" + std::to_string(n) +
                          " (h=" + std::to_string(h) + ", kappa h=" + std::to_string(kappa * h) + ")";
        }
        RunConfig cfg = sc.base;
        cfg.n = n;
        cfg.p = p;
        cfg.kappa = kappa;
        try {
          row.report = run_case(cfg, make_case(sc.case_name, kappa, cfg.convention, p));
          row.ok = true;
        } catch (const std::exception& e) {
          row.failure = e.what();
          table.rows.push_back(std::move(row));
          table.complete = false;
          return table;
        }
        if (prev) {
          const real hr = std::log(prev->report.h / row.report.h);
          row.rate_u = std::log(prev->report.err_u / row.report.err_u) / hr;
          row.rate_w = std::log(prev->report.err_w / row.report.err_w) / hr;
        }
        table.rows.push_back(std::move(row));
        prev = &table.rows.back();
      }
    }
  return table;
}

struct TraceSample {
  real z = 0.0;
  std::size_t element = 0;
  CVec3 u_h = CVec3::Zero();
  CVec3 u_exact = CVec3::Zero();
};

/// Smallest element index whose closure contains x.
inline std::optional<std::size_t> locate_element(const DiscreteSolution& s, const Vec3& x, real tol = 1e-12) {
  for (std::size_t e = 0; e < s.geometry.size(); ++e) {
    const Vec3 xi = s.geometry[e].to_reference(x);
    if (xi.minCoeff() >= -tol && xi.sum() <= 1.0 + tol) return e;
  }
  return std::nullopt;
}

/// Samples u_h along x = x0, y = y0, z in [0, 1] at `samples` equispaced points.
inline std::vector<TraceSample> line_trace(const DiscreteSolution& s, const ManufacturedCase& mc, int samples, real x0 = 0.5,
                                           real y0 = 0.5) {
  if (samples < 2) throw invalid_argument("line trace needs at least 2 samples");
  if (x0 < 0.0 || x0 > 1.0 || y0 < 0.0 || y0 > 1.0) throw invalid_argument("trace line lies outside the unit cube");
  std::vector<TraceSample> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    TraceSample t;
    t.z = static_cast<real>(i) / (samples - 1);
    const Vec3 x(x0, y0, t.z);
    const auto e = locate_element(s, x);
    if (!e) throw error("no element contains the trace point z = " + std::to_string(t.z));
    t.element = *e;
    t.u_h = s.eval_u(*e, x);
    t.u_exact = mc.u_exact(x);
    out.push_back(t);
  }
  return out;
}

} // namespace hdgmax
