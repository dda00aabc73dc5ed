#include <catch_amalgamated.hpp>

#include <random>

#include "hdgmax/local_assembly.hpp"
#include "hdgmax/projection.hpp"
#include "oracle/dense_oracle.hpp"

using namespace hdgmax;

namespace {

std::array<Vec3, 4> random_tet(std::mt19937& rng) {
  std::uniform_real_distribution<real> u(0.0, 1.0);
  for (;;) {
    std::array<Vec3, 4> x;
    for (auto& v : x) v = Vec3(u(rng), u(rng), u(rng));
    Mat3 j;
    j << x[1] - x[0], x[2] - x[0], x[3] - x[0];
    // Keep reasonably shaped elements; orientation fixed by swapping.
    if (std::abs(j.determinant()) < 0.02) continue;
    if (j.determinant() < 0.0) std::swap(x[2], x[3]);
    return x;
  }
}

CVector random_vector(std::mt19937& rng, Eigen::Index n) {
  std::normal_distribution<real> d;
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = complex(d(rng), d(rng));
  return v;
}

real max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

CMatrix interior(const oracle::ElementSystem& s) { return s.K.topLeftCorner(7 * s.nv, 7 * s.nv); }
CMatrix coupling(const oracle::ElementSystem& s) { return s.K.topRightCorner(7 * s.nv, 12 * s.nf); }
CMatrix trace_rows(const oracle::ElementSystem& s) { return s.K.bottomLeftCorner(12 * s.nf, 7 * s.nv); }
CMatrix trace_block(const oracle::ElementSystem& s) { return s.K.bottomRightCorner(12 * s.nf, 12 * s.nf); }

const std::array<Vec3, 4> reference_tet{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};

} // namespace

TEST_CASE("W-W block is i times the mass matrix") {
  const AssemblyContext ctx(1);
  const LocalElement el = make_local_element(reference_tet);
  const auto tau = StabilizationParams::from_mesh_size(1, el.diameter, 1.0);
  const LocalBlocks lb = assemble_local(el, ctx, 1.0, tau, SignConvention::minus_iwt);
  const CMatrix ww = lb.block(Group::W, Group::W);
  REQUIRE(ww.rows() == 12);
  // The basis is orthonormal on the reference element, |det J| = 1 here.
  CHECK(max_abs(ww - I * CMatrix::Identity(12, 12)) < 1e-12);

  std::mt19937 rng(1);
  const LocalElement other = make_local_element(random_tet(rng));
  const LocalBlocks lb2 = assemble_local(other, ctx, 1.0, tau, SignConvention::minus_iwt);
  const real dj = std::abs(other.geometry.det_jacobian);
  CHECK(max_abs(lb2.block(Group::W, Group::W) - (I * dj) * CMatrix::Identity(12, 12)) < 1e-12);
}

TEST_CASE("block sizes follow the unknown groups") {
  for (int p = 1; p <= 3; ++p) {
    const AssemblyContext ctx(p);
    const LocalElement el = make_local_element(reference_tet);
    const LocalBlocks lb = assemble_local(el, ctx, 2.0, {1.0, 1.0}, SignConvention::minus_iwt);
    const int nv = ctx.nv(), nf = ctx.nf();
    CHECK(lb.indices(Group::W).size() == std::size_t(3 * nv));
    CHECK(lb.indices(Group::U).size() == std::size_t(3 * nv));
    CHECK(lb.indices(Group::S).size() == std::size_t(nv));
    CHECK(lb.indices(Group::Ut).size() == std::size_t(8 * nf));
    CHECK(lb.indices(Group::Sf).size() == std::size_t(4 * nf));
    CHECK(lb.A.rows() == 7 * nv);
    CHECK(lb.B.cols() == 12 * nf);
    const CondensedElement ce = condense(lb);
    CHECK(ce.schur.rows() == 4 * 3 * nf);
    CHECK(ce.schur.cols() == 4 * 3 * nf);
  }
}

TEST_CASE("local blocks match the dense quadrature oracle") {
  std::mt19937 rng(2024);
  for (int p = 1; p <= 3; ++p) {
    const AssemblyContext ctx(p);
    for (int trial = 0; trial < 8; ++trial) {
      const LocalElement el = make_local_element(random_tet(rng));
      const auto forms = oracle::assemble_forms(el, ctx.basis, 2 * p + 4);
      // Degree-2 load: both rules integrate it exactly.
      auto f = [](const Vec3& x) { return CVec3(complex(x.y() * x.z(), 1.0), x.x() * I, complex(x.y() * x.y())); };
      const VectorFunction fv = f;
      const CVector rhs = oracle::assemble_load(el, ctx.basis, fv, 2 * p + 4);
      for (real kappa : {1.0, 10.0, 40.0}) {
        const auto tau = StabilizationParams::from_mesh_size(p, el.diameter, kappa);
        const LocalBlocks lb = assemble_local(el, ctx, kappa, tau, SignConvention::minus_iwt, &fv);
        oracle::ElementSystem os{forms.combine(kappa, tau), rhs, ctx.nv(), ctx.nf()};
        const real scale = max_abs(os.K);
        INFO("p = " << p << " kappa = " << kappa);
        CHECK(max_abs(lb.A - interior(os)) <= 1e-11 * scale);
        CHECK(max_abs(lb.B - coupling(os)) <= 1e-11 * scale);
        CHECK(max_abs(lb.C - trace_rows(os)) <= 1e-11 * scale);
        CHECK(max_abs(lb.D - trace_block(os)) <= 1e-11 * scale);
        CHECK((lb.F - os.rhs.head(7 * ctx.nv())).norm() <= 1e-12 * os.rhs.norm());
      }
    }
  }
}

TEST_CASE("condensed systems match dense elimination") {
  std::mt19937 rng(77);
  for (int p = 1; p <= 3; ++p) {
    const AssemblyContext ctx(p);
    for (int trial = 0; trial < 50; ++trial) {
      const LocalElement el = make_local_element(random_tet(rng));
      const auto forms = oracle::assemble_forms(el, ctx.basis, 2 * p + 2);
      for (real kappa : {1.0, 10.0, 40.0}) {
        const auto tau = StabilizationParams::from_mesh_size(p, el.diameter, kappa);
        const CondensedElement ce = condense(assemble_local(el, ctx, kappa, tau, SignConvention::minus_iwt));
        const oracle::ElementSystem os{forms.combine(kappa, tau), CVector(), ctx.nv(), ctx.nf()};
        const CMatrix S = trace_block(os) - trace_rows(os) * interior(os).fullPivLu().solve(coupling(os));
        INFO("p = " << p << " kappa = " << kappa << " trial = " << trial);
        CHECK((ce.schur - S).norm() <= 1e-10 * S.norm());
      }
    }
  }
}

TEST_CASE("condensed trace residual equals the uncondensed one") {
  std::mt19937 rng(7);
  const AssemblyContext ctx(1);
  const real kappa = 7.0;
  const LocalElement el = make_local_element(random_tet(rng));
  const auto tau = StabilizationParams::from_mesh_size(1, el.diameter, kappa);
  auto f = [](const Vec3& x) { return CVec3(complex(x.y(), 1.0), complex(0.0, x.z()), complex(x.x() * x.x())); };
  const VectorFunction fv = f;
  const LocalBlocks lb = assemble_local(el, ctx, kappa, tau, SignConvention::minus_iwt, &fv);
  const CondensedElement ce = condense(lb);
  const CVector t = random_vector(rng, 12 * ctx.nf());

  // Uncondensed: solve the interior rows for X, then evaluate the trace rows.
  const auto os = oracle::assemble_element(el, ctx.basis, kappa, tau, &fv, 2 * 1 + 6);
  const CVector X = interior(os).fullPivLu().solve(os.rhs.head(7 * ctx.nv()) - coupling(os) * t);
  const CVector residual = trace_rows(os) * X + trace_block(os) * t;
  const CVector condensed = ce.schur * t - ce.schur_rhs;
  CHECK((condensed - residual).norm() <= 1e-11 * residual.norm());
}

TEST_CASE("penalty terms are linear in tau") {
  std::mt19937 rng(3);
  const AssemblyContext ctx(2);
  const LocalElement el = make_local_element(random_tet(rng));
  const StabilizationParams t1{0.7, 1.3}, t2{1.4, 2.6};
  const StabilizationParams zero{0.0, 0.0};
  const real kappa = 3.0;
  const auto a0 = assemble_local(el, ctx, kappa, zero, SignConvention::minus_iwt);
  const auto a1 = assemble_local(el, ctx, kappa, t1, SignConvention::minus_iwt);
  const auto a2 = assemble_local(el, ctx, kappa, t2, SignConvention::minus_iwt);
  for (auto m : {&LocalBlocks::A, &LocalBlocks::B, &LocalBlocks::C, &LocalBlocks::D}) {
    const CMatrix d1 = a1.*m - a0.*m, d2 = a2.*m - a1.*m;
    CHECK(max_abs(d2 - d1) < 1e-12 * std::max(1.0, max_abs(a1.*m)));
  }
  // tau = 0: the penalty-only blocks vanish.
  CHECK(max_abs(a0.block(Group::S, Group::S)) == 0.0);
  CHECK(max_abs(a0.block(Group::S, Group::Sf)) == 0.0);
  CHECK(max_abs(a0.block(Group::Ut, Group::Ut)) == 0.0);
  CHECK(max_abs(a0.block(Group::Sf, Group::Sf)) == 0.0);
  CHECK(max_abs(a0.block(Group::U, Group::Ut)) == 0.0);
  // Blocks without penalty terms do not depend on tau.
  CHECK(max_abs(a0.block(Group::W, Group::U) - a2.block(Group::W, Group::U)) == 0.0);
  CHECK(max_abs(a0.block(Group::W, Group::W) - a2.block(Group::W, Group::W)) == 0.0);
}

TEST_CASE("swapping the arguments of a sesquilinear block conjugate-transposes it") {
  std::mt19937 rng(9);
  const AssemblyContext ctx(2);
  const LocalElement el = make_local_element(random_tet(rng));
  const auto lb = assemble_local(el, ctx, 4.0, {2.0, 0.5}, SignConvention::minus_iwt);
  const real s = std::max(1.0, max_abs(lb.A));
  // (curl w, v) vs -(u, curl r): one form with the arguments swapped.
  CHECK(max_abs(lb.block(Group::W, Group::U) + lb.block(Group::U, Group::W).adjoint()) < 1e-12 * s);
  // (div u, q) vs -(sigma, div v).
  CHECK(max_abs(lb.block(Group::U, Group::S) + lb.block(Group::S, Group::U).adjoint()) < 1e-12 * s);
  // <u^ x n, r> vs <w x n, eta>; <sigma^, v.n> vs <u.n, xi>.
  CHECK(max_abs(lb.B.block(0, 0, 3 * ctx.nv(), 12 * ctx.nf()) + lb.C.block(0, 0, 12 * ctx.nf(), 3 * ctx.nv()).adjoint()) < 1e-12 * s);
  CHECK(max_abs(lb.block(Group::U, Group::Sf) - lb.block(Group::Sf, Group::U).adjoint()) < 1e-12 * s);
  // -tau_t <u^, v> vs -tau_t <u^t, eta>; -tau_n <sigma^, q> vs +tau_n <sigma, xi>.
  CHECK(max_abs(lb.block(Group::U, Group::Ut) - lb.block(Group::Ut, Group::U).adjoint()) < 1e-12 * s);
  CHECK(max_abs(lb.block(Group::S, Group::Sf) + lb.block(Group::Sf, Group::S).adjoint()) < 1e-12 * s);
  // Mass-type blocks are Hermitian up to their complex factor.
  const CMatrix uu = lb.block(Group::U, Group::U);
  const CMatrix uu_real = uu.real().cast<complex>();
  const CMatrix uu_imag = uu.imag().cast<complex>();
  CHECK(max_abs(uu_real - uu_real.adjoint()) < 1e-12 * s);
  CHECK(max_abs(uu_imag - uu_imag.adjoint()) < 1e-12 * s);

  // Complex coefficients: y^H M x equals (x_h, y_h) with the second argument conjugated.
  const CVector x = random_vector(rng, 3 * ctx.nv()), y = random_vector(rng, 3 * ctx.nv());
  const CMatrix ww = lb.block(Group::W, Group::W);
  complex direct = 0.0;
  const auto rule = make_quadrature(Domain::tetrahedron, 8);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const RVector phi = ctx.basis.eval_volume(rule.points[q]);
    const int nv = ctx.nv();
    for (int a = 0; a < 3; ++a) {
      const complex xh = phi.cast<complex>().dot(x.segment(a * nv, nv));
      const complex yh = phi.cast<complex>().dot(y.segment(a * nv, nv));
      direct += std::abs(el.geometry.det_jacobian) * rule.weights[q] * I * xh * std::conj(yh);
    }
  }
  CHECK(std::abs(y.dot(ww * x) - direct) < 1e-12 * std::abs(direct));
}

TEST_CASE("polynomial exact solutions are reproduced element by element") {
  std::mt19937 rng(12);
  for (int p = 1; p <= 3; ++p) {
    const AssemblyContext ctx(p);
    const real kappa = 3.0;
    const ManufacturedCase mc = polynomial_case(p, kappa);
    const ScaledData data = scale_data(mc);
    for (int trial = 0; trial < 3; ++trial) {
      const LocalElement el = make_local_element(random_tet(rng));
      const auto tau = StabilizationParams::from_mesh_size(p, el.diameter, kappa);
      const LocalBlocks lb = assemble_local(el, ctx, kappa, tau, SignConvention::minus_iwt, &data.f);
      const CondensedElement ce = condense(lb);
      const int nf = ctx.nf();
      // Traces: face projections of u . t_m; sigma^ = 0.
      CVector t = CVector::Zero(12 * nf);
      for (int l = 0; l < 4; ++l)
        for (std::size_t q = 0; q < ctx.tri_rule.size(); ++q) {
          const real s = ctx.tri_rule.points[q].x(), tt = ctx.tri_rule.points[q].y();
          const CVec3 ux = mc.u_exact(el.faces[l].point(s, tt));
          const RVector psi = ctx.basis.eval_face(s, tt);
          for (int m = 0; m < 2; ++m)
            t.segment(3 * nf * l + m * nf, nf) +=
                (ctx.tri_rule.weights[q] * (ux.transpose() * el.faces[l].tangents[m].cast<complex>())(0)) * psi.cast<complex>();
        }
      const RecoveredElement r = recover(ce, t, face_areas(el));
      const CVector u_ref = project_volume_vector(mc.u_exact, el.geometry, ctx.basis, ctx.data_tet);
      const CVector w_ref = project_volume_vector(mc.w_exact, el.geometry, ctx.basis, ctx.data_tet);
      INFO("p = " << p);
      CHECK((r.u - u_ref).norm() <= 1e-9 * u_ref.norm());
      CHECK((r.w - w_ref).norm() <= 1e-9 * w_ref.norm());
      CHECK(r.sigma.norm() <= 1e-9 * u_ref.norm());
      // Numerical normal trace u^n . n matches the projection of u . n.
      for (int l = 0; l < 4; ++l) {
        CVector un = CVector::Zero(nf);
        for (std::size_t q = 0; q < ctx.tri_rule.size(); ++q) {
          const real s = ctx.tri_rule.points[q].x(), tt = ctx.tri_rule.points[q].y();
          const CVec3 ux = mc.u_exact(el.faces[l].point(s, tt));
          un += (ctx.tri_rule.weights[q] * (ux.transpose() * el.faces[l].normal.cast<complex>())(0)) *
                ctx.basis.eval_face(s, tt).cast<complex>();
        }
        CHECK((r.flux_normal[l] - un).norm() <= 1e-9 * std::max(1.0, un.norm()));
      }
    }
  }
}

TEST_CASE("zero traces and zero data recover zero fields") {
  const AssemblyContext ctx(2);
  const LocalElement el = make_local_element(reference_tet);
  const CondensedElement ce = condense(assemble_local(el, ctx, 5.0, {1.0, 1.0}, SignConvention::minus_iwt));
  const RecoveredElement r = recover(ce, CVector::Zero(12 * ctx.nf()), face_areas(el));
  CHECK(r.w.norm() == 0.0);
  CHECK(r.u.norm() == 0.0);
  CHECK(r.sigma.norm() == 0.0);
  for (int l = 0; l < 4; ++l) {
    CHECK(r.flux_tangential[l].norm() == 0.0);
    CHECK(r.flux_normal[l].norm() == 0.0);
  }
}

TEST_CASE("local assembly errors") {
  const AssemblyContext ctx(1);
  const LocalElement el = make_local_element(reference_tet);
  CHECK_THROWS_AS(assemble_local(el, ctx, 0.0, {1.0, 1.0}, SignConvention::minus_iwt), hdgmax::invalid_argument);
  CHECK_THROWS_AS(assemble_local(el, ctx, -2.0, {1.0, 1.0}, SignConvention::minus_iwt), hdgmax::invalid_argument);
  CHECK_THROWS_AS(make_local_element({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(0, 0, 1e-20)}), geometry_error);
  CHECK_THROWS_AS(make_local_element({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 0)}), geometry_error);

  const CondensedElement ce = condense(assemble_local(el, ctx, 1.0, {1.0, 1.0}, SignConvention::minus_iwt));
  CHECK_THROWS_AS(recover(ce, CVector::Zero(5), face_areas(el)), hdgmax::invalid_argument);

  LocalBlocks broken = assemble_local(el, ctx, 1.0, {1.0, 1.0}, SignConvention::minus_iwt);
  broken.A.setZero();
  try {
    (void)condense(broken, 17);
    FAIL("singular interior block accepted");
  } catch (const condensation_error& e) {
    CHECK(e.element() == 17);
  }
}
