#include <catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "hdgmax/harness.hpp"
#include "oracle/dense_oracle.hpp"

using namespace hdgmax;

namespace {

RunConfig config(int n, int p, real kappa) {
  RunConfig c;
  c.n = n;
  c.p = p;
  c.kappa = kappa;
  return c;
}

StabilizationParams scheme_tau(const Mesh& mesh, int p, real kappa) {
  return StabilizationParams::from_mesh_size(p, mesh_size(mesh), kappa, TauMode::global_h,
                                             penalty_sign(SignConvention::minus_iwt, MinusVariant::conjugate));
}

/// Condensed elements assembled in the order given by `order`.
GlobalSystem assemble_in_order(const Mesh& mesh, int p, real kappa, const ManufacturedCase& mc, const std::vector<std::size_t>& order) {
  const AssemblyContext ctx(p);
  const ScaledData data = scale_data(mc);
  const StabilizationParams tau = scheme_tau(mesh, p, kappa);
  GlobalAssembler assembler(mesh, p, kappa, SignConvention::minus_iwt);
  for (std::size_t e : order) {
    const LocalBlocks lb = assemble_local(make_local_element(mesh, e), ctx, kappa, tau, SignConvention::minus_iwt, &data.f);
    assembler.add_element(e, condense(lb, e));
  }
  assembler.add_boundary(ctx.basis, ctx.data_tri, &data.g);
  return std::move(assembler).finish();
}

real rel_diff(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

std::size_t count_faces(const Mesh& m, bool boundary) {
  return static_cast<std::size_t>(std::count_if(m.faces.begin(), m.faces.end(), [&](const Face& f) { return f.is_boundary == boundary; }));
}

} // namespace

TEST_CASE("trace unknown counts") {
  SECTION("layout arithmetic") {
    const Mesh m2 = build_structured_cube_mesh(2);
    REQUIRE(count_faces(m2, false) == 72);
    REQUIRE(count_faces(m2, true) == 48);
    CHECK(build_dof_map(m2, 1).total_unknowns == 936);
    CHECK(build_dof_map(build_structured_cube_mesh(1), 2).total_unknowns == 252);
  }
  SECTION("offsets strictly increase in face order") {
    for (int p = 1; p <= 3; ++p) {
      const Mesh m = build_structured_cube_mesh(3);
      const DofMap d = build_dof_map(m, p);
      for (std::size_t f = 0; f < d.num_faces(); ++f) {
        CHECK(d.offsets[f + 1] > d.offsets[f]);
        CHECK(d.face_dofs(f) == static_cast<std::size_t>((m.faces[f].is_boundary ? 2 : 3) * face_dimension(p)));
      }
      CHECK(d.total_unknowns == 3 * d.dim_face * count_faces(m, false) + 2 * d.dim_face * count_faces(m, true));
    }
  }
  SECTION("published-table convention reproduces the p ratios exactly") {
    // Table values: P1 76032, P2 152064, P3 253440 on one mesh.
    CHECK(152064 * 1 == 2 * 76032);
    CHECK(253440 * 3 == 10 * 76032);
    for (int n : {1, 2, 3, 5}) {
      const Mesh m = build_structured_cube_mesh(n);
      const std::size_t p1 = all_face_dofs(m, 1), p2 = all_face_dofs(m, 2), p3 = all_face_dofs(m, 3);
      CHECK(p2 == 2 * p1);
      CHECK(3 * p3 == 10 * p1);
      CHECK(p1 == 9 * m.num_faces());
    }
  }
}

TEST_CASE("sparsity couples only faces of common elements") {
  const Mesh m = build_structured_cube_mesh(3);
  const DofMap d = build_dof_map(m, 1);
  const BlockSparseMatrix a(d.offsets, face_block_pattern(m));
  for (std::size_t f = 0; f < m.num_faces(); ++f) {
    const auto cols = a.block_columns(f);
    CHECK(cols.size() <= 7);
    CHECK(std::binary_search(cols.begin(), cols.end(), f));
    CHECK(cols.size() == (m.faces[f].is_boundary ? 4u : 7u));
  }
}

TEST_CASE("condensed global system matches the monolithic dense oracle") {
  const real kappa = 1.0;
  const int p = 1;
  const Mesh mesh = build_structured_cube_mesh(1);
  REQUIRE(mesh.num_elements() == 6);
  const AssemblyContext ctx(p);
  for (const ManufacturedCase& mc : {plane_wave_case(kappa), polynomial_case(1, kappa)}) {
    CAPTURE(mc.name);
    const ScaledData data = scale_data(mc);
    const GlobalSystem sys = assemble_system(config(1, p, kappa), mc);
    const oracle::MonolithicSystem mono =
        oracle::assemble_monolithic(mesh, ctx.basis, kappa, scheme_tau(mesh, p, kappa), SignConvention::minus_iwt, &data.f, &data.g, 2 * p + 10);
    const oracle::Reduced red = oracle::eliminate_interior(mono);
    const CMatrix a = sys.matrix.to_dense();
    CHECK(rel_diff(a, red.S) <= 1e-10);
    CHECK((sys.rhs - red.r).norm() <= 1e-10 * red.r.norm());

    // Solution of the full monolithic system (boundary sigma^ dropped).
    const auto keep = oracle::kept_indices(mono, true);
    const CVector full = Eigen::FullPivLU<CMatrix>(oracle::submatrix(mono.K, keep, keep)).solve(oracle::subvector(mono.rhs, keep));
    const CVector traces = full.tail(static_cast<Eigen::Index>(sys.size()));
    const DiscreteSolution s = solve_case(config(1, p, kappa), mc);
    CHECK((s.traces - traces).norm() <= 1e-9 * traces.norm());
    CVector interior(static_cast<Eigen::Index>(mono.n_interior));
    const int nv = ctx.nv();
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      interior.segment(static_cast<Eigen::Index>(7 * nv * e), 3 * nv) = s.w[e];
      interior.segment(static_cast<Eigen::Index>(7 * nv * e + 3 * nv), 3 * nv) = s.u[e];
      interior.segment(static_cast<Eigen::Index>(7 * nv * e + 6 * nv), nv) = s.sigma[e];
    }
    CHECK((interior - full.head(static_cast<Eigen::Index>(mono.n_interior))).norm() <= 1e-9 * full.norm());

    SECTION("pinning boundary sigma^ with unit rows gives the same solution") {
      CMatrix k = mono.K;
      CVector b = mono.rhs;
      for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        if (!mono.boundary_face[f]) continue;
        for (int i = 0; i < mono.nf; ++i) {
          const auto r = static_cast<Eigen::Index>(mono.n_interior + 3 * mono.nf * f + 2 * mono.nf + i);
          k.row(r).setZero();
          k.col(r).setZero();
          k(r, r) = 1.0;
          b(r) = 0.0;
        }
      }
      const CVector pinned = Eigen::FullPivLU<CMatrix>(k).solve(b);
      CHECK((oracle::subvector(pinned, keep) - full).norm() <= 1e-10 * full.norm());
    }
  }
}

TEST_CASE("zero data gives an exactly zero right-hand side") {
  ManufacturedCase zero = plane_wave_case(3.0);
  zero.u_exact = zero.curl_u = zero.f_tilde = [](const Vec3&) { return CVec3::Zero().eval(); };
  const GlobalSystem sys = assemble_system(config(2, 2, 3.0), zero);
  CHECK(sys.rhs.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sys.matrix.to_dense().norm() > 0.0);
}

TEST_CASE("boundary load matches a high-order recomputation") {
  const real kappa = 20.0;
  const ManufacturedCase mc = plane_wave_case(kappa);
  const ScaledData data = scale_data(mc);
  for (int p = 1; p <= 3; ++p) {
    const Mesh mesh = build_structured_cube_mesh(2);
    const AssemblyContext ctx(p);
    const GlobalAssembler assembler(mesh, p, kappa, SignConvention::minus_iwt);
    const QuadratureRule hi = make_quadrature(Domain::triangle, 2 * p + 10);
    REQUIRE(hi.exactness_degree == ctx.data_tri.exactness_degree);
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
      if (!mesh.faces[f].is_boundary) continue;
      const Face& face = mesh.faces[f];
      const CVector load = assembler.boundary_load(f, ctx.basis, ctx.data_tri, data.g);
      // Independent evaluation: sum_q w_q g(x_q) . eta(x_q), eta real.
      CVector ref = CVector::Zero(load.size());
      const int nf = ctx.nf();
      for (std::size_t q = 0; q < hi.size(); ++q) {
        const Vec3 x = mesh.face_point(f, hi.points[q].x(), hi.points[q].y());
        const CVec3 g = data.g(x, face.unit_normal);
        const RVector psi = ctx.basis.eval_face(hi.points[q].x(), hi.points[q].y());
        for (int m = 0; m < 2; ++m)
          for (int k = 0; k < nf; ++k) {
            const Vec3 eta = psi(k) * face.tangent_frame[m];
            ref(m * nf + k) += 2.0 * face.area * hi.weights[q] * (g(0) * eta(0) + g(1) * eta(1) + g(2) * eta(2));
          }
      }
      CHECK((load - ref).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("assembly order") {
  const Mesh mesh = build_structured_cube_mesh(2);
  const ManufacturedCase mc = plane_wave_case(4.0);
  std::vector<std::size_t> order(mesh.num_elements());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const GlobalSystem fwd = assemble_in_order(mesh, 2, 4.0, mc, order);
  std::reverse(order.begin(), order.end());
  const GlobalSystem rev = assemble_in_order(mesh, 2, 4.0, mc, order);
  CHECK(rel_diff(rev.matrix.to_dense(), fwd.matrix.to_dense()) < 1e-13);
  CHECK((rev.rhs - fwd.rhs).norm() < 1e-13 * fwd.rhs.norm());

  SECTION("repeated assembly is bitwise identical") {
    const GlobalSystem a = assemble_system(config(2, 2, 4.0), mc), b = assemble_system(config(2, 2, 4.0), mc);
    CHECK(a.matrix.values() == b.matrix.values());
    CHECK(a.rhs == b.rhs);
  }
}

TEST_CASE("mismatched local and global settings are configuration errors") {
  const Mesh mesh = build_structured_cube_mesh(1);
  const AssemblyContext ctx(1);
  const StabilizationParams tau = scheme_tau(mesh, 1, 2.0);
  const LocalBlocks lb = assemble_local(make_local_element(mesh, 0), ctx, 2.0, tau, SignConvention::minus_iwt);
  const CondensedElement ce = condense(lb);
  SECTION("convention") {
    GlobalAssembler g(mesh, 1, 2.0, SignConvention::plus_iwt);
    CHECK_THROWS_AS(g.add_element(0, ce), configuration_error);
  }
  SECTION("wave number") {
    GlobalAssembler g(mesh, 1, 3.0, SignConvention::minus_iwt);
    CHECK_THROWS_AS(g.add_element(0, ce), configuration_error);
  }
  SECTION("stabilization") {
    GlobalAssembler g(mesh, 1, 2.0, SignConvention::minus_iwt);
    g.add_element(0, ce);
    StabilizationParams other = tau;
    other.sign = -other.sign;
    const CondensedElement ce2 = condense(assemble_local(make_local_element(mesh, 1), ctx, 2.0, other, SignConvention::minus_iwt));
    CHECK_THROWS_AS(g.add_element(1, ce2), configuration_error);
  }
}

TEST_CASE("coordinate export lists every stored entry") {
  const GlobalSystem sys = assemble_system(config(1, 1, 2.0), plane_wave_case(2.0));
  std::ostringstream out;
  export_matrix_coordinates(sys, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("% rows " + std::to_string(sys.size()), 0) == 0);
  const CMatrix dense = sys.matrix.to_dense();
  std::size_t lines = 0;
  long r = 0, c = 0;
  real re = 0.0, im = 0.0;
  while (in >> r >> c >> re >> im) {
    ++lines;
    const auto i = static_cast<Eigen::Index>(r), j = static_cast<Eigen::Index>(c);
    CHECK(re == dense(i, j).real());
    CHECK(im == dense(i, j).imag());
    if (lines > 20) break;
  }
  CHECK(lines > 20);
}
