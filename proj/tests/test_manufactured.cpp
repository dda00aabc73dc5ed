#include <catch_amalgamated.hpp>

#include <random>

#include "hdgmax/manufactured.hpp"
#include "hdgmax/quadrature.hpp"

using namespace hdgmax;

namespace {

constexpr real step = 1e-6;

/// d/dx_c of a vector field by central differences.
CVec3 partial(const VectorFunction& f, const Vec3& x, int c) {
  Vec3 e = Vec3::Zero();
  e(c) = step;
  return (f(x + e) - f(x - e)) / (2.0 * step);
}

CVec3 fd_curl(const VectorFunction& f, const Vec3& x) {
  const CVec3 dx = partial(f, x, 0), dy = partial(f, x, 1), dz = partial(f, x, 2);
  return CVec3(dy(2) - dz(1), dz(0) - dx(2), dx(1) - dy(0));
}

complex fd_div(const VectorFunction& f, const Vec3& x) { return partial(f, x, 0)(0) + partial(f, x, 1)(1) + partial(f, x, 2)(2); }

std::vector<Vec3> interior_points(std::size_t count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<real> u(0.01, 0.99);
  std::vector<Vec3> pts(count);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

/// Points on the six faces of the unit cube with their outward normals.
std::vector<std::pair<Vec3, Vec3>> boundary_points(std::size_t per_face, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<real> u(0.0, 1.0);
  std::vector<std::pair<Vec3, Vec3>> out;
  for (int axis = 0; axis < 3; ++axis)
    for (real side : {0.0, 1.0})
      for (std::size_t k = 0; k < per_face; ++k) {
        Vec3 x(u(rng), u(rng), u(rng)), n = Vec3::Zero();
        x(axis) = side;
        n(axis) = side == 0.0 ? -1.0 : 1.0;
        out.emplace_back(x, n);
      }
  return out;
}

std::vector<ManufacturedCase> all_cases() {
  std::vector<ManufacturedCase> cs;
  for (auto conv : {SignConvention::minus_iwt, SignConvention::plus_iwt}) {
    for (real k : {1.0, 5.0, 20.0, 50.0}) cs.push_back(plane_wave_case(k, conv));
    for (int p = 1; p <= 4; ++p) cs.push_back(polynomial_case(p, 3.0, conv));
  }
  return cs;
}

real max_abs(const CVec3& v) { return v.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("manufactured cases satisfy the first-order system pointwise") {
  const auto pts = interior_points(100, 11);
  for (const auto& c : all_cases()) {
    CAPTURE(c.name, c.kappa, to_string(c.convention));
    const ScaledData d = scale_data(c);
    const real k = c.kappa, k2 = k * k;
    for (const Vec3& x : pts) {
      // div u = 0
      CHECK(std::abs(fd_div(c.u_exact, x)) <= 1e-10 * (1.0 + k));
      // the stored curl is the curl
      CHECK(max_abs(fd_curl(c.u_exact, x) - c.curl_u(x)) <= 1e-8 * (1.0 + k));
      // i w - curl u = 0
      CHECK(max_abs(I * c.w_exact(x) - fd_curl(c.u_exact, x)) <= 1e-8 * (1.0 + k));
      // curl curl u - k^2 u = f~
      CHECK(max_abs(fd_curl(c.curl_u, x) - k2 * c.u_exact(x) - c.f_tilde(x)) <= 1e-8 * (1.0 + k2));
      // curl w + i k^2 u = f, sigma = 0
      CHECK(max_abs(fd_curl(c.w_exact, x) + (I * k2) * c.u_exact(x) - d.f(x)) <= 1e-8 * (1.0 + k2));
      // div f~ = 0
      CHECK(std::abs(fd_div(c.f_tilde, x)) <= 1e-8 * (1.0 + k2));
    }
  }
}

TEST_CASE("boundary data") {
  const auto pts = boundary_points(20, 5);
  for (const auto& c : all_cases()) {
    CAPTURE(c.name, c.kappa, to_string(c.convention));
    const real s = c.convention == SignConvention::minus_iwt ? -1.0 : 1.0;
    for (const auto& [x, n] : pts) {
      const CVec3 g = c.g_tilde(x, n);
      // tangential: g~ . n = 0
      CHECK(std::abs(g(0) * n(0) + g(1) * n(1) + g(2) * n(2)) <= 1e-12 * (1.0 + c.kappa));
      // curl u x n + s i k u^t, written out componentwise
      const CVec3 cu = c.curl_u(x), u = c.u_exact(x);
      const complex un = u(0) * n(0) + u(1) * n(1) + u(2) * n(2);
      const CVec3 cross_n(cu(1) * n(2) - cu(2) * n(1), cu(2) * n(0) - cu(0) * n(2), cu(0) * n(1) - cu(1) * n(0));
      const CVec3 expect = cross_n + (s * I * c.kappa) * (u - un * n.cast<complex>());
      CHECK(max_abs(g - expect) <= 1e-13 * (1.0 + c.kappa));
    }
  }
}

TEST_CASE("complex helpers are bilinear") {
  const CVec3 a(complex(1, 2), complex(-3, 0.5), complex(0, 1));
  const Vec3 n = Vec3(1, 2, 2) / 3.0;
  const CVec3 t = tangential(a, n);
  CHECK(std::abs(t(0) * n(0) + t(1) * n(1) + t(2) * n(2)) < 1e-15);
  // linear, not conjugate-linear, in the complex argument
  CHECK(max_abs(tangential(I * a, n) - I * t) < 1e-15);
  CHECK(max_abs(cross(I * a, n) - I * cross(a, n)) < 1e-15);
  const CVec3 e1 = CVec3(1.0, 0.0, 0.0);
  CHECK(max_abs(cross(I * e1, Vec3(0, 1, 0)) - CVec3(0.0, 0.0, I)) < 1e-15);
}

TEST_CASE("plane wave values") {
  for (real k : {1.0, 7.5}) {
    const auto c = plane_wave_case(k);
    CHECK(max_abs(c.u_exact(Vec3::Zero()) - CVec3(1.0, 1.0, 1.0)) == 0.0);
    CHECK(max_abs(c.w_exact(Vec3::Zero()) - k * CVec3(1.0, 1.0, 1.0)) == 0.0);
    CHECK(max_abs(c.f_tilde(Vec3(0.3, 0.2, 0.1))) == 0.0);
    CHECK(max_abs(scale_data(c).f(Vec3(0.3, 0.2, 0.1))) == 0.0);
    REQUIRE(c.u_norm.has_value());
    CHECK(*c.u_norm == Catch::Approx(std::sqrt(3.0)).epsilon(1e-15));
    CHECK(*c.w_norm == Catch::Approx(std::sqrt(3.0) * k).epsilon(1e-15));
    // |u_i| = 1 pointwise, so the quadrature norm equals the analytic one.
    const auto rule = make_quadrature(Domain::tetrahedron, 8);
    real sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * c.u_exact(rule.points[q]).squaredNorm();
    CHECK(sum * 6.0 == Catch::Approx(3.0).epsilon(1e-14)); // reference tet volume 1/6
  }
  CHECK_THROWS_AS(plane_wave_case(0.0), hdgmax::invalid_argument);
}

TEST_CASE("polynomial case of degree one") {
  const real k = 2.0;
  const auto c = polynomial_case(1, k);
  const Vec3 x(0.2, -0.7, 1.3);
  CHECK(max_abs(c.u_exact(x) - CVec3(x.y(), x.z(), x.x())) == 0.0);
  CHECK(max_abs(c.curl_u(x) - CVec3(-1.0, -1.0, -1.0)) == 0.0);
  CHECK(max_abs(c.f_tilde(x) + k * k * CVec3(x.y(), x.z(), x.x())) < 1e-15);
  CHECK_FALSE(c.u_norm.has_value());
  CHECK_THROWS_AS(polynomial_case(0, 1.0), hdgmax::invalid_argument);
}

TEST_CASE("data scaling") {
  ManufacturedCase c = plane_wave_case(1.0);
  c.f_tilde = [](const Vec3&) { return CVec3(1.0, 0.0, 0.0); };
  const ScaledData d = scale_data(c);
  CHECK(max_abs(d.f(Vec3::Zero()) - CVec3(-I, 0.0, 0.0)) == 0.0);

  // Scaling the scaled field again gives -f~.
  ManufacturedCase twice = polynomial_case(2, 3.0);
  const ManufacturedCase once = twice;
  twice.f_tilde = scale_data(once).f;
  const Vec3 x(0.4, 0.1, 0.8);
  CHECK(max_abs(scale_data(twice).f(x) + once.f_tilde(x)) < 1e-15);

  const Vec3 n(0.0, 0.0, 1.0), xb(0.3, 0.6, 1.0);
  CHECK(max_abs(scale_data(once).g(xb, n) + I * once.g_tilde(xb, n)) == 0.0);
}
