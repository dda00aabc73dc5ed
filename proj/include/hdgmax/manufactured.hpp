#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "hdgmax/types.hpp"

namespace hdgmax {

using VectorFunction = std::function<CVec3(const Vec3&)>;
/// Boundary field depending on the point and the outward unit normal there.
using BoundaryFunction = std::function<CVec3(const Vec3&, const Vec3&)>;

/// Tangential component (n x v) x n = v - (v.n) n. Bilinear: no conjugation.
inline CVec3 tangential(const CVec3& v, const Vec3& n) {
  const complex vn = v(0) * n(0) + v(1) * n(1) + v(2) * n(2);
  return v - vn * n.cast<complex>();
}

/// a x b without conjugation; Eigen's cross() conjugates complex operands.
inline CVec3 cross(const CVec3& a, const Vec3& b) {
  return CVec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

/// Exact solution of the mixed curl-curl problem with sigma = 0 together with
/// the unscaled data f~ and g~.
struct ManufacturedCase {
  std::string name;
  real kappa = 1.0;
  SignConvention convention = SignConvention::minus_iwt;
  VectorFunction u_exact;
  VectorFunction curl_u;
  VectorFunction w_exact;
  VectorFunction f_tilde;
  /// Analytic L2(Omega) norms when known; otherwise computed by quadrature.
  std::optional<real> u_norm;
  std::optional<real> w_norm;

  /// g~ = curl u x n + s i kappa u^t with s = +1 (e^{+iwt}) or -1 (e^{-iwt}).
  CVec3 g_tilde(const Vec3& x, const Vec3& n) const {
    return cross(curl_u(x), n) + (impedance_sign(convention) * I * kappa) * tangential(u_exact(x), n);
  }
};

/// u = (e^{i k z}, e^{i k x}, e^{i k y}), curl curl u - k^2 u = 0, f~ = 0.
inline ManufacturedCase plane_wave_case(real kappa, SignConvention convention = SignConvention::minus_iwt) {
  if (!(kappa > 0.0)) throw invalid_argument("kappa must be positive");
  ManufacturedCase c;
  c.name = "plane_wave";
  c.kappa = kappa;
  c.convention = convention;
  c.u_exact = [kappa](const Vec3& x) {
    return CVec3(std::exp(I * kappa * x.z()), std::exp(I * kappa * x.x()), std::exp(I * kappa * x.y()));
  };
  c.curl_u = [kappa](const Vec3& x) {
    return CVec3(I * kappa * std::exp(I * kappa * x.y()), I * kappa * std::exp(I * kappa * x.z()),
                 I * kappa * std::exp(I * kappa * x.x()));
  };
  c.w_exact = [kappa](const Vec3& x) {
    return CVec3(kappa * std::exp(I * kappa * x.y()), kappa * std::exp(I * kappa * x.z()), kappa * std::exp(I * kappa * x.x()));
  };
  c.f_tilde = [](const Vec3&) { return CVec3::Zero().eval(); };
  c.u_norm = std::sqrt(3.0);
  c.w_norm = std::sqrt(3.0) * kappa;
  return c;
}

/// Divergence-free polynomial solution u = (y^p, z^p, x^p) of total degree p.
/// f~ = curl curl u - k^2 u; w = -i curl u.
inline ManufacturedCase polynomial_case(int p_target, real kappa, SignConvention convention = SignConvention::minus_iwt) {
  if (p_target < 1) throw invalid_argument("polynomial degree must be >= 1");
  if (!(kappa > 0.0)) throw invalid_argument("kappa must be positive");
  const int p = p_target;
  auto pw = [](real x, int k) { return k < 0 ? 0.0 : std::pow(x, k); };
  ManufacturedCase c;
  c.name = "polynomial_p" + std::to_string(p);
  c.kappa = kappa;
  c.convention = convention;
  c.u_exact = [p, pw](const Vec3& x) { return CVec3(pw(x.y(), p), pw(x.z(), p), pw(x.x(), p)); };
  c.curl_u = [p, pw](const Vec3& x) {
    return CVec3(-p * pw(x.z(), p - 1), -p * pw(x.x(), p - 1), -p * pw(x.y(), p - 1));
  };
  c.w_exact = [curl = c.curl_u](const Vec3& x) { return CVec3(-I * curl(x)); };
  c.f_tilde = [p, kappa, pw](const Vec3& x) {
    const real cc = -static_cast<real>(p * (p - 1));
    return CVec3(cc * pw(x.y(), p - 2) - kappa * kappa * pw(x.y(), p), cc * pw(x.z(), p - 2) - kappa * kappa * pw(x.z(), p),
                 cc * pw(x.x(), p - 2) - kappa * kappa * pw(x.x(), p));
  };
  return c;
}

/// Data of the first-order system: f = -i f~ and g = -i g~.
struct ScaledData {
  VectorFunction f;
  BoundaryFunction g;
};

inline ScaledData scale_data(const ManufacturedCase& c) {
  return {[ft = c.f_tilde](const Vec3& x) { return CVec3(-I * ft(x)); },
          [c](const Vec3& x, const Vec3& n) { return CVec3(-I * c.g_tilde(x, n)); }};
}

} // namespace hdgmax
