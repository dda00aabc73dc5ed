#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string_view>

#include "hdgmax/error.hpp"

namespace hdgmax {

using real = double;
using complex = std::complex<double>;

using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;

using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

inline constexpr complex I{0.0, 1.0};

/// Time dependence of the underlying wave problem. It decides the sign in
/// front of the impedance term on the boundary.
enum class SignConvention {
  plus_iwt,  ///< e^{+i omega t}: curl u x n + i kappa u^t = g
  minus_iwt, ///< e^{-i omega t}: curl u x n - i kappa u^t = g
};

/// +1 for e^{+i omega t}, -1 for e^{-i omega t}.
constexpr real impedance_sign(SignConvention c) noexcept {
  return c == SignConvention::plus_iwt ? 1.0 : -1.0;
}

inline std::string_view to_string(SignConvention c) noexcept {
  return c == SignConvention::plus_iwt ? "plus" : "minus";
}

inline SignConvention parse_sign_convention(std::string_view s) {
  if (s == "plus" || s == "+" || s == "e+iwt") return SignConvention::plus_iwt;
  if (s == "minus" || s == "-" || s == "e-iwt") return SignConvention::minus_iwt;
  throw invalid_argument("unknown sign convention '" + std::string(s) + "' (expected plus|minus)");
}

} // namespace hdgmax
