#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace llg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using cplx = std::complex<double>;
using RealField = std::vector<double>;
using ComplexField = std::vector<cplx>;

inline constexpr double pi = std::numbers::pi;

// Bad input: violated precondition, unknown option, out-of-domain parameter.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The numerics could not deliver: step underflow, non-convergence, failed fit.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

inline double sqr(double x) { return x * x; }

inline double sech(double x) { return 1.0 / std::cosh(x); }

// beta = sqrt(1 - alpha^2), the gyromagnetic weight paired with damping alpha
inline double beta_of(double alpha) { return std::sqrt(std::max(0.0, 1.0 - alpha * alpha)); }

} // namespace llg
