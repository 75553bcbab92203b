#pragma once

#include "llg/grid.hpp"

#include <utility>

namespace llg {

inline constexpr double sphere_tol = 1e-12;

// A point of S^2. Construction checks |x| = 1 to sphere_tol.
class UnitVec3 {
public:
    UnitVec3() : v_(1.0, 0.0, 0.0) {}
    explicit UnitVec3(const Vec3& v) : v_(v) {
        require(std::abs(v.squaredNorm() - 1.0) <= sphere_tol, "UnitVec3: not on the unit sphere");
    }
    UnitVec3(double a, double b, double c) : UnitVec3(Vec3(a, b, c)) {}

    static UnitVec3 normalized(const Vec3& v) {
        UnitVec3 u;
        u.v_ = v.normalized();
        return u;
    }

    void renormalize() { v_.normalize(); }
    const Vec3& vec() const { return v_; }
    double operator[](int i) const { return v_[i]; }
    operator const Vec3&() const { return v_; }

private:
    Vec3 v_;
};

class RotationSO3 {
public:
    RotationSO3() : r_(Mat3::Identity()) {}
    explicit RotationSO3(const Mat3& r) : r_(r) {
        require((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12 &&
                    std::abs(r.determinant() - 1.0) <= 1e-12,
                "RotationSO3: matrix is not a rotation");
    }

    // Rotation by |w| about w/|w|.
    static RotationSO3 from_rotation_vector(const Vec3& w) {
        const double ang = w.norm();
        RotationSO3 r;
        if (ang > 0.0) r.r_ = Eigen::AngleAxisd(ang, w / ang).toRotationMatrix();
        return r;
    }

    const Mat3& matrix() const { return r_; }
    Vec3 operator*(const Vec3& v) const { return r_ * v; }
    RotationSO3 operator*(const RotationSO3& o) const {
        RotationSO3 r;
        r.r_ = r_ * o.r_;
        return r;
    }

private:
    Mat3 r_;
};

struct AnisotropyParams {
    double lambda1 = 0.0;
    double lambda3 = 0.0;
    AnisotropyParams() = default;
    AnisotropyParams(double l1, double l3) : lambda1(l1), lambda3(l3) {
        require(l1 >= 0.0 && l3 >= 0.0, "anisotropy constants must be nonnegative");
    }
};

struct HydroPair {
    double u = 0.0;   // m3
    double phi = 0.0; // phase of the in-plane part
};

// Grid field on S^2.
struct SpinField {
    Grid1D grid;
    std::vector<Vec3> m;

    double max_sphere_defect() const {
        double d = 0.0;
        for (const auto& v : m) d = std::max(d, std::abs(v.norm() - 1.0));
        return d;
    }
    void renormalize() {
        for (auto& v : m) v.normalize();
    }
};

// u = (m1 + i m2)/(1 + m3)
inline cplx project_stereographic(const Vec3& m) {
    require(m[2] > -1.0 + 1e-12, "project_stereographic: point too close to the south pole");
    return cplx(m[0], m[1]) / (1.0 + m[2]);
}

inline Vec3 inverse_stereographic(cplx u) {
    const double a = std::norm(u);
    return Vec3(2.0 * u.real(), 2.0 * u.imag(), 1.0 - a) / (1.0 + a);
}

// The two in-plane complex conventions: m1 + i m2 (easy-plane / hydrodynamic
// picture) and m1 + i m3 (easy-axis picture of the cubic NLS regime).
inline cplx in_plane_12(const Vec3& m) { return {m[0], m[1]}; }
inline cplx in_plane_13(const Vec3& m) { return {m[0], m[2]}; }

// (u, phi) with m1 + i m2 = sqrt(1 - u^2)(sin phi + i cos phi), phi in [0, 2pi).
inline HydroPair to_hydrodynamical(const Vec3& m) {
    require(std::abs(m[2]) < 1.0 - 1e-12, "to_hydrodynamical: vacuum (|m3| = 1)");
    double phi = std::atan2(m[0], m[1]);
    if (phi < 0.0) phi += 2.0 * pi;
    return {m[2], phi};
}

// Pointwise hydrodynamic pairs along a grid with the continuous branch of phi,
// anchored in [0, 2pi) at the leftmost node. phi is meaningful modulo pi shifts.
inline std::vector<HydroPair> to_hydrodynamical(const std::vector<Vec3>& m) {
    std::vector<HydroPair> out;
    out.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        HydroPair p = to_hydrodynamical(m[i]);
        if (i > 0) {
            const double prev = out.back().phi;
            p.phi += 2.0 * pi * std::round((prev - p.phi) / (2.0 * pi));
        }
        out.push_back(p);
    }
    return out;
}

// (v, w) -> m = (sqrt(1-v^2) cos Phi, sqrt(1-v^2) sin Phi, v), Phi = int_0^x w.
inline SpinField from_hydrodynamical(const RealField& v, const RealField& w, const Grid1D& g) {
    require(static_cast<int>(v.size()) == g.n && static_cast<int>(w.size()) == g.n,
            "from_hydrodynamical: field size mismatch");
    require(sup_norm(v) < 1.0 - 1e-12, "from_hydrodynamical: max|v| must stay below 1");
    RealField Phi = cumulative_integral4(g, w);
    // shift the anchor to x = 0
    const double at0 = interpolate(g, Phi, 0.0);
    SpinField out{g, std::vector<Vec3>(g.n)};
    for (int i = 0; i < g.n; ++i) {
        const double r = std::sqrt(1.0 - v[i] * v[i]);
        const double ph = Phi[i] - at0;
        out.m[i] = Vec3(r * std::cos(ph), r * std::sin(ph), v[i]);
    }
    return out;
}

// w = -d(phi)/dx from a sphere field, using the continuous phase branch.
inline std::pair<RealField, RealField> hydro_fields(const SpinField& f) {
    auto pairs = to_hydrodynamical(f.m);
    RealField v(f.grid.n), phi(f.grid.n);
    for (int i = 0; i < f.grid.n; ++i) {
        v[i] = pairs[i].u;
        phi[i] = pairs[i].phi;
    }
    Grid1D pinned = f.grid;
    pinned.boundary = Boundary::Pinned; // phase is not periodic in general
    RealField w = fd::d1(pinned, phi, 4);
    // one-sided second-order ends
    const double h = f.grid.h();
    const int n = f.grid.n;
    w[0] = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * h);
    w[1] = (phi[2] - phi[0]) / (2.0 * h);
    w[n - 2] = (phi[n - 1] - phi[n - 3]) / (2.0 * h);
    w[n - 1] = (3.0 * phi[n - 1] - 4.0 * phi[n - 2] + phi[n - 3]) / (2.0 * h);
    for (auto& x : w) x = -x;
    return {v, w};
}

inline Vec3 soliton_symmetry(const Vec3& m, double theta, int s) {
    const double c = std::cos(theta), sn = std::sin(theta);
    return Vec3(c * m[0] - s * sn * m[1], sn * m[0] + s * c * m[1], s * m[2]);
}

// (cos th m1 - s sin th m2, sin th m1 + s cos th m2, s m3)(x - a)
inline SpinField apply_soliton_symmetry(const SpinField& f, double theta, int s, double a) {
    require(s == 1 || s == -1, "apply_soliton_symmetry: s must be +1 or -1");
    SpinField out = f;
    const double h = f.grid.h();
    const double shift = a / h;
    const bool integral = std::abs(shift - std::round(shift)) < 1e-12;
    for (int i = 0; i < f.grid.n; ++i) {
        Vec3 src;
        if (integral) {
            src = f.m[fd::neighbour(f.grid, i - static_cast<int>(std::lround(shift)))];
        } else {
            src = interpolate(f.grid, f.m, f.grid.x(i) - a);
            src.normalize();
        }
        out.m[i] = soliton_symmetry(src, theta, s);
    }
    return out;
}

// Linear waves about a uniform state: omega = +-sqrt(k^4 + (l1+l3) k^2 + l1 l3).
inline std::pair<double, double> dispersion_omega(double k, double lambda1, double lambda3) {
    require(lambda1 >= 0.0 && lambda3 >= 0.0, "dispersion_omega: anisotropies must be nonnegative");
    const double k2 = k * k;
    const double w = std::sqrt(k2 * k2 + (lambda1 + lambda3) * k2 + lambda1 * lambda3);
    return {w, -w};
}

} // namespace llg
