#pragma once

#include "llg/geometry.hpp"
#include "llg/ode.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <string>

namespace llg {

enum class ProfileKind { Expander, Shrinker };

inline std::string to_string(ProfileKind k) { return k == ProfileKind::Expander ? "expander" : "shrinker"; }

struct ProfileParams {
    double c = 0.0;
    double alpha = 1.0;

    ProfileParams() = default;
    ProfileParams(double c_, double alpha_) : c(c_), alpha(alpha_) {
        require(c_ >= 0.0, "ProfileParams: c must be nonnegative");
        require(alpha_ >= 0.0 && alpha_ <= 1.0, "ProfileParams: alpha must lie in [0,1]");
    }
    double beta() const { return beta_of(alpha); }
    // start of the asymptotic regime for expanders
    double s0() const { return 4.0 * std::sqrt(8.0 + c * c); }
};

struct FrenetFrame {
    Vec3 m = Vec3::UnitX();
    Vec3 n = Vec3::UnitY();
    Vec3 b = Vec3::UnitZ();
};

// Expander: (c e^{-alpha x^2/4}, beta x/2). Shrinker: (c e^{alpha x^2/4}, -beta x/2).
inline std::pair<double, double> curvature_torsion(ProfileKind kind, const ProfileParams& p, double x) {
    const double g = p.alpha * x * x / 4.0;
    if (kind == ProfileKind::Expander) return {p.c * std::exp(-g), p.beta() * x / 2.0};
    return {p.c * std::exp(g), -p.beta() * x / 2.0};
}

namespace detail {

using FrameState = OdeVec<10>; // m, n, b, turning angle theta = int_0^x k

inline FrameState pack(const FrenetFrame& f, double theta) {
    FrameState y;
    y << f.m, f.n, f.b, theta;
    return y;
}

inline FrenetFrame unpack(const FrameState& y) {
    return {y.segment<3>(0), y.segment<3>(3), y.segment<3>(6)};
}

// Modified Gram-Schmidt on (m, n), then b = m x n.
inline bool repair_frame(FrameState& y) {
    Vec3 m = y.segment<3>(0).normalized();
    Vec3 n = y.segment<3>(3);
    n -= n.dot(m) * m;
    n.normalize();
    y.segment<3>(0) = m;
    y.segment<3>(3) = n;
    y.segment<3>(6) = m.cross(n);
    return true;
}

struct FrenetRhs {
    ProfileKind kind;
    ProfileParams p;
    FrameState operator()(double x, const FrameState& y) const {
        auto [k, tau] = curvature_torsion(kind, p, x);
        FrameState d;
        d.segment<3>(0) = k * y.segment<3>(3);
        d.segment<3>(3) = -k * y.segment<3>(0) + tau * y.segment<3>(6);
        d.segment<3>(6) = -tau * y.segment<3>(3);
        d[9] = k;
        return d;
    }
};

} // namespace detail

struct FrameIntegration {
    std::vector<FrenetFrame> frames;
    std::vector<double> theta;
    OdeStats forward, backward;
};

// Frames at the requested abscissae (ascending, any sign), integrating outwards
// from the canonical frame (e1, e2, e3) at x = 0.
inline FrameIntegration integrate_frames(ProfileKind kind, const ProfileParams& p, const std::vector<double>& points,
                                         double tol) {
    require(tol > 1e-14 && tol < 1e-4, "integrate_frames: tol must lie in (1e-14, 1e-4)");
    require(std::is_sorted(points.begin(), points.end()), "integrate_frames: points must be ascending");
    FrameIntegration out;
    out.frames.resize(points.size());
    out.theta.resize(points.size());
    const detail::FrenetRhs rhs{kind, p};
    const auto y0 = detail::pack(FrenetFrame{}, 0.0);
    const auto split = std::lower_bound(points.begin(), points.end(), 0.0) - points.begin();

    std::vector<double> pos(points.begin() + split, points.end());
    std::vector<double> neg(points.begin(), points.begin() + split);
    std::reverse(neg.begin(), neg.end());

    auto store = [&](std::size_t offset, bool reversed) {
        return [&, offset, reversed](std::size_t k, double, const detail::FrameState& y) {
            const std::size_t idx = reversed ? offset - 1 - k : offset + k;
            out.frames[idx] = detail::unpack(y);
            out.theta[idx] = y[9];
        };
    };
    if (!pos.empty())
        out.forward = integrate_dp45<10>(rhs, 0.0, y0, pos, tol, detail::repair_frame, store(split, false));
    if (!neg.empty())
        out.backward = integrate_dp45<10>(rhs, 0.0, y0, neg, tol, detail::repair_frame, store(split, true));
    if (!out.forward.ok || !out.backward.ok) {
        const double reached = !out.forward.ok ? out.forward.t_reached : out.backward.t_reached;
        throw NumericalError("Serret-Frenet integration: step-size underflow at x = " + std::to_string(reached));
    }
    return out;
}

struct ProfileSolution {
    ProfileKind kind = ProfileKind::Expander;
    ProfileParams params;
    double tol = 1e-10;
    double h = 0.005;
    std::vector<double> x;
    std::vector<FrenetFrame> frames;
    std::vector<double> theta;
    long steps_accepted = 0;
    long steps_rejected = 0;
    double x_reached = 0.0;
    bool capped = false;         // shrinker grid stopped before x_max
    double parity_defect = 0.0;  // max deviation from the component parities

    std::size_t size() const { return x.size(); }
    std::size_t center() const { return x.size() / 2; }
};

// Largest |x| kept on a shrinker grid: k(x) h <= kh_max.
inline double shrinker_cap(const ProfileParams& p, double h, double kh_max = 0.1) {
    if (p.c * h >= kh_max) return 0.0;
    return std::sqrt(4.0 * std::log(kh_max / (p.c * h)) / p.alpha);
}

// D = diag(1, -1, -1): m(-x) = D m(x), n(-x) = -D n(x), b(-x) = -D b(x).
inline Vec3 parity_map(const Vec3& v) { return Vec3(v[0], -v[1], -v[2]); }

inline ProfileSolution integrate_profile(ProfileKind kind, const ProfileParams& p, double x_max, double tol,
                                         double h = 0.005) {
    require(x_max > 0.0, "integrate_profile: x_max must be positive");
    require(h > 0.0 && h < x_max, "integrate_profile: bad grid spacing");
    require(kind == ProfileKind::Expander || p.alpha > 0.0, "integrate_profile: shrinkers need alpha > 0");
    ProfileSolution sol;
    sol.kind = kind;
    sol.params = p;
    sol.tol = tol;
    sol.h = h;
    double xm = x_max;
    if (kind == ProfileKind::Shrinker && p.c > 0.0) {
        const double cap = shrinker_cap(p, h);
        if (cap < xm) {
            xm = cap;
            sol.capped = true;
        }
    }
    const int half = static_cast<int>(std::floor(xm / h + 1e-9));
    require(half >= 4, "integrate_profile: domain too small for the grid");
    for (int i = -half; i <= half; ++i) sol.x.push_back(i * h);

    auto fi = integrate_frames(kind, p, sol.x, tol);
    sol.frames = std::move(fi.frames);
    sol.theta = std::move(fi.theta);
    sol.steps_accepted = fi.forward.accepted + fi.backward.accepted;
    sol.steps_rejected = fi.forward.rejected + fi.backward.rejected;
    sol.x_reached = sol.x.back();

    const std::size_t c0 = sol.center();
    for (std::size_t i = 1; i <= c0; ++i) {
        const auto& fp = sol.frames[c0 + i];
        const auto& fm = sol.frames[c0 - i];
        sol.parity_defect = std::max({sol.parity_defect, (fm.m - parity_map(fp.m)).cwiseAbs().maxCoeff(),
                                      (fm.n + parity_map(fp.n)).cwiseAbs().maxCoeff(),
                                      (fm.b + parity_map(fp.b)).cwiseAbs().maxCoeff()});
    }
    return sol;
}

// |m'| on the profile grid by 8th-order central differences (interior nodes;
// the outer four nodes on each side are left NaN).
inline std::vector<double> measured_speed(const ProfileSolution& s) {
    std::vector<Vec3> m(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) m[i] = s.frames[i].m;
    std::vector<double> out(s.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 4; i + 4 < s.size(); ++i) out[i] = fd::d1_at(m, s.h, static_cast<int>(i), 8).norm();
    return out;
}

// max |alpha m'' + alpha |m'|^2 m + beta (m x m')' +- x m'/2| with 4th-order differences.
inline double ode_residual(const ProfileSolution& s) {
    const auto& p = s.params;
    const std::size_t n = s.size();
    std::vector<Vec3> m(n), dm(n, Vec3::Zero()), q(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) m[i] = s.frames[i].m;
    for (std::size_t i = 2; i + 2 < n; ++i) {
        dm[i] = fd::d1_at(m, s.h, static_cast<int>(i), 4);
        q[i] = m[i].cross(dm[i]);
    }
    const double sign = s.kind == ProfileKind::Expander ? 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t i = 4; i + 4 < n; ++i) {
        const int ii = static_cast<int>(i);
        Vec3 r = p.alpha * fd::d2_at(m, s.h, ii, 4) + p.alpha * dm[i].squaredNorm() * m[i] +
                 p.beta() * fd::d1_at(q, s.h, ii, 4) + sign * s.x[i] * dm[i] / 2.0;
        worst = std::max(worst, r.norm());
    }
    return worst;
}

// Independent oracle for expanders: each row (m_j, n_j, b_j) of the frame is
// encoded by a complex pair (f, g), f' = k g, g' = -i tau g - (k/4) f, which
// is the reduction f'' + (s/2)(alpha + i beta) f' + (c^2/4) e^{-alpha s^2/2} f = 0
// with g = f'/k. The row is recovered from xi = 2g/f by inverse stereographic
// projection: m_j = (|f|^2 - 4|g|^2)/(|f|^2 + 4|g|^2), n_j + i b_j = 4 g conj(f)/(...).
struct ComplexReduction {
    std::vector<double> x;
    std::array<ComplexField, 3> f, g;
    std::vector<FrenetFrame> frames;
};

inline ComplexReduction complex_reduction_oracle(const ProfileParams& p, const std::vector<double>& points,
                                                 double tol) {
    require(std::is_sorted(points.begin(), points.end()), "complex_reduction_oracle: points must be ascending");
    using State = OdeVec<4>; // Re f, Im f, Re g, Im g
    const double beta = p.beta();
    auto rhs = [&](double s, const State& y) {
        const double k = p.c * std::exp(-p.alpha * s * s / 4.0);
        const double tau = beta * s / 2.0;
        const cplx f(y[0], y[1]), g(y[2], y[3]);
        const cplx df = k * g;
        const cplx dg = cplx(0.0, -tau) * g - 0.25 * k * f;
        State d;
        d << df.real(), df.imag(), dg.real(), dg.imag();
        return d;
    };
    ComplexReduction out;
    out.x = points;
    out.frames.resize(points.size());
    const std::array<cplx, 3> g0{cplx(0.0), cplx(0.5), cplx(0.0, 0.5)};
    const auto split = std::lower_bound(points.begin(), points.end(), 0.0) - points.begin();
    std::vector<double> pos(points.begin() + split, points.end());
    std::vector<double> neg(points.begin(), points.begin() + split);
    std::reverse(neg.begin(), neg.end());
    auto no_repair = [](State&) { return false; };
    for (int j = 0; j < 3; ++j) {
        out.f[j].resize(points.size());
        out.g[j].resize(points.size());
        State y0;
        y0 << 1.0, 0.0, g0[j].real(), g0[j].imag();
        auto store = [&](std::size_t offset, bool reversed) {
            return [&, offset, reversed](std::size_t k, double, const State& y) {
                const std::size_t idx = reversed ? offset - 1 - k : offset + k;
                out.f[j][idx] = cplx(y[0], y[1]);
                out.g[j][idx] = cplx(y[2], y[3]);
            };
        };
        OdeStats a, b;
        if (!pos.empty()) a = integrate_dp45<4>(rhs, 0.0, y0, pos, tol, no_repair, store(split, false));
        if (!neg.empty()) b = integrate_dp45<4>(rhs, 0.0, y0, neg, tol, no_repair, store(split, true));
        if (!a.ok || !b.ok) throw NumericalError("complex_reduction_oracle: step-size underflow");
        for (std::size_t i = 0; i < points.size(); ++i) {
            const cplx f = out.f[j][i], g = out.g[j][i];
            const double den = std::norm(f) + 4.0 * std::norm(g);
            const cplx z = 4.0 * g * std::conj(f) / den;
            out.frames[i].m[j] = (std::norm(f) - 4.0 * std::norm(g)) / den;
            out.frames[i].n[j] = z.real();
            out.frames[i].b[j] = z.imag();
        }
    }
    return out;
}

struct LimitData {
    ProfileKind kind = ProfileKind::Expander;
    ProfileParams params;
    Vec3 A_plus = Vec3::UnitX(), A_minus = Vec3::UnitX();
    Vec3 B_plus = Vec3::UnitZ(), B_minus = Vec3::UnitZ();
    double angle = 0.0;
    std::array<double, 3> phases{0.0, 0.0, 0.0};
    std::array<double, 3> amplitudes{0.0, 0.0, 0.0};
    double tol = 0.0;
    double fit_residual = 0.0; // least-squares misfit or adiabatic error estimate
};

inline double wrap_2pi(double a) {
    a = std::fmod(a, 2.0 * pi);
    if (a < 0.0) a += 2.0 * pi;
    return a >= 2.0 * pi ? 0.0 : a;
}

// Oscillation phase beta int_{s0^2/4}^{s^2/4} sqrt(1 + c^2 e^{-2 alpha sigma}/sigma) d sigma.
inline double expander_phase(const ProfileParams& p, double s) {
    const double a = p.s0() * p.s0() / 4.0, b = s * s / 4.0;
    if (a == b) return 0.0;
    auto integrand = [&](double sg) { return std::sqrt(1.0 + p.c * p.c * std::exp(-2.0 * p.alpha * sg) / sg); };
    // integrand - 1 decays; integrate the correction and add the linear part exactly
    auto corr = [&](double sg) { return integrand(sg) - 1.0; };
    const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(corr, a, b, 12, 1e-14);
    return p.beta() * ((b - a) + q);
}

inline Vec3 limit_B(const Vec3& A) {
    return Vec3(std::sqrt(std::max(0.0, 1.0 - A[0] * A[0])), std::sqrt(std::max(0.0, 1.0 - A[1] * A[1])),
                std::sqrt(std::max(0.0, 1.0 - A[2] * A[2])));
}

inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
}

// Limit vectors of an expander by least squares on the final decade of the
// grid: constant + decaying oscillation (envelope e^{-alpha s^2/4}/s) + the
// e^{-alpha s^2/2}/s^2 correction; for alpha = 0 the 1/s oscillation with phase
// s^2/4 + c^2 ln s and a 1/s^2 layer are fitted instead.
inline LimitData limit_vectors(const ProfileSolution& s) {
    require(s.kind == ProfileKind::Expander, "limit_vectors: expander profile required");
    const auto& p = s.params;
    const double xe = s.x.back();
    LimitData ld;
    ld.kind = s.kind;
    ld.params = p;
    ld.tol = s.tol;
    if (p.c == 0.0) {
        ld.B_plus = ld.B_minus = limit_B(ld.A_plus);
        return ld;
    }
    if (p.alpha > 0.0) {
        require(xe >= p.s0(), "limit_vectors: profile must reach s0 = 4 sqrt(8 + c^2)");
        const double env = 2.0 * p.c * std::exp(-p.alpha * xe * xe / 4.0) / xe;
        if (env > 1e-10)
            throw NumericalError("limit_vectors: oscillation envelope " + std::to_string(env) +
                                 " not below 1e-10 at x_max; extend the profile");
    }
    const std::size_t n = s.size();
    const std::size_t first = s.center() + static_cast<std::size_t>(0.9 * (n - 1 - s.center()));
    const int rows = static_cast<int>(n - first);
    const int cols = p.alpha > 0.0 ? 3 : 6;
    Eigen::MatrixXd M(rows, cols);
    Eigen::MatrixXd rhs(rows, 3);
    for (int r = 0; r < rows; ++r) {
        const double x = s.x[first + r];
        const double ps = p.alpha > 0.0 ? expander_phase(p, x) : x * x / 4.0 + p.c * p.c * std::log(x);
        if (p.alpha > 0.0) {
            const double e = std::exp(-p.alpha * x * x / 4.0) / x;
            M(r, 0) = 1.0 - 2.0 * p.c * p.c / (x * x) * std::exp(-p.alpha * x * x / 2.0);
            M(r, 1) = e * std::cos(ps);
            M(r, 2) = e * std::sin(ps);
        } else {
            M(r, 0) = 1.0;
            M(r, 1) = std::cos(ps) / x;
            M(r, 2) = std::sin(ps) / x;
            M(r, 3) = 1.0 / (x * x);
            M(r, 4) = std::cos(2.0 * ps) / (x * x);
            M(r, 5) = std::sin(2.0 * ps) / (x * x);
        }
        rhs.row(r) = s.frames[first + r].m.transpose();
    }
    Eigen::MatrixXd coef = M.colPivHouseholderQr().solve(rhs);
    ld.A_plus = coef.row(0).transpose();
    ld.fit_residual = (M * coef - rhs).cwiseAbs().maxCoeff();
    ld.A_plus.normalize();
    ld.A_minus = parity_map(ld.A_plus);
    ld.B_plus = limit_B(ld.A_plus);
    ld.B_minus = limit_B(ld.A_minus);
    ld.angle = angle_between(ld.A_plus, ld.A_minus);
    return ld;
}

// x_max at which the expander envelope 2c e^{-alpha x^2/4}/x drops below `level`.
inline double expander_settling_length(const ProfileParams& p, double level = 1e-12) {
    require(p.alpha > 0.0, "expander_settling_length: alpha must be positive");
    double x = p.s0();
    while (2.0 * p.c * std::exp(-p.alpha * x * x / 4.0) / x > level) x += 0.5;
    return x + 1.0;
}

// Limit vectors straight from (c, alpha): integrates far enough and fits.
inline LimitData expander_limits(const ProfileParams& p, double tol = 1e-12, double h = 0.01) {
    if (p.c == 0.0) return limit_vectors(integrate_profile(ProfileKind::Expander, p, 1.0, tol, 0.05));
    const double xm = p.alpha > 0.0 ? expander_settling_length(p) : 200.0;
    return limit_vectors(integrate_profile(ProfileKind::Expander, p, xm, tol, h));
}

// theta_{c,alpha} = arccos(A+ . A-) = arccos(2 A1^2 - 1).
inline double limit_angle(const ProfileParams& p, double tol = 1e-12) { return expander_limits(p, tol).angle; }

inline double limit_angle_alpha1(double c) { return std::acos(std::cos(2.0 * c * std::sqrt(pi))); }

struct ExpanderAsymptoticFit {
    ProfileParams params;
    double s0 = 0.0;
    Vec3 A = Vec3::UnitX(), B = Vec3::Zero();
    std::array<double, 3> a{0.0, 0.0, 0.0};
    std::vector<double> s;
    std::vector<Vec3> residual;   // m(s) - prediction
    std::vector<double> scaled;   // max_j |residual_j| s^3 e^{alpha s^2/4}
    double scaled_sup = 0.0;
};

// Predicted profile A - (2c/s) B e^{-alpha s^2/4}(alpha sin phi + beta cos phi)
// - (2c^2/s^2) A e^{-alpha s^2/2}, and the shape e^{-alpha s^2/4}/s^3 of the error.
struct AsymptoticPrediction {
    Vec3 m;
    Vec3 deviation; // m - A
    double envelope_shape;
};

inline AsymptoticPrediction expander_asymptotics(const ProfileParams& p, double s, const Vec3& A,
                                                 const std::array<double, 3>& a) {
    require(s >= p.s0(), "expander_asymptotics: s must be at least s0 = 4 sqrt(8 + c^2)");
    const Vec3 B = limit_B(A);
    const double ps = expander_phase(p, s);
    const double e4 = std::exp(-p.alpha * s * s / 4.0), e2 = std::exp(-p.alpha * s * s / 2.0);
    AsymptoticPrediction out;
    for (int j = 0; j < 3; ++j) {
        const double phi = a[j] + ps;
        out.deviation[j] = -(2.0 * p.c / s) * B[j] * e4 * (p.alpha * std::sin(phi) + p.beta() * std::cos(phi)) -
                           (2.0 * p.c * p.c / (s * s)) * A[j] * e2;
    }
    out.m = A + out.deviation;
    out.envelope_shape = e4 / (s * s * s);
    return out;
}

// Fits the constants a_j on [s0, s0 + window] and evaluates the scaled
// remainder. m - A is formed as -int_s^inf k n (quadrature of the frame), so
// the remainder keeps its relative accuracy even where it is far below the
// rounding level of m itself.
inline ExpanderAsymptoticFit fit_expander_asymptotics(const ProfileParams& p, double window = 5.0,
                                                      double tol = 1e-12, double h = 0.002) {
    require(p.alpha > 0.0 && p.c > 0.0, "fit_expander_asymptotics: needs alpha > 0 and c > 0");
    ExpanderAsymptoticFit fit;
    fit.params = p;
    fit.s0 = p.s0();
    const double s1 = fit.s0 + window;
    const double far = std::sqrt(s1 * s1 + 4.0 * 40.0 / p.alpha);
    const int n = static_cast<int>(std::ceil((far - fit.s0) / h)) + 1;
    std::vector<double> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = fit.s0 + i * h;
    auto fi = integrate_frames(ProfileKind::Expander, p, pts, tol);

    // tail T(s_i) = int_{s_i}^{far} k n with the 4-point rule on each cell
    std::vector<Vec3> f(n);
    for (int i = 0; i < n; ++i) f[i] = curvature_torsion(ProfileKind::Expander, p, pts[i]).first * fi.frames[i].n;
    std::vector<Vec3> T(n, Vec3::Zero());
    for (int i = n - 2; i >= 0; --i) {
        Vec3 cell;
        if (i >= 1 && i + 2 < n) cell = h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
        else cell = h / 2.0 * (f[i] + f[i + 1]);
        T[i] = T[i + 1] + cell;
    }
    fit.A = fi.frames[n - 1].m;
    fit.B = limit_B(fit.A);

    std::vector<int> win;
    for (int i = 0; i < n && pts[i] <= s1 + 1e-12; ++i) win.push_back(i);
    std::vector<double> psi(win.size());
    for (std::size_t r = 0; r < win.size(); ++r) psi[r] = expander_phase(p, pts[win[r]]);
    const double gamma = std::acos(p.alpha);
    for (int j = 0; j < 3; ++j) {
        if (fit.B[j] < 1e-12) continue;
        Eigen::MatrixXd M(win.size(), 2);
        Eigen::VectorXd y(win.size());
        for (std::size_t r = 0; r < win.size(); ++r) {
            const double s = pts[win[r]];
            const double e2 = std::exp(-p.alpha * s * s / 2.0);
            const double lead = T[win[r]][j] - 2.0 * p.c * p.c / (s * s) * fit.A[j] * e2;
            y[r] = lead * s * std::exp(p.alpha * s * s / 4.0) / (2.0 * p.c * fit.B[j]);
            M(r, 0) = std::cos(psi[r]);
            M(r, 1) = std::sin(psi[r]);
        }
        Eigen::Vector2d pq = M.colPivHouseholderQr().solve(y);
        fit.a[j] = wrap_2pi(std::atan2(pq[0], pq[1]) - gamma);
    }
    for (std::size_t r = 0; r < win.size(); ++r) {
        const double s = pts[win[r]];
        const auto pred = expander_asymptotics(p, s, fit.A, fit.a);
        const Vec3 res = -T[win[r]] - pred.deviation;
        fit.s.push_back(s);
        fit.residual.push_back(res);
        const double sc = res.cwiseAbs().maxCoeff() / pred.envelope_shape;
        fit.scaled.push_back(sc);
        fit.scaled_sup = std::max(fit.scaled_sup, sc);
    }
    return fit;
}

// Shrinker limit circles. Beyond the grid cap the system is followed in the
// turning angle theta, where the frame rotates at unit rate about b + (tau/k) m;
// that axis is frozen once tau/k stops changing and is the plane normal B+.
struct ShrinkerLimitRun {
    LimitData limits;
    double x_stop = 0.0;
    double theta_stop = 0.0;
    double adiabatic_error = 0.0; // |d(tau/k)/dtheta| at the stop point
    std::vector<Vec3> window;     // samples of m over the last turns, for plane fits
};

inline ShrinkerLimitRun shrinker_limit_circles(const ProfileSolution& s, double tol = 1e-11,
                                               double theta_budget = 2.0e4, double target_error = 1e-9) {
    require(s.kind == ProfileKind::Shrinker, "shrinker_limit_circles: shrinker profile required");
    const auto& p = s.params;
    require(p.alpha > 0.0 && p.c > 0.0, "shrinker_limit_circles: needs alpha > 0 and c > 0");
    ShrinkerLimitRun run;
    LimitData& ld = run.limits;
    ld.kind = s.kind;
    ld.params = p;
    ld.tol = tol;

    // state m, n, b, x as functions of theta
    using State = OdeVec<10>;
    const double beta = p.beta();
    auto eps_of = [&](double x) {
        auto [k, tau] = curvature_torsion(ProfileKind::Shrinker, p, x);
        return tau / k;
    };
    auto rhs = [&](double, const State& y) {
        const double x = y[9];
        const double eps = eps_of(x);
        State d;
        d.segment<3>(0) = y.segment<3>(3);
        d.segment<3>(3) = -y.segment<3>(0) + eps * y.segment<3>(6);
        d.segment<3>(6) = -eps * y.segment<3>(3);
        d[9] = 1.0 / curvature_torsion(ProfileKind::Shrinker, p, x).first;
        return d;
    };
    auto repair = [](State& y) {
        detail::FrameState f;
        f << y.segment<9>(0), 0.0;
        detail::repair_frame(f);
        y.segment<9>(0) = f.segment<9>(0);
        return true;
    };
    // adiabatic drift rate |d eps/d theta| = |d eps/dx| / k
    auto drift = [&](double x) {
        const double k = curvature_torsion(ProfileKind::Shrinker, p, x).first;
        const double deps = -beta / (2.0 * k) * (1.0 - p.alpha * x * x / 2.0);
        return std::abs(deps) / k;
    };

    const auto& last = s.frames.back();
    State y;
    y << last.m, last.n, last.b, s.x.back();
    double theta = s.theta.back();
    // advance in chunks of one turn until the drift estimate is small enough
    const double chunk = 2.0 * pi;
    double used = 0.0;
    while (used < theta_budget && drift(y[9]) > target_error) {
        std::vector<double> out{theta + chunk};
        State yn = y;
        auto st = integrate_dp45<10>(rhs, theta, y, out, tol, repair,
                                     [&](std::size_t, double, const State& v) { yn = v; }, 0.0, 0.25);
        if (!st.ok) throw NumericalError("shrinker_limit_circles: theta integration failed");
        y = yn;
        theta += chunk;
        used += chunk;
    }
    // one more turn sampled for the plane fit
    std::vector<double> pts;
    for (int i = 1; i <= 64; ++i) pts.push_back(theta + chunk * i / 64.0);
    State yend = y;
    integrate_dp45<10>(rhs, theta, y, pts, tol, repair, [&](std::size_t, double, const State& v) {
        run.window.push_back(v.segment<3>(0));
        yend = v;
    }, 0.0, 0.25);
    theta += chunk;

    const Vec3 m = yend.segment<3>(0), b = yend.segment<3>(6);
    const double eps = eps_of(yend[9]);
    const Vec3 B = (b + eps * m).normalized();
    run.x_stop = yend[9];
    run.theta_stop = theta;
    run.adiabatic_error = drift(yend[9]);

    ld.B_plus = B;
    ld.B_minus = Vec3(-B[0], B[1], B[2]);
    ld.angle = angle_between(ld.B_plus, ld.B_minus);
    ld.fit_residual = run.adiabatic_error;
    // f_j ~ rho_j cos(theta - phi_j) on the circle
    Vec3 u1 = m - m.dot(B) * B;
    u1.normalize();
    const Vec3 u2 = B.cross(u1);
    for (int j = 0; j < 3; ++j) {
        ld.amplitudes[j] = std::sqrt(std::max(0.0, 1.0 - B[j] * B[j]));
        ld.phases[j] = ld.amplitudes[j] < 1e-12 ? 0.0 : wrap_2pi(theta + std::atan2(u2[j], u1[j]));
    }
    return run;
}

// Normal of the best-fit plane through the origin for samples on (near) a
// great circle: eigenvector of the smallest eigenvalue of sum v v^T.
inline Vec3 fit_plane_normal(const std::vector<Vec3>& pts) {
    Mat3 S = Mat3::Zero();
    for (const auto& v : pts) S += v * v.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(S);
    return es.eigenvectors().col(0);
}

// Euclidean distance from a unit vector to the great circle with normal B.
inline double circle_distance(const Vec3& f, const Vec3& B) {
    const double d = std::clamp(f.dot(B) / B.norm(), -1.0, 1.0);
    return std::sqrt(std::max(0.0, 2.0 - 2.0 * std::sqrt(1.0 - d * d)));
}

// max over |x| >= 1 of dist(f(x), C+-) / ((15 sqrt2 beta/(c alpha^2)) |x| e^{-alpha x^2/4}).
struct CircleDistanceReport {
    double max_ratio = 0.0;
    double tail_ratio = 0.0; // max ratio over the outer quarter of the grid
    double max_distance = 0.0;
};

inline CircleDistanceReport circle_distance_check(const ProfileSolution& s, const LimitData& ld) {
    const auto& p = s.params;
    CircleDistanceReport rep;
    const double pref = 15.0 * std::sqrt(2.0) * p.beta() / (p.c * p.alpha * p.alpha);
    const double xend = s.x.back();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = s.x[i];
        if (std::abs(x) < 1.0) continue;
        const Vec3& B = x > 0 ? ld.B_plus : ld.B_minus;
        const double d = circle_distance(s.frames[i].m, B);
        rep.max_distance = std::max(rep.max_distance, d);
        const double bound = pref * std::abs(x) * std::exp(-p.alpha * x * x / 4.0);
        const double ratio = bound > 0.0 ? d / bound : (d <= 1e-13 ? 0.0 : std::numeric_limits<double>::infinity());
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (std::abs(x) >= 0.75 * xend) rep.tail_ratio = std::max(rep.tail_ratio, ratio);
    }
    return rep;
}

} // namespace llg
