#pragma once

#include "llg/geometry.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <optional>

namespace llg {

// Hydrodynamical state (v, w) = (m3, -phi') on a grid, strictly away from vacuum.
struct HydroState {
    Grid1D grid;
    RealField v, w;

    static constexpr double vacuum_margin = 1e-10;

    HydroState() = default;
    HydroState(Grid1D g, RealField v_, RealField w_) : grid(g), v(std::move(v_)), w(std::move(w_)) {
        require(static_cast<int>(v.size()) == g.n && static_cast<int>(w.size()) == g.n,
                "HydroState: field size mismatch");
        require(sup_norm(v) <= 1.0 - vacuum_margin, "HydroState: max|v| must stay below 1");
    }
};

struct SolitonSpec {
    double c = 0.5;
    double a = 0.0;     // position
    double theta = 0.0; // rotation about e3
    int s = 1;          // +1 or the opposite map -1

    void validate(bool allow_static = false) const {
        require(std::abs(c) < 1.0, "SolitonSpec: |c| < 1 required");
        require(allow_static || c != 0.0, "SolitonSpec: c = 0 has no hydrodynamical form");
        require(s == 1 || s == -1, "SolitonSpec: s must be +1 or -1");
    }
};

inline double soliton_width_rate(double c) { return std::sqrt(1.0 - c * c); }

// u_c(x) = (c sech(mu x), tanh(mu x), mu sech(mu x)), mu = sqrt(1 - c^2)
inline Vec3 soliton_profile(double c, double x) {
    require(std::abs(c) < 1.0, "soliton_profile: |c| < 1 required");
    const double mu = soliton_width_rate(c), s = sech(mu * x);
    return {c * s, std::tanh(mu * x), mu * s};
}

struct HydroValue {
    double v = 0.0, w = 0.0;
};

inline HydroValue hydro_soliton(double c, double x) {
    require(c != 0.0, "hydro_soliton: c = 0 vanishes at the origin and has no phase");
    require(std::abs(c) < 1.0, "hydro_soliton: |c| < 1 required");
    const double mu = soliton_width_rate(c), v = mu * sech(mu * x);
    return {v, c * v / (1.0 - v * v)};
}

inline HydroState hydro_soliton_state(double c, const Grid1D& g, double a = 0.0, int s = 1) {
    RealField v(g.n), w(g.n);
    for (int i = 0; i < g.n; ++i) {
        auto p = hydro_soliton(c, g.x(i) - a);
        v[i] = s * p.v;
        w[i] = s * p.w;
    }
    return {g, std::move(v), std::move(w)};
}

inline double soliton_energy(double c) {
    require(std::abs(c) < 1.0, "soliton_energy: |c| < 1 required");
    return 2.0 * soliton_width_rate(c);
}

// Odd in c through the arctan.
inline double soliton_momentum(double c) {
    require(c != 0.0 && std::abs(c) < 1.0, "soliton_momentum: 0 < |c| < 1 required");
    return 2.0 * std::atan(soliton_width_rate(c) / c);
}

inline double soliton_momentum_slope(double c) { return -2.0 / soliton_width_rate(c); }

// E = 1/2 int v'^2/(1-v^2) + (1-v^2) w^2 + lambda3 v^2, trapezoidal with a
// sixth-order derivative.
inline double functional_energy(const HydroState& s, double lambda3 = 1.0) {
    auto dv = fd::d1(s.grid, s.v, 6);
    RealField e(s.grid.n);
    for (int i = 0; i < s.grid.n; ++i) {
        const double q = 1.0 - s.v[i] * s.v[i];
        e[i] = 0.5 * (dv[i] * dv[i] / q + q * s.w[i] * s.w[i] + lambda3 * s.v[i] * s.v[i]);
    }
    return trapezoid(s.grid, e);
}

inline double functional_momentum(const HydroState& s) {
    RealField p(s.grid.n);
    for (int i = 0; i < s.grid.n; ++i) p[i] = s.v[i] * s.w[i];
    return trapezoid(s.grid, p);
}

// Strong-form residual of E'(v) = c P'(v), sup over nodes whose FD6 stencils
// stay inside the grid. Nested first differences: at h = 1e-3 the floor is
// round-off, roughly eps / (h^2 (1 - v^2)).
inline double euler_lagrange_residual(const HydroState& s, double c) {
    const auto& g = s.grid;
    auto dv = fd::d1(g, s.v, 6);
    RealField flux(g.n);
    for (int i = 0; i < g.n; ++i) flux[i] = dv[i] / (1.0 - s.v[i] * s.v[i]);
    auto dflux = fd::d1(g, flux, 6);
    double r = 0.0;
    for (int i = 6; i < g.n - 6; ++i) {
        const double v = s.v[i], w = s.w[i], q = 1.0 - v * v;
        const double r1 = v * dv[i] * dv[i] / (q * q) - v * w * w + v - dflux[i] - c * w;
        const double r2 = q * w - c * v;
        r = std::max({r, std::abs(r1), std::abs(r2)});
    }
    return r;
}

struct SolitonSum {
    std::vector<SolitonSpec> specs;
    HydroState state;
    bool admissible = false; // max|V| < 1, reconstruction to S^2 allowed
    double max_v = 0.0;

    SpinField to_sphere() const {
        if (!admissible) throw DomainError("SolitonSum: max|V| >= 1, no sphere reconstruction");
        SpinField f = from_hydrodynamical(state.v, state.w, state.grid);
        const double th = specs.empty() ? 0.0 : specs.front().theta;
        for (auto& m : f.m) m = soliton_symmetry(m, th, 1);
        return f;
    }
};

// S = sum_j s_j (v_{c_j}, w_{c_j})(. - a_j). Admissibility is a flag.
inline SolitonSum sum_solitons(const std::vector<SolitonSpec>& specs, const Grid1D& g) {
    SolitonSum out;
    out.specs = specs;
    RealField v(g.n, 0.0), w(g.n, 0.0);
    for (const auto& sp : specs) {
        sp.validate();
        for (int i = 0; i < g.n; ++i) {
            auto p = hydro_soliton(sp.c, g.x(i) - sp.a);
            v[i] += sp.s * p.v;
            w[i] += sp.s * p.w;
        }
    }
    out.max_v = sup_norm(v);
    out.admissible = out.max_v < 1.0 - HydroState::vacuum_margin;
    out.state.grid = g;
    out.state.v = std::move(v);
    out.state.w = std::move(w);
    return out;
}

// ---------------------------------------------------------------------------
// Discrete second variation of E - cP.
//
// F_h = h sum_i 1/2 d_i^2 (a(v_i) + a(v_{i+1}))/2 + h sum_i [1/2 (1-v_i^2) w_i^2
//       + 1/2 v_i^2 - c v_i w_i],   d_i = (v_{i+1}-v_i)/h,  a(v) = 1/(1-v^2),
// unknowns (v_i, w_i) interleaved at interior nodes, zero at both ends.

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>;

inline double a0(double v) { return 1.0 / (1.0 - v * v); }
inline double a1(double v) { return 2.0 * v / sqr(1.0 - v * v); }
inline double a2(double v) { return (2.0 + 6.0 * v * v) / std::pow(1.0 - v * v, 3); }

struct DiscreteSoliton {
    double c, h;
    int m; // interior nodes

    // node value with zero far field; k indexes nodes 0..m+1
    static double at(const Eigen::VectorXd& z, int k, int m, int comp) {
        if (k <= 0 || k >= m + 1) return 0.0;
        return z[2 * (k - 1) + comp];
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
        Eigen::VectorXd gr = Eigen::VectorXd::Zero(z.size());
        for (int k = 0; k <= m; ++k) {
            const double vl = at(z, k, m, 0), vr = at(z, k + 1, m, 0);
            const double d = (vr - vl) / h, ab = 0.5 * (a0(vl) + a0(vr));
            if (k >= 1) gr[2 * (k - 1)] += h * (-d / h * ab + 0.25 * d * d * a1(vl));
            if (k + 1 <= m) gr[2 * k] += h * (d / h * ab + 0.25 * d * d * a1(vr));
        }
        for (int k = 1; k <= m; ++k) {
            const double v = at(z, k, m, 0), w = at(z, k, m, 1);
            gr[2 * (k - 1)] += h * (-v * w * w + v - c * w);
            gr[2 * (k - 1) + 1] += h * ((1.0 - v * v) * w - c * v);
        }
        return gr;
    }

    SpMat hessian(const Eigen::VectorXd& z) const {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(10 * m);
        for (int k = 0; k <= m; ++k) {
            const double vl = at(z, k, m, 0), vr = at(z, k + 1, m, 0);
            const double d = (vr - vl) / h, ab = 0.5 * (a0(vl) + a0(vr));
            const int il = 2 * (k - 1), ir = 2 * k;
            if (k >= 1) t.emplace_back(il, il, h * (ab / (h * h) - d * a1(vl) / h + 0.25 * d * d * a2(vl)));
            if (k + 1 <= m) t.emplace_back(ir, ir, h * (ab / (h * h) + d * a1(vr) / h + 0.25 * d * d * a2(vr)));
            if (k >= 1 && k + 1 <= m) {
                const double off = h * (-ab / (h * h) - 0.5 * d * a1(vr) / h + 0.5 * d * a1(vl) / h);
                t.emplace_back(il, ir, off);
                t.emplace_back(ir, il, off);
            }
        }
        for (int k = 1; k <= m; ++k) {
            const double v = at(z, k, m, 0), w = at(z, k, m, 1);
            const int iv = 2 * (k - 1), iw = iv + 1;
            t.emplace_back(iv, iv, h * (1.0 - w * w));
            t.emplace_back(iv, iw, h * (-2.0 * v * w - c));
            t.emplace_back(iw, iv, h * (-2.0 * v * w - c));
            t.emplace_back(iw, iw, h * (1.0 - v * v));
        }
        SpMat H(2 * m, 2 * m);
        H.setFromTriplets(t.begin(), t.end());
        return H;
    }
};

// [A V; V^T 0] with V dense columns appended; lower triangle only is read.
inline SpMat bordered(const SpMat& A, const std::vector<Eigen::VectorXd>& V) {
    const int n = static_cast<int>(A.rows()), m = static_cast<int>(V.size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(A.nonZeros() + n * m + m);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i)
            if (V[j][i] != 0.0) {
                t.emplace_back(n + j, i, V[j][i]);
                t.emplace_back(i, n + j, V[j][i]);
            }
        t.emplace_back(n + j, n + j, 0.0);
    }
    SpMat B(n + m, n + m);
    B.setFromTriplets(t.begin(), t.end());
    return B;
}

inline SpMat shifted(const SpMat& A, double sigma) {
    SpMat I(A.rows(), A.cols());
    I.setIdentity();
    return A - sigma * I;
}

inline int negative_pivots(const Ldlt& f) {
    if (f.info() != Eigen::Success) throw NumericalError("coercivity: LDLT factorization failed");
    const Eigen::VectorXd D = f.vectorD(); // returned by value
    int neg = 0;
    for (int i = 0; i < D.size(); ++i) {
        const double d = D[i];
        if (!std::isfinite(d)) throw NumericalError("coercivity: non-finite pivot");
        if (d < 0.0) ++neg;
    }
    return neg;
}

// Number of eigenvalues below sigma: of L itself, or of L restricted to the
// orthogonal complement of span V (bordered inertia minus dim V).
inline int count_below(const SpMat& L, const std::vector<Eigen::VectorXd>& V, double sigma) {
    SpMat A = shifted(L, sigma);
    if (!V.empty()) A = bordered(A, V);
    Ldlt f(A);
    return negative_pivots(f) - static_cast<int>(V.size());
}

inline double gershgorin_lower(const SpMat& L) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(L.rows()), off = Eigen::VectorXd::Zero(L.rows());
    for (int k = 0; k < L.outerSize(); ++k)
        for (SpMat::InnerIterator it(L, k); it; ++it) {
            if (it.row() == it.col()) diag[it.row()] += it.value();
            else off[it.row()] += std::abs(it.value());
        }
    return (diag - off).minCoeff();
}

// Smallest eigenvalue by inertia bisection to absolute width tol.
inline double lowest_eigenvalue(const SpMat& L, const std::vector<Eigen::VectorXd>& V, double tol) {
    double lo = gershgorin_lower(L) - 1.0, hi = 1.0;
    while (count_below(L, V, hi) < 1) hi *= 2.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (count_below(L, V, mid) >= 1 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

// Shift-invert iteration at sigma; returns (Rayleigh quotient, vector).
inline std::pair<double, Eigen::VectorXd> inverse_iteration(const SpMat& L, double sigma, Eigen::VectorXd x,
                                                            int iters = 12) {
    Ldlt f(shifted(L, sigma));
    if (f.info() != Eigen::Success) throw NumericalError("coercivity: shifted factorization failed");
    x.normalize();
    for (int k = 0; k < iters; ++k) {
        x = f.solve(x);
        if (!x.allFinite()) throw NumericalError("coercivity: inverse iteration diverged");
        x.normalize();
    }
    return {x.dot(L * x), x};
}

} // namespace detail

struct CoercivityReport {
    double c = 0.0;
    Grid1D grid;
    double eig_kernel = 0.0;        // eigenvalue nearest 0
    double kernel_alignment = 0.0;  // |cos| between its eigenvector and d/dx (v_c, w_c)
    double eig_negative = 0.0;      // smallest unconstrained eigenvalue
    int negative_count = 0;         // eigenvalues below -negative_floor
    double Lambda_c = 0.0;          // smallest eigenvalue on span{d/dx v_c, P'(v_c)}^perp
    double polish_shift = 0.0;      // max node change from the sampled soliton
    double gradient_residual = 0.0; // |grad F_h| / h after polishing
    double euler_lagrange = 0.0;    // strong-form residual of the samples

    static constexpr double negative_floor = 1e-5;
};

struct CoercivityOptions {
    bool polish = true;     // Newton to the discrete critical point first
    double bisect_tol = 1e-9;
};

// Critical point of the discrete E_h - cP_h near the sampled soliton. The
// translation mode is removed by a bordered Newton system.
inline Eigen::VectorXd polish_discrete_soliton(double c, const Grid1D& g, Eigen::VectorXd z, double* residual = nullptr) {
    const int m = g.n - 2;
    detail::DiscreteSoliton F{c, g.h(), m};
    const double h = g.h();
    double res = 0.0;
    for (int it = 0; it < 12; ++it) {
        Eigen::VectorXd G = F.gradient(z);
        res = G.cwiseAbs().maxCoeff() / h;
        if (res < 1e-12) break;
        // translation generator from centered differences of the current iterate
        Eigen::VectorXd tr = Eigen::VectorXd::Zero(z.size());
        for (int k = 1; k <= m; ++k)
            for (int comp = 0; comp < 2; ++comp)
                tr[2 * (k - 1) + comp] = detail::DiscreteSoliton::at(z, k + 1, m, comp) -
                                         detail::DiscreteSoliton::at(z, k - 1, m, comp);
        tr.normalize();
        detail::SpMat K = detail::bordered(F.hessian(z), {tr});
        detail::Ldlt f(K);
        if (f.info() != Eigen::Success) throw NumericalError("polish_discrete_soliton: factorization failed");
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(z.size() + 1);
        rhs.head(z.size()) = -G;
        Eigen::VectorXd dz = f.solve(rhs);
        if (!dz.allFinite()) throw NumericalError("polish_discrete_soliton: Newton step not finite");
        z += dz.head(z.size());
    }
    if (residual) *residual = res;
    if (res > 1e-8) throw NumericalError("polish_discrete_soliton: Newton did not converge");
    return z;
}

inline CoercivityReport coercivity_check(double c, const Grid1D& g, const CoercivityOptions& opt = {}) {
    require(c != 0.0 && std::abs(c) < 1.0, "coercivity_check: c in (-1,1)\\{0} required");
    require(!g.periodic(), "coercivity_check: pinned grid required");
    const double h = g.h();
    const double width = 1.0 / soliton_width_rate(c);
    require(h <= 0.25 * width, "coercivity_check: grid does not resolve the soliton");
    const int m = g.n - 2;

    CoercivityReport rep;
    rep.c = c;
    rep.grid = g;
    HydroState s = hydro_soliton_state(c, g);
    rep.euler_lagrange = euler_lagrange_residual(s, c);

    Eigen::VectorXd z(2 * m);
    for (int k = 1; k <= m; ++k) {
        z[2 * (k - 1)] = s.v[k];
        z[2 * (k - 1) + 1] = s.w[k];
    }
    Eigen::VectorXd z0 = z;
    detail::DiscreteSoliton F{c, h, m};
    if (opt.polish) z = polish_discrete_soliton(c, g, z, &rep.gradient_residual);
    else rep.gradient_residual = F.gradient(z).cwiseAbs().maxCoeff() / h;
    rep.polish_shift = (z - z0).cwiseAbs().maxCoeff();

    const detail::SpMat L = F.hessian(z) / h;

    // constraint directions d/dx (v, w) and P' = (w, v), Gram-Schmidt orthonormalized
    Eigen::VectorXd t(2 * m), p(2 * m);
    for (int k = 1; k <= m; ++k) {
        const double x = g.x(k), mu = soliton_width_rate(c);
        const double v = mu * sech(mu * x), dv = -mu * mu * sech(mu * x) * std::tanh(mu * x);
        const double dw = c * dv * (1.0 + v * v) / sqr(1.0 - v * v);
        t[2 * (k - 1)] = dv;
        t[2 * (k - 1) + 1] = dw;
        p[2 * (k - 1)] = z[2 * (k - 1) + 1];
        p[2 * (k - 1) + 1] = z[2 * (k - 1)];
    }
    t.normalize();
    p -= p.dot(t) * t;
    p.normalize();

    auto [lk, vk] = detail::inverse_iteration(L, 1e-3, t);
    rep.eig_kernel = lk;
    rep.kernel_alignment = std::abs(vk.dot(t));

    rep.negative_count = detail::count_below(L, {}, -CoercivityReport::negative_floor);
    const double lneg = detail::lowest_eigenvalue(L, {}, 1e-6);
    rep.eig_negative = detail::inverse_iteration(L, lneg - 1e-4, Eigen::VectorXd::Ones(2 * m)).first;

    rep.Lambda_c = detail::lowest_eigenvalue(L, {t, p}, opt.bisect_tol);
    return rep;
}

} // namespace llg
