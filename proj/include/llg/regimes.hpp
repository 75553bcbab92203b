#pragma once

#include "llg/evolution.hpp"
#include "llg/fit.hpp"

#include <limits>
#include <map>

namespace llg {

// Strongly anisotropic regimes: the rescaled hydrodynamical system H_eps
// (lambda1 = sigma eps, lambda3 = 1/eps) with its Sine-Gordon / free-wave limits,
// and NLS_eps (lambda1 = lambda3 = 1/eps) with its cubic Schrodinger limit.
// Spectral in space (periodic, or even reflection on pinned grids), Lawson
// integrating-factor RK4 in time around the exactly solvable linear part.

struct RegimeConfig {
    double eps = 0.1;
    double sigma = 1.0;
    int k = 3; // Sobolev index of the monitored norms
    void validate(bool allow_zero_eps = false, bool allow_zero_sigma = false) const {
        require(eps < 1.0 && (eps > 0.0 || (allow_zero_eps && eps == 0.0)), "RegimeConfig: eps must lie in (0,1)");
        require(sigma > 0.0 || (allow_zero_sigma && sigma == 0.0), "RegimeConfig: sigma must be positive");
        require(k >= 1, "RegimeConfig: k must be positive");
    }
};

struct RegimeSolverConfig {
    double dt = 0.0;        // 0: automatic (accuracy cap and explicit-part bound)
    double dt_cap = 2e-3;   // automatic dt never exceeds this
    double sample_dt = 0.0; // diagnostics spacing; 0: start and end
    int frame_stride = 1;
    long max_steps = 50'000'000;
    double guard_delta = 1e-3;
    int energy_k = 1; // monitor E^1..E^energy_k
};

struct SgState {
    Grid1D grid;
    RealField U, Phi;
};

struct SgTrajectory {
    std::vector<double> t;
    std::vector<SgState> frames;
    std::vector<double> diag_t;
    std::vector<double> energy;             // E_eps (E_SG for eps = 0)
    std::vector<std::vector<double>> Ek;    // Ek[j] holds E^{j+1}
    std::vector<double> min_W;              // inf(1 - eps^2 U^2)
    bool w_bound_held = true;               // inf W >= 1/2 at every sample
    RunInfo info;
    SgState final_state;
};

struct NlsTrajectory {
    Grid1D grid;
    std::vector<double> t;
    std::vector<ComplexField> frames;
    std::vector<double> diag_t;
    std::vector<double> energy; // frak E_eps, or the CS Hamiltonian
    std::vector<double> mass;
    std::vector<double> high_energy; // NLS_eps order-k energy when energy_k >= 2 (periodic grids)
    bool high_energy_monotone = true; // diagnostic flag only
    RunInfo info;
    ComplexField final_state;
};

namespace detail {

inline RealField re(const ComplexField& z) {
    RealField r(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) r[i] = z[i].real();
    return r;
}

// (U, Phi) -> exp(tau A) (U, Phi) per mode, A = [[0, -k^2], [1 + eps^2 k^2, 0]]
// (U_t = Phi_xx, Phi_t = U - eps^2 U_xx).
inline SgState sg_linear_propagate(Spectral1D& sp, const SgState& s, double eps, double tau) {
    if (tau == 0.0) return s;
    ComplexField uh = sp.forward(s.U), ph = sp.forward(s.Phi);
    const auto& kk = sp.wavenumbers();
    for (std::size_t j = 0; j < kk.size(); ++j) {
        const double k2 = kk[j] * kk[j], a = 1.0 + eps * eps * k2;
        const double w = std::sqrt(k2 * a);
        const double c = std::cos(w * tau);
        const double s_over_w = w > 0.0 ? std::sin(w * tau) / w : tau;
        const cplx u = uh[j], p = ph[j];
        uh[j] = c * u - k2 * s_over_w * p;
        ph[j] = a * s_over_w * u + c * p;
    }
    SgState out = s;
    out.U = re(sp.inverse(uh));
    out.Phi = re(sp.inverse(ph));
    return out;
}

inline void sg_axpy(SgState& y, const SgState& x, double a, const SgState& k) {
    for (std::size_t i = 0; i < x.U.size(); ++i) {
        y.U[i] = x.U[i] + a * k.U[i];
        y.Phi[i] = x.Phi[i] + a * k.Phi[i];
    }
}

// Lawson RK4 for u' = L u + N(u) with propagator E(tau) = exp(tau L).
template <class State, class Prop, class Nonlin, class Axpy>
State lawson_rk4(const State& u, double dt, Prop&& E, Nonlin&& N, Axpy&& axpy) {
    State k1 = N(u);
    State y = u;
    axpy(y, u, 0.5 * dt, k1);
    State a = E(y, 0.5 * dt);
    State k2 = N(a);
    State eu = E(u, 0.5 * dt);
    State b = eu;
    axpy(b, eu, 0.5 * dt, k2);
    State k3 = N(b);
    State ek3 = E(k3, 0.5 * dt);
    State c = E(eu, 0.5 * dt);
    State c0 = c;
    axpy(c, c0, dt, ek3);
    State k4 = N(c);
    // u+ = E(dt)u + dt/6 (E(dt)k1 + 2E(dt/2)(k2 + k3) + k4)
    State k23 = k2;
    axpy(k23, k2, 1.0, k3);
    State acc = E(k1, dt);
    State e23 = E(k23, 0.5 * dt);
    axpy(acc, acc, 2.0, e23);
    axpy(acc, acc, 1.0, k4);
    State out = c0;
    axpy(out, c0, dt / 6.0, acc);
    return out;
}

} // namespace detail

// Nonlinear remainder of H_eps after the linear part (Phi_xx, U - eps^2 U_xx):
// N_U   = -eps^2 (U^2 Phi_x)_x - (sigma/2) W sin 2Phi,            W = 1 - eps^2 U^2
// N_Phi = -eps^2 sigma U sin^2 Phi - eps^4 (U^2 U_x / W)_x + eps^4 U U_x^2 / W^2 - eps^2 U Phi_x^2
// Written so that eps = 0 reproduces the Sine-Gordon remainder bit for bit.
inline SgState hll_eps_nonlinear(Spectral1D& sp, const SgState& s, double eps, double sigma) {
    const int n = s.grid.n;
    const double e2 = eps * eps, e4 = e2 * e2;
    auto [ux, px] = sp.derivative2(s.U, s.Phi, 1);
    RealField a(n), b(n);
    for (int i = 0; i < n; ++i) {
        const double W = 1.0 - e2 * s.U[i] * s.U[i];
        a[i] = s.U[i] * s.U[i] * px[i];
        b[i] = s.U[i] * s.U[i] * ux[i] / W;
    }
    auto [ax, bx] = sp.derivative2(a, b, 1);
    SgState out{s.grid, RealField(n), RealField(n)};
    for (int i = 0; i < n; ++i) {
        const double U = s.U[i], W = 1.0 - e2 * U * U, sn = std::sin(s.Phi[i]);
        out.U[i] = -e2 * ax[i] + (-(0.5 * sigma) * W * std::sin(2.0 * s.Phi[i]));
        out.Phi[i] = -e2 * sigma * U * sn * sn - e4 * bx[i] + e4 * U * ux[i] * ux[i] / (W * W) - e2 * U * px[i] * px[i];
    }
    return out;
}

inline SgState sgs_nonlinear(const SgState& s, double sigma) {
    const int n = s.grid.n;
    SgState out{s.grid, RealField(n), RealField(n, 0.0)};
    for (int i = 0; i < n; ++i) out.U[i] = -(0.5 * sigma) * 1.0 * std::sin(2.0 * s.Phi[i]);
    return out;
}

inline SgState sg_linear_part(Spectral1D& sp, const SgState& s, double eps) {
    SgState out = s;
    out.U = sp.derivative(s.Phi, 2);
    RealField uxx = sp.derivative(s.U, 2);
    for (int i = 0; i < s.grid.n; ++i) out.Phi[i] = s.U[i] - eps * eps * uxx[i];
    return out;
}

inline SgState hll_eps_rhs(Spectral1D& sp, const SgState& s, double eps, double sigma) {
    SgState l = sg_linear_part(sp, s, eps), nl = hll_eps_nonlinear(sp, s, eps, sigma);
    for (int i = 0; i < s.grid.n; ++i) {
        l.U[i] += nl.U[i];
        l.Phi[i] += nl.Phi[i];
    }
    return l;
}

inline SgState sgs_rhs(Spectral1D& sp, const SgState& s, double sigma) {
    SgState l = sg_linear_part(sp, s, 0.0), nl = sgs_nonlinear(s, sigma);
    for (int i = 0; i < s.grid.n; ++i) {
        l.U[i] += nl.U[i];
        l.Phi[i] += nl.Phi[i];
    }
    return l;
}

// E^k_eps = 1/2 int eps^2 (d^k U)^2/W + (d^{k-1} U)^2 + W (d^k Phi)^2 + sigma W (d^{k-1} sin Phi)^2;
// k = 1 is the scaled LL energy, and eps = 0 gives the Sine-Gordon energy.
inline double regime_energy(Spectral1D& sp, const SgState& s, double eps, double sigma, int k = 1) {
    require(k >= 1, "regime_energy: k must be positive");
    const int n = s.grid.n;
    RealField sn(n);
    for (int i = 0; i < n; ++i) sn[i] = std::sin(s.Phi[i]);
    RealField dk1U = k == 1 ? s.U : sp.derivative(s.U, k - 1);
    RealField dk1S = k == 1 ? sn : sp.derivative(sn, k - 1);
    auto [dkU, dkP] = sp.derivative2(s.U, s.Phi, k);
    RealField e(n);
    for (int i = 0; i < n; ++i) {
        const double W = 1.0 - eps * eps * s.U[i] * s.U[i];
        e[i] = 0.5 * (eps * eps * dkU[i] * dkU[i] / W + dk1U[i] * dk1U[i] + W * dkP[i] * dkP[i] +
                      sigma * W * dk1S[i] * dk1S[i]);
    }
    return trapezoid(s.grid, e);
}

namespace detail {

inline double sg_auto_dt(const RegimeSolverConfig& cfg, Spectral1D& sp, const SgState& s, double eps, double sigma,
                         double T) {
    double kmax = 0.0;
    for (double k : sp.wavenumbers()) kmax = std::max(kmax, std::abs(k));
    const double umax = sup_norm(s.U), wmin = 1.0 - eps * eps * umax * umax;
    // explicit second-order terms of the remainder: eps^2 U^2 (Phi and U) and eps^4 U^2 / W
    const double stiff = eps * eps * umax * umax * (1.0 + eps * eps / wmin) * kmax * kmax;
    const double bound = std::min(stiff > 0.0 ? 2.5 / stiff : std::numeric_limits<double>::infinity(),
                                  sigma > 0.0 ? 2.5 / sigma : std::numeric_limits<double>::infinity());
    double dt = cfg.dt > 0.0 ? cfg.dt : std::min(cfg.dt_cap, 0.5 * bound);
    if (dt > bound) throw DomainError("regimes: dt = " + std::to_string(dt) + " exceeds the explicit-part bound " +
                                      std::to_string(bound));
    return std::min(dt, std::max(T, 1e-300));
}

} // namespace detail

namespace detail {

template <class Nonlin>
SgTrajectory run_sg_family(const SgState& s0, double eps, double sigma, double T, const RegimeSolverConfig& cfg,
                           Nonlin&& nonlin, bool guard) {
    require(s0.U.size() == s0.Phi.size() && static_cast<int>(s0.U.size()) == s0.grid.n, "regimes: state size mismatch");
    require(!guard || eps * sup_norm(s0.U) < 1.0 - cfg.guard_delta, "evolve_hll_eps: initial state violates max|eps U| < 1");
    Spectral1D sp(s0.grid);
    const double dt_max = sg_auto_dt(cfg, sp, s0, eps, sigma, T);
    auto tg = time_grid(T, cfg.sample_dt, dt_max);
    SgTrajectory tr;
    SgState u = s0;
    double t = 0.0;
    int sample = 0;
    auto record = [&]() -> bool {
        tr.diag_t.push_back(t);
        tr.energy.push_back(regime_energy(sp, u, eps, sigma, 1));
        if (cfg.energy_k >= 1) {
            tr.Ek.resize(cfg.energy_k);
            for (int k = 1; k <= cfg.energy_k; ++k) tr.Ek[k - 1].push_back(regime_energy(sp, u, eps, sigma, k));
        }
        const double um = sup_norm(u.U);
        tr.min_W.push_back(1.0 - eps * eps * um * um);
        if (tr.min_W.back() < 0.5) tr.w_bound_held = false;
        if (cfg.frame_stride > 0 && sample % cfg.frame_stride == 0) {
            tr.t.push_back(t);
            tr.frames.push_back(u);
        }
        ++sample;
        if (!std::isfinite(tr.energy.back())) throw NumericalError("regimes: non-finite energy");
        if (guard && eps * um >= 1.0 - cfg.guard_delta) {
            tr.info.status = RunStatus::GuardAborted;
            tr.info.message = "regime breakdown: max|eps U| = " + std::to_string(eps * um);
            return false;
        }
        return true;
    };
    auto E = [&](const SgState& s, double tau) { return sg_linear_propagate(sp, s, eps, tau); };
    auto axpy = [](SgState& y, const SgState& x, double a, const SgState& k) { sg_axpy(y, x, a, k); };
    bool ok = record();
    double s0t = 0.0;
    for (std::size_t seg = 0; ok && seg < tg.ends.size(); ++seg) {
        const double dt = (tg.ends[seg] - s0t) / tg.steps[seg];
        tr.info.dt = std::max(tr.info.dt, dt);
        for (long k = 0; k < tg.steps[seg]; ++k) {
            u = lawson_rk4(u, dt, E, nonlin, axpy);
            if (++tr.info.steps > cfg.max_steps) throw NumericalError("regimes: max_steps exceeded");
        }
        s0t = tg.ends[seg];
        t = s0t;
        ok = record();
    }
    tr.info.t_end = t;
    tr.final_state = u;
    return tr;
}

} // namespace detail

inline SgTrajectory evolve_hll_eps(const SgState& s, const RegimeConfig& rc, double T, const RegimeSolverConfig& cfg) {
    rc.validate(true, true);
    Spectral1D sp(s.grid);
    auto N = [&](const SgState& x) { return hll_eps_nonlinear(sp, x, rc.eps, rc.sigma); };
    return detail::run_sg_family(s, rc.eps, rc.sigma, T, cfg, N, true);
}

// Phi_tt - Phi_xx + (sigma/2) sin 2Phi = 0 in first-order form (U = Phi_t).
inline SgTrajectory evolve_sine_gordon(const RealField& phi0, const RealField& phi1, const Grid1D& g, double sigma,
                                       double T, const RegimeSolverConfig& cfg) {
    require(sigma >= 0.0, "evolve_sine_gordon: sigma must be nonnegative");
    auto N = [&](const SgState& x) { return sgs_nonlinear(x, sigma); };
    return detail::run_sg_family(SgState{g, phi1, phi0}, 0.0, sigma, T, cfg, N, false);
}

// Exact spectral solution of U_t = Phi_xx, Phi_t = U.
inline SgState evolve_free_wave(const SgState& s, double T) {
    require(s.grid.periodic(), "evolve_free_wave: periodic grid required");
    Spectral1D sp(s.grid);
    return detail::sg_linear_propagate(sp, s, 0.0, T);
}

inline double free_wave_energy(const SgState& s) {
    Spectral1D sp(s.grid);
    return regime_energy(sp, s, 0.0, 0.0, 1);
}

// Small-amplitude Sine-Gordon wave at mode j; returns the measured frequency
// of Z = omega Phi_hat + i U_hat, which rotates as e^{-i omega t}.
inline double measured_sg_frequency(int j, int n, double L, double sigma, double amplitude = 1e-6, double periods = 2.0) {
    const Grid1D g(0.0, L, n, Boundary::Periodic);
    const double k = 2.0 * pi * j / L, om = std::sqrt(k * k + sigma);
    RealField p0(n), p1(n, 0.0);
    for (int i = 0; i < n; ++i) p0[i] = amplitude * std::cos(k * g.x(i));
    RegimeSolverConfig cfg;
    const double T = periods * 2.0 * pi / om;
    cfg.sample_dt = T / (16.0 * periods);
    cfg.energy_k = 0;
    auto tr = evolve_sine_gordon(p0, p1, g, sigma, T, cfg);
    Spectral1D sp(g);
    double phase = 0.0, prev = 0.0;
    for (std::size_t s = 0; s < tr.frames.size(); ++s) {
        const cplx z = om * sp.forward(tr.frames[s].Phi)[j] + cplx(0, 1) * sp.forward(tr.frames[s].U)[j];
        const double a = std::arg(z);
        if (s > 0) phase += std::remainder(a - prev, 2.0 * pi);
        prev = a;
    }
    return -phase / (tr.t.back() - tr.t.front());
}

// Static kink 2 arctan(e^{sqrt(sigma) x}) and its residual Phi_xx - (sigma/2) sin 2Phi,
// second-order differences.
inline double sg_kink(double sigma, double x) { return 2.0 * std::atan(std::exp(std::sqrt(sigma) * x)); }

inline double sg_kink_residual(double sigma, const Grid1D& g) {
    const double h = g.h();
    double r = 0.0;
    for (int i = 1; i + 1 < g.n; ++i) {
        const double f0 = sg_kink(sigma, g.x(i - 1)), f1 = sg_kink(sigma, g.x(i)), f2 = sg_kink(sigma, g.x(i + 1));
        r = std::max(r, std::abs((f2 - 2.0 * f1 + f0) / (h * h) - 0.5 * sigma * std::sin(2.0 * f1)));
    }
    return r;
}

// ---------------------------------------------------------------------------
// NLS_eps and cubic Schrodinger.

namespace detail {

inline void c_axpy(ComplexField& y, const ComplexField& x, double a, const ComplexField& k) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + a * k[i];
}

inline ComplexField schrodinger_propagate(Spectral1D& sp, const ComplexField& u, double tau) {
    if (tau == 0.0) return u;
    return sp.apply(u, [tau](double k) { return std::exp(cplx(0.0, -k * k * tau)); });
}

} // namespace detail

// Remainder of NLS_eps after i Psi_xx:
// i[(rho - 1) Psi_xx + |Psi|^2 Psi/(1 + rho) + eps (Re(Psi conj Psi_x)/rho)_x Psi], rho = sqrt(1 - eps|Psi|^2).
inline ComplexField nls_eps_nonlinear(Spectral1D& sp, const ComplexField& psi, double eps) {
    const std::size_t n = psi.size();
    ComplexField px = sp.derivative(psi, 1), pxx = sp.derivative(psi, 2);
    RealField q(n), rho(n);
    for (std::size_t i = 0; i < n; ++i) {
        rho[i] = std::sqrt(1.0 - eps * std::norm(psi[i]));
        q[i] = std::real(psi[i] * std::conj(px[i])) / rho[i];
    }
    RealField qx = sp.derivative(q, 1);
    ComplexField out(n);
    const cplx I(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = I * ((rho[i] - 1.0) * pxx[i] + (std::norm(psi[i]) * psi[i]) / (1.0 + rho[i]) + eps * qx[i] * psi[i]);
    return out;
}

inline ComplexField cs_nonlinear(const ComplexField& psi) {
    ComplexField out(psi.size());
    const cplx I(0.0, 1.0);
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] = I * ((std::norm(psi[i]) * psi[i]) * 0.5);
    return out;
}

inline ComplexField nls_eps_rhs(Spectral1D& sp, const ComplexField& psi, double eps) {
    ComplexField l = sp.derivative(psi, 2), nl = nls_eps_nonlinear(sp, psi, eps);
    for (std::size_t i = 0; i < psi.size(); ++i) l[i] = cplx(0.0, 1.0) * l[i] + nl[i];
    return l;
}

inline ComplexField cs_rhs(Spectral1D& sp, const ComplexField& psi) {
    ComplexField l = sp.derivative(psi, 2), nl = cs_nonlinear(psi);
    for (std::size_t i = 0; i < psi.size(); ++i) l[i] = cplx(0.0, 1.0) * l[i] + nl[i];
    return l;
}

// frak E_eps = 1/2 int |Psi|^2 + eps |Psi_x|^2 + eps^2 Re(Psi conj Psi_x)^2 / (1 - eps |Psi|^2)
inline double nls_eps_energy(Spectral1D& sp, const ComplexField& psi, double eps) {
    ComplexField px = sp.derivative(psi, 1);
    RealField e(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double q = std::real(psi[i] * std::conj(px[i]));
        e[i] = 0.5 * (std::norm(psi[i]) + eps * std::norm(px[i]) + eps * eps * q * q / (1.0 - eps * std::norm(psi[i])));
    }
    return trapezoid(sp.grid(), e);
}

// int |Psi_x|^2 - |Psi|^4 / 4
inline double cs_hamiltonian(Spectral1D& sp, const ComplexField& psi) {
    ComplexField px = sp.derivative(psi, 1);
    RealField e(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) e[i] = std::norm(px[i]) - 0.25 * sqr(std::norm(psi[i]));
    return trapezoid(sp.grid(), e);
}

inline double l2_mass(const Grid1D& g, const ComplexField& psi) {
    RealField e(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) e[i] = std::norm(psi[i]);
    return trapezoid(g, e);
}

// High-order NLS_eps energy, with Psi_t from the equation:
// |Psi|^2_{H^{k-2}} + |eps Psi_t - i Psi|^2 + eps^2 |Psi_xx|^2
//   + eps (|d_t rho|^2 + |rho_xx|^2 + 2 |Psi_x|^2), all in homogeneous H^{k-2}.
inline double nls_high_energy(const ComplexField& psi, const Grid1D& g, double eps, int k) {
    require(k >= 2, "nls_high_energy: k >= 2 required");
    require(g.periodic(), "nls_high_energy: periodic grid required");
    Spectral1D sp(g);
    const std::size_t n = psi.size();
    ComplexField pt = nls_eps_rhs(sp, psi, eps);
    ComplexField a(n), pxx = sp.derivative(psi, 2), px = sp.derivative(psi, 1);
    RealField rho(n), rhot(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = eps * pt[i] - cplx(0.0, 1.0) * psi[i];
        rho[i] = std::sqrt(1.0 - eps * std::norm(psi[i]));
        rhot[i] = -eps * std::real(std::conj(psi[i]) * pt[i]) / rho[i];
    }
    RealField rxx = sp.derivative(rho, 2);
    const double s = k - 2;
    auto nn = [&](const ComplexField& f) { return sqr(sp.sobolev_norm(f, s, true)); };
    auto nr = [&](const RealField& f) { return sqr(sp.sobolev_norm(f, s, true)); };
    return nn(psi) + nn(a) + eps * eps * nn(pxx) + eps * (nr(rhot) + nr(rxx) + 2.0 * nn(px));
}

// R_eps with i Psi_t + Psi_xx + |Psi|^2 Psi / 2 = eps R_eps.
inline ComplexField nls_consistency_residual(const ComplexField& psi, const Grid1D& g, double eps) {
    Spectral1D sp(g);
    const std::size_t n = psi.size();
    ComplexField px = sp.derivative(psi, 1), pxx = sp.derivative(psi, 2);
    RealField q(n), rho(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(1.0 - eps * std::norm(psi[i]) > 0.0, "nls_consistency_residual: 1 - eps|Psi|^2 must stay positive");
        rho[i] = std::sqrt(1.0 - eps * std::norm(psi[i]));
        q[i] = std::real(psi[i] * std::conj(px[i])) / rho[i];
    }
    RealField qx = sp.derivative(q, 1);
    ComplexField R(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::norm(psi[i]), d = 1.0 + rho[i];
        R[i] = a / d * pxx[i] - a * a / (2.0 * d * d) * psi[i] - qx[i] * psi[i];
    }
    return R;
}

enum class CsScheme { SplitStep4, Lawson };

namespace detail {

template <class Step, class Diag>
NlsTrajectory run_nls(const ComplexField& psi0, const Grid1D& g, double T, double dt_max, const RegimeSolverConfig& cfg,
                      Step&& step, Diag&& diag, double eps) {
    auto tg = time_grid(T, cfg.sample_dt, dt_max);
    NlsTrajectory tr;
    tr.grid = g;
    ComplexField u = psi0;
    double t = 0.0;
    int sample = 0;
    auto record = [&]() -> bool {
        tr.diag_t.push_back(t);
        tr.energy.push_back(diag(u));
        tr.mass.push_back(l2_mass(g, u));
        if (eps > 0.0 && cfg.energy_k >= 2 && g.periodic()) {
            tr.high_energy.push_back(nls_high_energy(u, g, eps, cfg.energy_k));
            const std::size_t m = tr.high_energy.size();
            if (m >= 3) {
                const double a = tr.high_energy[m - 3], b = tr.high_energy[m - 2], c = tr.high_energy[m - 1];
                if ((b - a) * (c - b) < 0.0) tr.high_energy_monotone = false;
            }
        }
        if (cfg.frame_stride > 0 && sample % cfg.frame_stride == 0) {
            tr.t.push_back(t);
            tr.frames.push_back(u);
        }
        ++sample;
        const double um = sup_norm(u);
        if (!std::isfinite(um)) throw NumericalError("regimes: non-finite NLS state");
        if (eps > 0.0 && std::sqrt(eps) * um >= 1.0 - cfg.guard_delta) {
            tr.info.status = RunStatus::GuardAborted;
            tr.info.message = "constraint guard: sqrt(eps)|Psi|_inf = " + std::to_string(std::sqrt(eps) * um);
            return false;
        }
        return true;
    };
    bool ok = record();
    double s0 = 0.0;
    for (std::size_t seg = 0; ok && seg < tg.ends.size(); ++seg) {
        const double dt = (tg.ends[seg] - s0) / tg.steps[seg];
        tr.info.dt = std::max(tr.info.dt, dt);
        for (long k = 0; k < tg.steps[seg]; ++k) {
            u = step(u, dt);
            if (++tr.info.steps > cfg.max_steps) throw NumericalError("regimes: max_steps exceeded");
        }
        s0 = tg.ends[seg];
        t = s0;
        ok = record();
    }
    tr.info.t_end = t;
    tr.final_state = u;
    return tr;
}

inline double nls_auto_dt(const RegimeSolverConfig& cfg, Spectral1D& sp, const ComplexField& psi, double eps, double T) {
    double kmax = 0.0;
    for (double k : sp.wavenumbers()) kmax = std::max(kmax, std::abs(k));
    const double a2 = sqr(sup_norm(psi));
    const double stiff = 1.5 * eps * a2 * kmax * kmax / std::max(1e-12, 1.0 - eps * a2);
    const double bound = std::min(stiff > 0.0 ? 2.5 / stiff : std::numeric_limits<double>::infinity(),
                                  a2 > 0.0 ? 2.5 / (0.5 * a2) : std::numeric_limits<double>::infinity());
    const double dt = cfg.dt > 0.0 ? cfg.dt : std::min(cfg.dt_cap, 0.5 * bound);
    if (dt > bound) throw DomainError("regimes: dt = " + std::to_string(dt) + " exceeds the explicit-part bound " +
                                      std::to_string(bound));
    return std::min(dt, std::max(T, 1e-300));
}

} // namespace detail

inline NlsTrajectory evolve_nls_eps(const ComplexField& psi0, const Grid1D& g, double eps, double T,
                                    const RegimeSolverConfig& cfg) {
    require(eps >= 0.0 && eps < 1.0, "evolve_nls_eps: eps must lie in [0,1)");
    require(static_cast<int>(psi0.size()) == g.n, "evolve_nls_eps: size mismatch");
    require(std::sqrt(eps) * sup_norm(psi0) < 1.0 - cfg.guard_delta, "evolve_nls_eps: sqrt(eps)|Psi0|_inf < 1 violated");
    Spectral1D sp(g);
    const double dt = detail::nls_auto_dt(cfg, sp, psi0, eps, T);
    auto E = [&](const ComplexField& u, double tau) { return detail::schrodinger_propagate(sp, u, tau); };
    auto N = [&](const ComplexField& u) { return nls_eps_nonlinear(sp, u, eps); };
    auto step = [&](const ComplexField& u, double h) { return detail::lawson_rk4(u, h, E, N, detail::c_axpy); };
    auto diag = [&](const ComplexField& u) { return nls_eps_energy(sp, u, eps); };
    return detail::run_nls(psi0, g, T, dt, cfg, step, diag, eps);
}

// i Psi_t + Psi_xx + |Psi|^2 Psi / 2 = 0. SplitStep4: Yoshida composition of
// Strang steps (exact linear flow, exact phase rotation); Lawson: the NLS_eps
// integrator at eps = 0.
inline NlsTrajectory evolve_cubic_nls(const ComplexField& psi0, const Grid1D& g, double T, const RegimeSolverConfig& cfg,
                                      CsScheme scheme = CsScheme::SplitStep4) {
    require(static_cast<int>(psi0.size()) == g.n, "evolve_cubic_nls: size mismatch");
    Spectral1D sp(g);
    const double dt = detail::nls_auto_dt(cfg, sp, psi0, 0.0, T);
    auto diag = [&](const ComplexField& u) { return cs_hamiltonian(sp, u); };
    if (scheme == CsScheme::Lawson) {
        auto E = [&](const ComplexField& u, double tau) { return detail::schrodinger_propagate(sp, u, tau); };
        auto N = [&](const ComplexField& u) { return cs_nonlinear(u); };
        auto step = [&](const ComplexField& u, double h) { return detail::lawson_rk4(u, h, E, N, detail::c_axpy); };
        return detail::run_nls(psi0, g, T, dt, cfg, step, diag, 0.0);
    }
    const double w1 = 1.0 / (2.0 - std::cbrt(2.0)), w0 = 1.0 - 2.0 * w1;
    auto strang = [&](ComplexField u, double h) {
        u = detail::schrodinger_propagate(sp, u, 0.5 * h);
        for (auto& z : u) z *= std::exp(cplx(0.0, 0.5 * std::norm(z) * h));
        return detail::schrodinger_propagate(sp, u, 0.5 * h);
    };
    auto step = [&](const ComplexField& u, double h) { return strang(strang(strang(u, w1 * h), w0 * h), w1 * h); };
    return detail::run_nls(psi0, g, T, dt, cfg, step, diag, 0.0);
}

inline ComplexField cs_soliton(const Grid1D& g, double eta, double t) {
    ComplexField out(g.n);
    for (int i = 0; i < g.n; ++i) out[i] = 2.0 * eta * sech(eta * g.x(i)) * std::exp(cplx(0.0, eta * eta * t));
    return out;
}

// ---------------------------------------------------------------------------
// Norm bundles and rate studies.

inline RealField spectral_gradient(Spectral1D& sp, const RealField& f) { return sp.derivative(f, 1); }

// K_eps = |U0|_{H^k} + eps |U0_x|_{H^k} + |Phi0_x|_{H^k} + |sin Phi0|_{H^k}
inline double compute_K_eps(const RealField& U0, const RealField& Phi0, const Grid1D& g, double eps, int k) {
    require(g.periodic(), "compute_K_eps: periodic grid required");
    Spectral1D sp(g);
    RealField sn(Phi0.size());
    for (std::size_t i = 0; i < sn.size(); ++i) sn[i] = std::sin(Phi0[i]);
    auto [ux, px] = sp.derivative2(U0, Phi0, 1);
    return sp.sobolev_norm(U0, k, false) + eps * sp.sobolev_norm(ux, k, false) + sp.sobolev_norm(px, k, false) +
           sp.sobolev_norm(sn, k, false);
}

// kappa_eps = K_eps + |U0|_{H^k} + |Phi0_x|_{H^k} + |sin Phi0|_{H^k} for the limit data.
inline double compute_kappa_eps(double K_eps, const RealField& U0, const RealField& Phi0, const Grid1D& g, int k) {
    return K_eps + compute_K_eps(U0, Phi0, g, 0.0, k);
}

// S_eps = |Psi0|_{H^k} + |Psi0_eps|_{H^k} + sqrt(eps)|Psi0_eps,x|_{dot H^k} + eps |Psi0_eps,xx|_{dot H^k}
inline double compute_S_eps(const ComplexField& psi0, const ComplexField& psi0_eps, const Grid1D& g, double eps, int k) {
    require(g.periodic(), "compute_S_eps: periodic grid required");
    Spectral1D sp(g);
    return sp.sobolev_norm(psi0, k, false) + sp.sobolev_norm(psi0_eps, k, false) +
           std::sqrt(eps) * sp.sobolev_norm(sp.derivative(psi0_eps, 1), k, true) +
           eps * sp.sobolev_norm(sp.derivative(psi0_eps, 2), k, true);
}

// Named data families on periodic grids.
struct SgData {
    std::string family = "gaussian";
    double amplitude = 0.5;
    int n = 256;
    double half_width = 20.0; // domain [-L, L)

    // Broad data widen with 1/sigma so that sigma^{1/2}|sin Phi0|_{L^2} stays fixed.
    SgState make(double sigma) const {
        if (family == "gaussian") {
            Grid1D g(-half_width, half_width, n, Boundary::Periodic);
            SgState s{g, RealField(n, 0.0), RealField(n)};
            for (int i = 0; i < n; ++i) s.Phi[i] = amplitude * std::exp(-sqr(g.x(i)));
            return s;
        }
        if (family == "broad") {
            require(sigma > 0.0, "SgData: the broad family needs sigma > 0");
            const double W = 1.0 / sigma;
            Grid1D g(-8.0 * W, 8.0 * W, n, Boundary::Periodic);
            SgState s{g, RealField(n, 0.0), RealField(n)};
            for (int i = 0; i < n; ++i) s.Phi[i] = amplitude * std::exp(-sqr(g.x(i) / W));
            return s;
        }
        throw DomainError("SgData: unknown family '" + family + "'");
    }
};

struct NlsData {
    std::string family = "gaussian";
    double amplitude = 1.0;
    int n = 256;
    double half_width = 20.0;

    std::pair<Grid1D, ComplexField> make() const {
        require(family == "gaussian", "NlsData: unknown family '" + family + "'");
        Grid1D g(-half_width, half_width, n, Boundary::Periodic);
        ComplexField p(n);
        for (int i = 0; i < n; ++i) p[i] = amplitude * std::exp(-sqr(g.x(i)));
        return {g, p};
    }
};

struct ConvergenceReport {
    std::string study;
    std::string norm;
    std::vector<double> param; // eps or sigma, strictly decreasing
    std::vector<double> error;
    std::vector<double> bound_quantity; // K_eps, K_{eps,sigma} or S_eps
    std::vector<double> kappa;          // Sine-Gordon study only
    std::vector<std::string> notes;
    SlopeFit fit;
    double slope = 0.0;
};

namespace detail {

inline void finish_report(ConvergenceReport& r) {
    for (std::size_t i = 1; i < r.param.size(); ++i)
        require(r.param[i] < r.param[i - 1], "convergence study: parameters must be strictly decreasing");
    std::vector<double> p, e;
    for (std::size_t i = 0; i < r.param.size(); ++i)
        if (r.error[i] > 0.0 && std::isfinite(r.error[i])) {
            p.push_back(r.param[i]);
            e.push_back(r.error[i]);
        }
    if (p.size() >= 2) {
        r.fit = fit_loglog_slope(p, e);
        r.slope = r.fit.fit.slope;
        if (r.fit.dropped_largest) r.notes.push_back("largest parameter dropped from the slope fit");
    } else {
        r.slope = std::numeric_limits<double>::quiet_NaN();
        r.notes.push_back("fewer than two usable points");
    }
}

inline double l2(const Grid1D& g, const RealField& f) {
    RealField e(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) e[i] = f[i] * f[i];
    return std::sqrt(trapezoid(g, e));
}

} // namespace detail

// Error between H_eps and SGS at t* with identical data. Norms:
//   "L2"   |Phi_eps - Phi|_{L^2}
//   "dsin" |U_eps - U|_{L^2} + |sin(Phi_eps - Phi)|_{L^2} + |Phi_eps,x - Phi_x|_{L^2}
//   "Hk-3" |U_eps - U|_{H^{k-3}} + |(Phi_eps - Phi)_x|_{H^{k-3}} + |sin(Phi_eps - Phi)|_{H^{k-3}}
inline double sg_error(const SgState& a, const SgState& b, const std::string& norm, int k) {
    const auto& g = a.grid;
    Spectral1D sp(g);
    const std::size_t n = a.U.size();
    RealField du(n), dp(n), sd(n);
    for (std::size_t i = 0; i < n; ++i) {
        du[i] = a.U[i] - b.U[i];
        dp[i] = a.Phi[i] - b.Phi[i];
        sd[i] = std::sin(dp[i]);
    }
    if (norm == "L2") return detail::l2(g, dp);
    RealField dpx = sp.derivative(dp, 1);
    if (norm == "dsin") return detail::l2(g, du) + detail::l2(g, sd) + detail::l2(g, dpx);
    if (norm == "Hk-3") {
        const double s = std::max(0, k - 3);
        return sp.sobolev_norm(du, s, false) + sp.sobolev_norm(dpx, s, false) + sp.sobolev_norm(sd, s, false);
    }
    throw DomainError("sg_error: unknown norm '" + norm + "'");
}

inline ConvergenceReport sg_convergence_study(const SgData& data, const std::vector<double>& eps_list, double sigma,
                                              double t_star, const std::string& norm = "L2", int k = 3,
                                              const RegimeSolverConfig& cfg = {}) {
    require(sigma > 0.0, "sg_convergence_study: sigma must be positive");
    ConvergenceReport r;
    r.study = "sine-gordon";
    r.norm = norm;
    const SgState s0 = data.make(sigma);
    RegimeSolverConfig c = cfg;
    c.frame_stride = 0;
    c.energy_k = 0;
    auto limit = evolve_sine_gordon(s0.Phi, s0.U, s0.grid, sigma, t_star, c);
    for (double eps : eps_list) {
        RegimeConfig rc{eps, sigma, k};
        rc.validate();
        r.param.push_back(eps);
        const double K = compute_K_eps(s0.U, s0.Phi, s0.grid, eps, k);
        r.bound_quantity.push_back(K);
        r.kappa.push_back(compute_kappa_eps(K, s0.U, s0.Phi, s0.grid, k));
        auto tr = evolve_hll_eps(s0, rc, t_star, c);
        if (tr.info.status != RunStatus::Completed) {
            r.error.push_back(std::numeric_limits<double>::quiet_NaN());
            r.notes.push_back("eps = " + std::to_string(eps) + " excluded: " + tr.info.message);
            continue;
        }
        r.error.push_back(sg_error(tr.final_state, limit.final_state, norm, k));
    }
    detail::finish_report(r);
    return r;
}

// Error |Phi_eps(t) - Phi(t)| at several times for one eps (envelope audit).
inline std::vector<double> sg_error_history(const SgData& data, double eps, double sigma, const std::vector<double>& times,
                                            const std::string& norm = "L2", int k = 3) {
    const SgState s0 = data.make(sigma);
    std::vector<double> out;
    RegimeSolverConfig c;
    c.frame_stride = 0;
    c.energy_k = 0;
    for (double t : times) {
        if (t == 0.0) {
            out.push_back(sg_error(s0, s0, norm, k));
            continue;
        }
        auto a = evolve_hll_eps(s0, RegimeConfig{eps, sigma, k}, t, c);
        auto b = evolve_sine_gordon(s0.Phi, s0.U, s0.grid, sigma, t, c);
        out.push_back(sg_error(a.final_state, b.final_state, norm, k));
    }
    return out;
}

// |U_a - U_b|_{H^{m-1}} + |Phi_a - Phi_b|_{H^m}
inline double wave_error(const SgState& a, const SgState& b, int m) {
    Spectral1D sp(a.grid);
    const std::size_t n = a.U.size();
    RealField du(n), dp(n);
    for (std::size_t i = 0; i < n; ++i) {
        du[i] = a.U[i] - b.U[i];
        dp[i] = a.Phi[i] - b.Phi[i];
    }
    return sp.sobolev_norm(du, m - 1, false) + sp.sobolev_norm(dp, m, false);
}

inline double compute_K_eps_sigma(const SgState& s, double eps, double sigma, int k) {
    Spectral1D sp(s.grid);
    RealField sn(s.Phi.size());
    for (std::size_t i = 0; i < sn.size(); ++i) sn[i] = std::sin(s.Phi[i]);
    auto [ux, px] = sp.derivative2(s.U, s.Phi, 1);
    return sp.sobolev_norm(s.U, k, false) + eps * sp.sobolev_norm(ux, k, false) + sp.sobolev_norm(px, k, false) +
           std::sqrt(sigma) * sp.sobolev_norm(sn, 0, false);
}

// H_{eps,sigma} against the free wave with data from the family at each sigma.
inline ConvergenceReport wave_sigma_study(const SgData& data, const std::vector<double>& sigma_list, double eps,
                                          double t_star, int m = 0, int k = 3, const RegimeSolverConfig& cfg = {}) {
    ConvergenceReport r;
    r.study = "wave-sigma";
    r.norm = "H^{m-1} x H^m, m = " + std::to_string(m);
    RegimeSolverConfig c = cfg;
    c.frame_stride = 0;
    c.energy_k = 0;
    for (double sigma : sigma_list) {
        RegimeConfig rc{eps, sigma, k};
        rc.validate(true, false);
        const SgState s0 = data.make(sigma);
        r.param.push_back(sigma);
        r.bound_quantity.push_back(compute_K_eps_sigma(s0, eps, sigma, k));
        auto tr = evolve_hll_eps(s0, rc, t_star, c);
        if (tr.info.status != RunStatus::Completed) {
            r.error.push_back(std::numeric_limits<double>::quiet_NaN());
            r.notes.push_back("sigma = " + std::to_string(sigma) + " excluded: " + tr.info.message);
            continue;
        }
        r.error.push_back(wave_error(tr.final_state, evolve_free_wave(s0, t_star), m));
    }
    detail::finish_report(r);
    return r;
}

// sigma = 0 exactly: H_eps against the free wave, rate in eps.
inline ConvergenceReport wave_eps_study(const SgData& data, const std::vector<double>& eps_list, double t_star, int m = 0,
                                        int k = 3, const RegimeSolverConfig& cfg = {}) {
    ConvergenceReport r;
    r.study = "wave-eps";
    r.norm = "H^{m-1} x H^m, m = " + std::to_string(m);
    const SgState s0 = data.make(1.0);
    const SgState limit = evolve_free_wave(s0, t_star);
    RegimeSolverConfig c = cfg;
    c.frame_stride = 0;
    c.energy_k = 0;
    for (double eps : eps_list) {
        RegimeConfig rc{eps, 0.0, k};
        rc.validate(false, true);
        r.param.push_back(eps);
        r.bound_quantity.push_back(compute_K_eps_sigma(s0, eps, 0.0, k));
        auto tr = evolve_hll_eps(s0, rc, t_star, c);
        r.error.push_back(tr.info.status == RunStatus::Completed ? wave_error(tr.final_state, limit, m)
                                                                  : std::numeric_limits<double>::quiet_NaN());
    }
    detail::finish_report(r);
    return r;
}

struct WaveRegimeReport {
    ConvergenceReport in_eps;   // sigma = 0
    ConvergenceReport in_sigma; // eps fixed and small
};

inline WaveRegimeReport wave_regime_study(const SgData& eps_data, const std::vector<double>& eps_list,
                                          const SgData& sigma_data, const std::vector<double>& sigma_list,
                                          double eps_small, double t_star, int m = 0, int k = 3,
                                          const RegimeSolverConfig& cfg = {}) {
    return {wave_eps_study(eps_data, eps_list, t_star, m, k, cfg),
            wave_sigma_study(sigma_data, sigma_list, eps_small, t_star, m, k, cfg)};
}

// NLS_eps against CS with Psi0_eps = Psi0, error in H^{k-2}. The condition
// A sqrt(eps) S_eps <= 1 is audited with the supplied A (the analytic constant
// is not numeric; A = 1 by default) and reported, not enforced.
inline ConvergenceReport cls_convergence_study(const NlsData& data, const std::vector<double>& eps_list, double t_star,
                                               int k = 3, double A = 1.0, const RegimeSolverConfig& cfg = {}) {
    require(k >= 2, "cls_convergence_study: k >= 2 required");
    ConvergenceReport r;
    r.study = "cubic-nls";
    r.norm = "H^" + std::to_string(k - 2);
    auto [g, psi0] = data.make();
    RegimeSolverConfig c = cfg;
    c.frame_stride = 0;
    auto limit = evolve_cubic_nls(psi0, g, t_star, c, CsScheme::Lawson);
    Spectral1D sp(g);
    for (double eps : eps_list) {
        require(eps > 0.0 && eps < 1.0, "cls_convergence_study: eps must lie in (0,1)");
        r.param.push_back(eps);
        const double S = compute_S_eps(psi0, psi0, g, eps, k);
        r.bound_quantity.push_back(S);
        if (A * std::sqrt(eps) * S > 1.0)
            r.notes.push_back("eps = " + std::to_string(eps) + ": A sqrt(eps) S_eps = " +
                              std::to_string(A * std::sqrt(eps) * S) + " > 1");
        auto tr = evolve_nls_eps(psi0, g, eps, t_star, c);
        if (tr.info.status != RunStatus::Completed) {
            r.error.push_back(std::numeric_limits<double>::quiet_NaN());
            r.notes.push_back("eps = " + std::to_string(eps) + " excluded: " + tr.info.message);
            continue;
        }
        ComplexField d(g.n);
        for (int i = 0; i < g.n; ++i) d[i] = tr.final_state[i] - limit.final_state[i];
        r.error.push_back(sp.sobolev_norm(d, k - 2, false));
    }
    detail::finish_report(r);
    return r;
}

} // namespace llg
