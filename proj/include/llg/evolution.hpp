#pragma once

#include "llg/frenet_profiles.hpp"
#include "llg/solitons.hpp"
#include "llg/spectral.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace llg {

enum class Scheme { RK4FD4, SpectralRK4, MidpointImplicit };
enum class RunStatus { Completed, GuardAborted };

inline std::string to_string(Scheme s) {
    switch (s) {
    case Scheme::RK4FD4: return "rk4-fd4";
    case Scheme::SpectralRK4: return "spectral-rk4";
    case Scheme::MidpointImplicit: return "midpoint-implicit";
    }
    return "?";
}
inline std::string to_string(RunStatus s) { return s == RunStatus::Completed ? "completed" : "guard-aborted"; }

struct SolverConfig {
    Scheme scheme = Scheme::RK4FD4;
    double dt = 0.0;         // 0: cfl * h^2
    double cfl = 0.0;        // 0: 0.8 of the scheme's stability bound
    double sample_dt = 0.0;  // diagnostics / snapshot spacing; 0: start and end only
    int frame_stride = 1;    // keep every frame_stride-th sample as a snapshot (0: none)
    long max_steps = 50'000'000;
    double t0 = 0.0;         // absolute time of the initial data (self-similar runs start at 1)
    double blowup_ceiling = 50.0; // sqrt(t) |m_x|_inf
    double vacuum_delta = 1e-3;   // hydro: abort at max|v| >= 1 - delta
    double pole_ceiling = 1e6;    // DNLS: abort at max|u| >= ceiling
    int pseudo_energy_k = 0;      // monitor E_2..E_k (periodic spin runs only)
};

// Stability constants for dt <= C h^2: RK4 reaches 2.8 on the imaginary axis,
// the FD4 Laplacian symbol peaks at 16/(3h^2), the spectral one at (pi/h)^2.
inline double explicit_cfl_limit(Scheme s) {
    switch (s) {
    case Scheme::RK4FD4: return 0.5;
    case Scheme::SpectralRK4: return 0.28;
    case Scheme::MidpointImplicit: return 0.35; // fixed-point contraction
    }
    return 0.0;
}

struct DiagnosticsSeries {
    std::vector<double> t;
    std::vector<double> E;
    std::vector<double> P;
    std::vector<double> sqrt_t_grad;
    std::vector<std::vector<double>> Ek; // Ek[j] holds E_{j+2}
    std::vector<double> sphere_defect;
};

struct RunInfo {
    RunStatus status = RunStatus::Completed;
    std::string message;
    long steps = 0;
    double dt = 0.0;
    double t_end = 0.0;
};

struct SpinTrajectory {
    std::vector<double> t;
    std::vector<SpinField> frames;
    DiagnosticsSeries diag;
    RunInfo info;
    SpinField final_state;
};

struct HydroTrajectory {
    std::vector<double> t;
    std::vector<HydroState> frames;
    DiagnosticsSeries diag;
    RunInfo info;
    HydroState final_state;
};

struct ComplexTrajectory {
    Grid1D grid;
    std::vector<double> t;
    std::vector<ComplexField> frames;
    RunInfo info;
    ComplexField final_state;
};

namespace detail {

// Segment boundaries 0 = s_0 < ... < s_K = T of width sample_dt, each split
// into equal steps no longer than dt_max.
struct TimeGrid {
    std::vector<double> ends;
    std::vector<long> steps;
};

inline TimeGrid time_grid(double T, double sample_dt, double dt_max) {
    require(T >= 0.0, "evolve: T must be nonnegative");
    require(dt_max > 0.0, "evolve: dt must be positive");
    TimeGrid g;
    const double w = sample_dt > 0.0 ? sample_dt : std::max(T, 1e-300);
    double s = 0.0;
    while (s < T - 1e-12 * std::max(1.0, T)) {
        const double e = std::min(T, s + w);
        const double seg = e - s;
        g.ends.push_back(e);
        g.steps.push_back(std::max<long>(1, static_cast<long>(std::ceil(seg / dt_max - 1e-9))));
        s = e;
    }
    return g;
}

inline double resolve_dt(const SolverConfig& cfg, const Grid1D& g) {
    const double h2 = g.h() * g.h();
    const double limit = explicit_cfl_limit(cfg.scheme) * h2;
    const double dt = cfg.dt > 0.0 ? cfg.dt : (cfg.cfl > 0.0 ? cfg.cfl : 0.8 * explicit_cfl_limit(cfg.scheme)) * h2;
    if (dt > limit * (1 + 1e-12))
        throw DomainError("evolve: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(limit) + " for " + to_string(cfg.scheme));
    return dt;
}

using Field3 = std::vector<Vec3>;

// Spatial calculus shared by the spin solvers: FD4 stencils or spectral.
class SpinOps {
public:
    SpinOps(const Grid1D& g, bool spectral) : g_(g), spectral_(spectral) {
        if (spectral_) sp_ = std::make_unique<Spectral1D>(g);
    }
    const Grid1D& grid() const { return g_; }
    bool spectral() const { return spectral_; }
    Spectral1D* spectral_ops() { return sp_.get(); }

    Field3 d(const Field3& m, int order) {
        const int n = g_.n;
        Field3 out(n);
        if (!spectral_) {
            RealField c(n);
            for (int k = 0; k < 3; ++k) {
                for (int i = 0; i < n; ++i) c[i] = m[i][k];
                RealField dc = order == 1 ? fd::d1(g_, c, 4) : fd::d2(g_, c, 4);
                for (int i = 0; i < n; ++i) out[i][k] = dc[i];
            }
            return out;
        }
        RealField a(n), b(n), c(n);
        for (int i = 0; i < n; ++i) {
            a[i] = m[i][0];
            b[i] = m[i][1];
            c[i] = m[i][2];
        }
        auto [da, db] = sp_->derivative2(a, b, order);
        RealField dc = sp_->derivative(c, order);
        for (int i = 0; i < n; ++i) out[i] = Vec3(da[i], db[i], dc[i]);
        return out;
    }

    // Energy consistent with the discrete Laplacian, so that the semi-discrete
    // conservative flow preserves it exactly.
    double gradient_energy(const Field3& m) {
        const double h = g_.h();
        if (spectral_) {
            Field3 l = d(m, 2);
            double acc = 0.0;
            for (int i = 0; i < g_.n; ++i) acc -= m[i].dot(l[i]);
            return 0.5 * acc * h;
        }
        auto w = fd::d2_weights(4);
        double acc = 0.0;
        for (int k = 1; k < static_cast<int>(w.size()); ++k) {
            const int lo = g_.periodic() ? 0 : -k;
            for (int i = lo; i < g_.n; ++i)
                acc += w[k] * (m[fd::neighbour(g_, i + k)] - m[fd::neighbour(g_, i)]).squaredNorm();
        }
        return 0.5 * acc / h;
    }

private:
    Grid1D g_;
    bool spectral_;
    std::unique_ptr<Spectral1D> sp_;
};

} // namespace detail

// dm/dt = a m x H + b m x (m x H), H = m_xx - l1 m1 e1 - l3 m3 e3.
// LL: (a, b) = (-1, 0). LLG in the opposite-vector form: (beta, -alpha).
struct SpinEquation {
    double a = -1.0;
    double b = 0.0;
    AnisotropyParams an;

    static SpinEquation ll(const AnisotropyParams& an) { return {-1.0, 0.0, an}; }
    static SpinEquation llg(double alpha, const AnisotropyParams& an = {}) {
        require(alpha >= 0.0 && alpha <= 1.0, "LLG: alpha must lie in [0,1]");
        return {beta_of(alpha), -alpha, an};
    }

    Vec3 field(const Vec3& m, const Vec3& mxx) const {
        return mxx - Vec3(an.lambda1 * m[0], 0.0, an.lambda3 * m[2]);
    }
    Vec3 rate(const Vec3& m, const Vec3& H) const {
        const Vec3 mh = m.cross(H);
        return a * mh + b * m.cross(mh);
    }
};

inline std::vector<Vec3> spin_rhs(const SpinEquation& eq, detail::SpinOps& ops, const std::vector<Vec3>& m) {
    auto mxx = ops.d(m, 2);
    std::vector<Vec3> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = eq.rate(m[i], eq.field(m[i], mxx[i]));
    if (!ops.grid().periodic()) out.front() = out.back() = Vec3::Zero();
    return out;
}

// E_{l1,l3} = 1/2 int |m_x|^2 + l1 m1^2 + l3 m3^2 with the scheme-consistent
// gradient term.
inline double spin_energy(detail::SpinOps& ops, const std::vector<Vec3>& m, const AnisotropyParams& an) {
    double ani = 0.0;
    for (const auto& v : m) ani += an.lambda1 * v[0] * v[0] + an.lambda3 * v[2] * v[2];
    return ops.gradient_energy(m) + 0.5 * ani * ops.grid().h();
}

inline double sup_gradient(detail::SpinOps& ops, const std::vector<Vec3>& m) {
    auto mx = ops.d(m, 1);
    double s = 0.0;
    for (const auto& v : mx) s = std::max(s, v.norm());
    return s;
}

// E_k = |dt m|^2_{H^{k-2}} + |m|^2_{H^k} + (l1+l3)(|m1|^2_{H^{k-1}} + |m3|^2_{H^{k-1}})
//       + l1 l3 (|m1|^2_{H^{k-2}} + |m3|^2_{H^{k-2}}), homogeneous spectral norms.
inline double pseudo_energy(const SpinField& f, const std::vector<Vec3>& dtm, int k, const AnisotropyParams& an) {
    require(k >= 2 && k <= 4, "pseudo_energy: k must be 2, 3 or 4");
    require(f.grid.periodic(), "pseudo_energy: homogeneous Sobolev norms need a periodic grid");
    Spectral1D sp(f.grid);
    const int n = f.grid.n;
    auto comp = [&](const std::vector<Vec3>& v, int c) {
        RealField r(n);
        for (int i = 0; i < n; ++i) r[i] = v[i][c];
        return r;
    };
    auto sq = [&](const RealField& r, double s) { return sqr(sp.sobolev_norm(r, s, true)); };
    double e = 0.0;
    for (int c = 0; c < 3; ++c) e += sq(comp(dtm, c), k - 2) + sq(comp(f.m, c), k);
    const RealField m1 = comp(f.m, 0), m3 = comp(f.m, 2);
    e += (an.lambda1 + an.lambda3) * (sq(m1, k - 1) + sq(m3, k - 1));
    e += an.lambda1 * an.lambda3 * (sq(m1, k - 2) + sq(m3, k - 2));
    return e;
}

namespace detail {

inline void axpy(std::vector<Vec3>& y, const std::vector<Vec3>& x, double a, const std::vector<Vec3>& k) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + a * k[i];
}

inline void spin_step(const SpinEquation& eq, SpinOps& ops, std::vector<Vec3>& m, double dt, Scheme scheme) {
    const std::size_t n = m.size();
    if (scheme == Scheme::MidpointImplicit) {
        // m+ = m + dt F((m + m+)/2); F(y) = y x (...), so |m+| = |m| at the fixed point
        std::vector<Vec3> next = m, mid(n);
        for (int it = 0; it < 200; ++it) {
            for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (m[i] + next[i]);
            auto f = spin_rhs(eq, ops, mid);
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3 cand = m[i] + dt * f[i];
                change = std::max(change, (cand - next[i]).norm());
                next[i] = cand;
            }
            if (change < 1e-15) {
                m = std::move(next);
                return;
            }
        }
        throw NumericalError("midpoint-implicit: fixed-point iteration did not converge");
    }
    std::vector<Vec3> y(n);
    auto k1 = spin_rhs(eq, ops, m);
    axpy(y, m, 0.5 * dt, k1);
    auto k2 = spin_rhs(eq, ops, y);
    axpy(y, m, 0.5 * dt, k2);
    auto k3 = spin_rhs(eq, ops, y);
    axpy(y, m, dt, k3);
    auto k4 = spin_rhs(eq, ops, y);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        m[i].normalize(); // projection to S^2
    }
}

} // namespace detail

// Shared driver for LL and LLG.
inline SpinTrajectory evolve_spin(const SpinField& field, const SpinEquation& eq, double T, const SolverConfig& cfg) {
    require(static_cast<int>(field.m.size()) == field.grid.n, "evolve: field size mismatch");
    require(field.max_sphere_defect() <= 1e-10, "evolve: initial field is not on S^2");
    require(cfg.pseudo_energy_k == 0 || field.grid.periodic(), "evolve: pseudo-energies need a periodic grid");
    const double dt_max = detail::resolve_dt(cfg, field.grid);
    detail::SpinOps ops(field.grid, cfg.scheme == Scheme::SpectralRK4);
    auto tg = detail::time_grid(T, cfg.sample_dt, dt_max);

    SpinTrajectory tr;
    std::vector<Vec3> m = field.m;
    double t = 0.0;
    int sample = 0;

    auto record = [&]() -> bool {
        const double tabs = cfg.t0 + t;
        tr.diag.t.push_back(tabs);
        tr.diag.E.push_back(spin_energy(ops, m, eq.an));
        const double g = sup_gradient(ops, m);
        tr.diag.sqrt_t_grad.push_back(tabs > 0.0 ? std::sqrt(tabs) * g : 0.0);
        double defect = 0.0;
        for (const auto& v : m) defect = std::max(defect, std::abs(v.norm() - 1.0));
        tr.diag.sphere_defect.push_back(defect);
        if (cfg.pseudo_energy_k >= 2) {
            tr.diag.Ek.resize(cfg.pseudo_energy_k - 1);
            auto dtm = spin_rhs(eq, ops, m);
            for (int k = 2; k <= cfg.pseudo_energy_k; ++k)
                tr.diag.Ek[k - 2].push_back(pseudo_energy(SpinField{field.grid, m}, dtm, k, eq.an));
        }
        if (cfg.frame_stride > 0 && sample % cfg.frame_stride == 0) {
            tr.t.push_back(tabs);
            tr.frames.push_back(SpinField{field.grid, m});
        }
        ++sample;
        if (tabs > 0.0 && tr.diag.sqrt_t_grad.back() > cfg.blowup_ceiling) {
            tr.info.status = RunStatus::GuardAborted;
            tr.info.message = "sqrt(t)|m_x|_inf exceeded " + std::to_string(cfg.blowup_ceiling) + " at t = " +
                              std::to_string(tabs);
            return false;
        }
        if (!std::isfinite(tr.diag.E.back())) throw NumericalError("evolve: non-finite energy");
        return true;
    };

    bool ok = record();
    double s0 = 0.0;
    for (std::size_t seg = 0; ok && seg < tg.ends.size(); ++seg) {
        const double dt = (tg.ends[seg] - s0) / tg.steps[seg];
        tr.info.dt = std::max(tr.info.dt, dt);
        for (long k = 0; k < tg.steps[seg]; ++k) {
            detail::spin_step(eq, ops, m, dt, cfg.scheme);
            if (++tr.info.steps > cfg.max_steps) throw NumericalError("evolve: max_steps exceeded");
        }
        s0 = tg.ends[seg];
        t = s0;
        const bool last = seg + 1 == tg.ends.size();
        if (last && cfg.frame_stride > 0 && sample % cfg.frame_stride != 0) {
            // always keep the final state as a frame
            ok = record();
            if (tr.t.empty() || tr.t.back() != cfg.t0 + t) {
                tr.t.push_back(cfg.t0 + t);
                tr.frames.push_back(SpinField{field.grid, m});
            }
        } else {
            ok = record();
        }
    }
    tr.info.t_end = cfg.t0 + t;
    tr.final_state = SpinField{field.grid, m};
    return tr;
}

inline SpinTrajectory evolve_ll(const SpinField& field, const AnisotropyParams& an, double T, const SolverConfig& cfg) {
    return evolve_spin(field, SpinEquation::ll(an), T, cfg);
}

inline SpinTrajectory evolve_llg(const SpinField& field, double alpha, double T, const SolverConfig& cfg,
                                 const AnisotropyParams& an = {}) {
    return evolve_spin(field, SpinEquation::llg(alpha, an), T, cfg);
}

// m_{c,alpha}(x, t) = f(x/sqrt(t)) on a grid.
inline SpinField self_similar_field(ProfileKind kind, const ProfileParams& p, const Grid1D& g, double t,
                                    double tol = 1e-12) {
    require(t > 0.0, "self_similar_field: t must be positive");
    std::vector<double> pts(g.n);
    for (int i = 0; i < g.n; ++i) pts[i] = g.x(i) / std::sqrt(t);
    auto fr = integrate_frames(kind, p, pts, tol);
    SpinField f{g, std::vector<Vec3>(g.n)};
    for (int i = 0; i < g.n; ++i) f.m[i] = fr.frames[i].m.normalized();
    return f;
}

inline double sup_distance(const SpinField& a, const SpinField& b) {
    require(a.m.size() == b.m.size(), "sup_distance: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.m.size(); ++i) d = std::max(d, (a.m[i] - b.m[i]).norm());
    return d;
}

// Small-amplitude plane wave about e2 with wavenumber index j on a periodic
// grid of length L; returns the measured angular frequency. The normal mode
// Z = sqrt(k^2+l1) p_hat + i sqrt(k^2+l3) q_hat rotates as e^{-i omega t}.
inline double measured_linear_frequency(int j, int n, double L, const AnisotropyParams& an, double amplitude = 1e-5,
                                        double periods = 2.0, const SolverConfig& base = {}) {
    const Grid1D g(0.0, L, n, Boundary::Periodic);
    const double k = 2.0 * pi * j / L;
    const double omega0 = dispersion_omega(k, an.lambda1, an.lambda3).first;
    SpinField f{g, std::vector<Vec3>(n)};
    for (int i = 0; i < n; ++i) {
        const double s = amplitude * std::cos(k * g.x(i));
        f.m[i] = Vec3(s, 1.0, 0.0).normalized();
    }
    SolverConfig cfg = base;
    cfg.scheme = Scheme::SpectralRK4;
    const double T = periods * 2.0 * pi / omega0;
    cfg.sample_dt = T / (16.0 * periods);
    cfg.frame_stride = 1;
    auto tr = evolve_ll(f, an, T, cfg);
    Spectral1D sp(g);
    const double a1 = std::sqrt(k * k + an.lambda1), a3 = std::sqrt(k * k + an.lambda3);
    double phase = 0.0, prev = 0.0;
    for (std::size_t s = 0; s < tr.frames.size(); ++s) {
        RealField p(n), q(n);
        for (int i = 0; i < n; ++i) {
            p[i] = tr.frames[s].m[i][0];
            q[i] = tr.frames[s].m[i][2];
        }
        const cplx ph = sp.forward(p)[j], qh = sp.forward(q)[j];
        const double arg = std::arg(a1 * ph + cplx(0, 1) * a3 * qh);
        if (s == 0) {
            prev = arg;
            continue;
        }
        phase += std::remainder(arg - prev, 2.0 * pi);
        prev = arg;
    }
    return -phase / (tr.t.back() - tr.t.front());
}

// ---------------------------------------------------------------------------
// Hydrodynamical system, spectral in space, RK4 in time.

namespace detail {

struct HydroRhs {
    Spectral1D& sp;
    double lambda3;

    std::pair<RealField, RealField> operator()(const RealField& u, const RealField& w) const {
        const int n = static_cast<int>(u.size());
        auto [ux, wx] = sp.derivative2(u, w, 1);
        RealField uxx = sp.derivative(u, 2);
        RealField f1(n), f2(n);
        for (int i = 0; i < n; ++i) {
            const double q = 1.0 - u[i] * u[i];
            f1[i] = -q * w[i];
            f2[i] = uxx[i] / q + u[i] * ux[i] * ux[i] / (q * q) + u[i] * (w[i] * w[i] - lambda3);
        }
        return sp.derivative2(f1, f2, 1);
    }
};

} // namespace detail

inline double hydro_energy(Spectral1D& sp, const HydroState& s, double lambda3) {
    RealField ux = sp.derivative(s.v, 1);
    RealField e(s.grid.n);
    for (int i = 0; i < s.grid.n; ++i) {
        const double q = 1.0 - s.v[i] * s.v[i];
        e[i] = 0.5 * (ux[i] * ux[i] / q + q * s.w[i] * s.w[i] + lambda3 * s.v[i] * s.v[i]);
    }
    return trapezoid(s.grid, e);
}

// The 1/(1-u^2) coefficients stiffen the system near the vacuum; measured RK4
// stability threshold dt ~ 0.28 (1 - max v^2)^{1/4} h^2 across speeds and grids.
inline double hydro_dt_bound(const SolverConfig& cfg, const Grid1D& g, double vmax) {
    const double limit = 0.28 * std::pow(1.0 - vmax * vmax, 0.25) * g.h() * g.h();
    const double dt = cfg.dt > 0.0 ? cfg.dt : (cfg.cfl > 0.0 ? cfg.cfl * g.h() * g.h() : 0.8 * limit);
    if (dt > limit * (1 + 1e-12))
        throw DomainError("evolve_hydro: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(limit) + " at max|v| = " + std::to_string(vmax));
    return dt;
}

inline HydroTrajectory evolve_hydro(const HydroState& state, double lambda3, double T, const SolverConfig& cfg_in) {
    require(lambda3 >= 0.0, "evolve_hydro: lambda3 must be nonnegative");
    SolverConfig cfg = cfg_in;
    cfg.scheme = Scheme::SpectralRK4;
    const double vmax = sup_norm(state.v);
    require(vmax < 1.0 - cfg.vacuum_delta, "evolve_hydro: initial state inside the vacuum guard");
    const double dt_max = hydro_dt_bound(cfg, state.grid, vmax);
    Spectral1D sp(state.grid);
    detail::HydroRhs rhs{sp, lambda3};
    auto tg = detail::time_grid(T, cfg.sample_dt, dt_max);
    const int n = state.grid.n;

    HydroTrajectory tr;
    RealField u = state.v, w = state.w;
    double t = 0.0;
    int sample = 0;
    auto record = [&]() -> bool {
        HydroState s;
        s.grid = state.grid;
        s.v = u;
        s.w = w;
        tr.diag.t.push_back(cfg.t0 + t);
        tr.diag.E.push_back(hydro_energy(sp, s, lambda3));
        tr.diag.P.push_back(functional_momentum(s));
        if (cfg.frame_stride > 0 && sample % cfg.frame_stride == 0) {
            tr.t.push_back(cfg.t0 + t);
            tr.frames.push_back(s);
        }
        ++sample;
        const double vmax = sup_norm(u);
        if (!std::isfinite(vmax)) throw NumericalError("evolve_hydro: non-finite state");
        if (vmax >= 1.0 - cfg.vacuum_delta) {
            tr.info.status = RunStatus::GuardAborted;
            tr.info.message = "vacuum guard: max|v| = " + std::to_string(vmax) + " at t = " + std::to_string(cfg.t0 + t);
            return false;
        }
        return true;
    };

    bool ok = record();
    double s0 = 0.0;
    RealField yu(n), yw(n);
    for (std::size_t seg = 0; ok && seg < tg.ends.size(); ++seg) {
        const double dt = (tg.ends[seg] - s0) / tg.steps[seg];
        tr.info.dt = std::max(tr.info.dt, dt);
        for (long k = 0; k < tg.steps[seg] && ok; ++k) {
            auto [a1, b1] = rhs(u, w);
            for (int i = 0; i < n; ++i) yu[i] = u[i] + 0.5 * dt * a1[i], yw[i] = w[i] + 0.5 * dt * b1[i];
            auto [a2, b2] = rhs(yu, yw);
            for (int i = 0; i < n; ++i) yu[i] = u[i] + 0.5 * dt * a2[i], yw[i] = w[i] + 0.5 * dt * b2[i];
            auto [a3, b3] = rhs(yu, yw);
            for (int i = 0; i < n; ++i) yu[i] = u[i] + dt * a3[i], yw[i] = w[i] + dt * b3[i];
            auto [a4, b4] = rhs(yu, yw);
            for (int i = 0; i < n; ++i) {
                u[i] += dt / 6.0 * (a1[i] + 2 * a2[i] + 2 * a3[i] + a4[i]);
                w[i] += dt / 6.0 * (b1[i] + 2 * b2[i] + 2 * b3[i] + b4[i]);
            }
            if (++tr.info.steps > cfg.max_steps) throw NumericalError("evolve_hydro: max_steps exceeded");
            if (sup_norm(u) >= 1.0 - cfg.vacuum_delta) {
                t = s0 + (k + 1) * dt;
                ok = record();
            }
        }
        if (!ok) break;
        s0 = tg.ends[seg];
        t = s0;
        ok = record();
    }
    tr.info.t_end = cfg.t0 + t;
    tr.final_state.grid = state.grid;
    tr.final_state.v = u;
    tr.final_state.w = w;
    return tr;
}

// ---------------------------------------------------------------------------
// Stereographic DNLS: u_t = (alpha + i beta) u_xx + g(u),
// g(u) = -2i(beta - i alpha) conj(u) u_x^2 / (1 + |u|^2). Strang splitting with
// the exact linear multiplier (periodic, or even reflection on pinned grids).

inline ComplexField dnls_nonlinearity(Spectral1D& sp, const ComplexField& u, double alpha) {
    const cplx coef = cplx(0.0, -2.0) * cplx(beta_of(alpha), -alpha);
    ComplexField ux = sp.derivative(u, 1);
    ComplexField g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = coef * std::conj(u[i]) * ux[i] * ux[i] / (1.0 + std::norm(u[i]));
    return g;
}

inline ComplexTrajectory evolve_dnls(const ComplexField& u0, const Grid1D& g, double alpha, double T,
                                     const SolverConfig& cfg) {
    require(alpha > 0.0 && alpha <= 1.0, "evolve_dnls: alpha must lie in (0,1]");
    require(static_cast<int>(u0.size()) == g.n, "evolve_dnls: field size mismatch");
    const double dt_max = cfg.dt > 0.0 ? cfg.dt : (cfg.cfl > 0.0 ? cfg.cfl : 0.4) * g.h() * g.h();
    Spectral1D sp(g);
    const cplx a(alpha, beta_of(alpha));
    auto tg = detail::time_grid(T, cfg.sample_dt, dt_max);

    ComplexTrajectory tr;
    tr.grid = g;
    ComplexField u = u0;
    int sample = 0;
    double t = 0.0;
    auto record = [&]() -> bool {
        if (cfg.frame_stride > 0 && sample % cfg.frame_stride == 0) {
            tr.t.push_back(cfg.t0 + t);
            tr.frames.push_back(u);
        }
        ++sample;
        const double um = sup_norm(u);
        if (!std::isfinite(um)) throw NumericalError("evolve_dnls: non-finite state");
        if (um >= cfg.pole_ceiling) {
            tr.info.status = RunStatus::GuardAborted;
            tr.info.message = "pole guard: max|u| = " + std::to_string(um);
            return false;
        }
        return true;
    };
    bool ok = record();
    double s0 = 0.0;
    const std::size_t n = u.size();
    ComplexField y(n);
    for (std::size_t seg = 0; ok && seg < tg.ends.size(); ++seg) {
        const double dt = (tg.ends[seg] - s0) / tg.steps[seg];
        tr.info.dt = std::max(tr.info.dt, dt);
        auto half = [&](double k) { return std::exp(-a * k * k * (0.5 * dt)); };
        for (long k = 0; k < tg.steps[seg]; ++k) {
            u = sp.apply(u, half);
            auto k1 = dnls_nonlinearity(sp, u, alpha);
            for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + 0.5 * dt * k1[i];
            auto k2 = dnls_nonlinearity(sp, y, alpha);
            for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + 0.5 * dt * k2[i];
            auto k3 = dnls_nonlinearity(sp, y, alpha);
            for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + dt * k3[i];
            auto k4 = dnls_nonlinearity(sp, y, alpha);
            for (std::size_t i = 0; i < n; ++i) u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            u = sp.apply(u, half);
            if (++tr.info.steps > cfg.max_steps) throw NumericalError("evolve_dnls: max_steps exceeded");
        }
        s0 = tg.ends[seg];
        t = s0;
        ok = record();
    }
    tr.info.t_end = cfg.t0 + t;
    tr.final_state = u;
    return tr;
}

inline ComplexField stereographic_field(const SpinField& f) {
    ComplexField u(f.m.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = project_stereographic(f.m[i]);
    return u;
}

inline SpinField sphere_from_stereographic(const ComplexField& u, const Grid1D& g) {
    SpinField f{g, std::vector<Vec3>(u.size())};
    for (std::size_t i = 0; i < u.size(); ++i) f.m[i] = inverse_stereographic(u[i]);
    return f;
}

// (c/sqrt(t)) e^{(-alpha + i beta) x^2/(4t)} against
// i u_t + (beta - i alpha) u_xx + (u/2)(beta|u|^2 + 2 alpha int_0^x Im(conj(u) u_x) - beta c^2/t) = 0,
// sup of the residual with u_t exact in time and second-order differences in x.
inline double filament_residual(double c, double alpha, double t, const Grid1D& g) {
    const double b = beta_of(alpha);
    const cplx q(-alpha, b);
    auto u = [&](double x) { return c / std::sqrt(t) * std::exp(q * x * x / (4.0 * t)); };
    auto ut = [&](double x) { return u(x) * (-0.5 / t - q * x * x / (4.0 * t * t)); };
    const double h = g.h();
    ComplexField uu(g.n);
    for (int i = 0; i < g.n; ++i) uu[i] = u(g.x(i));
    RealField im(g.n);
    for (int i = 1; i + 1 < g.n; ++i) im[i] = std::imag(std::conj(uu[i]) * (uu[i + 1] - uu[i - 1]) / (2.0 * h));
    im[0] = im[1];
    im[g.n - 1] = im[g.n - 2];
    RealField I = cumulative_trapezoid(g, im);
    const double at0 = interpolate(g, I, 0.0);
    double r = 0.0;
    for (int i = 1; i + 1 < g.n; ++i) {
        const cplx uxx = (uu[i + 1] - 2.0 * uu[i] + uu[i - 1]) / (h * h);
        const cplx res = cplx(0, 1) * ut(g.x(i)) + cplx(b, -alpha) * uxx +
                         0.5 * uu[i] * (b * std::norm(uu[i]) + 2.0 * alpha * (I[i] - at0) - b * c * c / t);
        r = std::max(r, std::abs(res));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Modulation of soliton sums.

struct ModulationResult {
    std::vector<double> t;
    std::vector<std::vector<double>> a;    // a[frame][j]
    std::vector<std::vector<double>> adot; // centered differences in time
    std::vector<double> distance;          // |V - S|_{H^1} + |W - S_w|_{L^2}
};

namespace detail {
inline std::pair<double, double> hydro_soliton_dx(double c, double x) {
    const double mu = soliton_width_rate(c), s = sech(mu * x);
    const double v = mu * s, dv = -mu * mu * s * std::tanh(mu * x);
    return {dv, c * dv * (1.0 + v * v) / sqr(1.0 - v * v)};
}
} // namespace detail

inline double h1_norm(Spectral1D& sp, const RealField& f) {
    RealField fx = sp.derivative(f, 1);
    RealField e(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) e[i] = f[i] * f[i] + fx[i] * fx[i];
    return std::sqrt(trapezoid(sp.grid(), e));
}

inline double l2_norm(const Grid1D& g, const RealField& f) {
    RealField e(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) e[i] = f[i] * f[i];
    return std::sqrt(trapezoid(g, e));
}

// Positions minimizing the L^2 distance to the sum with fixed speeds and signs,
// by Gauss-Newton from the previous frame's positions advanced by c dt.
inline ModulationResult modulation_fit(const std::vector<double>& times, const std::vector<HydroState>& frames,
                                       const std::vector<SolitonSpec>& specs, double radius = 0.5) {
    require(times.size() == frames.size() && !frames.empty(), "modulation_fit: need matching times and frames");
    const int M = static_cast<int>(specs.size());
    require(M >= 1, "modulation_fit: need at least one soliton");
    for (const auto& s : specs) s.validate();
    ModulationResult out;
    std::vector<double> a(M);
    for (int j = 0; j < M; ++j) a[j] = specs[j].a;
    Spectral1D sp(frames.front().grid);

    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& st = frames[f];
        const auto& g = st.grid;
        if (f > 0)
            for (int j = 0; j < M; ++j) a[j] += specs[j].c * (times[f] - times[f - 1]);
        RealField rv(g.n), rw(g.n);
        auto residual = [&]() {
            for (int i = 0; i < g.n; ++i) {
                rv[i] = st.v[i];
                rw[i] = st.w[i];
                for (int j = 0; j < M; ++j) {
                    auto p = hydro_soliton(specs[j].c, g.x(i) - a[j]);
                    rv[i] -= specs[j].s * p.v;
                    rw[i] -= specs[j].s * p.w;
                }
            }
        };
        for (int it = 0; it < 50; ++it) {
            residual();
            Eigen::MatrixXd JtJ = Eigen::MatrixXd::Zero(M, M);
            Eigen::VectorXd Jtr = Eigen::VectorXd::Zero(M);
            std::vector<std::vector<std::pair<double, double>>> J(M, std::vector<std::pair<double, double>>(g.n));
            for (int j = 0; j < M; ++j)
                for (int i = 0; i < g.n; ++i) {
                    auto d = detail::hydro_soliton_dx(specs[j].c, g.x(i) - a[j]);
                    // d residual / d a_j = + s_j (v', w')
                    J[j][i] = {specs[j].s * d.first, specs[j].s * d.second};
                }
            for (int j = 0; j < M; ++j) {
                for (int k = 0; k < M; ++k) {
                    double acc = 0.0;
                    for (int i = 0; i < g.n; ++i) acc += J[j][i].first * J[k][i].first + J[j][i].second * J[k][i].second;
                    JtJ(j, k) = acc;
                }
                double acc = 0.0;
                for (int i = 0; i < g.n; ++i) acc += J[j][i].first * rv[i] + J[j][i].second * rw[i];
                Jtr[j] = acc;
            }
            Eigen::VectorXd da = -JtJ.ldlt().solve(Jtr);
            if (!da.allFinite()) throw NumericalError("modulation_fit: singular normal equations");
            for (int j = 0; j < M; ++j) a[j] += da[j];
            if (da.cwiseAbs().maxCoeff() < 1e-12) break;
        }
        residual();
        const double l2 = std::sqrt(sqr(l2_norm(g, rv)) + sqr(l2_norm(g, rw)));
        if (!(l2 <= radius))
            throw NumericalError("modulation_fit: distance " + std::to_string(l2) + " exceeds the fit radius at t = " +
                                 std::to_string(times[f]));
        out.t.push_back(times[f]);
        out.a.push_back(a);
        out.distance.push_back(h1_norm(sp, rv) + l2_norm(g, rw));
    }
    const std::size_t K = out.t.size();
    out.adot.assign(K, std::vector<double>(M, 0.0));
    if (K >= 3) {
        for (std::size_t k = 0; k < K; ++k)
            for (int j = 0; j < M; ++j) {
                if (k == 0)
                    out.adot[k][j] = (-3 * out.a[0][j] + 4 * out.a[1][j] - out.a[2][j]) / (out.t[2] - out.t[0]);
                else if (k == K - 1)
                    out.adot[k][j] = (3 * out.a[K - 1][j] - 4 * out.a[K - 2][j] + out.a[K - 3][j]) / (out.t[K - 1] - out.t[K - 3]);
                else
                    out.adot[k][j] = (out.a[k + 1][j] - out.a[k - 1][j]) / (out.t[k + 1] - out.t[k - 1]);
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chang-Shatah-Uhlenbeck variable (lambda3 = 1):
// Psi = 1/2 (u_x / sqrt(1-u^2) + i sqrt(1-u^2) w) e^{i theta}, theta = -int_{-inf}^x u w.

struct CsuField {
    ComplexField Psi;
    ComplexField F_psi;    // int u Psi
    ComplexField F_psibar; // int u conj(Psi)
};

inline CsuField csu_map(const HydroState& s, double vacuum_delta = 1e-3) {
    const auto& g = s.grid;
    require(sup_norm(s.v) < 1.0 - vacuum_delta, "csu_map: state inside the vacuum guard");
    Grid1D pg = g;
    pg.boundary = Boundary::Pinned; // integrals and derivatives anchored at the left end
    RealField ux = fd::d1(pg, s.v, 4);
    RealField uw(g.n);
    for (int i = 0; i < g.n; ++i) uw[i] = s.v[i] * s.w[i];
    RealField theta = cumulative_integral4(g, uw);
    CsuField out;
    out.Psi.resize(g.n);
    ComplexField up(g.n), upb(g.n);
    for (int i = 0; i < g.n; ++i) {
        const double r = std::sqrt(1.0 - s.v[i] * s.v[i]);
        out.Psi[i] = 0.5 * cplx(ux[i] / r, r * s.w[i]) * std::exp(cplx(0.0, -theta[i]));
        up[i] = s.v[i] * out.Psi[i];
        upb[i] = s.v[i] * std::conj(out.Psi[i]);
    }
    out.F_psi = cumulative_integral4(g, up);
    out.F_psibar = cumulative_integral4(g, upb);
    return out;
}

// sup |u_x - 2 Re(Psi (1 - 2 F(u, conj Psi)))| over interior nodes.
inline double csu_ux_identity_residual(const HydroState& s) {
    const auto& g = s.grid;
    auto c = csu_map(s);
    Grid1D pg = g;
    pg.boundary = Boundary::Pinned;
    RealField ux = fd::d1(pg, s.v, 4);
    double r = 0.0;
    for (int i = 4; i < g.n - 4; ++i)
        r = std::max(r, std::abs(ux[i] - 2.0 * std::real(c.Psi[i] * (1.0 - 2.0 * c.F_psibar[i]))));
    return r;
}

// Residual of
// i Psi_t + Psi_xx + 2|Psi|^2 Psi + u^2 Psi/2 - Re(Psi(1 - 2F(u, conj Psi)))(1 - 2F(u, Psi)) = 0
// at the middle of three states spaced dt apart.
inline double csu_residual(const HydroState& prev, const HydroState& cur, const HydroState& next, double dt) {
    const auto& g = cur.grid;
    auto a = csu_map(prev), b = csu_map(cur), c = csu_map(next);
    Grid1D pg = g;
    pg.boundary = Boundary::Pinned;
    ComplexField pxx = fd::d2(pg, b.Psi, 4);
    double r = 0.0;
    for (int i = 6; i < g.n - 6; ++i) {
        const cplx P = b.Psi[i];
        const cplx Pt = (c.Psi[i] - a.Psi[i]) / (2.0 * dt);
        const double u = cur.v[i];
        const cplx res = cplx(0, 1) * Pt + pxx[i] + 2.0 * std::norm(P) * P + 0.5 * u * u * P -
                         std::real(P * (1.0 - 2.0 * b.F_psibar[i])) * (1.0 - 2.0 * b.F_psi[i]);
        r = std::max(r, std::abs(res));
    }
    return r;
}

} // namespace llg
