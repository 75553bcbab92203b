#include "llg/regimes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace llg;

namespace {

Grid1D periodic_grid(int n = 256, double L = 20.0) { return Grid1D(-L, L, n, Boundary::Periodic); }

SgState bump_state(const Grid1D& g, double u_amp, double phi_amp) {
    SgState s{g, RealField(g.n), RealField(g.n)};
    for (int i = 0; i < g.n; ++i) {
        s.U[i] = u_amp * std::exp(-sqr(g.x(i) - 1.0));
        s.Phi[i] = phi_amp * std::exp(-sqr(g.x(i)));
    }
    return s;
}

SgState random_state(const Grid1D& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    SgState s{g, RealField(g.n), RealField(g.n)};
    for (int i = 0; i < g.n; ++i) {
        s.U[i] = d(rng);
        s.Phi[i] = 3.0 * d(rng);
    }
    return s;
}

double rel_drift(const std::vector<double>& e) {
    double d = 0.0;
    for (double v : e) d = std::max(d, std::abs(v / e.front() - 1.0));
    return d;
}

double max_abs_diff(const RealField& a, const RealField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST(SlopeFit, CleanPowerLawKeepsEveryPoint) {
    std::vector<double> h{0.2, 0.1, 0.05, 0.025}, e;
    for (double x : h) e.push_back(3.0 * x * x);
    auto f = fit_loglog_slope(h, e);
    EXPECT_FALSE(f.dropped_largest);
    EXPECT_NEAR(f.fit.slope, 2.0, 1e-12);
}

TEST(SlopeFit, PreAsymptoticPointIsDropped) {
    std::vector<double> h{0.4, 0.1, 0.05, 0.025}, e;
    for (double x : h) e.push_back(x * x);
    e[0] *= 5.0;
    auto f = fit_loglog_slope(h, e);
    EXPECT_TRUE(f.dropped_largest);
    EXPECT_EQ(f.used, 3u);
    EXPECT_NEAR(f.fit.slope, 2.0, 1e-12);
}

TEST(HllEps, ZeroStateIsStationary) {
    auto g = periodic_grid(64);
    SgState s{g, RealField(g.n, 0.0), RealField(g.n, 0.0)};
    auto tr = evolve_hll_eps(s, RegimeConfig{0.1, 1.0, 3}, 0.5, {});
    EXPECT_EQ(sup_norm(tr.final_state.U), 0.0);
    EXPECT_EQ(sup_norm(tr.final_state.Phi), 0.0);
}

TEST(HllEps, ZeroEpsIsSineGordonTermByTerm) {
    auto g = periodic_grid(64);
    Spectral1D sp(g);
    for (unsigned seed : {1u, 2u, 3u}) {
        auto s = random_state(g, seed);
        auto a = hll_eps_nonlinear(sp, s, 0.0, 0.7), b = sgs_nonlinear(s, 0.7);
        auto ra = hll_eps_rhs(sp, s, 0.0, 0.7), rb = sgs_rhs(sp, s, 0.7);
        for (int i = 0; i < g.n; ++i) {
            EXPECT_EQ(a.U[i], b.U[i]);
            EXPECT_EQ(a.Phi[i], b.Phi[i]);
            EXPECT_EQ(ra.U[i], rb.U[i]);
            EXPECT_EQ(ra.Phi[i], rb.Phi[i]);
        }
    }
    // whole trajectories coincide as well
    auto s = bump_state(g, 0.2, 0.5);
    RegimeSolverConfig cfg;
    cfg.dt = 1e-3;
    auto a = evolve_hll_eps(s, RegimeConfig{0.0, 1.0, 3}, 0.2, cfg);
    auto b = evolve_sine_gordon(s.Phi, s.U, g, 1.0, 0.2, cfg);
    EXPECT_EQ(max_abs_diff(a.final_state.Phi, b.final_state.Phi), 0.0);
    EXPECT_EQ(max_abs_diff(a.final_state.U, b.final_state.U), 0.0);
}

TEST(HllEps, ConservesScaledEnergy) {
    auto g = periodic_grid();
    auto s = bump_state(g, 0.3, 0.5);
    RegimeSolverConfig cfg;
    cfg.sample_dt = 0.1;
    cfg.energy_k = 3;
    auto tr = evolve_hll_eps(s, RegimeConfig{0.1, 1.0, 3}, 1.0, cfg);
    ASSERT_EQ(tr.info.status, RunStatus::Completed);
    EXPECT_NEAR(tr.info.t_end, 1.0, 1e-14);
    EXPECT_LE(rel_drift(tr.energy), 1e-6);
    EXPECT_TRUE(tr.w_bound_held);
    ASSERT_EQ(tr.Ek.size(), 3u);
    for (const auto& ek : tr.Ek)
        for (double v : ek) EXPECT_TRUE(std::isfinite(v));
    // E^1 is the scaled energy itself
    EXPECT_NEAR(tr.Ek[0].back(), tr.energy.back(), 1e-14 * tr.energy.back());
}

TEST(HllEps, RejectsBrokenRegimeAndLargeSteps) {
    auto g = periodic_grid(64);
    auto s = bump_state(g, 12.0, 0.5);
    EXPECT_THROW(evolve_hll_eps(s, RegimeConfig{0.1, 1.0, 3}, 0.1, {}), DomainError);
    EXPECT_THROW(RegimeConfig({1.0, 1.0, 3}).validate(), DomainError);
    EXPECT_THROW(RegimeConfig({0.1, 0.0, 3}).validate(), DomainError);
    RegimeSolverConfig cfg;
    cfg.dt = 10.0;
    EXPECT_THROW(evolve_hll_eps(bump_state(g, 0.3, 0.5), RegimeConfig{0.1, 1.0, 3}, 20.0, cfg), DomainError);
}

TEST(HllEps, WBoundFlagTracksDepletion) {
    auto g = periodic_grid(64);
    auto s = bump_state(g, 9.9, 0.0); // eps|U| = 0.99, so inf W < 1/2
    RegimeSolverConfig cfg;
    cfg.guard_delta = 0.005;
    cfg.sample_dt = 0.01;
    auto tr = evolve_hll_eps(s, RegimeConfig{0.1, 0.0, 3}, 0.02, cfg);
    EXPECT_FALSE(tr.w_bound_held);
    EXPECT_LT(tr.min_W.front(), 0.5);
}

TEST(SineGordon, ZeroIsStationary) {
    auto g = periodic_grid(64);
    RealField z(g.n, 0.0);
    auto tr = evolve_sine_gordon(z, z, g, 1.0, 1.0, {});
    EXPECT_EQ(sup_norm(tr.final_state.Phi), 0.0);
}

TEST(SineGordon, StaticKinkStaysPut) {
    // residual second order in h
    const double r1 = sg_kink_residual(1.0, Grid1D(-10, 10, 201, Boundary::Pinned));
    const double r2 = sg_kink_residual(1.0, Grid1D(-10, 10, 401, Boundary::Pinned));
    EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.05);
    Grid1D g(-20, 20, 512, Boundary::Pinned);
    RealField p0(g.n), p1(g.n, 0.0);
    for (int i = 0; i < g.n; ++i) p0[i] = sg_kink(1.0, g.x(i));
    RegimeSolverConfig cfg;
    cfg.sample_dt = 0.5;
    auto tr = evolve_sine_gordon(p0, p1, g, 1.0, 5.0, cfg);
    EXPECT_LE(max_abs_diff(tr.final_state.Phi, p0), 1e-6);
    EXPECT_LE(rel_drift(tr.energy), 1e-6);
}

TEST(SineGordon, ConservesEnergy) {
    auto g = periodic_grid();
    auto s = bump_state(g, 0.5, 1.0);
    RegimeSolverConfig cfg;
    cfg.sample_dt = 0.25;
    auto tr = evolve_sine_gordon(s.Phi, s.U, g, 1.0, 5.0, cfg);
    EXPECT_LE(rel_drift(tr.energy), 1e-6);
}

TEST(SineGordon, DispersionRelation) {
    for (int j : {1, 4, 8, 16}) {
        const double k = 2.0 * pi * j / 20.0;
        EXPECT_NEAR(measured_sg_frequency(j, 128, 20.0, 1.0) / std::sqrt(k * k + 1.0), 1.0, 1e-3) << j;
    }
}

TEST(FreeWave, StandingWave) {
    Grid1D g(0.0, 2.0 * pi, 64, Boundary::Periodic);
    SgState s{g, RealField(g.n, 0.0), RealField(g.n)};
    for (int i = 0; i < g.n; ++i) s.Phi[i] = std::cos(3.0 * g.x(i));
    const double T = 0.77;
    auto out = evolve_free_wave(s, T);
    for (int i = 0; i < g.n; ++i) {
        EXPECT_NEAR(out.Phi[i], std::cos(3.0 * g.x(i)) * std::cos(3.0 * T), 1e-13);
        EXPECT_NEAR(out.U[i], -3.0 * std::cos(3.0 * g.x(i)) * std::sin(3.0 * T), 1e-12);
    }
}

TEST(FreeWave, TravelingProfileAndEnergy) {
    auto g = periodic_grid(256);
    SgState s{g, RealField(g.n), RealField(g.n)};
    auto f = [](double x) { return std::exp(-sqr(x)); };
    for (int i = 0; i < g.n; ++i) {
        s.Phi[i] = f(g.x(i));
        s.U[i] = 2.0 * g.x(i) * f(g.x(i)); // -f'
    }
    const double T = 3.0, E0 = free_wave_energy(s);
    auto out = evolve_free_wave(s, T);
    for (int i = 0; i < g.n; ++i) EXPECT_NEAR(out.Phi[i], f(g.x(i) - T), 1e-12);
    EXPECT_NEAR(free_wave_energy(out) / E0, 1.0, 1e-13);
}

TEST(RegimeNorms, KEpsValues) {
    auto g = periodic_grid(128);
    RealField z(g.n, 0.0), pi_c(g.n, pi);
    EXPECT_EQ(compute_K_eps(z, z, g, 0.1, 3), 0.0);
    EXPECT_LE(compute_K_eps(z, pi_c, g, 0.1, 3), 1e-12);
    auto s = bump_state(g, 0.5, 0.5);
    Spectral1D sp(g);
    const double grad = sp.sobolev_norm(sp.derivative(s.U, 1), 3, false);
    const double K0 = compute_K_eps(s.U, s.Phi, g, 0.0, 3);
    for (double eps : {0.2, 0.1, 0.05}) EXPECT_NEAR(compute_K_eps(s.U, s.Phi, g, eps, 3) - K0, eps * grad, 1e-10);
    EXPECT_NEAR(compute_kappa_eps(1.5, s.U, s.Phi, g, 3), 1.5 + K0, 1e-12);
    ComplexField zc(g.n, cplx(0.0));
    EXPECT_EQ(compute_S_eps(zc, zc, g, 0.1, 3), 0.0);
}

TEST(RegimeStudies, SineGordonRateIsTwo) {
    SgData d;
    for (std::string norm : {"L2", "dsin", "Hk-3"}) {
        auto r = sg_convergence_study(d, {0.2, 0.1, 0.05, 0.025}, 1.0, 1.0, norm, 4);
        EXPECT_NEAR(r.slope, 2.0, 0.3) << norm;
        for (double e : r.error) EXPECT_GT(e, 0.0);
        ASSERT_EQ(r.bound_quantity.size(), 4u);
        ASSERT_EQ(r.kappa.size(), 4u);
    }
    auto zero = sg_error_history(d, 0.1, 1.0, {0.0});
    EXPECT_EQ(zero[0], 0.0);
    EXPECT_THROW(sg_convergence_study(d, {0.1, 0.2}, 1.0, 1.0), DomainError);
}

TEST(RegimeStudies, SineGordonErrorHasExponentialEnvelope) {
    SgData d;
    const std::vector<double> ts{0.5, 1.0, 2.0, 4.0};
    auto e = sg_error_history(d, 0.1, 1.0, ts);
    // the smallest C with e(t) <= e(t0) e^{C (t - t0)} stays moderate
    double C = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i) C = std::max(C, std::log(e[i] / e[0]) / (ts[i] - ts[0]));
    EXPECT_GT(C, 0.0);
    EXPECT_LT(C, 3.0);
}

TEST(RegimeStudies, WaveRatesInEpsAndSigma) {
    SgData g;
    SgData broad;
    broad.family = "broad";
    auto r = wave_regime_study(g, {0.2, 0.1, 0.05, 0.025}, broad, {1e-2, 1e-3, 1e-4}, 1e-3, 1.0);
    EXPECT_NEAR(r.in_eps.slope, 2.0, 0.3);
    EXPECT_NEAR(r.in_sigma.slope, 0.5, 0.15);
    auto r1 = wave_sigma_study(broad, {1e-2, 1e-3, 1e-4}, 1e-3, 1.0, 1);
    EXPECT_NEAR(r1.slope, 0.5, 0.15);
    auto z = evolve_free_wave(broad.make(1e-2), 0.0);
    EXPECT_EQ(wave_error(z, broad.make(1e-2), 1), 0.0);
}

TEST(NlsEps, ZeroIsStationary) {
    auto g = periodic_grid(64);
    ComplexField z(g.n, cplx(0.0));
    EXPECT_EQ(sup_norm(evolve_nls_eps(z, g, 0.1, 0.5, {}).final_state), 0.0);
    EXPECT_EQ(sup_norm(evolve_cubic_nls(z, g, 0.5, {}).final_state), 0.0);
}

TEST(NlsEps, ZeroEpsIsCubicTermByTerm) {
    auto g = periodic_grid(64);
    Spectral1D sp(g);
    std::mt19937 rng(7);
    std::normal_distribution<double> d;
    ComplexField p(g.n);
    for (auto& z : p) z = cplx(d(rng), d(rng));
    auto a = nls_eps_nonlinear(sp, p, 0.0), b = cs_nonlinear(p);
    auto ra = nls_eps_rhs(sp, p, 0.0), rb = cs_rhs(sp, p);
    for (int i = 0; i < g.n; ++i) {
        EXPECT_EQ(a[i], b[i]);
        EXPECT_EQ(ra[i], rb[i]);
    }
}

TEST(NlsEps, ConservesEnergy) {
    auto [g, psi] = NlsData{}.make();
    RegimeSolverConfig cfg;
    cfg.sample_dt = 0.1;
    cfg.energy_k = 3;
    auto tr = evolve_nls_eps(psi, g, 0.1, 1.0, cfg);
    ASSERT_EQ(tr.info.status, RunStatus::Completed);
    EXPECT_LE(rel_drift(tr.energy), 1e-6);
    ASSERT_EQ(tr.high_energy.size(), tr.diag_t.size());
    for (double v : tr.high_energy) EXPECT_TRUE(std::isfinite(v));
}

TEST(NlsEps, ConstraintGuard) {
    auto g = periodic_grid(64);
    ComplexField p(g.n);
    for (int i = 0; i < g.n; ++i) p[i] = 3.2 * std::exp(-sqr(g.x(i)));
    EXPECT_THROW(evolve_nls_eps(p, g, 0.1, 0.1, {}), DomainError); // sqrt(0.1) * 3.2 > 1
}

TEST(CubicNls, SolitonOverOnePeriod) {
    auto g = periodic_grid(512);
    const double eta = 1.0, T = 2.0 * pi / (eta * eta);
    RegimeSolverConfig cfg;
    cfg.sample_dt = T / 8.0;
    for (auto scheme : {CsScheme::SplitStep4, CsScheme::Lawson}) {
        auto tr = evolve_cubic_nls(cs_soliton(g, eta, 0.0), g, T, cfg, scheme);
        EXPECT_LE(max_abs_diff(tr.final_state, cs_soliton(g, eta, T)), 1e-6);
        if (scheme == CsScheme::SplitStep4) {
            EXPECT_LE(rel_drift(tr.mass), 1e-8);
            EXPECT_LE(rel_drift(tr.energy), 1e-8);
        }
    }
}

TEST(NlsEps, ConsistencyResidualIsTheCubicDefect) {
    auto [g, psi] = NlsData{}.make();
    Spectral1D sp(g);
    EXPECT_EQ(sup_norm(nls_consistency_residual(ComplexField(g.n, cplx(0.0)), g, 0.1)), 0.0);
    std::vector<double> rn;
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        // i Psi_t from NLS_eps, then the CS defect
        auto pt = nls_eps_rhs(sp, psi, eps);
        auto pxx = sp.derivative(psi, 2);
        auto R = nls_consistency_residual(psi, g, eps);
        double d = 0.0;
        for (int i = 0; i < g.n; ++i) {
            const cplx defect = cplx(0, 1) * pt[i] + pxx[i] + 0.5 * std::norm(psi[i]) * psi[i];
            d = std::max(d, std::abs(defect - eps * R[i]));
        }
        EXPECT_LE(d, 1e-11) << eps;
        rn.push_back(sp.sobolev_norm(R, 0, false));
    }
    // bounded uniformly and converging as eps -> 0, so eps |R| is linear in eps
    for (double v : rn) EXPECT_NEAR(v / rn.back(), 1.0, 0.2);
}

TEST(RegimeStudies, CubicNlsRateIsOne) {
    auto r = cls_convergence_study(NlsData{}, {0.2, 0.1, 0.05, 0.025}, 0.5);
    EXPECT_NEAR(r.slope, 1.0, 0.3);
    ASSERT_EQ(r.bound_quantity.size(), 4u);
    // the condition audit is reported per eps
    int audits = 0;
    for (const auto& n : r.notes) audits += n.find("S_eps") != std::string::npos;
    for (std::size_t i = 0; i < r.param.size(); ++i)
        if (std::sqrt(r.param[i]) * r.bound_quantity[i] > 1.0) --audits;
    EXPECT_EQ(audits, 0);
    auto r0 = cls_convergence_study(NlsData{}, {0.1}, 0.0);
    EXPECT_EQ(r0.error[0], 0.0);
}
