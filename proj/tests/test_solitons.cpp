#include "llg/solitons.hpp"

#include <gtest/gtest.h>

using namespace llg;

namespace {

Grid1D wide(double h) { return Grid1D(-40, 40, static_cast<int>(std::lround(80 / h)) + 1, Boundary::Pinned); }

double momentum_at(double c, const Grid1D& g) { return functional_momentum(hydro_soliton_state(c, g)); }

} // namespace

TEST(SolitonProfile, PointValues) {
    auto m = soliton_profile(0.5, 0.0);
    EXPECT_NEAR((m - Vec3(0.5, 0.0, std::sqrt(0.75))).norm(), 0.0, 1e-15);
    for (double x : {-2.0, 0.3, 1.7}) {
        auto m0 = soliton_profile(0.0, x);
        EXPECT_NEAR((m0 - Vec3(0.0, std::tanh(x), sech(x))).norm(), 0.0, 1e-15);
        EXPECT_NEAR(soliton_profile(0.7, x).norm(), 1.0, 1e-15);
    }
    EXPECT_NEAR((soliton_profile(0.4, 60.0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((soliton_profile(0.4, -60.0) - Vec3(0, -1, 0)).norm(), 0.0, 1e-12);
    EXPECT_THROW(soliton_profile(1.0, 0.0), DomainError);
    EXPECT_THROW(soliton_profile(-1.2, 0.0), DomainError);
}

TEST(HydroSoliton, PointValuesAndGuards) {
    auto p = hydro_soliton(0.6, 0.0);
    EXPECT_NEAR(p.v, 0.8, 1e-15);
    EXPECT_NEAR(p.w, 4.0 / 3.0, 1e-14);
    auto far = hydro_soliton(0.6, 80.0);
    EXPECT_LT(std::abs(far.v) + std::abs(far.w), 1e-20);
    EXPECT_LT(hydro_soliton(0.999, 0.0).v, 0.05);
    EXPECT_THROW(hydro_soliton(0.0, 0.0), DomainError);
    // the sphere profile and its hydrodynamical pair agree on m3
    for (double x : {-1.0, 0.0, 2.5}) EXPECT_NEAR(soliton_profile(0.6, x)[2], hydro_soliton(0.6, x).v, 1e-15);
}

TEST(SolitonFunctionals, ClosedForms) {
    EXPECT_NEAR(soliton_energy(0.6), 1.6, 1e-15);
    EXPECT_NEAR(soliton_momentum(1.0 / std::sqrt(2.0)), pi / 2, 1e-15);
    EXPECT_LT(soliton_energy(1.0 - 1e-12), 1e-5);
    EXPECT_LT(soliton_momentum(1.0 - 1e-12), 1e-5);
    EXPECT_NEAR(soliton_momentum(-0.4), -soliton_momentum(0.4), 1e-15);
    EXPECT_THROW(soliton_momentum(0.0), DomainError);
}

TEST(SolitonFunctionals, QuadratureMatchesClosedForms) {
    const Grid1D g = wide(1e-3);
    for (int j = 1; j <= 9; ++j)
        for (double c : {0.1 * j, -0.1 * j}) {
            auto s = hydro_soliton_state(c, g);
            EXPECT_NEAR(functional_energy(s) / soliton_energy(c), 1.0, 1e-8) << c;
            EXPECT_NEAR(functional_momentum(s) / soliton_momentum(c), 1.0, 1e-8) << c;
        }
    auto s = hydro_soliton_state(0.6, g);
    EXPECT_NEAR(functional_energy(s), 1.6, 1e-8);
    EXPECT_NEAR(functional_momentum(s), 2.0 * std::atan(4.0 / 3.0), 1e-8);
}

TEST(SolitonFunctionals, MomentumSlope) {
    const Grid1D g = wide(1e-3);
    const double d = 1e-3;
    auto slope = [&](double c) {
        return (8.0 * (momentum_at(c + d, g) - momentum_at(c - d, g)) - (momentum_at(c + 2 * d, g) - momentum_at(c - 2 * d, g))) /
               (12.0 * d);
    };
    EXPECT_NEAR(slope(0.5), -2.0 / std::sqrt(0.75), 1e-6);
    for (double c : {0.1, 0.3, 0.7, 0.9}) {
        EXPECT_LT(slope(c), 0.0);
        EXPECT_NEAR(slope(c), soliton_momentum_slope(c), 1e-6) << c;
    }
}

TEST(SolitonFunctionals, ZeroStateAndOppositeMap) {
    const Grid1D g = wide(1e-2);
    HydroState z(g, RealField(g.n, 0.0), RealField(g.n, 0.0));
    EXPECT_EQ(functional_energy(z), 0.0);
    EXPECT_EQ(functional_momentum(z), 0.0);
    auto s = hydro_soliton_state(0.4, g);
    auto o = hydro_soliton_state(0.4, g, 0.0, -1);
    EXPECT_NEAR(functional_energy(o), functional_energy(s), 1e-14);
    EXPECT_NEAR(std::abs(functional_momentum(o)), std::abs(functional_momentum(s)), 1e-14);
    EXPECT_THROW(HydroState(g, RealField(g.n, 1.0), RealField(g.n, 0.0)), DomainError);
}

TEST(SolitonFunctionals, EulerLagrangeIdentity) {
    const Grid1D g = wide(1e-3);
    for (double c : {0.5, 0.7, -0.5}) EXPECT_LE(euler_lagrange_residual(hydro_soliton_state(c, g), c), 1e-8) << c;
    // a wrong speed is detected
    EXPECT_GT(euler_lagrange_residual(hydro_soliton_state(0.5, g), 0.55), 1e-2);
}

TEST(SolitonSum, AdmissibilityFlag) {
    const Grid1D g = wide(1e-2);
    auto one = sum_solitons({{0.6, 3.0, 0.0, -1}}, g);
    auto ref = hydro_soliton_state(0.6, g, 3.0, -1);
    for (int i = 0; i < g.n; ++i) {
        EXPECT_EQ(one.state.v[i], ref.v[i]);
        EXPECT_EQ(one.state.w[i], ref.w[i]);
    }
    auto two = sum_solitons({{-0.6, 20.0, 0.0, 1}, {0.6, -20.0, 0.0, 1}}, g);
    EXPECT_TRUE(two.admissible);
    EXPECT_NEAR(two.max_v, 0.8, 1e-12);
    auto stacked = sum_solitons({{0.3, 0.0, 0.0, 1}, {0.3, 0.0, 0.0, 1}}, g);
    EXPECT_FALSE(stacked.admissible);
    EXPECT_THROW(stacked.to_sphere(), DomainError);
    EXPECT_THROW(sum_solitons({{0.0, 0.0, 0.0, 1}}, g), DomainError);
    // reconstruction of a single soliton lands on S^2 with m3 = v
    auto f = one.to_sphere();
    for (int i = 0; i < g.n; i += 97) {
        EXPECT_NEAR(f.m[i].norm(), 1.0, 1e-12);
        EXPECT_NEAR(f.m[i][2], ref.v[i], 1e-12);
    }
}

TEST(Coercivity, ReferenceGrid) {
    for (double c : {0.3, 0.5, 0.7}) {
        auto r = coercivity_check(c, wide(1e-3));
        EXPECT_LE(std::abs(r.eig_kernel), 1e-6) << c;
        EXPECT_GT(r.kernel_alignment, 0.999);
        EXPECT_EQ(r.negative_count, 1);
        EXPECT_LT(r.eig_negative, 0.0);
        EXPECT_GT(r.Lambda_c, 0.0);
        EXPECT_LE(r.gradient_residual, 1e-8);
    }
}

TEST(Coercivity, StableUnderRefinementAndReflection) {
    auto a = coercivity_check(0.5, wide(2e-3));
    auto b = coercivity_check(0.5, wide(1e-3));
    EXPECT_NEAR(a.Lambda_c / b.Lambda_c, 1.0, 5e-3);
    auto m = coercivity_check(-0.5, wide(2e-3));
    EXPECT_NEAR(m.Lambda_c, a.Lambda_c, 1e-6);
    EXPECT_NEAR(m.eig_negative, a.eig_negative, 1e-6);
    EXPECT_THROW(coercivity_check(0.0, wide(1e-2)), DomainError);
    EXPECT_THROW(coercivity_check(0.5, Grid1D(-40, 40, 40, Boundary::Pinned)), DomainError);
}

// Oracle: dense eigenvalues of the Hessian and of its compression to the
// orthogonal complement of the two constraint vectors.
TEST(Coercivity, MatchesDenseProjection) {
    const double c = 0.5;
    const Grid1D g(-15, 15, 301, Boundary::Pinned);
    auto r = coercivity_check(c, g);

    const int m = g.n - 2;
    auto s = hydro_soliton_state(c, g);
    Eigen::VectorXd z(2 * m);
    for (int k = 1; k <= m; ++k) {
        z[2 * (k - 1)] = s.v[k];
        z[2 * (k - 1) + 1] = s.w[k];
    }
    z = polish_discrete_soliton(c, g, z);
    detail::DiscreteSoliton F{c, g.h(), m};
    Eigen::MatrixXd L = Eigen::MatrixXd(F.hessian(z)) / g.h();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(L);
    EXPECT_NEAR(full.eigenvalues()[0], r.eig_negative, 1e-8);
    EXPECT_NEAR(full.eigenvalues()[1], r.eig_kernel, 1e-8);
    EXPECT_GT(full.eigenvalues()[2], 0.0);

    Eigen::MatrixXd V(2 * m, 2);
    const double mu = std::sqrt(1 - c * c);
    for (int k = 1; k <= m; ++k) {
        const double x = g.x(k), v = mu * sech(mu * x), dv = -mu * mu * sech(mu * x) * std::tanh(mu * x);
        V(2 * (k - 1), 0) = dv;
        V(2 * (k - 1) + 1, 0) = c * dv * (1 + v * v) / sqr(1 - v * v);
        V(2 * (k - 1), 1) = z[2 * (k - 1) + 1];
        V(2 * (k - 1) + 1, 1) = z[2 * (k - 1)];
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd Z = Q.rightCols(2 * m - 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> proj(Z.transpose() * L * Z);
    EXPECT_NEAR(proj.eigenvalues()[0], r.Lambda_c, 1e-7);
}
