#include "llg/geometry.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <random>

using namespace llg;

TEST(Stereographic, PoleAndEquatorValues) {
    EXPECT_NEAR(std::abs(project_stereographic(Vec3(0, 0, 1))), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(project_stereographic(Vec3(1, 0, 0)) - cplx(1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(project_stereographic(Vec3(0, 1, 0)) - cplx(0, 1)), 0.0, 1e-15);
    EXPECT_NEAR((inverse_stereographic(0.0) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((inverse_stereographic(1.0) - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((inverse_stereographic(cplx(0, 1)) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Stereographic, RejectsSouthPole) {
    EXPECT_THROW(project_stereographic(Vec3(0, 0, -1)), DomainError);
}

TEST(Stereographic, RoundTripRandom) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    int checked = 0;
    double worst = 0.0;
    while (checked < 10000) {
        Vec3 m(g(rng), g(rng), g(rng));
        m.normalize();
        if (m[2] <= -0.99) continue;
        worst = std::max(worst, (inverse_stereographic(project_stereographic(m)) - m).norm());
        ++checked;
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(UnitVec3, ConstructionTolerance) {
    EXPECT_NO_THROW(UnitVec3(0.6, 0.8, 0.0));
    EXPECT_THROW(UnitVec3(0.6, 0.8, 1e-5), DomainError);
    auto u = UnitVec3::normalized(Vec3(3, 4, 0));
    EXPECT_NEAR(u.vec().norm(), 1.0, 1e-15);
}

TEST(RotationSO3, ValidatesAndComposes) {
    EXPECT_THROW(RotationSO3(Mat3::Identity() * 2.0), DomainError);
    auto r = RotationSO3::from_rotation_vector(Vec3(0, 0, pi / 2));
    EXPECT_NEAR((r * Vec3::UnitX() - Vec3::UnitY()).norm(), 0.0, 1e-15);
    auto rr = r * r;
    EXPECT_NEAR((rr * Vec3::UnitX() + Vec3::UnitX()).norm(), 0.0, 1e-15);
}

TEST(Hydrodynamical, PointValues) {
    auto a = to_hydrodynamical(Vec3(0, 1, 0));
    EXPECT_NEAR(a.u, 0.0, 1e-15);
    EXPECT_NEAR(a.phi, 0.0, 1e-15);
    auto b = to_hydrodynamical(Vec3(0, -1, 0));
    EXPECT_NEAR(b.phi, pi, 1e-15);
    EXPECT_THROW(to_hydrodynamical(Vec3(0, 0, 1)), DomainError);
}

TEST(Hydrodynamical, ZeroFieldsGiveEquatorPoint) {
    Grid1D g(-5, 5, 64, Boundary::Pinned);
    auto f = from_hydrodynamical(RealField(64, 0.0), RealField(64, 0.0), g);
    for (const auto& m : f.m) EXPECT_NEAR((m - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_THROW(from_hydrodynamical(RealField(64, 1.0), RealField(64, 0.0), g), DomainError);
}

// Soliton in sphere variables versus its hydrodynamic pair.
static Vec3 soliton(double c, double x) {
    const double k = std::sqrt(1 - c * c);
    return Vec3(c * sech(k * x), std::tanh(k * x), k * sech(k * x));
}

TEST(Hydrodynamical, SolitonPhaseDerivativeIsW) {
    const double c = 0.6, k = 0.8;
    Grid1D g(-20, 20, 8001, Boundary::Pinned);
    SpinField f{g, {}};
    for (int i = 0; i < g.n; ++i) f.m.push_back(soliton(c, g.x(i)));
    auto [v, w] = hydro_fields(f);
    double err = 0.0;
    for (int i = 2; i < g.n - 2; ++i) {
        const double vc = k * sech(k * g.x(i));
        err = std::max({err, std::abs(v[i] - vc), std::abs(w[i] - c * vc / (1 - vc * vc))});
    }
    EXPECT_LE(err, 1e-8);
}

TEST(Hydrodynamical, ReconstructionIsFourthOrder) {
    // smooth pair; the phase oracle is Phi = int_0^x w by adaptive quadrature
    auto wfun = [](double x) { return std::sin(x) * std::exp(-0.2 * x * x); };
    auto run = [&](int n) {
        Grid1D g(-10, 10, n, Boundary::Pinned);
        RealField v(n), w(n);
        for (int i = 0; i < n; ++i) {
            const double x = g.x(i);
            v[i] = 0.5 * std::exp(-x * x);
            w[i] = wfun(x);
        }
        auto f = from_hydrodynamical(v, w, g);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = std::sqrt(1 - v[i] * v[i]);
            const double ph = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(wfun, 0.0, g.x(i), 15, 1e-15);
            err = std::max(err, (f.m[i] - Vec3(r * std::cos(ph), r * std::sin(ph), v[i])).norm());
        }
        return err;
    };
    const double e1 = run(201), e2 = run(401), e3 = run(801);
    EXPECT_GE(std::log2(e1 / e2), 3.8);
    EXPECT_GE(std::log2(e2 / e3), 3.8);
}

TEST(SolitonSymmetry, IdentityRotationAndShift) {
    Grid1D g(-20, 20, 401, Boundary::Pinned);
    SpinField f{g, {}};
    for (int i = 0; i < g.n; ++i) f.m.push_back(soliton(0.5, g.x(i)));
    auto same = apply_soliton_symmetry(f, 0.0, 1, 0.0);
    for (int i = 0; i < g.n; ++i) EXPECT_EQ(same.m[i], f.m[i]);
    auto rot = apply_soliton_symmetry(f, pi, 1, 0.0);
    for (int i = 0; i < g.n; ++i) {
        EXPECT_NEAR(rot.m[i][0], -f.m[i][0], 1e-15);
        EXPECT_NEAR(rot.m[i][1], -f.m[i][1], 1e-15);
        EXPECT_NEAR(rot.m[i][2], f.m[i][2], 1e-15);
    }
    auto sh = apply_soliton_symmetry(f, 0.0, 1, 5 * g.h());
    for (int i = 5; i < g.n; ++i) EXPECT_EQ(sh.m[i], f.m[i - 5]);
    // |m| and |m'| preserved
    auto any = apply_soliton_symmetry(f, 0.7, -1, 0.0);
    auto d0 = fd::d1(g, f.m), d1 = fd::d1(g, any.m);
    for (int i = 0; i < g.n; ++i) {
        EXPECT_NEAR(any.m[i].norm(), 1.0, 1e-15);
        EXPECT_NEAR(d0[i].norm(), d1[i].norm(), 1e-13);
    }
}

TEST(Dispersion, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(dispersion_omega(2.0, 0.0, 0.0).first, 4.0);
    const double s = 0.3;
    EXPECT_NEAR(dispersion_omega(1.5, 0.0, 2 * s).first, std::sqrt(std::pow(1.5, 4) + 2 * s * 1.5 * 1.5), 1e-15);
    EXPECT_NEAR(dispersion_omega(0.0, 0.5, 2.0).first, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(dispersion_omega(0.0, 0.5, 2.0).second, -1.0);
    double prev = 0.0;
    for (double k = 0.0; k < 5.0; k += 0.1) {
        const double w = dispersion_omega(k, 0.2, 0.7).first;
        EXPECT_DOUBLE_EQ(w, dispersion_omega(-k, 0.2, 0.7).first);
        EXPECT_GE(w, prev);
        prev = w;
    }
}

TEST(InPlaneConventions, TwoComplexCombinations) {
    Vec3 m(0.6, 0.0, 0.8);
    EXPECT_EQ(in_plane_12(m), cplx(0.6, 0.0));
    EXPECT_EQ(in_plane_13(m), cplx(0.6, 0.8));
}
