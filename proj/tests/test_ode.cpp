#include "llg/ode.hpp"

#include <gtest/gtest.h>

using namespace llg;

TEST(DormandPrince, HarmonicOscillatorHitsOutputs) {
    auto f = [](double, const OdeVec<2>& y) { return OdeVec<2>(y[1], -y[0]); };
    std::vector<double> out;
    for (int i = 1; i <= 100; ++i) out.push_back(0.2 * i);
    double worst = 0.0;
    std::vector<double> seen;
    auto st = integrate_dp45<2>(f, 0.0, OdeVec<2>(1.0, 0.0), out, 1e-12, [](OdeVec<2>&) { return false; },
                                [&](std::size_t, double t, const OdeVec<2>& y) {
                                    seen.push_back(t);
                                    worst = std::max(worst, std::abs(y[0] - std::cos(t)));
                                });
    EXPECT_TRUE(st.ok);
    ASSERT_EQ(seen.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(seen[i], out[i]);
    EXPECT_LE(worst, 1e-10);
}

TEST(DormandPrince, BackwardDirection) {
    auto f = [](double, const OdeVec<1>& y) { return OdeVec<1>(y[0]); };
    double val = 0.0;
    integrate_dp45<1>(f, 0.0, OdeVec<1>(1.0), {-1.0, -2.0}, 1e-12, [](OdeVec<1>&) { return false; },
                      [&](std::size_t, double, const OdeVec<1>& y) { val = y[0]; });
    EXPECT_NEAR(val, std::exp(-2.0), 1e-11);
}

TEST(DormandPrince, ErrorScalesWithTolerance) {
    auto f = [](double t, const OdeVec<1>& y) { return OdeVec<1>(-2.0 * t * y[0]); };
    auto err = [&](double tol) {
        double v = 0.0;
        integrate_dp45<1>(f, 0.0, OdeVec<1>(1.0), {3.0}, tol, [](OdeVec<1>&) { return false; },
                          [&](std::size_t, double, const OdeVec<1>& y) { v = y[0]; });
        return std::abs(v - std::exp(-9.0));
    };
    EXPECT_LE(err(1e-8), 1e-7);
    EXPECT_LE(err(1e-12), 1e-11);
}
