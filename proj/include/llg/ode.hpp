#pragma once

#include "llg/core.hpp"

#include <algorithm>
#include <limits>

namespace llg {

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
    double t_reached = 0.0;
    bool ok = true;
};

template <int N>
using OdeVec = Eigen::Matrix<double, N, 1>;

// Dormand-Prince 5(4), FSAL, mixed absolute/relative error control.
// Steps are clipped so every requested output time is hit exactly; `repair`
// may project the state after each accepted step (frame re-orthogonalization),
// `observe(k, t, y)` receives the k-th output.
template <int N, class Rhs, class Repair, class Observe>
OdeStats integrate_dp45(Rhs&& f, double t0, OdeVec<N> y, const std::vector<double>& outputs, double tol,
                        Repair&& repair, Observe&& observe, double h_init = 0.0, double h_max = 0.0) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeStats st;
    st.t_reached = t0;
    if (outputs.empty()) return st;
    const double dir = outputs.back() >= t0 ? 1.0 : -1.0;
    double t = t0;
    std::size_t next = 0;
    while (next < outputs.size() && dir * (outputs[next] - t) <= 0.0) {
        observe(next, t, y);
        ++next;
    }
    if (next == outputs.size()) return st;

    OdeVec<N> k1 = f(t, y), k2, k3, k4, k5, k6, k7, ytmp, ynew;
    st.evaluations = 1;
    const double span = std::abs(outputs.back() - t0);
    double h = h_init > 0.0 ? h_init : std::min(1e-2, 0.01 * span);
    if (h_max <= 0.0) h_max = span;
    double err_prev = 1.0;

    while (next < outputs.size()) {
        const double target = outputs[next];
        bool clipped = false;
        double hs = std::min(h, h_max);
        if (hs >= std::abs(target - t)) {
            hs = std::abs(target - t);
            clipped = true;
        }
        if (hs < 1e-14 * std::max(1.0, std::abs(t))) {
            st.ok = false;
            st.t_reached = t;
            return st;
        }
        const double hh = dir * hs;
        ytmp = y + hh * (a21 * k1);
        k2 = f(t + c2 * hh, ytmp);
        ytmp = y + hh * (a31 * k1 + a32 * k2);
        k3 = f(t + c3 * hh, ytmp);
        ytmp = y + hh * (a41 * k1 + a42 * k2 + a43 * k3);
        k4 = f(t + c4 * hh, ytmp);
        ytmp = y + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        k5 = f(t + c5 * hh, ytmp);
        ytmp = y + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        k6 = f(t + hh, ytmp);
        ynew = y + hh * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = f(t + hh, ynew);
        st.evaluations += 6;

        OdeVec<N> errv = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (int i = 0; i < N; ++i) {
            const double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(ynew[i])));
            err = std::max(err, std::abs(errv[i]) / sc);
        }

        if (std::isfinite(err) && err <= 1.0) {
            ++st.accepted;
            t = clipped ? target : t + hh;
            y = ynew;
            if (repair(y)) {
                k7 = f(t, y);
                ++st.evaluations;
            }
            k1 = k7;
            // PI controller
            const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            err_prev = std::max(err, 1e-4);
            if (!clipped) h = hs * std::clamp(fac, 0.2, 5.0);
            else h = std::max(h, hs);
            while (next < outputs.size() && dir * (outputs[next] - t) <= 0.0) {
                observe(next, t, y);
                ++next;
            }
        } else {
            ++st.rejected;
            const double fac = std::isfinite(err) ? 0.9 * std::pow(err, -0.2) : 0.1;
            h = hs * std::clamp(fac, 0.1, 1.0);
        }
    }
    st.t_reached = t;
    return st;
}

} // namespace llg
