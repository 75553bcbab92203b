#pragma once

#include "llg/core.hpp"

#include <Eigen/Dense>

#include <vector>

namespace llg {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
    std::vector<double> residuals;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two matching points");
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = x[i];
        A(i, 1) = 1.0;
        b[i] = y[i];
    }
    Eigen::Vector2d p = A.colPivHouseholderQr().solve(b);
    LineFit f;
    f.slope = p[0];
    f.intercept = p[1];
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
        f.residuals.push_back(y[i] - (p[0] * x[i] + p[1]));
        ss += sqr(f.residuals.back());
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

struct SlopeFit {
    LineFit fit;
    bool dropped_largest = false;
    std::size_t used = 0;
};

// Least squares on (log h, log e). With four or more points the largest h is
// dropped once when its residual against the fit of the remaining points
// exceeds twice the RMS of the full fit (pre-asymptotic point). The in-sample
// residual cannot reach that level with four points. Residuals below
// drop_floor (in log units) never trigger, so clean power laws keep all points.
inline SlopeFit fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& e, double drop_floor = 0.05) {
    require(h.size() == e.size() && h.size() >= 2, "fit_loglog_slope: need at least two points");
    std::vector<double> lx, ly;
    std::size_t imax = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        require(h[i] > 0.0 && e[i] > 0.0, "fit_loglog_slope: values must be positive");
        lx.push_back(std::log(h[i]));
        ly.push_back(std::log(e[i]));
        if (h[i] > h[imax]) imax = i;
    }
    SlopeFit out;
    out.fit = fit_line(lx, ly);
    out.used = h.size();
    if (h.size() >= 4) {
        const double x0 = lx[imax], y0 = ly[imax];
        lx.erase(lx.begin() + imax);
        ly.erase(ly.begin() + imax);
        LineFit rest = fit_line(lx, ly);
        const double r = std::abs(y0 - (rest.slope * x0 + rest.intercept));
        if (r > 2.0 * out.fit.rms && r > drop_floor) {
            out.fit = rest;
            out.dropped_largest = true;
            out.used = h.size() - 1;
        }
    }
    return out;
}

} // namespace llg
