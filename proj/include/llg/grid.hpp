#pragma once

#include "llg/core.hpp"

#include <array>
#include <span>

namespace llg {

enum class Boundary { Periodic, Pinned };

// Uniform 1D grid. Periodic grids omit the right endpoint; pinned grids keep
// both endpoints and hold them at the far-field values.
struct Grid1D {
    double x_min = -1.0;
    double x_max = 1.0;
    int n = 16;
    Boundary boundary = Boundary::Periodic;

    Grid1D() = default;
    Grid1D(double a, double b, int nodes, Boundary bc) : x_min(a), x_max(b), n(nodes), boundary(bc) {
        require(nodes >= 16, "Grid1D: need at least 16 nodes");
        require(b > a, "Grid1D: x_max must exceed x_min");
    }

    double h() const {
        return boundary == Boundary::Periodic ? (x_max - x_min) / n : (x_max - x_min) / (n - 1);
    }
    double x(int i) const { return x_min + i * h(); }
    double length() const { return x_max - x_min; }
    bool periodic() const { return boundary == Boundary::Periodic; }

    std::vector<double> nodes() const {
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = x(i);
        return out;
    }
};

namespace fd {

// Central-difference weights, index 0 is the center, entries k = 1..r are for
// offsets +-k (first derivative antisymmetric, second symmetric).
inline std::span<const double> d1_weights(int order) {
    static constexpr std::array<double, 2> o2{0.0, 0.5};
    static constexpr std::array<double, 3> o4{0.0, 2.0 / 3.0, -1.0 / 12.0};
    static constexpr std::array<double, 4> o6{0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
    static constexpr std::array<double, 5> o8{0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    switch (order) {
    case 2: return o2;
    case 4: return o4;
    case 6: return o6;
    case 8: return o8;
    default: throw DomainError("fd: unsupported order");
    }
}

inline std::span<const double> d2_weights(int order) {
    static constexpr std::array<double, 2> o2{-2.0, 1.0};
    static constexpr std::array<double, 3> o4{-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0};
    static constexpr std::array<double, 4> o6{-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
    static constexpr std::array<double, 5> o8{-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
    switch (order) {
    case 2: return o2;
    case 4: return o4;
    case 6: return o6;
    case 8: return o8;
    default: throw DomainError("fd: unsupported order");
    }
}

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

// Index used for a neighbour: periodic wrap, or clamp (constant far field).
inline int neighbour(const Grid1D& g, int i) {
    if (g.periodic()) return wrap(i, g.n);
    return std::clamp(i, 0, g.n - 1);
}

template <class T>
std::vector<T> d1(const Grid1D& g, const std::vector<T>& f, int order = 4) {
    auto w = d1_weights(order);
    const int r = static_cast<int>(w.size()) - 1;
    const double ih = 1.0 / g.h();
    std::vector<T> out(f.size());
    for (int i = 0; i < g.n; ++i) {
        T acc = (f[neighbour(g, i + 1)] - f[neighbour(g, i - 1)]) * w[1];
        for (int k = 2; k <= r; ++k) acc += (f[neighbour(g, i + k)] - f[neighbour(g, i - k)]) * w[k];
        out[i] = acc * ih;
    }
    return out;
}

template <class T>
std::vector<T> d2(const Grid1D& g, const std::vector<T>& f, int order = 4) {
    auto w = d2_weights(order);
    const int r = static_cast<int>(w.size()) - 1;
    const double ih2 = 1.0 / (g.h() * g.h());
    std::vector<T> out(f.size());
    for (int i = 0; i < g.n; ++i) {
        T acc = f[i] * w[0];
        for (int k = 1; k <= r; ++k) acc += (f[neighbour(g, i + k)] + f[neighbour(g, i - k)]) * w[k];
        out[i] = acc * ih2;
    }
    return out;
}

// Derivative at an interior sample of a plain array; caller guarantees the
// stencil fits.
template <class T>
T d1_at(const std::vector<T>& f, double h, int i, int order) {
    auto w = d1_weights(order);
    T acc = (f[i + 1] - f[i - 1]) * w[1];
    for (int k = 2; k < static_cast<int>(w.size()); ++k) acc += (f[i + k] - f[i - k]) * w[k];
    return acc * (1.0 / h);
}

template <class T>
T d2_at(const std::vector<T>& f, double h, int i, int order) {
    auto w = d2_weights(order);
    T acc = f[i] * w[0];
    for (int k = 1; k < static_cast<int>(w.size()); ++k) acc += (f[i + k] + f[i - k]) * w[k];
    return acc * (1.0 / (h * h));
}

} // namespace fd

template <class T>
T trapezoid(const Grid1D& g, const std::vector<T>& f) {
    T acc = f[0] * 0.0;
    for (int i = 0; i < g.n; ++i) acc += f[i];
    if (!g.periodic()) acc -= (f.front() + f.back()) * 0.5;
    return acc * g.h();
}

// F(x_i) = int_{x_0}^{x_i} f, trapezoidal, F(x_0) = 0.
template <class T>
std::vector<T> cumulative_trapezoid(const Grid1D& g, const std::vector<T>& f) {
    std::vector<T> out(f.size());
    out[0] = f[0] * 0.0;
    const double h = g.h();
    for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + (f[i] + f[i - 1]) * (0.5 * h);
    return out;
}

// Fourth-order cumulative integral: interior cells by the cubic through
// four neighbours, one-sided cubics on the first and last cell.
template <class T>
std::vector<T> cumulative_integral4(const Grid1D& g, const std::vector<T>& f) {
    const std::size_t n = f.size();
    if (n < 4) return cumulative_trapezoid(g, f);
    std::vector<T> out(n);
    out[0] = f[0] * 0.0;
    const double c = g.h() / 24.0;
    for (std::size_t i = 1; i < n; ++i) {
        T cell;
        if (i == 1)
            cell = (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * c;
        else if (i == n - 1)
            cell = (f[n - 1] * 9.0 + f[n - 2] * 19.0 - f[n - 3] * 5.0 + f[n - 4]) * c;
        else
            cell = ((f[i - 1] + f[i]) * 13.0 - f[i - 2] - f[i + 1]) * c;
        out[i] = out[i - 1] + cell;
    }
    return out;
}

// Six-point Lagrange interpolation on a uniform grid, with periodic wrap or
// constant extension outside a pinned grid.
template <class T>
T interpolate(const Grid1D& g, const std::vector<T>& f, double x) {
    const double h = g.h();
    double s = (x - g.x_min) / h;
    if (!g.periodic()) {
        if (s <= 0.0) return f.front();
        if (s >= g.n - 1) return f.back();
    }
    const int i0 = static_cast<int>(std::floor(s));
    const double t = s - i0;
    // nodes i0-2 .. i0+3
    T acc = f[0] * 0.0;
    for (int k = -2; k <= 3; ++k) {
        double wgt = 1.0;
        for (int j = -2; j <= 3; ++j)
            if (j != k) wgt *= (t - j) / double(k - j);
        acc += f[fd::neighbour(g, i0 + k)] * wgt;
    }
    return acc;
}

inline double sup_norm(const RealField& f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

inline double sup_norm(const ComplexField& f) {
    double m = 0.0;
    for (auto v : f) m = std::max(m, std::abs(v));
    return m;
}

} // namespace llg
