#pragma once

#include "llg/grid.hpp"

#include <fftw3.h>

#include <memory>
#include <mutex>

namespace llg {

namespace detail {
// FFTW's planner is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
} // namespace detail

// Spectral calculus on a Grid1D. Periodic grids use the DFT directly; pinned
// grids are even-reflected about both ends (length 2(n-1)), which is exact for
// fields that are flat at the far field and keeps images of interior features
// a full domain length away.
class Spectral1D {
public:
    explicit Spectral1D(const Grid1D& g) : grid_(g) {
        n_ = g.n;
        N_ = g.periodic() ? g.n : 2 * (g.n - 1);
        const double L = g.h() * N_;
        k_.resize(N_);
        for (int j = 0; j < N_; ++j) {
            const int jj = (j <= N_ / 2) ? j : j - N_;
            k_[j] = 2.0 * pi * jj / L;
        }
        cin_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * N_)));
        cout_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * N_)));
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_1d(N_, cin_.get(), cout_.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(N_, cout_.get(), cin_.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    Spectral1D(const Spectral1D&) = delete;
    Spectral1D& operator=(const Spectral1D&) = delete;
    ~Spectral1D() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    const Grid1D& grid() const { return grid_; }
    int extended_size() const { return N_; }
    const std::vector<double>& wavenumbers() const { return k_; }
    bool nyquist(int j) const { return N_ % 2 == 0 && j == N_ / 2; }

    // Forward transform of the (extended) field, unnormalized.
    ComplexField forward(const ComplexField& f) {
        load(f);
        fftw_execute(fwd_);
        ComplexField out(N_);
        for (int j = 0; j < N_; ++j) out[j] = cplx(cout_.get()[j][0], cout_.get()[j][1]);
        return out;
    }
    ComplexField forward(const RealField& f) { return forward(ComplexField(f.begin(), f.end())); }

    // Inverse transform restricted to grid nodes, normalized.
    ComplexField inverse(const ComplexField& fhat) {
        for (int j = 0; j < N_; ++j) {
            cout_.get()[j][0] = fhat[j].real();
            cout_.get()[j][1] = fhat[j].imag();
        }
        fftw_execute(bwd_);
        ComplexField out(n_);
        const double s = 1.0 / N_;
        for (int i = 0; i < n_; ++i) out[i] = cplx(cin_.get()[i][0], cin_.get()[i][1]) * s;
        return out;
    }

    // Apply a Fourier multiplier symbol(k).
    template <class Symbol>
    ComplexField apply(const ComplexField& f, Symbol&& symbol) {
        ComplexField fh = forward(f);
        for (int j = 0; j < N_; ++j) fh[j] *= symbol(k_[j]);
        return inverse(fh);
    }

    template <class Symbol>
    RealField apply_real(const RealField& f, Symbol&& symbol) {
        ComplexField g = apply(ComplexField(f.begin(), f.end()), symbol);
        RealField out(n_);
        for (int i = 0; i < n_; ++i) out[i] = g[i].real();
        return out;
    }

    ComplexField derivative(const ComplexField& f, int order) {
        ComplexField fh = forward(f);
        for (int j = 0; j < N_; ++j) fh[j] *= ik_power(j, order);
        return inverse(fh);
    }

    RealField derivative(const RealField& f, int order) {
        ComplexField g = derivative(ComplexField(f.begin(), f.end()), order);
        RealField out(n_);
        for (int i = 0; i < n_; ++i) out[i] = g[i].real();
        return out;
    }

    // Two real fields packed into one complex transform: returns d^order of each.
    std::pair<RealField, RealField> derivative2(const RealField& a, const RealField& b, int order) {
        ComplexField z(n_);
        for (int i = 0; i < n_; ++i) z[i] = cplx(a[i], b[i]);
        ComplexField d = derivative(z, order);
        RealField da(n_), db(n_);
        for (int i = 0; i < n_; ++i) {
            da[i] = d[i].real();
            db[i] = d[i].imag();
        }
        return {da, db};
    }

    // (ik)^order, with the Nyquist mode dropped for odd orders.
    cplx ik_power(int j, int order) const {
        if (order % 2 == 1 && nyquist(j)) return 0.0;
        cplx r = 1.0;
        for (int p = 0; p < order; ++p) r *= cplx(0.0, k_[j]);
        return r;
    }

    // Sobolev norms on periodic grids, normalized so that s = 0 gives the
    // trapezoidal L^2 norm.
    double sobolev_norm(const ComplexField& f, double s, bool homogeneous) {
        require(grid_.periodic(), "sobolev_norm: periodic grid required");
        ComplexField fh = forward(f);
        double acc = 0.0;
        for (int j = 0; j < N_; ++j) {
            const double k2 = k_[j] * k_[j];
            const double wgt = homogeneous ? (s == 0.0 ? 1.0 : std::pow(k2, s)) : std::pow(1.0 + k2, s);
            acc += wgt * std::norm(fh[j]);
        }
        return std::sqrt(acc * grid_.h() / N_);
    }
    double sobolev_norm(const RealField& f, double s, bool homogeneous) {
        return sobolev_norm(ComplexField(f.begin(), f.end()), s, homogeneous);
    }

private:
    void load(const ComplexField& f) {
        require(static_cast<int>(f.size()) == n_, "Spectral1D: field size mismatch");
        auto* p = cin_.get();
        for (int i = 0; i < n_; ++i) {
            p[i][0] = f[i].real();
            p[i][1] = f[i].imag();
        }
        if (!grid_.periodic())
            for (int i = 1; i < n_ - 1; ++i) {
                p[N_ - i][0] = f[i].real();
                p[N_ - i][1] = f[i].imag();
            }
    }

    Grid1D grid_;
    int n_ = 0, N_ = 0;
    std::vector<double> k_;
    std::unique_ptr<fftw_complex[], detail::FftwFree> cin_, cout_;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

} // namespace llg
