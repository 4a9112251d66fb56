#pragma once

// Free transport d_t F + v . grad_x F = 0 on the periodic torus, solved along
// exact characteristics x -> x - v dt for every velocity node.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "bgk/parallel.hpp"
#include "bgk/phase_grid.hpp"
#include "bgk/spectral.hpp"

namespace bgk {

enum class TransportKind { semi_lagrangian_spline, spectral_shift };

inline const char* to_string(TransportKind k) {
    return k == TransportKind::spectral_shift ? "spectral_shift" : "semi_lagrangian_spline";
}

/// Periodic cubic B-spline interpolation on a uniform n-point grid.
/// The coefficient system (c_{i-1} + 4 c_i + c_{i+1}) / 6 = f_i is cyclic
/// tridiagonal and solved by Thomas elimination plus a Sherman-Morrison
/// correction; the factorization is computed once per n.
class PeriodicCubicSpline {
public:
    explicit PeriodicCubicSpline(int n) : n_(n), cprime_(n), denom_(n), z_(n) {
        const double diag = 4.0 / 6.0, off = 1.0 / 6.0;
        gamma_ = -diag;
        std::vector<double> bb(n, diag);
        bb[0] = diag - gamma_;
        bb[n - 1] = diag - off * off / gamma_;
        // Thomas factorization of the modified tridiagonal matrix
        denom_[0] = bb[0];
        cprime_[0] = off / denom_[0];
        for (int i = 1; i < n; ++i) {
            denom_[i] = bb[i] - off * cprime_[i - 1];
            cprime_[i] = off / denom_[i];
        }
        std::vector<double> u(n, 0.0);
        u[0] = gamma_;
        u[n - 1] = off;
        z_ = u;
        solve_tridiagonal(z_);
        zfactor_ = 1.0 + z_[0] + off * z_[n - 1] / gamma_;
    }

    int size() const noexcept { return n_; }

    /// In place: values -> spline coefficients.
    void coefficients(std::vector<double>& x) const {
        solve_tridiagonal(x);
        const double off = 1.0 / 6.0;
        const double fact = (x[0] + off * x[n_ - 1] / gamma_) / zfactor_;
        for (int i = 0; i < n_; ++i) x[i] -= fact * z_[i];
    }

    /// out_i = S(i - shift) for a shift measured in grid cells.
    void shift(const std::vector<double>& coef, double shift, std::vector<double>& out) const {
        const double p = -shift;
        const double base = std::floor(p);
        const double t = p - base;
        const long m0 = static_cast<long>(base);
        const double t2 = t * t, t3 = t2 * t;
        const double b0 = (1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0;
        const double b1 = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
        const double b2 = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
        const double b3 = t3 / 6.0;
        out.resize(n_);
        auto wrap = [this](long k) { return static_cast<std::size_t>(((k % n_) + n_) % n_); };
        for (int i = 0; i < n_; ++i) {
            const long m = i + m0;
            out[i] = b0 * coef[wrap(m - 1)] + b1 * coef[wrap(m)] + b2 * coef[wrap(m + 1)] +
                     b3 * coef[wrap(m + 2)];
        }
    }

private:
    void solve_tridiagonal(std::vector<double>& r) const {
        const double off = 1.0 / 6.0;
        r[0] /= denom_[0];
        for (int i = 1; i < n_; ++i) r[i] = (r[i] - off * r[i - 1]) / denom_[i];
        for (int i = n_ - 2; i >= 0; --i) r[i] -= cprime_[i] * r[i + 1];
    }

    int n_;
    double gamma_ = 0.0;
    double zfactor_ = 1.0;
    std::vector<double> cprime_;
    std::vector<double> denom_;
    std::vector<double> z_;
};

class Transport {
public:
    Transport(GridPtr grid, TransportKind kind)
        : grid_(std::move(grid)), kind_(kind), spline_(grid_->spatial_points()) {
        if (kind_ == TransportKind::spectral_shift) fourier_.emplace(grid_);
    }

    TransportKind kind() const noexcept { return kind_; }

    /// Largest number of spatial cells crossed by a characteristic in dt.
    double max_crossings(double dt) const {
        double worst = 0.0;
        const double vmax = grid_->nodes().back();
        for (int d = 0; d < std::min(grid_->spatial_dims(), grid_->velocity_dims()); ++d)
            worst = std::max(worst, vmax * std::abs(dt) / grid_->dx(d));
        return worst;
    }

    /// In-place advection of every velocity slice by x -> x - v dt.
    void advance(DistributionField& field, double dt, unsigned workers = 1) const {
        if (dt == 0.0) return;
        if (kind_ == TransportKind::spectral_shift)
            advance_spectral(field, dt, workers);
        else
            advance_spline(field, dt, workers);
    }

private:
    void advance_spectral(DistributionField& field, double dt, unsigned workers) const {
        const int n = grid_->spatial_points();
        const int nvp = grid_->velocity_points();
        const auto nodes = grid_->nodes();
        auto factor = [&](int d, int kidx, int vidx) -> std::complex<double> {
            if (vidx == nvp) return 1.0;
            // A real grid function cannot carry a shifted Nyquist mode, so it is
            // dropped: the step is then exact advection of the resolved band.
            if (n % 2 == 0 && kidx == n / 2) return nodes[vidx] == 0.0 ? 1.0 : 0.0;
            const int k = signed_wavenumber(kidx, n);
            const double angle = -2.0 * std::numbers::pi * k * nodes[vidx] * dt / grid_->domain_length(d);
            return {std::cos(angle), std::sin(angle)};
        };
        fourier_->apply(field, field, factor, workers);
    }

    void advance_spline(DistributionField& field, double dt, unsigned workers) const {
        const int dims = grid_->spatial_dims();
        const int n = grid_->spatial_points();
        const std::size_t nv = grid_->num_velocities();
        const std::size_t cells = grid_->num_cells();
        parallel_for(nv, workers, [&](std::size_t j) {
            std::vector<double> slice(cells), line(n), shifted(n);
            for (std::size_t i = 0; i < cells; ++i) slice[i] = field.at(i, j);
            for (int d = 0; d < dims; ++d) {
                const double v = grid_->velocity(j, d);
                if (v == 0.0) continue;
                const double s = v * dt / grid_->dx(d);
                std::size_t stride = 1;
                for (int e = dims - 1; e > d; --e) stride *= n;
                // every line along axis d: start indices with axis-d index 0
                for (std::size_t start = 0; start < cells; ++start) {
                    if ((start / stride) % n != 0) continue;
                    for (int k = 0; k < n; ++k) line[k] = slice[start + k * stride];
                    spline_.coefficients(line);
                    spline_.shift(line, s, shifted);
                    for (int k = 0; k < n; ++k) slice[start + k * stride] = shifted[k];
                }
            }
            for (std::size_t i = 0; i < cells; ++i) field.at(i, j) = slice[i];
        });
    }

    GridPtr grid_;
    TransportKind kind_;
    PeriodicCubicSpline spline_;
    std::optional<SpatialFourier> fourier_;
};

} // namespace bgk
