#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace bgk::detail {

/// Solves the n x n system A x = b (row-major A) by Gaussian elimination
/// with partial pivoting. Returns nullopt when a pivot falls below
/// `pivot_floor` times the largest entry of A.
inline std::optional<std::vector<double>> solve_dense(std::size_t n, std::vector<double> a,
                                                      std::vector<double> b,
                                                      double pivot_floor = 1e-14) {
    double scale = 0.0;
    for (double x : a) scale = std::max(scale, std::abs(x));
    if (scale == 0.0 || !std::isfinite(scale)) return std::nullopt;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) <= pivot_floor * scale) return std::nullopt;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] / a[col * n + col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
        x[i] = s / a[i * n + i];
    }
    return x;
}

} // namespace bgk::detail
