#pragma once

// Collision invariants e_1..e_5, the macroscopic projection P, the
// linearized relaxation operator L = nu_c (P - I) and the hydrodynamic /
// microscopic split f = P~f + (I - P~)f.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bgk/detail/dense.hpp"
#include "bgk/errors.hpp"
#include "bgk/maxwellian.hpp"
#include "bgk/parallel.hpp"
#include "bgk/phase_grid.hpp"

namespace bgk {

/// Discrete velocity inner product sum_v w f g within one cell.
inline double velocity_inner(std::span<const double> f, std::span<const double> g, double weight) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * g[j];
    return weight * s;
}

/// Phase-space inner product <f, g> = sum_x sum_v dx^d w f g.
/// Accumulated cell by cell in index order.
inline double inner(const DistributionField& f, const DistributionField& g) {
    require_same_grid(f, g);
    const auto& grid = f.grid();
    double total = 0.0;
    for (std::size_t i = 0; i < grid.num_cells(); ++i)
        total += velocity_inner(f.cell(i), g.cell(i), grid.weight());
    return grid.cell_volume() * total;
}

inline double norm_l2(const DistributionField& f) { return std::sqrt(inner(f, f)); }

/// Samples of sqrt(m), v_d sqrt(m), (|v|^2 - d)/sqrt(2d) sqrt(m).
inline std::vector<std::vector<double>> sampled_invariants(const PhaseGrid& grid) {
    const int dims = grid.velocity_dims();
    const std::size_t nv = grid.num_velocities();
    const auto sm = grid.sqrt_background();
    std::vector<std::vector<double>> out(dims + 2, std::vector<double>(nv));
    const double scale = 1.0 / std::sqrt(2.0 * dims);
    for (std::size_t j = 0; j < nv; ++j) {
        out[0][j] = sm[j];
        for (int d = 0; d < dims; ++d) out[1 + d][j] = grid.velocity(j, d) * sm[j];
        out[dims + 1][j] = (grid.speed_squared(j) - dims) * scale * sm[j];
    }
    return out;
}

class ProjectionBasis {
public:
    /// Samples the invariants and (by default) re-orthonormalizes them with
    /// modified Gram-Schmidt in the discrete inner product.
    explicit ProjectionBasis(GridPtr grid, bool orthonormalize = true)
        : grid_(std::move(grid)), orthonormalized_(orthonormalize) {
        vectors_ = sampled_invariants(*grid_);
        const std::size_t n = vectors_.size();
        const double w = grid_->weight();
        sampled_gram_.assign(n * n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                sampled_gram_[a * n + b] = velocity_inner(vectors_[a], vectors_[b], w);

        if (orthonormalize) {
            for (std::size_t a = 0; a < n; ++a) {
                const double original = std::sqrt(velocity_inner(vectors_[a], vectors_[a], w));
                for (std::size_t b = 0; b < a; ++b) {
                    const double proj = velocity_inner(vectors_[a], vectors_[b], w);
                    for (std::size_t j = 0; j < vectors_[a].size(); ++j)
                        vectors_[a][j] -= proj * vectors_[b][j];
                }
                const double nrm = std::sqrt(velocity_inner(vectors_[a], vectors_[a], w));
                if (!(nrm > 1e-10 * original))
                    throw RankDeficiency("invariant " + std::to_string(a + 1) +
                                         " is numerically dependent on the previous ones");
                for (double& x : vectors_[a]) x /= nrm;
            }
        }
        gram_.assign(n * n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                gram_[a * n + b] = velocity_inner(vectors_[a], vectors_[b], w);
    }

    const PhaseGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return vectors_.size(); }
    std::span<const double> vector(std::size_t i) const { return vectors_[i]; }
    bool orthonormalized() const noexcept { return orthonormalized_; }

    /// Gram matrix of the basis in use (row-major, size() x size()).
    std::span<const double> gram() const noexcept { return gram_; }
    /// Gram matrix of the raw samples, before re-orthonormalization.
    std::span<const double> sampled_gram() const noexcept { return sampled_gram_; }

    double max_gram_deviation() const {
        const std::size_t n = size();
        double worst = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                worst = std::max(worst, std::abs(gram_[a * n + b] - (a == b ? 1.0 : 0.0)));
        return worst;
    }

    /// <f, e_i> in one cell.
    std::vector<double> coefficients(std::span<const double> cell) const {
        std::vector<double> c(size());
        for (std::size_t a = 0; a < size(); ++a)
            c[a] = velocity_inner(cell, vectors_[a], grid_->weight());
        return c;
    }

    /// out = sum_i <f, e_i> e_i in one cell.
    void project_cell(std::span<const double> cell, std::span<double> out) const {
        const auto c = coefficients(cell);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += c[a] * vectors_[a][j];
    }

private:
    GridPtr grid_;
    bool orthonormalized_;
    std::vector<std::vector<double>> vectors_;
    std::vector<double> gram_;
    std::vector<double> sampled_gram_;
};

inline ProjectionBasis build_basis(const GridPtr& grid, bool orthonormalize = true) {
    return ProjectionBasis(grid, orthonormalize);
}

inline void require_basis_grid(const DistributionField& f, const ProjectionBasis& basis) {
    if (f.grid_ptr() != basis.grid_ptr() && !f.grid().same_layout(basis.grid()))
        throw GridMismatch("basis was built on a different grid");
}

inline DistributionField project(const DistributionField& f, const ProjectionBasis& basis,
                                 unsigned workers = 1) {
    require_basis_grid(f, basis);
    DistributionField out(f.grid_ptr(), f.kind());
    parallel_for(f.grid().num_cells(), workers,
                 [&](std::size_t i) { basis.project_cell(f.cell(i), out.cell(i)); });
    return out;
}

/// L f = nu_c (P f - f).
inline DistributionField apply_L(const DistributionField& f, const ProjectionBasis& basis,
                                 double nu_c, unsigned workers = 1) {
    auto out = project(f, basis, workers);
    auto dst = out.values();
    const auto src = f.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = nu_c * (dst[k] - src[k]);
    return out;
}

// ---------------------------------------------------------------------------
// Micro-macro split
// ---------------------------------------------------------------------------

/// P~f = a sqrt(m) + b.v sqrt(m) + c |v|^2 sqrt(m) with (a, b, c) chosen so
/// that P~f is the discrete orthogonal projection onto that span.
struct MicroMacroSplit {
    std::vector<double> a;
    std::vector<Vec3> b;
    std::vector<double> c;
    DistributionField hydro;
    DistributionField micro;
};

inline MicroMacroSplit micro_macro_split(const DistributionField& f, unsigned workers = 1) {
    const auto& grid = f.grid();
    const int dims = grid.velocity_dims();
    const std::size_t n = dims + 2;
    const std::size_t nv = grid.num_velocities();
    const double w = grid.weight();
    const auto sm = grid.sqrt_background();

    std::vector<std::vector<double>> psi(n, std::vector<double>(nv));
    for (std::size_t j = 0; j < nv; ++j) {
        psi[0][j] = sm[j];
        for (int d = 0; d < dims; ++d) psi[1 + d][j] = grid.velocity(j, d) * sm[j];
        psi[n - 1][j] = grid.speed_squared(j) * sm[j];
    }
    std::vector<double> gram(n * n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) gram[p * n + q] = velocity_inner(psi[p], psi[q], w);

    // Inverse Gram columns, so every cell is a matrix-vector product.
    std::vector<double> inv(n * n);
    for (std::size_t q = 0; q < n; ++q) {
        std::vector<double> e(n, 0.0);
        e[q] = 1.0;
        auto col = detail::solve_dense(n, gram, e);
        if (!col) throw GramSingular("hydrodynamic Gram matrix is singular on this grid");
        for (std::size_t p = 0; p < n; ++p) inv[p * n + q] = (*col)[p];
    }

    MicroMacroSplit out;
    const std::size_t cells = grid.num_cells();
    out.a.assign(cells, 0.0);
    out.b.assign(cells, Vec3{0.0, 0.0, 0.0});
    out.c.assign(cells, 0.0);
    out.hydro = DistributionField(f.grid_ptr(), f.kind());
    out.micro = DistributionField(f.grid_ptr(), f.kind());

    parallel_for(cells, workers, [&](std::size_t i) {
        const auto cell = f.cell(i);
        std::vector<double> rhs(n), coef(n, 0.0);
        for (std::size_t p = 0; p < n; ++p) rhs[p] = velocity_inner(cell, psi[p], w);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q) coef[p] += inv[p * n + q] * rhs[q];
        out.a[i] = coef[0];
        for (int d = 0; d < dims; ++d) out.b[i][d] = coef[1 + d];
        out.c[i] = coef[n - 1];
        auto hydro = out.hydro.cell(i);
        auto micro = out.micro.cell(i);
        for (std::size_t j = 0; j < nv; ++j) {
            double h = 0.0;
            for (std::size_t p = 0; p < n; ++p) h += coef[p] * psi[p][j];
            hydro[j] = h;
            micro[j] = cell[j] - h;
        }
    });
    return out;
}

/// Largest of ||(I-P~)f|| / ||(I-P)f|| and its reciprocal: the constant C
/// realized by f in the norm equivalence between the two microscopic parts.
inline double norm_equivalence_constant(const DistributionField& f, const ProjectionBasis& basis) {
    const auto split = micro_macro_split(f);
    auto pf = project(f, basis);
    DistributionField micro_p(f.grid_ptr(), f.kind());
    auto dst = micro_p.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = f.values()[k] - pf.values()[k];
    const double a = norm_l2(split.micro);
    const double b = norm_l2(micro_p);
    if (a == 0.0 && b == 0.0) return 1.0;
    if (a == 0.0 || b == 0.0) return INFINITY;
    return std::max(a / b, b / a);
}

// ---------------------------------------------------------------------------
// Linearization of the local Maxwellian
// ---------------------------------------------------------------------------

struct RemainderRow {
    double epsilon = 0.0;
    double remainder = 0.0;  // || M(m + eps sqrt(m) f) - m - eps sqrt(m) P f ||
    double ratio = 0.0;      // remainder / eps^2
};

inline std::vector<RemainderRow> linearization_remainder(
    const DistributionField& f, const ProjectionBasis& basis, std::span<const double> epsilons,
    MaxwellianMode mode = MaxwellianMode::conservative) {
    require_basis_grid(f, basis);
    const auto& grid = f.grid();
    const auto m = grid.background();
    const auto sm = grid.sqrt_background();
    const std::size_t nv = grid.num_velocities();
    const auto pf = project(f, basis);

    std::vector<RemainderRow> rows;
    for (double eps : epsilons) {
        DistributionField F(f.grid_ptr(), FieldKind::absolute);
        for (std::size_t k = 0; k < F.values().size(); ++k)
            F.values()[k] = m[k % nv] + eps * sm[k % nv] * f.values()[k];
        const auto macro = compute_moments(F);
        const auto M = local_maxwellian(macro, f.grid_ptr(), mode);
        double sum = 0.0;
        for (std::size_t k = 0; k < F.values().size(); ++k) {
            const double r = M.values()[k] - m[k % nv] - eps * sm[k % nv] * pf.values()[k];
            sum += r * r;
        }
        RemainderRow row;
        row.epsilon = eps;
        row.remainder = std::sqrt(grid.cell_volume() * grid.weight() * sum);
        row.ratio = row.remainder / (eps * eps);
        rows.push_back(row);
    }
    return rows;
}

} // namespace bgk
