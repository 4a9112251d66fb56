#pragma once

// Spatial Fourier multipliers applied slice-by-slice (one slice per velocity
// node). Velocity nodes are processed in fixed-size blocks with one FFTW plan
// per block size, so every slice sees the same transform no matter how the
// blocks are distributed over workers.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "bgk/parallel.hpp"
#include "bgk/phase_grid.hpp"

namespace bgk {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

} // namespace detail

/// Signed wavenumber for FFT index `idx` of an n-point transform.
inline int signed_wavenumber(int idx, int n) { return idx <= n / 2 ? idx : idx - n; }

class SpatialFourier {
public:
    static constexpr std::size_t block_size = 16;

    explicit SpatialFourier(GridPtr grid) : grid_(std::move(grid)) {
        const int dims = grid_->spatial_dims();
        const int n = grid_->spatial_points();
        shape_.assign(dims, n);
        real_count_ = grid_->num_cells();
        complex_count_ = real_count_ / n * (n / 2 + 1);
        const std::size_t nv = grid_->num_velocities();
        full_plans_ = make_plans(std::min(block_size, nv));
        if (nv > block_size && nv % block_size != 0) tail_plans_ = make_plans(nv % block_size);
    }

    const PhaseGrid& grid() const { return *grid_; }

    /// Per-axis factor table: factor(d, k_idx, v_idx) for spatial dim d,
    /// FFT index k_idx in [0, n) and velocity index v_idx in [0, Nv], where
    /// v_idx = Nv marks "no velocity component along d" (d >= velocity_dims).
    /// The multiplier applied to mode k at velocity node j is the product
    /// over d of factor(d, k_d, v_idx_d(j)).
    template <class AxisFactor>
    void apply(const DistributionField& in, DistributionField& out, AxisFactor&& factor,
               unsigned workers = 1) const {
        const int dims = grid_->spatial_dims();
        const int n = grid_->spatial_points();
        const int nvp = grid_->velocity_points();
        std::vector<std::vector<std::complex<double>>> table(dims);
        for (int d = 0; d < dims; ++d) {
            table[d].resize(static_cast<std::size_t>(n) * (nvp + 1));
            for (int k = 0; k < n; ++k)
                for (int v = 0; v <= nvp; ++v) table[d][k * (nvp + 1) + v] = factor(d, k, v);
        }
        run_blocks(in, out, table, workers);
    }

private:
    struct PlanPair {
        std::size_t howmany = 0;
        detail::FftwPlan forward;
        detail::FftwPlan backward;
    };

    PlanPair make_plans(std::size_t howmany) const {
        PlanPair p;
        p.howmany = howmany;
        std::vector<double> r(real_count_ * howmany);
        std::vector<std::complex<double>> c(complex_count_ * howmany);
        const int rank = static_cast<int>(shape_.size());
        const int stride = static_cast<int>(howmany);
        std::lock_guard lock(detail::fftw_planner_mutex());
        p.forward.reset(fftw_plan_many_dft_r2c(
            rank, shape_.data(), stride, r.data(), nullptr, stride, 1,
            reinterpret_cast<fftw_complex*>(c.data()), nullptr, stride, 1,
            FFTW_ESTIMATE | FFTW_UNALIGNED));
        p.backward.reset(fftw_plan_many_dft_c2r(
            rank, shape_.data(), stride, reinterpret_cast<fftw_complex*>(c.data()), nullptr,
            stride, 1, r.data(), nullptr, stride, 1,
            FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT));
        return p;
    }

    void run_blocks(const DistributionField& in, DistributionField& out,
                    const std::vector<std::vector<std::complex<double>>>& table,
                    unsigned workers) const {
        const std::size_t nv = grid_->num_velocities();
        const std::size_t full = full_plans_.howmany;
        const std::size_t nblocks = (nv + full - 1) / full;
        const int dims = grid_->spatial_dims();
        const int n = grid_->spatial_points();
        const int nvp = grid_->velocity_points();
        const int vdims = grid_->velocity_dims();
        const double scale = 1.0 / static_cast<double>(real_count_);
        const int half = n / 2 + 1;

        parallel_for(nblocks, workers, [&](std::size_t blk) {
            const std::size_t j0 = blk * full;
            const std::size_t bs = std::min(full, nv - j0);
            const PlanPair& plans = bs == full ? full_plans_ : tail_plans_;
            std::vector<double> r(real_count_ * bs);
            std::vector<std::complex<double>> c(complex_count_ * bs);

            for (std::size_t i = 0; i < real_count_; ++i) {
                const auto src = in.cell(i);
                std::copy_n(src.begin() + j0, bs, r.begin() + i * bs);
            }
            fftw_execute_dft_r2c(plans.forward.get(), r.data(),
                                 reinterpret_cast<fftw_complex*>(c.data()));

            // velocity index along each spatial axis for the block's nodes
            std::vector<int> vidx(bs * 3);
            for (std::size_t b = 0; b < bs; ++b)
                for (int d = 0; d < dims; ++d)
                    vidx[b * 3 + d] = d < vdims ? grid_->velocity_index(j0 + b, d) : nvp;

            for (std::size_t q = 0; q < complex_count_; ++q) {
                // decompose q over shape (n, ..., n/2+1), last axis fastest
                int kidx[3] = {0, 0, 0};
                std::size_t rem = q;
                kidx[dims - 1] = static_cast<int>(rem % half);
                rem /= half;
                for (int d = dims - 2; d >= 0; --d) {
                    kidx[d] = static_cast<int>(rem % n);
                    rem /= n;
                }
                auto* row = c.data() + q * bs;
                for (std::size_t b = 0; b < bs; ++b) {
                    std::complex<double> mult = scale;
                    for (int d = 0; d < dims; ++d)
                        mult *= table[d][kidx[d] * (nvp + 1) + vidx[b * 3 + d]];
                    row[b] *= mult;
                }
            }
            fftw_execute_dft_c2r(plans.backward.get(), reinterpret_cast<fftw_complex*>(c.data()),
                                 r.data());
            for (std::size_t i = 0; i < real_count_; ++i) {
                auto dst = out.cell(i);
                std::copy_n(r.begin() + i * bs, bs, dst.begin() + j0);
            }
        });
    }

    GridPtr grid_;
    std::vector<int> shape_;
    std::size_t real_count_ = 0;
    std::size_t complex_count_ = 0;
    PlanPair full_plans_;
    PlanPair tail_plans_;
};

} // namespace bgk
