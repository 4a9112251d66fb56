#pragma once

// Discrete phase space: periodic spatial torus x truncated uniform velocity
// box with midpoint quadrature. Storage is spatial-major: every spatial cell
// owns one contiguous block of velocity nodes.

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bgk/errors.hpp"

namespace bgk {

struct GridConfig {
    int spatial_dims = 1;
    int spatial_points = 64;  // per spatial dimension
    std::array<double, 3> domain_length{1.0, 1.0, 1.0};
    int velocity_dims = 3;
    int velocity_points = 16;  // per velocity dimension
    double velocity_cutoff = 6.0;
    double quadrature_tolerance = 1e-8;

    bool operator==(const GridConfig&) const = default;
};

class PhaseGrid {
public:
    explicit PhaseGrid(const GridConfig& config) : config_(config) {
        validate();
        init();
    }

    const GridConfig& config() const noexcept { return config_; }

    int spatial_dims() const noexcept { return config_.spatial_dims; }
    int velocity_dims() const noexcept { return config_.velocity_dims; }
    int spatial_points() const noexcept { return config_.spatial_points; }
    int velocity_points() const noexcept { return config_.velocity_points; }
    double velocity_cutoff() const noexcept { return config_.velocity_cutoff; }
    double domain_length(int d) const { return config_.domain_length[d]; }

    std::size_t num_cells() const noexcept { return num_cells_; }
    std::size_t num_velocities() const noexcept { return num_velocities_; }
    std::size_t size() const noexcept { return num_cells_ * num_velocities_; }

    double dx(int d) const { return config_.domain_length[d] / config_.spatial_points; }
    double dv() const noexcept { return dv_; }
    /// Spatial cell volume (product of Δx over spatial dims).
    double cell_volume() const noexcept { return cell_volume_; }
    /// Midpoint quadrature weight, Δv^d for every node.
    double weight() const noexcept { return weight_; }
    double weight_sum() const noexcept { return weight_ * num_velocities_; }
    double domain_volume() const noexcept { return cell_volume_ * num_cells_; }

    /// 1-D velocity nodes, v_k = -v_max + (k + 1/2) Δv.
    std::span<const double> nodes() const noexcept { return nodes_; }

    /// Component d of velocity node j (zero for d >= velocity_dims).
    double velocity(std::size_t j, int d) const { return velocity_[j * 3 + d]; }
    std::array<double, 3> velocity(std::size_t j) const {
        return {velocity_[j * 3], velocity_[j * 3 + 1], velocity_[j * 3 + 2]};
    }
    double speed_squared(std::size_t j) const { return speed2_[j]; }

    /// 1-D index of velocity node j along dimension d.
    int velocity_index(std::size_t j, int d) const {
        std::size_t stride = 1;
        for (int e = config_.velocity_dims - 1; e > d; --e) stride *= config_.velocity_points;
        return static_cast<int>((j / stride) % config_.velocity_points);
    }

    /// Spatial multi-index component d of cell i.
    int cell_index(std::size_t i, int d) const {
        std::size_t stride = 1;
        for (int e = config_.spatial_dims - 1; e > d; --e) stride *= config_.spatial_points;
        return static_cast<int>((i / stride) % config_.spatial_points);
    }
    double position(std::size_t i, int d) const { return cell_index(i, d) * dx(d); }

    /// Background Maxwellian m(v) and sqrt(m) at every velocity node.
    std::span<const double> background() const noexcept { return m_; }
    std::span<const double> sqrt_background() const noexcept { return sqrt_m_; }

    /// Discrete velocity integral of m; checked against 1 at construction.
    double background_mass() const noexcept { return background_mass_; }

    bool same_layout(const PhaseGrid& other) const { return config_ == other.config_; }

private:
    void validate() const {
        const auto& c = config_;
        if (c.spatial_dims < 1 || c.spatial_dims > 3)
            throw InvalidConfig("spatial_dims must be 1, 2 or 3");
        if (c.velocity_dims != 1 && c.velocity_dims != 3)
            throw InvalidConfig("velocity_dims must be 1 or 3");
        if (c.spatial_points < 8) throw InvalidConfig("spatial_points must be >= 8");
        if (c.velocity_points < 8) throw InvalidConfig("velocity_points must be >= 8");
        for (int d = 0; d < c.spatial_dims; ++d)
            if (!(c.domain_length[d] > 0.0)) throw InvalidConfig("domain_length must be > 0");
        if (!(c.velocity_cutoff > 0.0)) throw InvalidConfig("velocity_cutoff must be > 0");
        if (!(c.quadrature_tolerance > 0.0))
            throw InvalidConfig("quadrature_tolerance must be > 0");
    }

    void init() {
        const auto& c = config_;
        num_cells_ = 1;
        cell_volume_ = 1.0;
        for (int d = 0; d < c.spatial_dims; ++d) {
            num_cells_ *= c.spatial_points;
            cell_volume_ *= dx(d);
        }
        num_velocities_ = 1;
        for (int d = 0; d < c.velocity_dims; ++d) num_velocities_ *= c.velocity_points;

        dv_ = 2.0 * c.velocity_cutoff / c.velocity_points;
        weight_ = std::pow(dv_, c.velocity_dims);

        nodes_.resize(c.velocity_points);
        for (int k = 0; k < c.velocity_points; ++k)
            nodes_[k] = -c.velocity_cutoff + (k + 0.5) * dv_;

        velocity_.assign(num_velocities_ * 3, 0.0);
        speed2_.resize(num_velocities_);
        m_.resize(num_velocities_);
        sqrt_m_.resize(num_velocities_);
        const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * c.velocity_dims);
        background_mass_ = 0.0;
        for (std::size_t j = 0; j < num_velocities_; ++j) {
            double s2 = 0.0;
            for (int d = 0; d < c.velocity_dims; ++d) {
                const double v = nodes_[velocity_index(j, d)];
                velocity_[j * 3 + d] = v;
                s2 += v * v;
            }
            speed2_[j] = s2;
            m_[j] = norm * std::exp(-0.5 * s2);
            sqrt_m_[j] = std::sqrt(m_[j]);
            background_mass_ += weight_ * m_[j];
        }
        if (std::abs(background_mass_ - 1.0) > c.quadrature_tolerance) {
            throw CutoffTooSmall("discrete mass of the background Maxwellian is " +
                                 std::to_string(background_mass_) +
                                 " (tolerance " + std::to_string(c.quadrature_tolerance) + ")");
        }
    }

    GridConfig config_;
    std::size_t num_cells_ = 0;
    std::size_t num_velocities_ = 0;
    double cell_volume_ = 0.0;
    double dv_ = 0.0;
    double weight_ = 0.0;
    double background_mass_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> velocity_;
    std::vector<double> speed2_;
    std::vector<double> m_;
    std::vector<double> sqrt_m_;
};

using GridPtr = std::shared_ptr<const PhaseGrid>;

inline GridPtr build_grid(const GridConfig& config) {
    return std::make_shared<const PhaseGrid>(config);
}

enum class FieldKind { absolute, perturbation };

inline const char* to_string(FieldKind kind) {
    return kind == FieldKind::absolute ? "absolute" : "perturbation";
}

/// Values of F (absolute) or f = (F - m)/sqrt(m) (perturbation) on the grid.
class DistributionField {
public:
    DistributionField() = default;
    DistributionField(GridPtr grid, FieldKind kind)
        : grid_(std::move(grid)), kind_(kind), values_(grid_->size(), 0.0) {}
    DistributionField(GridPtr grid, FieldKind kind, std::vector<double> values)
        : grid_(std::move(grid)), kind_(kind), values_(std::move(values)) {
        if (values_.size() != grid_->size())
            throw GridMismatch("value array length does not match the grid");
    }

    const PhaseGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    FieldKind kind() const noexcept { return kind_; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> cell(std::size_t i) {
        return std::span<double>(values_).subspan(i * grid_->num_velocities(),
                                                  grid_->num_velocities());
    }
    std::span<const double> cell(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * grid_->num_velocities(),
                                                        grid_->num_velocities());
    }

    double& at(std::size_t cell, std::size_t vel) {
        return values_[cell * grid_->num_velocities() + vel];
    }
    double at(std::size_t cell, std::size_t vel) const {
        return values_[cell * grid_->num_velocities() + vel];
    }

    bool all_finite() const {
        for (double x : values_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    GridPtr grid_;
    FieldKind kind_ = FieldKind::absolute;
    std::vector<double> values_;
};

inline void require_same_grid(const DistributionField& a, const DistributionField& b) {
    if (a.grid_ptr() != b.grid_ptr() && !a.grid().same_layout(b.grid()))
        throw GridMismatch("fields live on different grids");
}

/// Pointwise F = m + sqrt(m) f  <->  f = (F - m) / sqrt(m).
inline DistributionField convert(const DistributionField& field, FieldKind target) {
    if (field.kind() == target) return field;
    const auto& grid = field.grid();
    const auto m = grid.background();
    const auto sm = grid.sqrt_background();
    const std::size_t nv = grid.num_velocities();
    DistributionField out(field.grid_ptr(), target);
    auto dst = out.values();
    auto src = field.values();
    for (std::size_t k = 0; k < src.size(); ++k) {
        const std::size_t j = k % nv;
        dst[k] = target == FieldKind::absolute ? m[j] + sm[j] * src[k]
                                               : (src[k] - m[j]) / sm[j];
    }
    return out;
}

} // namespace bgk
