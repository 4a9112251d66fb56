#pragma once

// Transport / relaxation splitting for the nonlinear BGK equation and for
// its linearization f_t + v . grad_x f = L f.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bgk/errors.hpp"
#include "bgk/linearized.hpp"
#include "bgk/maxwellian.hpp"
#include "bgk/parallel.hpp"
#include "bgk/phase_grid.hpp"
#include "bgk/transport.hpp"

namespace bgk {

enum class SolverMode { nonlinear, linearized };
enum class Splitting { lie, strang };

/// Weight given to M(F) over a relaxation substep of length dt with frozen
/// nu and M(F): exact = 1 - exp(-nu dt), implicit_euler = nu dt / (1 + nu dt).
enum class RelaxationWeight { exact, implicit_euler };

inline const char* to_string(SolverMode m) { return m == SolverMode::nonlinear ? "nonlinear" : "linearized"; }
inline const char* to_string(Splitting s) { return s == Splitting::lie ? "lie" : "strang"; }
inline const char* to_string(RelaxationWeight r) {
    return r == RelaxationWeight::exact ? "exact" : "implicit_euler";
}

struct SolverConfig {
    double dt = 0.01;
    double t_end = 1.0;
    SolverMode mode = SolverMode::nonlinear;
    TransportKind transport = TransportKind::spectral_shift;
    MaxwellianMode maxwellian_mode = MaxwellianMode::conservative;
    double cfl_guard = 2.0;
    Splitting splitting = Splitting::strang;
    RelaxationWeight relaxation = RelaxationWeight::exact;
    double sample_interval = 0.1;
    double conservative_tolerance = default_conservative_tolerance;
    unsigned workers = 1;
    /// Track sum F log F across every nonlinear relaxation substep.
    bool monitor_relaxation_entropy = false;

    bool operator==(const SolverConfig&) const = default;
};

inline double relaxation_weight(double nu_dt, RelaxationWeight kind) {
    if (kind == RelaxationWeight::exact) return -std::expm1(-nu_dt);
    return nu_dt / (1.0 + nu_dt);
}

inline double entropy_density(double F) { return F > 0.0 ? F * std::log(F) : 0.0; }

struct RelaxationReport {
    double entropy_before = 0.0;  // sum w dx^d F log F (only when monitored)
    double entropy_after = 0.0;
};

/// F+ = (1 - theta) F + theta M(F) per cell, with nu and M(F) frozen at the
/// pre-step moments.
inline RelaxationReport relaxation_step(DistributionField& field, double dt,
                                        const CollisionFrequencySpec& spec, MaxwellianMode mode,
                                        RelaxationWeight weight = RelaxationWeight::exact,
                                        double tolerance = default_conservative_tolerance,
                                        unsigned workers = 1, bool monitor_entropy = false) {
    if (field.kind() != FieldKind::absolute)
        throw InvalidConfig("relaxation_step needs an absolute distribution F");
    const auto& grid = field.grid();
    const std::size_t cells = grid.num_cells();
    std::vector<double> h_before(cells, 0.0), h_after(cells, 0.0);
    std::vector<double> failure(cells, 0.0);

    parallel_for(cells, workers, [&](std::size_t i) {
        auto F = field.cell(i);
        const auto mo = cell_moments(F, grid);
        const auto state = macro_from_moments(mo, grid.velocity_dims(), i);
        const double nu = collision_frequency(state.rho, state.T, spec);
        std::vector<double> M(F.size());
        try {
            fill_local_maxwellian(mo, grid, mode, tolerance, i, M);
        } catch (const NewtonDivergence& e) {
            failure[i] = e.residual();
            return;
        }
        const double theta = relaxation_weight(nu * dt, weight);
        double hb = 0.0, ha = 0.0;
        for (std::size_t j = 0; j < F.size(); ++j) {
            if (monitor_entropy) hb += entropy_density(F[j]);
            F[j] = (1.0 - theta) * F[j] + theta * M[j];
            if (monitor_entropy) ha += entropy_density(F[j]);
        }
        h_before[i] = hb;
        h_after[i] = ha;
    });
    const auto worst = std::max_element(failure.begin(), failure.end());
    if (*worst > 0.0)
        throw NewtonDivergence(static_cast<std::size_t>(worst - failure.begin()), *worst);

    RelaxationReport report;
    const double scale = grid.weight() * grid.cell_volume();
    for (std::size_t i = 0; i < cells; ++i) {
        report.entropy_before += h_before[i];
        report.entropy_after += h_after[i];
    }
    report.entropy_before *= scale;
    report.entropy_after *= scale;
    return report;
}

/// Exact flow of f' = nu_c (P f - f): f+ = P f + exp(-nu_c dt) (f - P f).
inline void linearized_relaxation(DistributionField& f, double dt, const ProjectionBasis& basis,
                                  double nu_c, unsigned workers = 1) {
    require_basis_grid(f, basis);
    const double decay = std::exp(-nu_c * dt);
    const std::size_t nv = f.grid().num_velocities();
    parallel_for(f.grid().num_cells(), workers, [&](std::size_t i) {
        auto cell = f.cell(i);
        std::vector<double> pf(nv);
        basis.project_cell(cell, pf);
        for (std::size_t j = 0; j < nv; ++j) cell[j] = pf[j] + decay * (cell[j] - pf[j]);
    });
}

/// Transport followed by the exact linear relaxation.
inline void linearized_step(DistributionField& f, double dt, const ProjectionBasis& basis,
                            double nu_c, const Transport& transport, unsigned workers = 1) {
    transport.advance(f, dt, workers);
    linearized_relaxation(f, dt, basis, nu_c, workers);
}

struct RunResult {
    DistributionField final_state;
    std::size_t steps = 0;
    double t_final = 0.0;
    std::vector<std::string> warnings;
    /// Largest relative increase of sum F log F over a relaxation substep
    /// (monitor_relaxation_entropy only; negative means every substep decreased it).
    double max_relaxation_entropy_increase = -std::numeric_limits<double>::infinity();
};

/// Sink invoked at t = 0, every sample interval and at t_end, with the
/// working field (absolute F in nonlinear mode, perturbation f otherwise).
using SnapshotSink = std::function<void(double t, std::size_t step, const DistributionField&)>;
using TwinSnapshotSink = std::function<void(double t, std::size_t step, const DistributionField&,
                                            const DistributionField&)>;

class Solver {
public:
    Solver(GridPtr grid, SolverConfig config, CollisionFrequencySpec spec)
        : grid_(std::move(grid)), config_(config), spec_(spec),
          transport_(grid_, config_.transport), basis_(grid_) {
        if (!(config_.dt > 0.0)) throw InvalidConfig("dt must be > 0");
        if (!(config_.t_end >= 0.0)) throw InvalidConfig("t_end must be >= 0");
        if (!(config_.sample_interval > 0.0)) throw InvalidConfig("sample_interval must be > 0");
    }

    const SolverConfig& config() const noexcept { return config_; }
    const CollisionFrequencySpec& frequency() const noexcept { return spec_; }
    const ProjectionBasis& basis() const noexcept { return basis_; }
    const Transport& transport() const noexcept { return transport_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }

    FieldKind working_kind() const {
        return config_.mode == SolverMode::nonlinear ? FieldKind::absolute : FieldKind::perturbation;
    }

    /// Advances `steps` steps of size dt. Under Strang splitting the
    /// half transports of consecutive steps are merged.
    void advance(DistributionField& field, std::size_t steps, double dt) {
        if (steps == 0) return;
        const unsigned w = config_.workers;
        if (config_.splitting == Splitting::strang) {
            transport_.advance(field, 0.5 * dt, w);
            for (std::size_t s = 0; s < steps; ++s) {
                relax(field, dt);
                transport_.advance(field, s + 1 < steps ? dt : 0.5 * dt, w);
            }
        } else {
            for (std::size_t s = 0; s < steps; ++s) {
                transport_.advance(field, dt, w);
                relax(field, dt);
            }
        }
    }

    double max_relaxation_entropy_increase() const noexcept { return max_entropy_increase_; }

    RunResult run(const DistributionField& initial, const SnapshotSink& sink) {
        auto field = convert(initial, working_kind());
        RunResult result;
        drive(
            [&](std::size_t n, double dt) { advance(field, n, dt); },
            [&](double t, std::size_t step) {
                check_finite(field, step);
                if (sink) sink(t, step, field);
            },
            result);
        result.final_state = std::move(field);
        return result;
    }

    /// Advances two solutions in lockstep (twin runs for L2 stability).
    std::pair<RunResult, DistributionField> run_twin(const DistributionField& initial,
                                                     const DistributionField& twin,
                                                     const TwinSnapshotSink& sink) {
        require_same_grid(initial, twin);
        auto field = convert(initial, working_kind());
        auto other = convert(twin, working_kind());
        RunResult result;
        drive(
            [&](std::size_t n, double dt) {
                advance(field, n, dt);
                advance(other, n, dt);
            },
            [&](double t, std::size_t step) {
                check_finite(field, step);
                check_finite(other, step);
                if (sink) sink(t, step, field, other);
            },
            result);
        result.final_state = std::move(field);
        return {std::move(result), std::move(other)};
    }

private:
    void relax(DistributionField& field, double dt) {
        if (config_.mode == SolverMode::linearized) {
            linearized_relaxation(field, dt, basis_, spec_.nu_c, config_.workers);
            return;
        }
        const auto report = relaxation_step(field, dt, spec_, config_.maxwellian_mode, config_.relaxation,
                                            config_.conservative_tolerance, config_.workers,
                                            config_.monitor_relaxation_entropy);
        if (config_.monitor_relaxation_entropy) {
            const double rel = (report.entropy_after - report.entropy_before) /
                               std::max(std::abs(report.entropy_before), 1e-300);
            max_entropy_increase_ = std::max(max_entropy_increase_, rel);
        }
    }

    static void check_finite(const DistributionField& field, std::size_t step) {
        if (!field.all_finite()) throw NonFiniteState(step, "field contains NaN or Inf");
    }

    template <class Advance, class Sample>
    void drive(Advance&& advance_fn, Sample&& sample, RunResult& result) {
        const double dt = config_.dt;
        const double t_end = config_.t_end;
        std::size_t n_steps = 0;
        if (t_end > 0.0) n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
        const double dt_last = n_steps == 0 ? 0.0 : t_end - (n_steps - 1) * dt;
        const std::size_t stride =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config_.sample_interval / dt)));
        if (transport_.max_crossings(dt) > config_.cfl_guard)
            result.warnings.push_back("characteristics cross " +
                                      std::to_string(transport_.max_crossings(dt)) +
                                      " cells per step (cfl_guard " +
                                      std::to_string(config_.cfl_guard) + ")");

        sample(0.0, 0);
        std::size_t step = 0;
        while (step < n_steps) {
            // regular steps up to the next sample, excluding the final step
            const std::size_t next_sample = std::min(n_steps, (step / stride + 1) * stride);
            const std::size_t regular_end = std::min(next_sample, n_steps - 1);
            if (regular_end > step) {
                advance_fn(regular_end - step, dt);
                step = regular_end;
            }
            if (step == n_steps - 1 && next_sample == n_steps) {
                advance_fn(1, dt_last);
                step = n_steps;
            }
            const double t = step == n_steps ? t_end : step * dt;
            if (step % stride == 0 || step == n_steps) sample(t, step);
        }
        result.steps = n_steps;
        result.t_final = n_steps == 0 ? 0.0 : t_end;
        result.max_relaxation_entropy_increase = max_entropy_increase_;
    }

    GridPtr grid_;
    SolverConfig config_;
    CollisionFrequencySpec spec_;
    Transport transport_;
    ProjectionBasis basis_;
    double max_entropy_increase_ = -std::numeric_limits<double>::infinity();
};

inline RunResult run(const DistributionField& initial, const SolverConfig& config,
                     const CollisionFrequencySpec& spec, const SnapshotSink& sink) {
    Solver solver(initial.grid_ptr(), config, spec);
    return solver.run(initial, sink);
}

} // namespace bgk
