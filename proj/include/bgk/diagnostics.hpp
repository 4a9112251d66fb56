#pragma once

// Measured quantities: conservation totals, the H-functional, Sobolev-type
// energy norms, macroscopic field bounds, decay-rate fits, coercivity and
// twin-run distances. DiagnosticsMonitor turns solver snapshots into CSV rows.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bgk/errors.hpp"
#include "bgk/linearized.hpp"
#include "bgk/maxwellian.hpp"
#include "bgk/phase_grid.hpp"
#include "bgk/spectral.hpp"

namespace bgk {

// ---------------------------------------------------------------------------
// Conservation
// ---------------------------------------------------------------------------

struct ConservationTotals {
    double mass = 0.0;
    Vec3 momentum{0.0, 0.0, 0.0};
    double energy = 0.0;  // integral of F |v|^2
};

struct ConservationDrift {
    double mass = 0.0;      // relative
    double momentum = 0.0;  // max_d |p_d - p_d(0)| / mass(0)
    double energy = 0.0;    // relative
};

inline ConservationTotals conservation_totals(const DistributionField& field) {
    const DistributionField* F = &field;
    DistributionField converted;
    if (field.kind() != FieldKind::absolute) {
        converted = convert(field, FieldKind::absolute);
        F = &converted;
    }
    const auto& grid = F->grid();
    ConservationTotals t;
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        const auto mo = cell_moments(F->cell(i), grid);
        t.mass += mo.mass;
        for (int d = 0; d < 3; ++d) t.momentum[d] += mo.momentum[d];
        t.energy += mo.energy;
    }
    const double vol = grid.cell_volume();
    t.mass *= vol;
    for (double& p : t.momentum) p *= vol;
    t.energy *= vol;
    return t;
}

inline ConservationDrift conservation_drift(const ConservationTotals& now,
                                            const ConservationTotals& initial) {
    ConservationDrift d;
    const double mass_scale = std::abs(initial.mass);
    d.mass = std::abs(now.mass - initial.mass) / mass_scale;
    for (int k = 0; k < 3; ++k)
        d.momentum = std::max(d.momentum, std::abs(now.momentum[k] - initial.momentum[k]) / mass_scale);
    d.energy = std::abs(now.energy - initial.energy) / std::abs(initial.energy);
    return d;
}

/// Global integrals of f against sqrt(m), v sqrt(m), |v|^2 sqrt(m).
inline std::vector<double> perturbation_invariants(const DistributionField& f) {
    const auto& grid = f.grid();
    const int dims = grid.velocity_dims();
    const auto sm = grid.sqrt_background();
    std::vector<double> out(dims + 2, 0.0);
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        const auto cell = f.cell(i);
        for (std::size_t j = 0; j < cell.size(); ++j) {
            const double x = cell[j] * sm[j];
            out[0] += x;
            for (int d = 0; d < dims; ++d) out[1 + d] += x * grid.velocity(j, d);
            out[dims + 1] += x * grid.speed_squared(j);
        }
    }
    for (double& x : out) x *= grid.weight() * grid.cell_volume();
    return out;
}

// ---------------------------------------------------------------------------
// H-functional
// ---------------------------------------------------------------------------

inline constexpr double negative_density_tolerance = 1e-14;

/// sum w dx^d F log F with 0 log 0 = 0; negatives above -1e-14 are clipped.
inline double h_functional(const DistributionField& field) {
    if (field.kind() != FieldKind::absolute)
        throw InvalidConfig("h_functional needs an absolute distribution F");
    const auto& grid = field.grid();
    double total = 0.0;
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        double s = 0.0;
        for (double F : field.cell(i)) {
            if (F < -negative_density_tolerance)
                throw NegativeDensityValue("F = " + std::to_string(F) + " in cell " + std::to_string(i));
            if (F > 0.0) s += F * std::log(F);
        }
        total += s;
    }
    return grid.weight() * grid.cell_volume() * total;
}

// ---------------------------------------------------------------------------
// Energy norm |||f||| = sum over (alpha, beta) of || d^alpha_x d^beta_v f ||
// ---------------------------------------------------------------------------

using MultiIndex = std::array<int, 3>;

inline std::vector<MultiIndex> multi_indices(int dims, int max_order) {
    std::vector<MultiIndex> out;
    for (int a = 0; a <= max_order; ++a)
        for (int b = 0; b <= (dims > 1 ? max_order - a : 0); ++b)
            for (int c = 0; c <= (dims > 2 ? max_order - a - b : 0); ++c) out.push_back({a, b, c});
    std::stable_sort(out.begin(), out.end(), [](const MultiIndex& x, const MultiIndex& y) {
        return x[0] + x[1] + x[2] < y[0] + y[1] + y[2];
    });
    return out;
}

struct EnergyNormTerm {
    MultiIndex spatial{0, 0, 0};
    MultiIndex velocity{0, 0, 0};
    double value = 0.0;
};

struct EnergyNorm {
    double total = 0.0;
    std::vector<EnergyNormTerm> terms;
};

/// First derivative along velocity axis d: centered differences inside,
/// second-order one-sided stencils at the edges of the velocity box.
inline void velocity_derivative(const DistributionField& in, DistributionField& out, int d) {
    const auto& grid = in.grid();
    const int n = grid.velocity_points();
    const double h = grid.dv();
    const std::size_t nv = grid.num_velocities();
    std::size_t stride = 1;
    for (int e = grid.velocity_dims() - 1; e > d; --e) stride *= n;
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        const auto src = in.cell(i);
        auto dst = out.cell(i);
        for (std::size_t j = 0; j < nv; ++j) {
            const int k = grid.velocity_index(j, d);
            double value;
            if (k == 0)
                value = (-3.0 * src[j] + 4.0 * src[j + stride] - src[j + 2 * stride]) / (2.0 * h);
            else if (k == n - 1)
                value = (3.0 * src[j] - 4.0 * src[j - stride] + src[j - 2 * stride]) / (2.0 * h);
            else
                value = (src[j + stride] - src[j - stride]) / (2.0 * h);
            dst[j] = value;
        }
    }
}

class EnergyNormEvaluator {
public:
    EnergyNormEvaluator(GridPtr grid, int max_spatial_order, int max_velocity_order)
        : grid_(std::move(grid)), spatial_order_(max_spatial_order), velocity_order_(max_velocity_order) {
        if (max_spatial_order < 0 || max_velocity_order < 0)
            throw InvalidConfig("derivative orders must be >= 0");
        if (2 * max_spatial_order > grid_->spatial_points())
            throw OrderTooHighForGrid("spatial order " + std::to_string(max_spatial_order) +
                                      " exceeds what " + std::to_string(grid_->spatial_points()) +
                                      " points resolve");
        if (2 * max_velocity_order + 1 > grid_->velocity_points())
            throw OrderTooHighForGrid("velocity order " + std::to_string(max_velocity_order) +
                                      " needs a wider stencil than " +
                                      std::to_string(grid_->velocity_points()) + " nodes");
        if (max_spatial_order > 0) fourier_.emplace(grid_);
    }

    EnergyNorm operator()(const DistributionField& f, unsigned workers = 1) const {
        EnergyNorm out;
        const auto alphas = multi_indices(grid_->spatial_dims(), spatial_order_);
        const auto betas = multi_indices(grid_->velocity_dims(), velocity_order_);
        for (const auto& alpha : alphas) {
            DistributionField dx_f = spatial_derivative(f, alpha, workers);
            for (const auto& beta : betas) {
                DistributionField g = dx_f;
                for (int d = 0; d < grid_->velocity_dims(); ++d) {
                    for (int r = 0; r < beta[d]; ++r) {
                        DistributionField tmp(g.grid_ptr(), g.kind());
                        velocity_derivative(g, tmp, d);
                        g = std::move(tmp);
                    }
                }
                EnergyNormTerm term{alpha, beta, norm_l2(g)};
                out.total += term.value;
                out.terms.push_back(term);
            }
        }
        return out;
    }

    DistributionField spatial_derivative(const DistributionField& f, const MultiIndex& alpha,
                                         unsigned workers = 1) const {
        if (alpha[0] + alpha[1] + alpha[2] == 0) return f;
        const int n = grid_->spatial_points();
        DistributionField out(f.grid_ptr(), f.kind());
        auto factor = [&](int d, int kidx, int) -> std::complex<double> {
            const int order = alpha[d];
            if (order == 0) return 1.0;
            if (n % 2 == 0 && kidx == n / 2 && order % 2 == 1) return 0.0;
            const double k = 2.0 * std::numbers::pi * signed_wavenumber(kidx, n) / grid_->domain_length(d);
            return std::pow(std::complex<double>(0.0, k), order);
        };
        fourier_->apply(f, out, factor, workers);
        return out;
    }

private:
    GridPtr grid_;
    int spatial_order_;
    int velocity_order_;
    std::optional<SpatialFourier> fourier_;
};

inline EnergyNorm energy_norm(const DistributionField& f, int max_spatial_order = 2,
                              int max_velocity_order = 1) {
    return EnergyNormEvaluator(f.grid_ptr(), max_spatial_order, max_velocity_order)(f);
}

// ---------------------------------------------------------------------------
// Macroscopic field bounds
// ---------------------------------------------------------------------------

/// Spectral derivative along spatial axis d of a per-cell scalar field.
inline std::vector<double> spatial_gradient(std::span<const double> values, const PhaseGrid& grid, int d) {
    const int dims = grid.spatial_dims();
    const int n = grid.spatial_points();
    std::vector<int> shape(dims, n);
    const std::size_t real_count = grid.num_cells();
    const std::size_t complex_count = real_count / n * (n / 2 + 1);
    std::vector<double> r(values.begin(), values.end());
    std::vector<std::complex<double>> c(complex_count);
    fftw_plan fwd, bwd;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd = fftw_plan_dft_r2c(dims, shape.data(), r.data(), reinterpret_cast<fftw_complex*>(c.data()),
                                FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r(dims, shape.data(), reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                                FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    const int half = n / 2 + 1;
    for (std::size_t q = 0; q < complex_count; ++q) {
        int kidx[3] = {0, 0, 0};
        std::size_t rem = q;
        kidx[dims - 1] = static_cast<int>(rem % half);
        rem /= half;
        for (int e = dims - 2; e >= 0; --e) {
            kidx[e] = static_cast<int>(rem % n);
            rem /= n;
        }
        std::complex<double> mult = 0.0;
        if (!(n % 2 == 0 && kidx[d] == n / 2)) {
            const double k = 2.0 * std::numbers::pi * signed_wavenumber(kidx[d], n) / grid.domain_length(d);
            mult = std::complex<double>(0.0, k) / static_cast<double>(real_count);
        }
        c[q] *= mult;
    }
    fftw_execute(bwd);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return r;
}

struct FieldBoundReport {
    double E = 0.0;
    double rho_lower_margin = 0.0;  // rho_min - (1 - sqrt E)
    double rho_upper_margin = 0.0;  // 1 + sqrt E - rho_max
    double u_margin = 0.0;          // 3 sqrt E - max |U|
    double t_lower_margin = 0.0;    // T_min - 1/2
    double t_upper_margin = 0.0;    // 3/2 - T_max
    double drho_margin = 0.0;       // sqrt E - max |d rho|
    double du_ratio = 0.0;          // max |dU| / E  (measured C for first derivatives)
    double dt_ratio = 0.0;          // max |dT| / E
    bool ok = true;                 // every constant-free bound holds

    bool constant_free_bounds_hold() const {
        return rho_lower_margin >= 0.0 && rho_upper_margin >= 0.0 && u_margin >= 0.0 &&
               t_lower_margin >= 0.0 && t_upper_margin >= 0.0;
    }
};

inline FieldBoundReport field_bound_check(const MacroFields& macro, double E_now,
                                          const PhaseGrid* grid = nullptr) {
    FieldBoundReport r;
    r.E = E_now;
    const double s = std::sqrt(std::max(E_now, 0.0));
    double rho_min = INFINITY, rho_max = -INFINITY, u_max = 0.0, t_min = INFINITY, t_max = -INFINITY;
    for (std::size_t i = 0; i < macro.size(); ++i) {
        rho_min = std::min(rho_min, macro.rho[i]);
        rho_max = std::max(rho_max, macro.rho[i]);
        double u2 = 0.0;
        for (double u : macro.U[i]) u2 += u * u;
        u_max = std::max(u_max, std::sqrt(u2));
        t_min = std::min(t_min, macro.T[i]);
        t_max = std::max(t_max, macro.T[i]);
    }
    r.rho_lower_margin = rho_min - (1.0 - s);
    r.rho_upper_margin = 1.0 + s - rho_max;
    r.u_margin = 3.0 * s - u_max;
    r.t_lower_margin = t_min - 0.5;
    r.t_upper_margin = 1.5 - t_max;

    if (grid != nullptr) {
        double drho = 0.0, du = 0.0, dT = 0.0;
        for (int d = 0; d < grid->spatial_dims(); ++d) {
            for (double x : spatial_gradient(macro.rho, *grid, d)) drho = std::max(drho, std::abs(x));
            for (double x : spatial_gradient(macro.T, *grid, d)) dT = std::max(dT, std::abs(x));
            for (int c = 0; c < macro.velocity_dims; ++c) {
                std::vector<double> comp(macro.size());
                for (std::size_t i = 0; i < macro.size(); ++i) comp[i] = macro.U[i][c];
                for (double x : spatial_gradient(comp, *grid, d)) du = std::max(du, std::abs(x));
            }
        }
        auto ratio = [&](double v) {
            if (v == 0.0) return 0.0;
            return E_now > 0.0 ? v / E_now : std::numeric_limits<double>::infinity();
        };
        r.drho_margin = s - drho;
        r.du_ratio = ratio(du);
        r.dt_ratio = ratio(dT);
    }
    r.ok = r.constant_free_bounds_hold() && r.drho_margin >= 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Decay fitting, coercivity, twin distance
// ---------------------------------------------------------------------------

struct DecayFit {
    double rate = 0.0;  // -slope of log(value) against t
    double r_squared = 0.0;
    std::size_t samples = 0;
};

inline DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> value,
                               double t_min = -INFINITY, double t_max = INFINITY) {
    if (t.size() != value.size()) throw InvalidConfig("time and value series differ in length");
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t_min || t[k] > t_max) continue;
        if (!(value[k] > 0.0))
            throw NonPositiveValue("value " + std::to_string(value[k]) + " at t = " + std::to_string(t[k]));
        xs.push_back(t[k]);
        ys.push_back(std::log(value[k]));
    }
    if (xs.size() < 10)
        throw InvalidConfig("decay fit needs at least 10 samples in the window, got " +
                            std::to_string(xs.size()));
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
        syy += (ys[k] - my) * (ys[k] - my);
    }
    DecayFit fit;
    fit.samples = xs.size();
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

/// delta = -<L f, f> / ||f||^2.
inline double coercivity_measure(const DistributionField& f, const ProjectionBasis& basis, double nu_c) {
    const double ff = inner(f, f);
    if (!(ff > 0.0)) throw ZeroField("coercivity is undefined for f = 0");
    return -inner(apply_L(f, basis, nu_c), f) / ff;
}

inline std::vector<double> coercivity_measure(std::span<const DistributionField> series,
                                              const ProjectionBasis& basis, double nu_c) {
    std::vector<double> out;
    for (const auto& f : series) out.push_back(coercivity_measure(f, basis, nu_c));
    return out;
}

/// ||f - f_bar|| over phase space.
inline double twin_distance(const DistributionField& f, const DistributionField& f_bar) {
    require_same_grid(f, f_bar);
    const auto& grid = f.grid();
    double total = 0.0;
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        const auto a = f.cell(i);
        const auto b = f_bar.cell(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        total += s;
    }
    return std::sqrt(grid.weight() * grid.cell_volume() * total);
}

// ---------------------------------------------------------------------------
// Records and CSV
// ---------------------------------------------------------------------------

struct DiagnosticsRecord {
    double t = 0.0;
    ConservationTotals totals;
    ConservationDrift drift;
    double H = 0.0;
    double l2_f = 0.0;
    double energy_norm = 0.0;
    double E_accum = 0.0;
    double dissipation_integral = 0.0;  // int_0^t |||f|||^2 ds (trapezoid)
    FieldBoundReport bounds;
    double min_F = 0.0;
    std::optional<double> twin_distance;
    double micro_norm = 0.0;
    double hydro_norm = 0.0;
    std::optional<double> coercivity;  // -<Lf,f>/||f||^2, absent for f = 0
};

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "t", "mass", "momentum_1", "momentum_2", "momentum_3", "energy", "mass_drift",
        "momentum_drift", "energy_drift", "H", "l2_f", "energy_norm", "E_accum",
        "field_bounds_ok", "rho_lower_margin", "rho_upper_margin", "u_margin", "t_lower_margin",
        "t_upper_margin", "drho_margin", "du_ratio", "dt_ratio", "min_F", "twin_distance",
        "micro_norm", "hydro_norm", "coercivity_delta"};
    return cols;
}

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv_header(std::ostream& os) {
    const auto& cols = csv_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << '\n';
}

inline void write_csv_row(std::ostream& os, const DiagnosticsRecord& r) {
    auto opt = [](const std::optional<double>& x) { return x ? format_real(*x) : std::string(); };
    const std::vector<std::string> cells{
        format_real(r.t), format_real(r.totals.mass), format_real(r.totals.momentum[0]),
        format_real(r.totals.momentum[1]), format_real(r.totals.momentum[2]),
        format_real(r.totals.energy), format_real(r.drift.mass), format_real(r.drift.momentum),
        format_real(r.drift.energy), format_real(r.H), format_real(r.l2_f), format_real(r.energy_norm),
        format_real(r.E_accum), r.bounds.ok ? "1" : "0", format_real(r.bounds.rho_lower_margin),
        format_real(r.bounds.rho_upper_margin), format_real(r.bounds.u_margin),
        format_real(r.bounds.t_lower_margin), format_real(r.bounds.t_upper_margin),
        format_real(r.bounds.drho_margin), format_real(r.bounds.du_ratio),
        format_real(r.bounds.dt_ratio), format_real(r.min_F), opt(r.twin_distance),
        format_real(r.micro_norm), format_real(r.hydro_norm), opt(r.coercivity)};
    for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
    os << '\n';
}

/// Builds one DiagnosticsRecord per snapshot, keeping the t = 0 reference
/// totals and the trapezoidal time integral of |||f|||^2.
class DiagnosticsMonitor {
public:
    DiagnosticsMonitor(GridPtr grid, double nu_c, int spatial_order = 2, int velocity_order = 1,
                       unsigned workers = 1)
        : grid_(grid), nu_c_(nu_c), basis_(grid), norm_(grid, spatial_order, velocity_order),
          workers_(workers) {}

    const ProjectionBasis& basis() const noexcept { return basis_; }

    DiagnosticsRecord record(double t, const DistributionField& field,
                             const DistributionField* twin = nullptr) {
        const auto F = convert(field, FieldKind::absolute);
        const auto f = convert(field, FieldKind::perturbation);

        DiagnosticsRecord r;
        r.t = t;
        r.totals = conservation_totals(F);
        if (!initial_) initial_ = r.totals;
        r.drift = conservation_drift(r.totals, *initial_);
        r.H = h_functional(F);
        r.l2_f = norm_l2(f);
        r.energy_norm = norm_(f, workers_).total;

        const double sq = r.energy_norm * r.energy_norm;
        if (last_t_) dissipation_ += 0.5 * (t - *last_t_) * (sq + last_sq_);
        last_t_ = t;
        last_sq_ = sq;
        r.dissipation_integral = dissipation_;
        r.E_accum = 0.5 * sq + nu_c_ * dissipation_;

        r.bounds = field_bound_check(compute_moments(F), r.E_accum, grid_.get());
        r.min_F = *std::min_element(F.values().begin(), F.values().end());
        if (twin != nullptr) r.twin_distance = twin_distance(f, convert(*twin, FieldKind::perturbation));

        const auto split = micro_macro_split(f, workers_);
        r.micro_norm = norm_l2(split.micro);
        r.hydro_norm = norm_l2(split.hydro);
        if (r.l2_f > 0.0) r.coercivity = coercivity_measure(f, basis_, nu_c_);
        return r;
    }

private:
    GridPtr grid_;
    double nu_c_;
    ProjectionBasis basis_;
    EnergyNormEvaluator norm_;
    unsigned workers_;
    std::optional<ConservationTotals> initial_;
    std::optional<double> last_t_;
    double last_sq_ = 0.0;
    double dissipation_ = 0.0;
};

} // namespace bgk
