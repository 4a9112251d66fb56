#pragma once

// Velocity moments, local Maxwellians, the collision frequency rho^eta T^omega
// and the conserved-variable map (rho, U, T) -> (rho, rho U, G).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bgk/detail/dense.hpp"
#include "bgk/errors.hpp"
#include "bgk/parallel.hpp"
#include "bgk/phase_grid.hpp"

namespace bgk {

using Vec3 = std::array<double, 3>;

/// Raw discrete moments of one spatial cell: sum w F (1, v, |v|^2).
struct CellMoments {
    double mass = 0.0;
    Vec3 momentum{0.0, 0.0, 0.0};
    double energy = 0.0;  // sum w F |v|^2 (twice the kinetic energy)
};

/// rho, U, T in a single cell.
struct MacroState {
    double rho = 1.0;
    Vec3 U{0.0, 0.0, 0.0};
    double T = 1.0;
};

/// Per-cell macroscopic fields. G follows the energy-type conserved variable
/// G = (rho |U|^2 + d rho T - d rho) / sqrt(2d), which is the familiar
/// (rho|U|^2 + 3 rho T)/sqrt(6) - 3 rho/sqrt(6) for d = 3.
struct MacroFields {
    int velocity_dims = 3;
    std::vector<double> rho;
    std::vector<Vec3> U;
    std::vector<double> T;
    std::vector<double> G;

    std::size_t size() const noexcept { return rho.size(); }
    MacroState state(std::size_t i) const { return {rho[i], U[i], T[i]}; }
};

inline double energy_variable(const MacroState& s, int velocity_dims) {
    const double d = velocity_dims;
    double u2 = 0.0;
    for (int k = 0; k < velocity_dims; ++k) u2 += s.U[k] * s.U[k];
    return (s.rho * u2 + d * s.rho * s.T - d * s.rho) / std::sqrt(2.0 * d);
}

inline MacroFields make_macro_fields(std::span<const MacroState> states, int velocity_dims) {
    MacroFields out;
    out.velocity_dims = velocity_dims;
    for (const auto& s : states) {
        out.rho.push_back(s.rho);
        out.U.push_back(s.U);
        out.T.push_back(s.T);
        out.G.push_back(energy_variable(s, velocity_dims));
    }
    return out;
}

inline CellMoments cell_moments(std::span<const double> values, const PhaseGrid& grid) {
    const int dv = grid.velocity_dims();
    double mass = 0.0, energy = 0.0;
    Vec3 mom{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < values.size(); ++j) {
        const double F = values[j];
        mass += F;
        for (int d = 0; d < dv; ++d) mom[d] += F * grid.velocity(j, d);
        energy += F * grid.speed_squared(j);
    }
    const double w = grid.weight();
    CellMoments out;
    out.mass = w * mass;
    for (int d = 0; d < dv; ++d) out.momentum[d] = w * mom[d];
    out.energy = w * energy;
    return out;
}

/// (rho, U, T) from raw moments; d rho T = sum w F |v - U|^2 = E - rho |U|^2.
inline MacroState macro_from_moments(const CellMoments& mo, int velocity_dims, std::size_t cell) {
    if (!(mo.mass > 0.0) || !std::isfinite(mo.mass))
        throw DegenerateState(cell, "density " + std::to_string(mo.mass) + " is not positive");
    MacroState s;
    s.rho = mo.mass;
    double u2 = 0.0;
    for (int d = 0; d < velocity_dims; ++d) {
        s.U[d] = mo.momentum[d] / mo.mass;
        u2 += s.U[d] * s.U[d];
    }
    s.T = (mo.energy - mo.mass * u2) / (velocity_dims * mo.mass);
    if (!(s.T > 0.0) || !std::isfinite(s.T))
        throw DegenerateState(cell, "temperature " + std::to_string(s.T) + " is not positive");
    return s;
}

inline CellMoments moments_from_macro(const MacroState& s, int velocity_dims) {
    CellMoments mo;
    mo.mass = s.rho;
    double u2 = 0.0;
    for (int d = 0; d < velocity_dims; ++d) {
        mo.momentum[d] = s.rho * s.U[d];
        u2 += s.U[d] * s.U[d];
    }
    mo.energy = s.rho * u2 + velocity_dims * s.rho * s.T;
    return mo;
}

inline MacroFields compute_moments(const DistributionField& field) {
    if (field.kind() != FieldKind::absolute)
        throw InvalidConfig("compute_moments needs an absolute distribution F");
    const auto& grid = field.grid();
    std::vector<MacroState> states(grid.num_cells());
    for (std::size_t i = 0; i < grid.num_cells(); ++i)
        states[i] = macro_from_moments(cell_moments(field.cell(i), grid), grid.velocity_dims(), i);
    return make_macro_fields(states, grid.velocity_dims());
}

// ---------------------------------------------------------------------------
// Local Maxwellians
// ---------------------------------------------------------------------------

enum class MaxwellianMode { sampled, conservative };

inline const char* to_string(MaxwellianMode m) {
    return m == MaxwellianMode::sampled ? "sampled" : "conservative";
}

/// Exponential-family coefficients: M(v) = exp(a + b.v + c |v|^2), c < 0.
struct MaxwellianExponent {
    double a = 0.0;
    Vec3 b{0.0, 0.0, 0.0};
    double c = -0.5;
};

inline MaxwellianExponent exponent_from_macro(const MacroState& s, int velocity_dims) {
    MaxwellianExponent e;
    double u2 = 0.0;
    for (int d = 0; d < velocity_dims; ++d) {
        e.b[d] = s.U[d] / s.T;
        u2 += s.U[d] * s.U[d];
    }
    e.c = -0.5 / s.T;
    e.a = std::log(s.rho) - 0.5 * velocity_dims * std::log(2.0 * std::numbers::pi * s.T) -
          0.5 * u2 / s.T;
    return e;
}

inline MacroState macro_from_exponent(const MaxwellianExponent& e, int velocity_dims) {
    MacroState s;
    s.T = -0.5 / e.c;
    double u2 = 0.0;
    for (int d = 0; d < velocity_dims; ++d) {
        s.U[d] = e.b[d] * s.T;
        u2 += s.U[d] * s.U[d];
    }
    s.rho = std::exp(e.a + 0.5 * u2 / s.T + 0.5 * velocity_dims * std::log(2.0 * std::numbers::pi * s.T));
    return s;
}

/// Pointwise Maxwellian rho/(2 pi T)^{d/2} exp(-|v-U|^2/(2T)).
inline double maxwellian_value(const MacroState& s, std::span<const double> v) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < v.size(); ++d) r2 += (v[d] - s.U[d]) * (v[d] - s.U[d]);
    const double dim = static_cast<double>(v.size());
    return s.rho * std::pow(2.0 * std::numbers::pi * s.T, -0.5 * dim) * std::exp(-0.5 * r2 / s.T);
}

namespace detail {

/// 1-D factors h_d(k) = exp(b_d v_k + c v_k^2) and their power sums
/// S_d^p = sum_k h_d(k) v_k^p, p = 0..4. The velocity grid is a tensor
/// product, so every discrete moment of exp(a + b.v + c|v|^2) factorizes.
struct SeparableMaxwellian {
    int dims = 0;
    int n = 0;
    double scale = 0.0;  // w e^a
    std::array<std::vector<double>, 3> factor;
    std::array<std::array<double, 5>, 3> power{};

    SeparableMaxwellian(const MaxwellianExponent& e, const PhaseGrid& grid)
        : dims(grid.velocity_dims()), n(grid.velocity_points()) {
        scale = grid.weight() * std::exp(e.a);
        const auto nodes = grid.nodes();
        for (int d = 0; d < dims; ++d) {
            factor[d].resize(n);
            power[d].fill(0.0);
            for (int k = 0; k < n; ++k) {
                const double v = nodes[k];
                const double h = std::exp(e.b[d] * v + e.c * v * v);
                factor[d][k] = h;
                double vp = 1.0;
                for (int p = 0; p <= 4; ++p) {
                    power[d][p] += h * vp;
                    vp *= v;
                }
            }
        }
    }

    /// sum w M prod_d v_d^{p_d}
    double monomial(const std::array<int, 3>& p) const {
        double r = scale;
        for (int d = 0; d < dims; ++d) r *= power[d][p[d]];
        return r;
    }

    /// Moments against phi = (1, v_1..v_d, |v|^2) and the Gram matrix
    /// sum w M phi phi^T (size (d+2)^2, row-major).
    void moments_and_gram(std::vector<double>& mu, std::vector<double>& gram) const {
        const int n_inv = dims + 2;
        // phi_i as a sum of monomials with exponent vectors.
        std::vector<std::vector<std::array<int, 3>>> phi(n_inv);
        phi[0] = {{0, 0, 0}};
        for (int d = 0; d < dims; ++d) {
            std::array<int, 3> p{0, 0, 0};
            p[d] = 1;
            phi[1 + d] = {p};
        }
        for (int d = 0; d < dims; ++d) {
            std::array<int, 3> p{0, 0, 0};
            p[d] = 2;
            phi[n_inv - 1].push_back(p);
        }
        mu.assign(n_inv, 0.0);
        gram.assign(n_inv * n_inv, 0.0);
        for (int i = 0; i < n_inv; ++i) {
            for (const auto& p : phi[i]) mu[i] += monomial(p);
            for (int j = i; j < n_inv; ++j) {
                double s = 0.0;
                for (const auto& p : phi[i])
                    for (const auto& q : phi[j]) s += monomial({p[0] + q[0], p[1] + q[1], p[2] + q[2]});
                gram[i * n_inv + j] = s;
                gram[j * n_inv + i] = s;
            }
        }
    }

    void fill(std::span<double> out, const PhaseGrid& grid) const {
        const double base = scale / grid.weight();
        const std::size_t nv = grid.num_velocities();
        if (dims == 1) {
            for (std::size_t j = 0; j < nv; ++j) out[j] = base * factor[0][j];
            return;
        }
        std::size_t j = 0;
        for (int k0 = 0; k0 < n; ++k0) {
            const double f0 = base * factor[0][k0];
            for (int k1 = 0; k1 < n; ++k1) {
                const double f01 = f0 * factor[1][k1];
                for (int k2 = 0; k2 < n; ++k2) out[j++] = f01 * factor[2][k2];
            }
        }
    }
};

inline std::vector<double> moment_vector(const CellMoments& mo, int dims) {
    std::vector<double> v;
    v.push_back(mo.mass);
    for (int d = 0; d < dims; ++d) v.push_back(mo.momentum[d]);
    v.push_back(mo.energy);
    return v;
}

} // namespace detail

struct MomentMatchResult {
    MaxwellianExponent exponent;
    double residual = 0.0;  // max |moment mismatch| / rho
    int iterations = 0;
    bool converged = false;
};

/// Damped Newton iteration on the exponent coefficients so that the discrete
/// moments of exp(a + b.v + c|v|^2) reproduce `target`. Starts from the
/// continuous Maxwellian parameters; halves the step while the residual
/// fails to decrease. Runs until the residual stops improving.
inline MomentMatchResult match_moments(const CellMoments& target, const PhaseGrid& grid,
                                       double tolerance, int max_iterations = 50) {
    const int dims = grid.velocity_dims();
    const int n_inv = dims + 2;
    const auto goal = detail::moment_vector(target, dims);
    const MacroState start = macro_from_moments(target, dims, 0);

    MomentMatchResult res;
    res.exponent = exponent_from_macro(start, dims);

    auto pack = [&](const MaxwellianExponent& e) {
        std::vector<double> x{e.a};
        for (int d = 0; d < dims; ++d) x.push_back(e.b[d]);
        x.push_back(e.c);
        return x;
    };
    auto unpack = [&](const std::vector<double>& x) {
        MaxwellianExponent e;
        e.a = x[0];
        for (int d = 0; d < dims; ++d) e.b[d] = x[1 + d];
        e.c = x[n_inv - 1];
        return e;
    };
    std::vector<double> mu, gram;
    auto residual_of = [&](const MaxwellianExponent& e, std::vector<double>& r) {
        detail::SeparableMaxwellian sep(e, grid);
        sep.moments_and_gram(mu, gram);
        r.resize(n_inv);
        double worst = 0.0;
        for (int i = 0; i < n_inv; ++i) {
            r[i] = mu[i] - goal[i];
            worst = std::max(worst, std::abs(r[i]));
        }
        return std::isfinite(worst) ? worst / target.mass : INFINITY;
    };

    std::vector<double> r, r_trial;
    double norm = residual_of(res.exponent, r);
    std::vector<double> jac = gram;
    for (int it = 0; it < max_iterations && norm > 0.0; ++it) {
        std::vector<double> rhs(n_inv);
        for (int i = 0; i < n_inv; ++i) rhs[i] = -r[i];
        auto step = detail::solve_dense(n_inv, jac, rhs);
        if (!step) break;
        const auto x = pack(res.exponent);
        double damping = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 30; ++halving) {
            std::vector<double> trial(x);
            for (int i = 0; i < n_inv; ++i) trial[i] += damping * (*step)[i];
            const auto e = unpack(trial);
            if (e.c < 0.0) {
                const double trial_norm = residual_of(e, r_trial);
                if (trial_norm < norm) {
                    res.exponent = e;
                    norm = trial_norm;
                    r.swap(r_trial);
                    jac = gram;
                    improved = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        res.iterations = it + 1;
        if (!improved) break;
    }
    res.residual = norm;
    res.converged = norm <= tolerance;
    return res;
}

/// Fills one cell with the local Maxwellian of the given moments.
inline void fill_local_maxwellian(const CellMoments& moments, const PhaseGrid& grid,
                                  MaxwellianMode mode, double tolerance, std::size_t cell,
                                  std::span<double> out) {
    const int dims = grid.velocity_dims();
    MaxwellianExponent e;
    if (mode == MaxwellianMode::sampled) {
        e = exponent_from_macro(macro_from_moments(moments, dims, cell), dims);
    } else {
        (void)macro_from_moments(moments, dims, cell);  // degeneracy check
        auto match = match_moments(moments, grid, tolerance);
        if (!match.converged) throw NewtonDivergence(cell, match.residual);
        e = match.exponent;
    }
    detail::SeparableMaxwellian(e, grid).fill(out, grid);
}

inline constexpr double default_conservative_tolerance = 1e-12;

/// Local Maxwellian field for the given macroscopic fields. `conservative`
/// mode returns the Maxwellian-form grid function whose discrete moments
/// reproduce (rho, U, T); failures report the worst cell.
inline DistributionField local_maxwellian(const MacroFields& macro, const GridPtr& grid,
                                          MaxwellianMode mode,
                                          double tolerance = default_conservative_tolerance,
                                          unsigned workers = 1) {
    if (macro.size() != grid->num_cells())
        throw GridMismatch("macro fields do not match the spatial grid");
    DistributionField out(grid, FieldKind::absolute);
    std::vector<double> failure(grid->num_cells(), 0.0);
    parallel_for(grid->num_cells(), workers, [&](std::size_t i) {
        const auto state = macro.state(i);
        if (!(state.rho > 0.0)) throw DegenerateState(i, "density is not positive");
        if (!(state.T > 0.0)) throw DegenerateState(i, "temperature is not positive");
        try {
            fill_local_maxwellian(moments_from_macro(state, grid->velocity_dims()), *grid, mode,
                                  tolerance, i, out.cell(i));
        } catch (const NewtonDivergence& e) {
            failure[i] = e.residual();
        }
    });
    const auto worst = std::max_element(failure.begin(), failure.end());
    if (*worst > 0.0)
        throw NewtonDivergence(static_cast<std::size_t>(worst - failure.begin()), *worst);
    return out;
}

// ---------------------------------------------------------------------------
// Collision frequency
// ---------------------------------------------------------------------------

enum class NuCMode { background, paper };

struct CollisionFrequencySpec {
    double eta = 0.0;
    double omega = 0.0;
    double nu_c = 1.0;

    bool operator==(const CollisionFrequencySpec&) const = default;
};

/// Background collision frequency: nu(1, 1) = 1, or (3/2)^omega.
inline double background_collision_frequency(NuCMode mode, double omega) {
    return mode == NuCMode::background ? 1.0 : std::pow(1.5, omega);
}

inline double collision_frequency(double rho, double T, const CollisionFrequencySpec& spec) {
    return std::pow(rho, spec.eta) * std::pow(T, spec.omega);
}

inline std::vector<double> collision_frequency(const MacroFields& macro,
                                               const CollisionFrequencySpec& spec) {
    std::vector<double> nu(macro.size());
    for (std::size_t i = 0; i < macro.size(); ++i) {
        if (!(macro.rho[i] > 0.0)) throw DegenerateState(i, "density is not positive");
        if (!(macro.T[i] > 0.0)) throw DegenerateState(i, "temperature is not positive");
        nu[i] = collision_frequency(macro.rho[i], macro.T[i], spec);
    }
    return nu;
}

// ---------------------------------------------------------------------------
// Conserved variables (rho, rho U, G) and the Jacobian of (rho, U, T) -> them
// ---------------------------------------------------------------------------

using Vec5 = std::array<double, 5>;
using Mat5 = std::array<Vec5, 5>;

inline Vec5 conserved_map(double rho, const Vec3& U, double T) {
    const double s6 = std::sqrt(6.0);
    const double u2 = U[0] * U[0] + U[1] * U[1] + U[2] * U[2];
    return {rho, rho * U[0], rho * U[1], rho * U[2], (rho * u2 + 3.0 * rho * T) / s6 - 3.0 * rho / s6};
}

/// Coefficient of rho U_3 / sqrt(6) in the (5,4) entry. The printed matrix
/// shows 3; dG/dU_3 is 2 rho U_3 / sqrt(6), which the finite-difference
/// check confirms.
inline constexpr double resolved_u3_coefficient = 2.0;
inline constexpr double printed_u3_coefficient = 3.0;

inline Mat5 conserved_jacobian(double rho, const Vec3& U, double T,
                               double u3_coefficient = resolved_u3_coefficient) {
    const double s6 = std::sqrt(6.0);
    const double u2 = U[0] * U[0] + U[1] * U[1] + U[2] * U[2];
    Mat5 J{};
    J[0] = {1.0, 0.0, 0.0, 0.0, 0.0};
    J[1] = {U[0], rho, 0.0, 0.0, 0.0};
    J[2] = {U[1], 0.0, rho, 0.0, 0.0};
    J[3] = {U[2], 0.0, 0.0, rho, 0.0};
    J[4] = {(u2 + 3.0 * T - 3.0) / s6, 2.0 * rho * U[0] / s6, 2.0 * rho * U[1] / s6,
            u3_coefficient * rho * U[2] / s6, 3.0 * rho / s6};
    return J;
}

/// Last row (A, B_1, B_2, B_3, C) of the inverse Jacobian exactly as printed
/// alongside the forward matrix. Kept for comparison only.
inline Vec5 printed_inverse_last_row(double rho, const Vec3& U, double T) {
    const double u2 = U[0] * U[0] + U[1] * U[1] + U[2] * U[2];
    const double q = u2 + 3.0 * T - 3.0;
    const double den = 3.0 * rho - q;
    Vec5 row{};
    row[0] = (2.0 * u2 - q * (1.0 + (U[0] + U[1] + U[2]) / rho)) / den;
    for (int i = 0; i < 3; ++i) row[1 + i] = -(2.0 * rho * U[i] - q) / (rho * den);
    row[4] = std::sqrt(6.0) / den;
    return row;
}

/// Last row of d(rho, U, T)/d(rho, rho U, G), derived from
/// T = (sqrt(6) G + 3 rho - |rho U|^2 / rho) / (3 rho).
inline Vec5 inverse_jacobian_last_row(double rho, const Vec3& U, double T) {
    const double s6 = std::sqrt(6.0);
    const double u2 = U[0] * U[0] + U[1] * U[1] + U[2] * U[2];
    Vec5 row{};
    row[0] = (u2 - 3.0 * T + 3.0) / (3.0 * rho);
    for (int i = 0; i < 3; ++i) row[1 + i] = -2.0 * U[i] / (3.0 * rho);
    row[4] = s6 / (3.0 * rho);
    return row;
}

struct JacobianCheck {
    Mat5 finite_difference{};
    Mat5 closed_form{};
    double max_abs_deviation = 0.0;
    double max_rel_deviation = 0.0;  // |fd - cf| / max(1, |cf|)
};

/// Central finite differences of conserved_map with relative step
/// `rel_step` (absolute step rel_step * max(1, |x|)).
inline Mat5 conserved_jacobian_fd(double rho, const Vec3& U, double T, double rel_step = 1e-6) {
    Mat5 J{};
    const Vec5 x{rho, U[0], U[1], U[2], T};
    for (int k = 0; k < 5; ++k) {
        const double h = rel_step * std::max(1.0, std::abs(x[k]));
        Vec5 xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const auto fp = conserved_map(xp[0], {xp[1], xp[2], xp[3]}, xp[4]);
        const auto fm = conserved_map(xm[0], {xm[1], xm[2], xm[3]}, xm[4]);
        for (int r = 0; r < 5; ++r) J[r][k] = (fp[r] - fm[r]) / (xp[k] - xm[k]);
    }
    return J;
}

inline JacobianCheck jacobian_fd_check(double rho, const Vec3& U, double T,
                                       double u3_coefficient = resolved_u3_coefficient,
                                       double rel_step = 1e-6) {
    JacobianCheck out;
    out.finite_difference = conserved_jacobian_fd(rho, U, T, rel_step);
    out.closed_form = conserved_jacobian(rho, U, T, u3_coefficient);
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) {
            const double diff = std::abs(out.finite_difference[r][c] - out.closed_form[r][c]);
            out.max_abs_deviation = std::max(out.max_abs_deviation, diff);
            out.max_rel_deviation =
                std::max(out.max_rel_deviation, diff / std::max(1.0, std::abs(out.closed_form[r][c])));
        }
    }
    return out;
}

} // namespace bgk
