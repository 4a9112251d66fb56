#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bgk/diagnostics.hpp"
#include "bgk/solver.hpp"
#include "oracles.hpp"

using namespace bgk;

namespace {

GridPtr small() {
    GridConfig c = oracle::small_grid(16, 10, 5.0);
    return build_grid(c);
}

DistributionField maxwellian_wave(const GridPtr& g, double amplitude, double u = 0.0) {
    DistributionField F(g, FieldKind::absolute);
    std::vector<double> v(g->velocity_dims());
    for (std::size_t i = 0; i < g->num_cells(); ++i) {
        const double phase = 2.0 * std::numbers::pi * g->position(i, 0);
        MacroState s{1.0 + amplitude * std::sin(phase), {u * std::cos(phase), 0.0, 0.0},
                     1.0 + 0.5 * amplitude * std::cos(phase)};
        for (std::size_t j = 0; j < g->num_velocities(); ++j) {
            for (int d = 0; d < g->velocity_dims(); ++d) v[d] = g->velocity(j, d);
            F.at(i, j) = maxwellian_value(s, v);
        }
    }
    return F;
}

// Positive non-Maxwellian data: a two-bump mixture per cell.
DistributionField bumpy(const GridPtr& g, std::uint64_t seed) {
    auto F = maxwellian_wave(g, 0.1);
    const auto noise = oracle::random_values(g->size(), seed, 0.5, 1.5);
    for (std::size_t k = 0; k < F.values().size(); ++k) F.values()[k] *= noise[k];
    return F;
}

double max_abs_diff(const DistributionField& a, const DistributionField& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k)
        worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
    return worst;
}

} // namespace

TEST(Relaxation, MaxwellianIsFixedPoint) {
    const auto g = small();
    const auto F = maxwellian_wave(g, 0.2, 0.1);
    auto G = F;
    relaxation_step(G, 0.3, {1.0, 0.5, 1.0}, MaxwellianMode::conservative);
    EXPECT_LT(max_abs_diff(F, G), 1e-12);
}

TEST(Relaxation, LongStepReachesMaxwellian) {
    const auto g = small();
    auto F = bumpy(g, 1);
    const auto M = local_maxwellian(compute_moments(F), g, MaxwellianMode::conservative);
    relaxation_step(F, 1e12, {}, MaxwellianMode::conservative);
    EXPECT_LT(max_abs_diff(F, M), 1e-10);
}

TEST(Relaxation, ConservesMomentsAndPositivity) {
    const auto g = small();
    auto F = bumpy(g, 2);
    const auto before = conservation_totals(F);
    relaxation_step(F, 0.05, {1.0, 0.5, 1.0}, MaxwellianMode::conservative);
    const auto drift = conservation_drift(conservation_totals(F), before);
    EXPECT_LT(drift.mass, 1e-12);
    EXPECT_LT(drift.momentum, 1e-12);
    EXPECT_LT(drift.energy, 1e-12);
    for (double x : F.values()) ASSERT_GE(x, 0.0);
}

TEST(Relaxation, SampledModeDriftsAtQuadratureLevel) {
    const auto g = small();
    auto F = bumpy(g, 3);
    const auto before = conservation_totals(F);
    relaxation_step(F, 0.5, {}, MaxwellianMode::sampled);
    const auto drift = conservation_drift(conservation_totals(F), before);
    EXPECT_GT(drift.energy, 1e-12);
    EXPECT_LT(drift.energy, 1e-3);
}

TEST(Relaxation, ImplicitEulerWeight) {
    const auto g = small();
    auto F = bumpy(g, 4);
    const auto M = local_maxwellian(compute_moments(F), g, MaxwellianMode::conservative);
    const double dt = 0.2;  // nu = 1
    auto expected = F;
    for (std::size_t k = 0; k < F.values().size(); ++k)
        expected.values()[k] = (F.values()[k] + dt * M.values()[k]) / (1.0 + dt);
    relaxation_step(F, dt, {}, MaxwellianMode::conservative, RelaxationWeight::implicit_euler);
    EXPECT_LT(max_abs_diff(F, expected), 1e-15);
    EXPECT_DOUBLE_EQ(relaxation_weight(0.2, RelaxationWeight::exact), 1.0 - std::exp(-0.2));
}

TEST(Relaxation, EntropyDecreasesAcrossSubstep) {
    const auto g = small();
    auto F = bumpy(g, 5);
    const auto report = relaxation_step(F, 0.1, {1.0, 0.0, 1.0}, MaxwellianMode::conservative,
                                        RelaxationWeight::exact, 1e-12, 1, true);
    EXPECT_LT(report.entropy_after, report.entropy_before);
    EXPECT_NEAR(report.entropy_after, h_functional(F), 1e-12 * std::abs(report.entropy_after));
}

TEST(Relaxation, RejectsPerturbationField) {
    const auto g = small();
    DistributionField f(g, FieldKind::perturbation);
    EXPECT_THROW(relaxation_step(f, 0.1, {}, MaxwellianMode::conservative), InvalidConfig);
}

TEST(LinearizedStep, HomogeneousKernelIsInvariant) {
    const auto g = small();
    const ProjectionBasis basis(g);
    const Transport transport(g, TransportKind::spectral_shift);
    DistributionField f(g, FieldKind::perturbation);
    for (std::size_t i = 0; i < g->num_cells(); ++i)
        for (std::size_t j = 0; j < g->num_velocities(); ++j)
            f.at(i, j) = 0.3 * basis.vector(0)[j] - 0.2 * basis.vector(2)[j] + 0.7 * basis.vector(4)[j];
    auto h = f;
    for (int s = 0; s < 10; ++s) linearized_step(h, 0.1, basis, 1.0, transport);
    EXPECT_LT(max_abs_diff(f, h), 1e-13);
}

TEST(LinearizedStep, HomogeneousMicroscopicDecaysAtNuC) {
    const auto g = small();
    const ProjectionBasis basis(g);
    const Transport transport(g, TransportKind::spectral_shift);
    DistributionField f(g, FieldKind::perturbation);
    std::vector<double> profile(g->num_velocities()), pf(g->num_velocities());
    for (std::size_t j = 0; j < profile.size(); ++j)
        profile[j] = g->velocity(j, 0) * g->velocity(j, 1) * g->sqrt_background()[j] +
                     std::pow(g->speed_squared(j), 2) * g->sqrt_background()[j] / 10.0;
    basis.project_cell(profile, pf);
    for (std::size_t i = 0; i < g->num_cells(); ++i)
        for (std::size_t j = 0; j < profile.size(); ++j) f.at(i, j) = profile[j] - pf[j];
    const double n0 = norm_l2(f), nu = 1.3;
    for (int s = 1; s <= 20; ++s) {
        linearized_step(f, 0.05, basis, nu, transport);
        ASSERT_NEAR(norm_l2(f), std::exp(-nu * 0.05 * s) * n0, 1e-12 * n0);
    }
}

TEST(LinearizedStep, Contraction) {
    const auto g = small();
    const ProjectionBasis basis(g);
    const Transport transport(g, TransportKind::spectral_shift);
    auto f = oracle::random_perturbation(g, 77);
    double last = norm_l2(f);
    for (int s = 0; s < 5; ++s) {
        linearized_step(f, 0.1, basis, 1.0, transport);
        const double now = norm_l2(f);
        EXPECT_LE(now, last * (1.0 + 1e-14));
        last = now;
    }
}

TEST(Run, ZeroTimeReturnsInitial) {
    const auto g = small();
    const auto F = maxwellian_wave(g, 0.05);
    SolverConfig cfg;
    cfg.t_end = 0.0;
    int records = 0;
    const auto res = run(F, cfg, {}, [&](double t, std::size_t, const DistributionField&) {
        EXPECT_EQ(t, 0.0);
        ++records;
    });
    EXPECT_EQ(records, 1);
    EXPECT_EQ(res.steps, 0u);
    EXPECT_TRUE(std::equal(F.values().begin(), F.values().end(), res.final_state.values().begin()));
}

TEST(Run, GlobalEquilibriumStaysPut) {
    const auto g = small();
    const auto F = maxwellian_wave(g, 0.0);
    SolverConfig cfg;
    cfg.t_end = 0.5;
    cfg.dt = 0.05;
    const auto res = run(F, cfg, {1.0, 1.0, 1.0}, nullptr);
    EXPECT_LT(max_abs_diff(res.final_state, F), 1e-12);
}

TEST(Run, SampleTimesAndShortLastStep) {
    const auto g = small();
    SolverConfig cfg;
    cfg.dt = 0.03;
    cfg.t_end = 0.1;
    cfg.sample_interval = 0.06;
    std::vector<double> times;
    const auto res = run(maxwellian_wave(g, 0.05), cfg, {},
                         [&](double t, std::size_t, const DistributionField&) { times.push_back(t); });
    EXPECT_EQ(res.steps, 4u);
    ASSERT_EQ(times.size(), 3u);
    EXPECT_EQ(times[0], 0.0);
    EXPECT_NEAR(times[1], 0.06, 1e-15);
    EXPECT_EQ(times[2], 0.1);
}

TEST(Run, DeterministicAcrossRepeatsAndWorkers) {
    const auto g = small();
    const auto F = maxwellian_wave(g, 0.05, 0.02);
    SolverConfig cfg;
    cfg.t_end = 0.2;
    cfg.dt = 0.02;
    const auto a = run(F, cfg, {1.0, 0.5, 1.0}, nullptr);
    const auto b = run(F, cfg, {1.0, 0.5, 1.0}, nullptr);
    cfg.workers = 4;
    const auto c = run(F, cfg, {1.0, 0.5, 1.0}, nullptr);
    EXPECT_TRUE(std::equal(a.final_state.values().begin(), a.final_state.values().end(),
                           b.final_state.values().begin()));
    EXPECT_TRUE(std::equal(a.final_state.values().begin(), a.final_state.values().end(),
                           c.final_state.values().begin()));
}

TEST(Run, NonFiniteInitialDataStopsAtStepZero) {
    const auto g = small();
    auto F = maxwellian_wave(g, 0.05);
    F.at(3, 4) = NAN;
    try {
        run(F, SolverConfig{}, {}, nullptr);
        FAIL() << "expected NonFiniteState";
    } catch (const NonFiniteState& e) {
        EXPECT_EQ(e.step(), 0u);
    }
}

TEST(Run, CflGuardOnlyWarns) {
    const auto g = small();
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.t_end = 0.1;
    const auto res = run(maxwellian_wave(g, 0.05), cfg, {}, nullptr);
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_NE(res.warnings[0].find("cfl_guard"), std::string::npos);
}

TEST(Run, LinearizedModeWorksOnPerturbation) {
    const auto g = small();
    SolverConfig cfg;
    cfg.mode = SolverMode::linearized;
    cfg.t_end = 0.5;
    std::vector<double> norms;
    run(maxwellian_wave(g, 0.05), cfg, {},
        [&](double, std::size_t, const DistributionField& f) {
            EXPECT_EQ(f.kind(), FieldKind::perturbation);
            norms.push_back(norm_l2(f));
        });
    for (std::size_t k = 1; k < norms.size(); ++k) EXPECT_LE(norms[k], norms[k - 1] * (1.0 + 1e-14));
}

// Convergence order of the splitting against a fine reference on a cheap
// grid: Strang with the exact relaxation weight is second order, Lie and
// Strang with the implicit-Euler weight are first order.
TEST(Run, SplittingOrders) {
    const auto g = small();
    const auto F = maxwellian_wave(g, 0.05, 0.02);
    auto solve = [&](double dt, Splitting s, RelaxationWeight w) {
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 0.4;
        cfg.splitting = s;
        cfg.relaxation = w;
        return run(F, cfg, {1.0, 0.5, 1.0}, nullptr).final_state;
    };
    auto slope = [&](Splitting s, RelaxationWeight w) {
        const auto ref = solve(0.0025, Splitting::strang, RelaxationWeight::exact);
        const double e1 = max_abs_diff(solve(0.04, s, w), ref);
        const double e2 = max_abs_diff(solve(0.02, s, w), ref);
        return std::log2(e1 / e2);
    };
    EXPECT_NEAR(slope(Splitting::strang, RelaxationWeight::exact), 2.0, 0.3);
    EXPECT_NEAR(slope(Splitting::lie, RelaxationWeight::exact), 1.0, 0.3);
    EXPECT_NEAR(slope(Splitting::strang, RelaxationWeight::implicit_euler), 1.0, 0.3);
}
