#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bgk/linearized.hpp"
#include "bgk/transport.hpp"
#include "oracles.hpp"

using namespace bgk;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// 1-D velocity grid with integer nodes -4..4, so v = 1 is a node.
GridPtr integer_velocity_grid(int nx = 64, int sdims = 1) {
    GridConfig c;
    c.spatial_dims = sdims;
    c.spatial_points = nx;
    c.velocity_dims = 1;
    c.velocity_points = 9;
    c.velocity_cutoff = 4.5;
    c.quadrature_tolerance = 1e-4;
    return build_grid(c);
}

DistributionField sine_field(const GridPtr& g) {
    DistributionField f(g, FieldKind::perturbation);
    for (std::size_t i = 0; i < g->num_cells(); ++i) {
        double phase = 0.0;
        for (int d = 0; d < g->spatial_dims(); ++d) phase += g->position(i, d);
        for (std::size_t j = 0; j < g->num_velocities(); ++j) f.at(i, j) = std::sin(two_pi * phase);
    }
    return f;
}

// sin(2 pi sum_d (x_d - v_d dt)) at every node.
double max_error_vs_characteristics(const DistributionField& f, double dt) {
    const auto& g = f.grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.num_cells(); ++i)
        for (std::size_t j = 0; j < g.num_velocities(); ++j) {
            double phase = 0.0;
            for (int d = 0; d < g.spatial_dims(); ++d)
                phase += g.position(i, d) - (d < g.velocity_dims() ? g.velocity(j, d) : 0.0) * dt;
            worst = std::max(worst, std::abs(f.at(i, j) - std::sin(two_pi * phase)));
        }
    return worst;
}

} // namespace

TEST(Transport, ConstantInSpaceIsUnchanged) {
    const auto g = build_grid(oracle::small_grid(16, 8));
    DistributionField f(g, FieldKind::absolute);
    const auto profile = oracle::random_values(g->num_velocities(), 5);
    for (std::size_t i = 0; i < g->num_cells(); ++i) std::copy(profile.begin(), profile.end(), f.cell(i).begin());
    for (auto kind : {TransportKind::spectral_shift, TransportKind::semi_lagrangian_spline}) {
        auto h = f;
        Transport(g, kind).advance(h, 0.37);
        double worst = 0.0;
        for (std::size_t k = 0; k < h.values().size(); ++k)
            worst = std::max(worst, std::abs(h.values()[k] - f.values()[k]));
        EXPECT_LT(worst, 1e-14) << to_string(kind);
    }
}

TEST(Transport, SpectralShiftMatchesCharacteristics) {
    const auto g = integer_velocity_grid();
    auto f = sine_field(g);
    Transport(g, TransportKind::spectral_shift).advance(f, 0.25);
    EXPECT_LT(max_error_vs_characteristics(f, 0.25), 1e-10);
    // the v = 1 slice is sin(2 pi (x - 0.25))
    for (std::size_t i = 0; i < g->num_cells(); ++i)
        ASSERT_NEAR(f.at(i, 5), std::sin(two_pi * (g->position(i, 0) - 0.25)), 1e-10);
}

TEST(Transport, SplineMatchesCharacteristicsToInterpolationError) {
    const auto g = integer_velocity_grid();
    auto f = sine_field(g);
    Transport(g, TransportKind::semi_lagrangian_spline).advance(f, 0.013);
    EXPECT_LT(max_error_vs_characteristics(f, 0.013), 1e-5);
}

TEST(Transport, SplineErrorIsFourthOrder) {
    double errors[2];
    int k = 0;
    for (int nx : {32, 64}) {
        const auto g = integer_velocity_grid(nx);
        auto f = sine_field(g);
        Transport(g, TransportKind::semi_lagrangian_spline).advance(f, 0.3 / nx);
        errors[k++] = max_error_vs_characteristics(f, 0.3 / nx);
    }
    EXPECT_NEAR(std::log2(errors[0] / errors[1]), 4.0, 0.3);
}

TEST(Transport, SplineWholeCellShiftIsARoll) {
    const auto g = integer_velocity_grid(16);
    const auto f = oracle::random_perturbation(g, 21);
    auto h = f;
    const double dt = g->dx(0);  // v = 1 moves exactly one cell
    Transport(g, TransportKind::semi_lagrangian_spline).advance(h, dt);
    for (std::size_t i = 0; i < 16; ++i) ASSERT_NEAR(h.at((i + 1) % 16, 5), f.at(i, 5), 1e-13);
    for (std::size_t i = 0; i < 16; ++i) ASSERT_NEAR(h.at(i, 4), f.at(i, 4), 1e-14);  // v = 0
}

TEST(Transport, TwoDimensionalDiagonalWave) {
    GridConfig c;
    c.spatial_dims = 2;
    c.spatial_points = 16;
    c.velocity_dims = 3;
    c.velocity_points = 8;
    c.velocity_cutoff = 4.0;
    c.quadrature_tolerance = 1e-3;
    const auto g = build_grid(c);
    auto f = sine_field(g);
    Transport(g, TransportKind::spectral_shift).advance(f, 0.11);
    EXPECT_LT(max_error_vs_characteristics(f, 0.11), 1e-10);
}

TEST(Transport, SpectralSemigroup) {
    const auto g = build_grid(oracle::small_grid(16, 8));
    const auto f = oracle::random_perturbation(g, 8);
    auto once = f, twice = f;
    const Transport t(g, TransportKind::spectral_shift);
    t.advance(once, 0.07);
    t.advance(twice, 0.035);
    t.advance(twice, 0.035);
    double worst = 0.0;
    for (std::size_t k = 0; k < f.values().size(); ++k)
        worst = std::max(worst, std::abs(once.values()[k] - twice.values()[k]));
    EXPECT_LT(worst, 1e-13);
}

TEST(Transport, NormBehaviour) {
    const auto g = build_grid(oracle::small_grid(16, 8));
    const auto f = oracle::random_perturbation(g, 9);
    auto spectral = f, spline = f;
    Transport(g, TransportKind::spectral_shift).advance(spectral, 0.05);
    Transport(g, TransportKind::semi_lagrangian_spline).advance(spline, 0.05);
    EXPECT_LE(norm_l2(spectral), norm_l2(f) * (1.0 + 1e-14));
    EXPECT_LE(norm_l2(spline), norm_l2(f) * (1.0 + 1e-14));
}

TEST(Transport, WorkerCountDoesNotChangeBits) {
    const auto g = build_grid(oracle::small_grid(16, 8));
    const auto f = oracle::random_perturbation(g, 10);
    for (auto kind : {TransportKind::spectral_shift, TransportKind::semi_lagrangian_spline}) {
        auto a = f, b = f;
        const Transport t(g, kind);
        t.advance(a, 0.09, 1);
        t.advance(b, 0.09, 8);
        EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin())) << to_string(kind);
    }
}

TEST(Transport, CrossingsEstimate) {
    const auto g = build_grid({});
    EXPECT_NEAR(Transport(g, TransportKind::spectral_shift).max_crossings(0.01), 5.625 * 0.01 * 64, 1e-12);
}

TEST(PeriodicCubicSpline, InterpolatesNodes) {
    const PeriodicCubicSpline s(12);
    auto values = oracle::random_values(12, 3);
    auto coef = values;
    s.coefficients(coef);
    std::vector<double> out;
    s.shift(coef, 0.0, out);
    for (int i = 0; i < 12; ++i) EXPECT_NEAR(out[i], values[i], 1e-14);
}

TEST(Transport, SpectralShiftIsIsometricOnResolvedModes) {
    const auto g = integer_velocity_grid(16);
    DistributionField f(g, FieldKind::perturbation);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < g->num_velocities(); ++j)
            f.at(i, j) = std::cos(two_pi * 3 * g->position(i, 0) + j) + 0.5 * std::sin(two_pi * 7 * g->position(i, 0));
    auto h = f;
    Transport(g, TransportKind::spectral_shift).advance(h, 0.0123);
    EXPECT_NEAR(norm_l2(h), norm_l2(f), 1e-13 * norm_l2(f));
}
