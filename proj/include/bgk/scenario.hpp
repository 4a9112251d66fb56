#pragma once

// Scenario files, initial data and the end-to-end scenario runner.
//
// Config format: `key = value` lines, `#` comments, `[section]` headers.
// Sections: grid, solver, frequency, initial, twin, diagnostics. Keys before
// any section belong to the scenario itself (name, sample_interval,
// output_dir); `initial = <type>` and `twin = <type>` there are shorthands
// for the `type` key of the corresponding section.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bgk/checkpoint.hpp"
#include "bgk/diagnostics.hpp"
#include "bgk/errors.hpp"
#include "bgk/linearized.hpp"
#include "bgk/maxwellian.hpp"
#include "bgk/phase_grid.hpp"
#include "bgk/solver.hpp"

namespace bgk {

enum class InitialKind { equilibrium, density_wave, temperature_wave, microscopic_mode, from_checkpoint };

inline const char* to_string(InitialKind k) {
    switch (k) {
    case InitialKind::equilibrium: return "equilibrium";
    case InitialKind::density_wave: return "density_wave";
    case InitialKind::temperature_wave: return "temperature_wave";
    case InitialKind::microscopic_mode: return "microscopic_mode";
    case InitialKind::from_checkpoint: return "from_checkpoint";
    }
    return "?";
}

inline const char* to_string(NuCMode m) { return m == NuCMode::background ? "background" : "paper"; }

struct InitialSpec {
    InitialKind kind = InitialKind::equilibrium;
    double amplitude = 0.0;
    int wavenumber = 1;  // microscopic_mode: 0 means spatially homogeneous
    std::string path;    // from_checkpoint

    bool operator==(const InitialSpec&) const = default;
};

struct FrequencyInput {
    double eta = 0.0;
    double omega = 0.0;
    NuCMode nu_c_mode = NuCMode::background;

    bool operator==(const FrequencyInput&) const = default;

    CollisionFrequencySpec spec() const {
        return {eta, omega, background_collision_frequency(nu_c_mode, omega)};
    }
};

struct DiagnosticsConfig {
    int spatial_order = 2;
    int velocity_order = 1;
    /// Start of the decay-fit window; negative means 5 / nu_c.
    double t_skip = -1.0;

    bool operator==(const DiagnosticsConfig&) const = default;
};

struct Scenario {
    std::string name = "scenario";
    GridConfig grid;
    SolverConfig solver;
    FrequencyInput frequency;
    InitialSpec initial;
    std::optional<InitialSpec> twin;
    DiagnosticsConfig diagnostics;
    std::string output_dir = "output";

    bool operator==(const Scenario&) const = default;

    double fit_window_start() const {
        return diagnostics.t_skip >= 0.0 ? diagnostics.t_skip : 5.0 / frequency.spec().nu_c;
    }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct ConfigEntry {
    std::string value;
    std::size_t line = 0;
};

class ValueReader {
public:
    ValueReader(const std::map<std::string, ConfigEntry>& entries) : entries_(entries) {}

    template <class T>
    void read(const std::string& key, T& out) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return;
        out = convert<T>(it->second, key);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

private:
    template <class T>
    T convert(const ConfigEntry& e, const std::string& key) const {
        const std::string& v = e.value;
        if constexpr (std::is_same_v<T, std::string>) {
            return v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw ParseError(e.line, key, "expected a boolean, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, double>) {
            double x = 0.0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || p != v.data() + v.size())
                throw ParseError(e.line, key, "expected a number, got '" + v + "'");
            return x;
        } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, unsigned>) {
            long long x = 0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || p != v.data() + v.size())
                throw ParseError(e.line, key, "expected an integer, got '" + v + "'");
            if constexpr (std::is_same_v<T, unsigned>)
                if (x < 0) throw ParseError(e.line, key, "expected a non-negative integer");
            return static_cast<T>(x);
        } else if constexpr (std::is_same_v<T, std::array<double, 3>>) {
            std::array<double, 3> out{};
            std::vector<std::string> parts;
            std::stringstream ss(v);
            for (std::string part; std::getline(ss, part, ',');) parts.push_back(trim(part));
            if (parts.empty() || parts.size() > 3)
                throw ParseError(e.line, key, "expected 1 to 3 comma-separated numbers");
            for (std::size_t k = 0; k < 3; ++k)
                out[k] = convert<double>({parts[std::min(k, parts.size() - 1)], e.line}, key);
            return out;
        } else {
            return parse_enum<T>(e, key);
        }
    }

    template <class T>
    T parse_enum(const ConfigEntry& e, const std::string& key) const {
        const std::string& v = e.value;
        auto fail = [&]() -> T { throw ParseError(e.line, key, "unknown value '" + v + "'"); };
        if constexpr (std::is_same_v<T, SolverMode>) {
            if (v == "nonlinear") return SolverMode::nonlinear;
            if (v == "linearized") return SolverMode::linearized;
        } else if constexpr (std::is_same_v<T, TransportKind>) {
            if (v == "spectral_shift") return TransportKind::spectral_shift;
            if (v == "semi_lagrangian_spline") return TransportKind::semi_lagrangian_spline;
        } else if constexpr (std::is_same_v<T, MaxwellianMode>) {
            if (v == "conservative") return MaxwellianMode::conservative;
            if (v == "sampled") return MaxwellianMode::sampled;
        } else if constexpr (std::is_same_v<T, Splitting>) {
            if (v == "strang") return Splitting::strang;
            if (v == "lie") return Splitting::lie;
        } else if constexpr (std::is_same_v<T, RelaxationWeight>) {
            if (v == "exact") return RelaxationWeight::exact;
            if (v == "implicit_euler") return RelaxationWeight::implicit_euler;
        } else if constexpr (std::is_same_v<T, NuCMode>) {
            if (v == "background") return NuCMode::background;
            if (v == "paper") return NuCMode::paper;
        } else if constexpr (std::is_same_v<T, InitialKind>) {
            for (auto k : {InitialKind::equilibrium, InitialKind::density_wave, InitialKind::temperature_wave,
                           InitialKind::microscopic_mode, InitialKind::from_checkpoint})
                if (v == to_string(k)) return k;
        }
        return fail();
    }

    const std::map<std::string, ConfigEntry>& entries_;
};

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "name", "sample_interval", "output_dir", "initial.type", "twin.type",
        "grid.spatial_dims", "grid.spatial_points", "grid.domain_length", "grid.velocity_dims",
        "grid.velocity_points", "grid.velocity_cutoff", "grid.quadrature_tolerance",
        "solver.dt", "solver.t_end", "solver.mode", "solver.transport", "solver.maxwellian_mode",
        "solver.cfl_guard", "solver.splitting", "solver.relaxation", "solver.workers",
        "solver.conservative_tolerance", "solver.monitor_relaxation_entropy",
        "frequency.eta", "frequency.omega", "frequency.nu_c_mode",
        "initial.amplitude", "initial.wavenumber", "initial.path",
        "twin.amplitude", "twin.wavenumber", "twin.path",
        "diagnostics.spatial_order", "diagnostics.velocity_order", "diagnostics.t_skip"};
    return keys;
}

inline void validate_initial(const InitialSpec& s, const std::string& label, std::vector<std::string>& errors) {
    const bool wave = s.kind == InitialKind::density_wave || s.kind == InitialKind::temperature_wave;
    if (wave || s.kind == InitialKind::microscopic_mode) {
        if (!std::isfinite(s.amplitude)) errors.push_back(label + ".amplitude must be finite");
        // Perturbative window: rho and T stay inside [1/2, 3/2] at t = 0.
        if (wave && std::abs(s.amplitude) > 0.5) {
            const char* field = s.kind == InitialKind::density_wave ? "density" : "temperature";
            errors.push_back(label + ".amplitude " + format_real(s.amplitude) + " lets the " + field +
                             " leave [1/2, 3/2] (|amplitude| must be <= 0.5)");
        }
        if (s.kind == InitialKind::microscopic_mode && std::abs(s.amplitude) > 0.1)
            errors.push_back(label + ".amplitude must satisfy |amplitude| <= 0.1 for microscopic_mode");
        if (wave && s.wavenumber < 1) errors.push_back(label + ".wavenumber must be >= 1");
        if (s.kind == InitialKind::microscopic_mode && s.wavenumber < 0)
            errors.push_back(label + ".wavenumber must be >= 0");
    }
    if (s.kind == InitialKind::from_checkpoint && s.path.empty())
        errors.push_back(label + ".path is required for from_checkpoint");
}

inline void validate(const Scenario& sc) {
    std::vector<std::string> errors;
    const auto& g = sc.grid;
    if (g.spatial_dims < 1 || g.spatial_dims > 3) errors.push_back("grid.spatial_dims must be 1, 2 or 3");
    if (g.velocity_dims != 1 && g.velocity_dims != 3) errors.push_back("grid.velocity_dims must be 1 or 3");
    if (g.spatial_points < 8) errors.push_back("grid.spatial_points must be >= 8");
    if (g.velocity_points < 8) errors.push_back("grid.velocity_points must be >= 8");
    for (int d = 0; d < std::clamp(g.spatial_dims, 1, 3); ++d)
        if (!(g.domain_length[d] > 0.0)) errors.push_back("grid.domain_length must be > 0");
    if (!(g.velocity_cutoff > 0.0)) errors.push_back("grid.velocity_cutoff must be > 0");
    if (!(g.quadrature_tolerance > 0.0)) errors.push_back("grid.quadrature_tolerance must be > 0");

    const auto& s = sc.solver;
    if (!(s.dt > 0.0)) errors.push_back("solver.dt must be > 0");
    if (!(s.t_end > 0.0)) errors.push_back("solver.t_end must be > 0");
    if (s.dt > s.t_end) errors.push_back("solver.dt must not exceed solver.t_end");
    if (!(s.sample_interval > 0.0)) errors.push_back("sample_interval must be > 0");
    if (!(s.cfl_guard > 0.0)) errors.push_back("solver.cfl_guard must be > 0");
    if (s.workers < 1) errors.push_back("solver.workers must be >= 1");
    if (!(s.conservative_tolerance > 0.0)) errors.push_back("solver.conservative_tolerance must be > 0");

    if (!std::isfinite(sc.frequency.eta)) errors.push_back("frequency.eta must be finite");
    if (!std::isfinite(sc.frequency.omega)) errors.push_back("frequency.omega must be finite");

    if (sc.diagnostics.spatial_order < 0 || sc.diagnostics.velocity_order < 0)
        errors.push_back("diagnostics orders must be >= 0");

    validate_initial(sc.initial, "initial", errors);
    if (sc.twin) validate_initial(*sc.twin, "twin", errors);

    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " constraint(s) violated:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
}

} // namespace detail

inline Scenario parse_config_text(const std::string& text) {
    std::map<std::string, detail::ConfigEntry> entries;
    std::string section;
    std::istringstream in(text);
    std::size_t lineno = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(lineno, "", "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> sections{"grid", "solver", "frequency", "initial", "twin",
                                                        "diagnostics"};
            if (!sections.count(section)) throw ParseError(lineno, section, "unknown section");
            if (section == "twin") entries.emplace("twin.section", detail::ConfigEntry{"", lineno});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "", "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(lineno, "", "missing key");
        std::string full = section.empty() ? key : section + "." + key;
        if (full == "initial" || full == "twin") full += ".type";
        if (!detail::known_keys().count(full)) throw ParseError(lineno, full, "unknown key");
        if (entries.count(full)) throw ParseError(lineno, full, "duplicate key");
        entries[full] = {value, lineno};
    }

    Scenario sc;
    detail::ValueReader r(entries);
    r.read("name", sc.name);
    r.read("sample_interval", sc.solver.sample_interval);
    r.read("output_dir", sc.output_dir);

    r.read("grid.spatial_dims", sc.grid.spatial_dims);
    r.read("grid.spatial_points", sc.grid.spatial_points);
    r.read("grid.domain_length", sc.grid.domain_length);
    r.read("grid.velocity_dims", sc.grid.velocity_dims);
    r.read("grid.velocity_points", sc.grid.velocity_points);
    r.read("grid.velocity_cutoff", sc.grid.velocity_cutoff);
    r.read("grid.quadrature_tolerance", sc.grid.quadrature_tolerance);

    r.read("solver.dt", sc.solver.dt);
    r.read("solver.t_end", sc.solver.t_end);
    r.read("solver.mode", sc.solver.mode);
    r.read("solver.transport", sc.solver.transport);
    r.read("solver.maxwellian_mode", sc.solver.maxwellian_mode);
    r.read("solver.cfl_guard", sc.solver.cfl_guard);
    r.read("solver.splitting", sc.solver.splitting);
    r.read("solver.relaxation", sc.solver.relaxation);
    r.read("solver.workers", sc.solver.workers);
    r.read("solver.conservative_tolerance", sc.solver.conservative_tolerance);
    r.read("solver.monitor_relaxation_entropy", sc.solver.monitor_relaxation_entropy);

    r.read("frequency.eta", sc.frequency.eta);
    r.read("frequency.omega", sc.frequency.omega);
    r.read("frequency.nu_c_mode", sc.frequency.nu_c_mode);

    r.read("initial.type", sc.initial.kind);
    r.read("initial.amplitude", sc.initial.amplitude);
    r.read("initial.wavenumber", sc.initial.wavenumber);
    r.read("initial.path", sc.initial.path);
    if (sc.initial.kind == InitialKind::microscopic_mode && !r.has("initial.wavenumber"))
        sc.initial.wavenumber = 0;

    if (r.has("twin.section") || r.has("twin.type")) {
        InitialSpec tw = sc.initial;
        r.read("twin.type", tw.kind);
        r.read("twin.amplitude", tw.amplitude);
        r.read("twin.wavenumber", tw.wavenumber);
        r.read("twin.path", tw.path);
        sc.twin = tw;
    }

    r.read("diagnostics.spatial_order", sc.diagnostics.spatial_order);
    r.read("diagnostics.velocity_order", sc.diagnostics.velocity_order);
    r.read("diagnostics.t_skip", sc.diagnostics.t_skip);

    detail::validate(sc);
    return sc;
}

inline Scenario parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "", "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical text of a scenario with every default filled in.
inline std::string to_config_text(const Scenario& sc) {
    std::ostringstream os;
    auto initial = [&](const InitialSpec& s) {
        os << "type = " << to_string(s.kind) << "\n"
           << "amplitude = " << format_real(s.amplitude) << "\n"
           << "wavenumber = " << s.wavenumber << "\n";
        if (!s.path.empty()) os << "path = " << s.path << "\n";
    };
    os << "# resolved scenario\n"
       << "name = " << sc.name << "\n"
       << "sample_interval = " << format_real(sc.solver.sample_interval) << "\n"
       << "output_dir = " << sc.output_dir << "\n\n";
    os << "[grid]\n"
       << "spatial_dims = " << sc.grid.spatial_dims << "\n"
       << "spatial_points = " << sc.grid.spatial_points << "\n"
       << "domain_length = " << format_real(sc.grid.domain_length[0]) << ", "
       << format_real(sc.grid.domain_length[1]) << ", " << format_real(sc.grid.domain_length[2]) << "\n"
       << "velocity_dims = " << sc.grid.velocity_dims << "\n"
       << "velocity_points = " << sc.grid.velocity_points << "\n"
       << "velocity_cutoff = " << format_real(sc.grid.velocity_cutoff) << "\n"
       << "quadrature_tolerance = " << format_real(sc.grid.quadrature_tolerance) << "\n\n";
    os << "[solver]\n"
       << "dt = " << format_real(sc.solver.dt) << "\n"
       << "t_end = " << format_real(sc.solver.t_end) << "\n"
       << "mode = " << to_string(sc.solver.mode) << "\n"
       << "transport = " << to_string(sc.solver.transport) << "\n"
       << "maxwellian_mode = " << to_string(sc.solver.maxwellian_mode) << "\n"
       << "cfl_guard = " << format_real(sc.solver.cfl_guard) << "\n"
       << "splitting = " << to_string(sc.solver.splitting) << "\n"
       << "relaxation = " << to_string(sc.solver.relaxation) << "\n"
       << "workers = " << sc.solver.workers << "\n"
       << "conservative_tolerance = " << format_real(sc.solver.conservative_tolerance) << "\n"
       << "monitor_relaxation_entropy = " << (sc.solver.monitor_relaxation_entropy ? "true" : "false")
       << "\n\n";
    os << "[frequency]\n"
       << "eta = " << format_real(sc.frequency.eta) << "\n"
       << "omega = " << format_real(sc.frequency.omega) << "\n"
       << "nu_c_mode = " << to_string(sc.frequency.nu_c_mode) << "\n\n";
    os << "[initial]\n";
    initial(sc.initial);
    if (sc.twin) {
        os << "\n[twin]\n";
        initial(*sc.twin);
    }
    os << "\n[diagnostics]\n"
       << "spatial_order = " << sc.diagnostics.spatial_order << "\n"
       << "velocity_order = " << sc.diagnostics.velocity_order << "\n"
       << "t_skip = " << format_real(sc.diagnostics.t_skip) << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Fixed smooth non-equilibrium velocity profile used by microscopic_mode,
/// divided by sqrt(m): |v|^4/8 + v_1^3/2 (+ v_1 v_2 in 3-D).
inline double microscopic_profile(const PhaseGrid& grid, std::size_t j) {
    const double s2 = grid.speed_squared(j);
    const double v1 = grid.velocity(j, 0);
    double g = s2 * s2 / 8.0 + 0.5 * v1 * v1 * v1;
    if (grid.velocity_dims() == 3) g += v1 * grid.velocity(j, 1);
    return g;
}

/// Subtracts a spatially uniform combination of sqrt(m), v sqrt(m),
/// |v|^2 sqrt(m) so that the global integrals of f against them vanish.
inline void remove_conserved_components(DistributionField& f) {
    const auto& grid = f.grid();
    const int dims = grid.velocity_dims();
    const std::size_t n = dims + 2;
    const std::size_t nv = grid.num_velocities();
    const auto sm = grid.sqrt_background();
    std::vector<std::vector<double>> psi(n, std::vector<double>(nv));
    for (std::size_t j = 0; j < nv; ++j) {
        psi[0][j] = sm[j];
        for (int d = 0; d < dims; ++d) psi[1 + d][j] = grid.velocity(j, d) * sm[j];
        psi[n - 1][j] = grid.speed_squared(j) * sm[j];
    }
    std::vector<double> gram(n * n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) gram[p * n + q] = velocity_inner(psi[p], psi[q], grid.weight());
    std::vector<double> totals(n, 0.0);
    for (std::size_t i = 0; i < grid.num_cells(); ++i)
        for (std::size_t p = 0; p < n; ++p) totals[p] += velocity_inner(f.cell(i), psi[p], grid.weight());
    for (double& t : totals) t /= static_cast<double>(grid.num_cells());
    const auto coef = detail::solve_dense(n, gram, totals);
    if (!coef) throw GramSingular("invariant Gram matrix is singular");
    for (std::size_t i = 0; i < grid.num_cells(); ++i) {
        auto cell = f.cell(i);
        for (std::size_t j = 0; j < nv; ++j) {
            double h = 0.0;
            for (std::size_t p = 0; p < n; ++p) h += (*coef)[p] * psi[p][j];
            cell[j] -= h;
        }
    }
}

inline DistributionField make_initial(const InitialSpec& spec, const GridPtr& grid) {
    const auto& g = *grid;
    DistributionField field;
    const double A = spec.amplitude;
    auto phase = [&](std::size_t i) {
        return 2.0 * std::numbers::pi * spec.wavenumber * g.position(i, 0) / g.domain_length(0);
    };

    switch (spec.kind) {
    case InitialKind::equilibrium: {
        field = DistributionField(grid, FieldKind::absolute);
        for (std::size_t i = 0; i < g.num_cells(); ++i)
            std::copy(g.background().begin(), g.background().end(), field.cell(i).begin());
        return field;
    }
    case InitialKind::density_wave:
    case InitialKind::temperature_wave: {
        field = DistributionField(grid, FieldKind::absolute);
        std::vector<double> pos(g.velocity_dims());
        for (std::size_t i = 0; i < g.num_cells(); ++i) {
            MacroState s;
            const double bump = A * std::sin(phase(i));
            if (spec.kind == InitialKind::density_wave)
                s.rho = 1.0 + bump;
            else
                s.T = 1.0 + bump;
            auto cell = field.cell(i);
            for (std::size_t j = 0; j < g.num_velocities(); ++j) {
                for (int d = 0; d < g.velocity_dims(); ++d) pos[d] = g.velocity(j, d);
                cell[j] = maxwellian_value(s, pos);
            }
        }
        auto f = convert(field, FieldKind::perturbation);
        remove_conserved_components(f);
        field = convert(f, FieldKind::absolute);
        break;
    }
    case InitialKind::microscopic_mode: {
        const ProjectionBasis basis(grid);
        DistributionField f(grid, FieldKind::perturbation);
        const auto sm = g.sqrt_background();
        std::vector<double> profile(g.num_velocities());
        for (std::size_t j = 0; j < profile.size(); ++j) profile[j] = microscopic_profile(g, j) * sm[j];
        for (std::size_t i = 0; i < g.num_cells(); ++i) {
            const double mod = spec.wavenumber == 0 ? 1.0 : std::cos(phase(i));
            auto cell = f.cell(i);
            for (std::size_t j = 0; j < profile.size(); ++j) cell[j] = mod * profile[j];
            std::vector<double> pf(profile.size());
            basis.project_cell(cell, pf);
            for (std::size_t j = 0; j < profile.size(); ++j) cell[j] = A * (cell[j] - pf[j]);
        }
        remove_conserved_components(f);
        field = std::move(f);
        break;
    }
    case InitialKind::from_checkpoint: {
        const auto ck = read_checkpoint(spec.path);
        if (!checkpoint_matches(ck, g.config()))
            throw ValidationError("checkpoint " + spec.path + " was written on a different grid");
        return DistributionField(grid, ck.kind, ck.values);
    }
    }

    const auto F = convert(field, FieldKind::absolute);
    const auto lo = std::min_element(F.values().begin(), F.values().end());
    if (*lo < 0.0)
        throw PositivityViolation("initial F has a negative value " + format_real(*lo) + " at index " +
                                  std::to_string(lo - F.values().begin()));
    return field;
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

inline constexpr double conservation_threshold = 1e-10;
inline constexpr double entropy_slack = 1e-12;

struct ScenarioOutcome {
    int exit_code = 0;
    nlohmann::json summary;
    std::vector<DiagnosticsRecord> records;
};

namespace detail {

inline nlohmann::json fit_json(const std::vector<double>& t, const std::vector<double>& v, double t_min) {
    try {
        const auto fit = fit_decay_rate(t, v, t_min);
        return {{"rate", fit.rate}, {"r_squared", fit.r_squared}, {"samples", fit.samples},
                {"window_start", t_min}};
    } catch (const Error& e) {
        return {{"error", e.what()}};
    }
}

} // namespace detail

/// Runs the scenario (and its twin when configured), writing
/// diagnostics.csv, final.ckpt, summary.json and resolved_config.ini into
/// the output directory. The exit code is 0 only when the run completed and
/// every hard invariant held.
inline ScenarioOutcome run_scenario(const Scenario& sc, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    ScenarioOutcome out;
    auto& summary = out.summary;
    summary["name"] = sc.name;
    summary["mode"] = to_string(sc.solver.mode);
    summary["failures"] = nlohmann::json::array();
    auto fail = [&](const std::string& kind, const std::string& message) {
        summary["failures"].push_back({{"kind", kind}, {"message", message}});
    };

    fs::create_directories(sc.output_dir);
    const fs::path dir(sc.output_dir);
    {
        std::ofstream cfg(dir / "resolved_config.ini");
        cfg << to_config_text(sc);
    }

    const bool nonlinear = sc.solver.mode == SolverMode::nonlinear;
    try {
        const auto grid = build_grid(sc.grid);
        const auto spec = sc.frequency.spec();
        summary["nu_c"] = spec.nu_c;
        const auto initial = make_initial(sc.initial, grid);
        std::optional<DistributionField> twin;
        if (sc.twin) twin = make_initial(*sc.twin, grid);

        Solver solver(grid, sc.solver, spec);
        DiagnosticsMonitor monitor(grid, spec.nu_c, sc.diagnostics.spatial_order, sc.diagnostics.velocity_order,
                                   sc.solver.workers);
        std::ofstream csv(dir / "diagnostics.csv");
        write_csv_header(csv);
        auto on_sample = [&](double t, const DistributionField& f, const DistributionField* other) {
            auto rec = monitor.record(t, f, other);
            write_csv_row(csv, rec);
            out.records.push_back(std::move(rec));
            if (log) *log << "t = " << format_real(t) << '\n';
        };

        RunResult result;
        if (twin) {
            auto [res, other] = solver.run_twin(
                initial, *twin,
                [&](double t, std::size_t, const DistributionField& a, const DistributionField& b) {
                    on_sample(t, a, &b);
                });
            result = std::move(res);
        } else {
            result = solver.run(initial, [&](double t, std::size_t, const DistributionField& a) {
                on_sample(t, a, nullptr);
            });
        }
        csv.close();
        write_checkpoint((dir / "final.ckpt").string(), result.final_state, result.t_final);
        summary["warnings"] = result.warnings;
        for (const auto& w : result.warnings)
            if (log) *log << "warning: " << w << '\n';

        // verdicts
        const auto& recs = out.records;
        double max_mass = 0.0, max_mom = 0.0, max_energy = 0.0, min_F = INFINITY;
        double worst_h_increase = -INFINITY, worst_l2_increase = -INFINITY, worst_twin_increase = -INFINITY;
        bool bounds_ok = true, constant_free_ok = true;
        double coercivity_inf = INFINITY;
        std::vector<double> ts, l2, en, dist;
        const double h_scale = std::abs(recs.front().H);
        for (std::size_t k = 0; k < recs.size(); ++k) {
            const auto& r = recs[k];
            max_mass = std::max(max_mass, r.drift.mass);
            max_mom = std::max(max_mom, r.drift.momentum);
            max_energy = std::max(max_energy, r.drift.energy);
            min_F = std::min(min_F, r.min_F);
            bounds_ok = bounds_ok && r.bounds.ok;
            constant_free_ok = constant_free_ok && r.bounds.constant_free_bounds_hold();
            if (r.coercivity && r.t >= 1.0) coercivity_inf = std::min(coercivity_inf, *r.coercivity);
            if (k > 0) {
                const auto& p = recs[k - 1];
                worst_h_increase = std::max(worst_h_increase, (r.H - p.H) / h_scale);
                worst_l2_increase = std::max(worst_l2_increase, (r.l2_f - p.l2_f) / std::max(recs.front().l2_f, 1e-300));
                if (r.twin_distance && p.twin_distance)
                    worst_twin_increase = std::max(worst_twin_increase, *r.twin_distance - *p.twin_distance);
            }
            ts.push_back(r.t);
            l2.push_back(r.l2_f);
            en.push_back(r.energy_norm);
            if (r.twin_distance) dist.push_back(*r.twin_distance);
        }
        const double t_min = sc.fit_window_start();
        summary["max_drift"] = {{"mass", max_mass}, {"momentum", max_mom}, {"energy", max_energy}};
        summary["min_F"] = min_F;
        summary["max_relative_H_increase_between_samples"] = worst_h_increase;
        summary["max_relative_l2_increase_between_samples"] = worst_l2_increase;
        summary["field_bounds_ok"] = bounds_ok;
        summary["constant_free_field_bounds_ok"] = constant_free_ok;
        summary["coercivity_inf_after_t1"] = std::isfinite(coercivity_inf) ? nlohmann::json(coercivity_inf)
                                                                            : nlohmann::json(nullptr);
        summary["decay_fit"] = {{"l2_f", detail::fit_json(ts, l2, t_min)},
                                {"energy_norm", detail::fit_json(ts, en, t_min)}};
        if (!dist.empty()) {
            summary["decay_fit"]["twin_distance"] = detail::fit_json(ts, dist, t_min);
            summary["twin_distance_non_increasing"] = worst_twin_increase <= 0.0;
        }
        if (nonlinear && sc.solver.monitor_relaxation_entropy)
            summary["max_relaxation_entropy_increase"] = result.max_relaxation_entropy_increase;

        // hard invariants
        if (nonlinear) {
            if (min_F < 0.0) fail("PositivityViolation", "min F = " + format_real(min_F));
            if (sc.solver.maxwellian_mode == MaxwellianMode::conservative &&
                std::max({max_mass, max_mom, max_energy}) >= conservation_threshold)
                fail("ConservationDrift", "max drift " + format_real(std::max({max_mass, max_mom, max_energy})));
            if (sc.solver.transport == TransportKind::spectral_shift && worst_h_increase > entropy_slack)
                fail("EntropyIncrease", "H grew by " + format_real(worst_h_increase) + " of |H(0)|");
        } else if (worst_l2_increase > entropy_slack) {
            fail("NormIncrease", "||f|| grew by " + format_real(worst_l2_increase) + " of ||f(0)||");
        }
    } catch (const Error& e) {
        fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        fail("Error", e.what());
    }

    out.exit_code = summary["failures"].empty() ? 0 : 1;
    summary["status"] = out.exit_code == 0 ? "ok" : "failed";
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
    return out;
}

} // namespace bgk
