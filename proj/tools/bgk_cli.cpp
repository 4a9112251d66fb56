// bgk_cli: run scenarios, inspect grids, fit decay rates.
//
//   bgk_cli run <config> [--output-dir DIR] [--mode nonlinear|linearized]
//                        [--twin] [--workers N] [--quiet]
//   bgk_cli check-grid <config>
//   bgk_cli fit <diagnostics.csv> [--column l2_f] [--t-min T] [--t-max T]

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bgk/bgk.hpp"

namespace {

int report_error(const bgk::Error& e) {
    nlohmann::json j{{"status", "failed"}, {"failures", {{{"kind", e.kind()}, {"message", e.what()}}}}};
    std::cerr << j.dump() << '\n';
    return 2;
}

int cmd_run(const std::string& path, const std::string& output_dir, const std::string& mode, bool twin,
            int workers, bool quiet) {
    auto sc = bgk::parse_config(path);
    if (!output_dir.empty()) sc.output_dir = output_dir;
    if (mode == "linearized") sc.solver.mode = bgk::SolverMode::linearized;
    if (mode == "nonlinear") sc.solver.mode = bgk::SolverMode::nonlinear;
    if (workers > 0) sc.solver.workers = static_cast<unsigned>(workers);
    if (twin && !sc.twin) {
        bgk::InitialSpec t = sc.initial;
        t.amplitude += 1e-4;
        sc.twin = t;
    }
    const auto out = bgk::run_scenario(sc, quiet ? nullptr : &std::cout);
    if (out.exit_code != 0) std::cerr << out.summary["failures"].dump() << '\n';
    if (!quiet) std::cout << "status: " << out.summary["status"].get<std::string>() << '\n';
    return out.exit_code;
}

int cmd_check_grid(const std::string& path) {
    const auto sc = bgk::parse_config(path);
    const auto grid = bgk::build_grid(sc.grid);
    const bgk::ProjectionBasis basis(grid, false);
    double temperature = 0.0, fourth = 0.0;
    const auto m = grid->background();
    for (std::size_t k = 0; k < grid->num_velocities(); ++k) {
        const double v1 = grid->velocity(k, 0);
        temperature += grid->weight() * m[k] * grid->speed_squared(k) / grid->velocity_dims();
        fourth += grid->weight() * m[k] * v1 * v1 * v1 * v1;
    }
    nlohmann::json j;
    j["background_mass"] = grid->background_mass();
    j["background_temperature"] = temperature;
    j["fourth_moment_v1"] = fourth;
    j["max_raw_gram_deviation"] = basis.max_gram_deviation();
    j["max_crossings_per_step"] = bgk::Transport(grid, sc.solver.transport).max_crossings(sc.solver.dt);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_fit(const std::string& path, const std::string& column, double t_min, double t_max) {
    std::ifstream in(path);
    if (!in) throw bgk::InvalidConfig("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        for (std::string h; std::getline(ss, h, ',');) header.push_back(h);
    }
    const auto col = std::find(header.begin(), header.end(), column) - header.begin();
    if (col == static_cast<long>(header.size())) throw bgk::InvalidConfig("no column named " + column);
    std::vector<double> t, v;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::vector<std::string> cells;
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (static_cast<long>(cells.size()) <= col || cells[col].empty()) continue;
        t.push_back(std::stod(cells[0]));
        v.push_back(std::stod(cells[col]));
    }
    const auto fit = bgk::fit_decay_rate(t, v, t_min, t_max);
    nlohmann::json j{{"column", column}, {"rate", fit.rate}, {"r_squared", fit.r_squared}, {"samples", fit.samples}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-velocity BGK solver"};
    app.require_subcommand(1);

    std::string config, output_dir, mode, csv, column = "l2_f";
    bool twin = false, quiet = false;
    int workers = 0;
    double t_min = 0.0, t_max = std::numeric_limits<double>::infinity();

    auto* run = app.add_subcommand("run", "Run a scenario");
    run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", output_dir, "Override output_dir");
    run->add_option("--mode", mode, "Override solver mode")->check(CLI::IsMember({"nonlinear", "linearized"}));
    run->add_flag("--twin", twin, "Also evolve a twin (amplitude + 1e-4 unless configured)");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "No progress output");

    auto* check = app.add_subcommand("check-grid", "Report quadrature accuracy of the grid");
    check->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);

    auto* fit = app.add_subcommand("fit", "Fit an exponential decay rate to a CSV column");
    fit->add_option("csv", csv, "diagnostics.csv")->required()->check(CLI::ExistingFile);
    fit->add_option("--column", column, "Column name");
    fit->add_option("--t-min", t_min, "Window start");
    fit->add_option("--t-max", t_max, "Window end");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, output_dir, mode, twin, workers, quiet);
        if (*check) return cmd_check_grid(config);
        if (*fit) return cmd_fit(csv, column, t_min, t_max);
    } catch (const bgk::Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
