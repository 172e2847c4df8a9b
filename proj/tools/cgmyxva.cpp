// Command-line front end: run, bench, convergence, sweep, presets list.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgmyxva/experiment.hpp"

namespace {

using namespace cgmyxva;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
    std::string config;
    std::string preset;
    std::string engine;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::string out;
    bool emit_paths = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config, "JSON experiment file");
    app->add_option("--preset", o.preset, "named preset (example1..example4)");
    app->add_option("--engine", o.engine, "fpde, cos or both")->check(CLI::IsMember({"fpde", "cos", "both"}));
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("--paths", o.paths, "number of Monte Carlo paths");
    app->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
        if (!o.preset.empty()) throw ConfigError("preset", "use either --config or --preset (or a preset key in the file)");
    } else if (!o.preset.empty()) {
        cfg = preset(o.preset);
    } else {
        throw ConfigError("config", "one of --config or --preset is required");
    }
    if (!o.engine.empty()) cfg.engine = parse_engine(o.engine);
    if (o.seed != 0) cfg.sim.seed = o.seed;
    if (o.paths != 0) cfg.sim.n_paths = o.paths;
    if (!o.out.empty()) cfg.outputs = o.out;
    if (o.emit_paths) cfg.emit_paths = true;
    cfg.validate();
    return cfg;
}

void print_report(const EngineRun& r) {
    std::cout << r.engine << ": V0=" << io::format_double(r.report.base_value)
              << " CVA%=" << io::format_double(r.report.cva_pct()) << " FVA%=" << io::format_double(r.report.fva_pct())
              << " XVA%=" << io::format_double(r.report.xva_pct()) << " (" << r.seconds << " s)\n";
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* field) {
    std::vector<T> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = s.find(',', pos);
        const auto item = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) {
                out.push_back(std::stod(item, &used));
            } else {
                const long long v = std::stoll(item, &used);
                if (v <= 0) throw std::invalid_argument("non-positive");
                out.push_back(static_cast<T>(v));
            }
            if (used != item.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError(field, "cannot parse '" + item + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CVA, FVA and XVA of Bermudan options under the CGMY process"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    CommonOptions run_opt;
    auto* run = app.add_subcommand("run", "simulate, value and write exposure profiles and XVA reports");
    add_common(run, run_opt);
    run->add_flag("--emit-paths", run_opt.emit_paths, "also write paths.csv");

    CommonOptions bench_opt;
    std::string counts = "500,1000,5000,10000";
    auto* bench = app.add_subcommand("bench", "time both engines over several path counts");
    add_common(bench, bench_opt);
    bench->add_option("--counts", counts, "comma-separated path counts");

    CommonOptions conv_opt;
    ConvergenceOptions conv;
    auto* convergence = app.add_subcommand("convergence", "FPDE convergence study on the European contract");
    add_common(convergence, conv_opt);
    convergence->add_option("--levels", conv.levels, "number of refinement levels (>= 3)");
    convergence->add_option("--base-grid", conv.base_grid, "coarsest number of space intervals");
    convergence->add_option("--base-steps", conv.base_steps, "time steps on the coarsest level");

    CommonOptions sweep_opt;
    std::string sweep_param;
    std::string sweep_values;
    auto* sweep = app.add_subcommand("sweep", "EE curves across values of one CGMY parameter");
    add_common(sweep, sweep_opt);
    sweep->add_option("--param", sweep_param, "C, G, M or Y")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();

    auto* presets = app.add_subcommand("presets", "named configurations");
    auto* presets_list = presets->add_subcommand("list", "print the presets");
    presets->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_opt);
            const auto res = run_experiment(cfg);
            for (const auto& r : res.runs) print_report(r);
            std::cout << "wrote " << res.files.size() << " files to " << cfg.outputs.string() << "\n";
        } else if (*bench) {
            const auto cfg = resolve(bench_opt);
            const auto res = run_bench(cfg, parse_list<std::size_t>(counts, "counts"));
            write_bench(res, cfg.outputs);
            for (const auto& r : res.rows) {
                std::cout << r.engine << " paths=" << r.paths << " seconds=" << r.seconds << "\n";
            }
            for (const auto& [name, ratio] : res.ratio) std::cout << name << " ratio=" << ratio << "\n";
        } else if (*convergence) {
            const auto cfg = resolve(conv_opt);
            const auto rows = run_convergence(cfg, conv);
            io::convergence_csv(rows).write(cfg.outputs / "convergence.csv");
            for (const auto& r : rows) {
                std::cout << "grid_n=" << r.grid_n << " steps=" << r.time_steps << " error=" << io::format_double(r.error)
                          << " order=" << io::format_double(r.order) << "\n";
            }
        } else if (*sweep) {
            const auto cfg = resolve(sweep_opt);
            const auto table = run_sweep(cfg, sweep_param, parse_list<double>(sweep_values, "values"));
            const auto path = cfg.outputs / ("sweep_" + sweep_param + ".csv");
            table.write(path);
            std::cout << "wrote " << path.string() << "\n";
        } else if (*presets_list) {
            for (const auto& name : preset_names()) {
                const auto p = preset(name);
                std::cout << name << ": K=" << p.contract.strike << " T=" << p.contract.expiry
                          << " exercises=" << p.contract.num_exercises << " C=" << p.model.C << " G=" << p.model.G
                          << " M=" << p.model.M << " Y=" << p.model.Y << " S0=" << p.market.S0
                          << " r=" << p.market.r << " R=" << p.market.recovery_rate << "\n";
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
