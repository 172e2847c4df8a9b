#pragma once

// Experiment configuration, named presets and the end-to-end drivers behind the CLI:
// simulate paths, build continuation engines, compute exposures, aggregate, value adjustments.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgmyxva/cos.hpp"
#include "cgmyxva/errors.hpp"
#include "cgmyxva/exposure.hpp"
#include "cgmyxva/fpde.hpp"
#include "cgmyxva/io.hpp"
#include "cgmyxva/model.hpp"
#include "cgmyxva/simulate.hpp"
#include "cgmyxva/xva.hpp"

namespace cgmyxva {

inline constexpr const char* kVersion = "1.0.0";

enum class EngineChoice { Fpde, Cos, Both };

inline std::string to_string(EngineChoice e) {
    switch (e) {
        case EngineChoice::Fpde: return "fpde";
        case EngineChoice::Cos: return "cos";
        default: return "both";
    }
}

inline EngineChoice parse_engine(const std::string& s) {
    if (s == "fpde") return EngineChoice::Fpde;
    if (s == "cos") return EngineChoice::Cos;
    if (s == "both") return EngineChoice::Both;
    throw ConfigError("engine", "engine must be fpde, cos or both, got '" + s + "'");
}

struct ExperimentConfig {
    std::string name = "custom";
    CgmyParams model;
    MarketSpec market;
    ContractSpec contract;
    SimConfig sim;
    fpde::WsgdConfig fpde;
    cos::CosConfig cos;
    EngineChoice engine = EngineChoice::Both;
    std::filesystem::path outputs = "out";
    bool emit_paths = false;
    std::vector<double> pfe_levels{0.025, 0.975};

    void validate() const {
        auto wrap = [](const char* field, auto&& fn) {
            try {
                fn();
            } catch (const DomainError& e) {
                throw ConfigError(field, e.what());
            }
        };
        wrap("model", [&] { model.validate(); });
        wrap("market", [&] { market.validate(); });
        wrap("contract", [&] { contract.validate(); });
        wrap("sim", [&] { sim.validate(); });
        wrap("cos", [&] { cos.validate(); });
        if (engine != EngineChoice::Cos) wrap("fpde", [&] { fpde.validate(model, market.S0); });
        for (double a : pfe_levels) {
            if (!(a > 0.0 && a < 1.0)) throw ConfigError("pfe_levels", "PFE levels must lie in (0,1)");
        }
    }
};

/// Table I of the reference study: (K, T, exercises, C) with S0 = 40, r = 0.05, G = 25, M = 26,
/// Y = 1.5, R = 0.4, 100 bp credit and 50 bp funding spreads.
inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"example1", "example2", "example3", "example4"};
    return names;
}

inline ExperimentConfig preset(const std::string& name) {
    struct Row {
        double K, T;
        int M;
        double C;
    };
    static const std::map<std::string, Row> table{
        {"example1", {50.0, 1.0, 50, 1.0}},
        {"example2", {40.0, 1.0, 50, 1.0}},
        {"example3", {50.0, 0.5, 30, 0.5}},
        {"example4", {40.0, 0.5, 30, 0.5}},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("preset", "unknown preset '" + name + "'");
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.model = CgmyParams{it->second.C, 25.0, 26.0, 1.5};
    cfg.market.S0 = 40.0;
    cfg.market.r = 0.05;
    cfg.market.credit_spread = 0.01;
    cfg.market.funding_spread = 0.005;
    cfg.market.recovery_rate = 0.4;
    cfg.contract = ContractSpec{it->second.K, it->second.T, it->second.M, OptionKind::Call};
    return cfg;
}

namespace detail {
using Json = nlohmann::json;

inline void reject_unknown(const Json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
}

inline double get_number(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

template <class Int>
Int get_integer(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    if (std::is_unsigned_v<Int> && !v.is_number_unsigned()) {
        throw ConfigError(path + "." + key, "expected a non-negative integer");
    }
    return v.get<Int>();
}

inline std::string get_string(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

/// [[t, bp], ...] -> curve in decimal.
inline SpreadCurve parse_curve_bp(const Json& v, const std::string& field) {
    if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty array of [time, bp] pairs");
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : v) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
            throw ConfigError(field, "each knot must be [time, bp]");
        }
        knots.emplace_back(k[0].get<double>(), k[1].get<double>() * 1e-4);
    }
    try {
        return SpreadCurve(std::move(knots));
    } catch (const DomainError& e) {
        throw ConfigError(field, e.what());
    }
}
}  // namespace detail

/// Parses a JSON experiment document. A "preset" key selects the base configuration; otherwise
/// built-in defaults apply and market.recovery must be given.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::get_integer;
    using detail::get_number;
    using detail::get_string;
    detail::reject_unknown(j, "", {"preset", "model", "market", "contract", "sim", "fpde", "cos", "engine", "outputs",
                                   "emit_paths", "pfe_levels"});
    ExperimentConfig cfg;
    cfg.market.credit_spread = 0.01;
    cfg.market.funding_spread = 0.005;
    bool recovery_known = false;
    if (j.contains("preset")) {
        cfg = preset(get_string(j, "preset", "<root>"));
        recovery_known = true;
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        detail::reject_unknown(m, "model", {"C", "G", "M", "Y"});
        if (m.contains("C")) cfg.model.C = get_number(m, "C", "model");
        if (m.contains("G")) cfg.model.G = get_number(m, "G", "model");
        if (m.contains("M")) cfg.model.M = get_number(m, "M", "model");
        if (m.contains("Y")) cfg.model.Y = get_number(m, "Y", "model");
    }
    if (j.contains("market")) {
        const auto& m = j["market"];
        detail::reject_unknown(m, "market",
                               {"S0", "r", "credit_bp", "funding_bp", "credit_curve_bp", "funding_curve_bp", "recovery"});
        if (m.contains("S0")) cfg.market.S0 = get_number(m, "S0", "market");
        if (m.contains("r")) cfg.market.r = get_number(m, "r", "market");
        if (m.contains("credit_bp") && m.contains("credit_curve_bp")) {
            throw ConfigError("market.credit_bp", "give either credit_bp or credit_curve_bp");
        }
        if (m.contains("funding_bp") && m.contains("funding_curve_bp")) {
            throw ConfigError("market.funding_bp", "give either funding_bp or funding_curve_bp");
        }
        if (m.contains("credit_bp")) cfg.market.credit_spread = get_number(m, "credit_bp", "market") * 1e-4;
        if (m.contains("funding_bp")) cfg.market.funding_spread = get_number(m, "funding_bp", "market") * 1e-4;
        if (m.contains("credit_curve_bp")) cfg.market.credit_spread = detail::parse_curve_bp(m["credit_curve_bp"], "market.credit_curve_bp");
        if (m.contains("funding_curve_bp")) cfg.market.funding_spread = detail::parse_curve_bp(m["funding_curve_bp"], "market.funding_curve_bp");
        if (m.contains("recovery")) {
            cfg.market.recovery_rate = get_number(m, "recovery", "market");
            recovery_known = true;
        }
    }
    if (!recovery_known) throw ConfigError("market.recovery", "recovery rate is required");
    if (j.contains("contract")) {
        const auto& c = j["contract"];
        detail::reject_unknown(c, "contract", {"type", "strike", "expiry", "exercises"});
        if (c.contains("type")) {
            const auto t = get_string(c, "type", "contract");
            if (t == "call") {
                cfg.contract.kind = OptionKind::Call;
            } else if (t == "put") {
                cfg.contract.kind = OptionKind::Put;
            } else {
                throw ConfigError("contract.type", "expected call or put");
            }
        }
        if (c.contains("strike")) cfg.contract.strike = get_number(c, "strike", "contract");
        if (c.contains("expiry")) cfg.contract.expiry = get_number(c, "expiry", "contract");
        if (c.contains("exercises")) cfg.contract.num_exercises = get_integer<int>(c, "exercises", "contract");
    }
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        detail::reject_unknown(s, "sim", {"paths", "seed", "truncation_eps", "max_jump_terms", "threads"});
        if (s.contains("paths")) cfg.sim.n_paths = get_integer<std::size_t>(s, "paths", "sim");
        if (s.contains("seed")) cfg.sim.seed = get_integer<std::uint64_t>(s, "seed", "sim");
        if (s.contains("truncation_eps")) cfg.sim.truncation_eps = get_number(s, "truncation_eps", "sim");
        if (s.contains("max_jump_terms")) cfg.sim.max_jump_terms = get_integer<std::size_t>(s, "max_jump_terms", "sim");
        if (s.contains("threads")) cfg.sim.threads = get_integer<unsigned>(s, "threads", "sim");
    }
    if (j.contains("fpde")) {
        const auto& f = j["fpde"];
        detail::reject_unknown(f, "fpde", {"gamma3", "grid_n", "substeps", "x_left", "x_right"});
        if (f.contains("gamma3")) cfg.fpde.gamma3 = get_number(f, "gamma3", "fpde");
        if (f.contains("grid_n")) cfg.fpde.grid_n = get_integer<int>(f, "grid_n", "fpde");
        if (f.contains("substeps")) cfg.fpde.substeps = get_integer<int>(f, "substeps", "fpde");
        if (f.contains("x_left")) cfg.fpde.x_left = get_number(f, "x_left", "fpde");
        if (f.contains("x_right")) cfg.fpde.x_right = get_number(f, "x_right", "fpde");
    }
    if (j.contains("cos")) {
        const auto& c = j["cos"];
        detail::reject_unknown(c, "cos", {"n_terms", "L", "newton_tol", "newton_max_iter"});
        if (c.contains("n_terms")) cfg.cos.n_terms = get_integer<int>(c, "n_terms", "cos");
        if (c.contains("L")) cfg.cos.L = get_number(c, "L", "cos");
        if (c.contains("newton_tol")) cfg.cos.newton_tol = get_number(c, "newton_tol", "cos");
        if (c.contains("newton_max_iter")) cfg.cos.newton_max_iter = get_integer<int>(c, "newton_max_iter", "cos");
    }
    if (j.contains("engine")) cfg.engine = parse_engine(get_string(j, "engine", "<root>"));
    if (j.contains("outputs")) cfg.outputs = get_string(j, "outputs", "<root>");
    if (j.contains("emit_paths")) {
        if (!j["emit_paths"].is_boolean()) throw ConfigError("emit_paths", "expected a boolean");
        cfg.emit_paths = j["emit_paths"].get<bool>();
    }
    if (j.contains("pfe_levels")) {
        const auto& v = j["pfe_levels"];
        if (!v.is_array() || v.empty()) throw ConfigError("pfe_levels", "expected a non-empty array");
        cfg.pfe_levels.clear();
        for (const auto& a : v) {
            if (!a.is_number()) throw ConfigError("pfe_levels", "expected numbers");
            cfg.pfe_levels.push_back(a.get<double>());
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["model"] = {{"C", c.model.C}, {"G", c.model.G}, {"M", c.model.M}, {"Y", c.model.Y}};
    j["market"] = {{"S0", c.market.S0},
                   {"r", c.market.r},
                   {"credit_curve_bp", io::spread_json(c.market.credit_spread)},
                   {"funding_curve_bp", io::spread_json(c.market.funding_spread)},
                   {"recovery", c.market.recovery_rate}};
    j["contract"] = {{"type", to_string(c.contract.kind)},
                     {"strike", c.contract.strike},
                     {"expiry", c.contract.expiry},
                     {"exercises", c.contract.num_exercises}};
    j["sim"] = {{"paths", c.sim.n_paths},
                {"seed", c.sim.seed},
                {"truncation_eps", c.sim.truncation_eps},
                {"max_jump_terms", c.sim.max_jump_terms}};
    j["fpde"] = {{"gamma3", c.fpde.gamma3},
                 {"grid_n", c.fpde.grid_n},
                 {"substeps", c.fpde.substeps},
                 {"x_left", c.fpde.x_left},
                 {"x_right", c.fpde.x_right}};
    j["cos"] = {{"n_terms", c.cos.n_terms},
                {"L", c.cos.L},
                {"newton_tol", c.cos.newton_tol},
                {"newton_max_iter", c.cos.newton_max_iter}};
    j["engine"] = to_string(c.engine);
    j["pfe_levels"] = c.pfe_levels;
    return j;
}

/// Output of one engine over a shared path set.
struct EngineRun {
    std::string engine;
    ExposureProfile profile;
    XvaReport report;
    std::size_t clamped = 0;
    std::size_t exercised = 0;
    double seconds = 0.0;  ///< engine build, exposures, aggregation and value adjustments
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class Engine>
EngineRun finish_run(const std::string& name, const PathMatrix& paths, const Engine& engine,
                     const ExperimentConfig& cfg, const ExerciseSchedule& schedule,
                     std::chrono::steady_clock::time_point t0) {
    EngineRun run;
    run.engine = name;
    const auto em = path_exposures(paths, engine, cfg.contract, cfg.sim.threads);
    run.profile = aggregate(em, cfg.market, schedule, cfg.pfe_levels);
    const auto pd = default_probabilities(cfg.market, schedule);
    run.report = total_xva(cva(run.profile, pd, cfg.market), fva(run.profile, cfg.market), em.start_value,
                           cfg.contract.strike, name, cfg.sim.seed);
    run.clamped = em.clamped;
    run.exercised = static_cast<std::size_t>(
        std::count_if(em.exercised_at.begin(), em.exercised_at.end(), [](int m) { return m >= 0; }));
    run.seconds = seconds_since(t0);
    return run;
}
}  // namespace detail

inline EngineRun run_fpde_engine(const PathMatrix& paths, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& schedule = paths.schedule();
    const auto grid = fpde::solve_bermudan_grid(cfg.model, cfg.market, cfg.contract, schedule, cfg.fpde);
    return detail::finish_run("fpde", paths, FpdeContinuation(grid), cfg, schedule, t0);
}

inline EngineRun run_cos_engine(const PathMatrix& paths, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& schedule = paths.schedule();
    const auto state = cos::backward_induction(cfg.model, cfg.market, cfg.contract, schedule, cfg.cos);
    return detail::finish_run("cos", paths, CosContinuation(state), cfg, schedule, t0);
}

inline std::vector<std::string> engine_list(EngineChoice e) {
    if (e == EngineChoice::Fpde) return {"fpde"};
    if (e == EngineChoice::Cos) return {"cos"};
    return {"fpde", "cos"};
}

struct ExperimentResult {
    std::vector<EngineRun> runs;
    double simulation_seconds = 0.0;
    std::vector<std::filesystem::path> files;
};

/// Steps 1-4 end to end; writes exposure_profile_<engine>.csv, xva_report_<engine>.json,
/// optionally paths.csv, and manifest.json into cfg.outputs.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult res;
    const ExerciseSchedule schedule(cfg.contract);
    auto t0 = std::chrono::steady_clock::now();
    const auto paths = simulate_paths(cfg.model, cfg.market, schedule, cfg.sim);
    res.simulation_seconds = detail::seconds_since(t0);

    const auto& out = cfg.outputs;
    if (cfg.emit_paths) {
        io::paths_csv(paths).write(out / "paths.csv");
        res.files.push_back(out / "paths.csv");
    }
    for (const auto& name : engine_list(cfg.engine)) {
        auto run = name == "fpde" ? run_fpde_engine(paths, cfg) : run_cos_engine(paths, cfg);
        const auto csv = out / ("exposure_profile_" + name + ".csv");
        const auto json = out / ("xva_report_" + name + ".json");
        io::exposure_profile_csv(run.profile).write(csv);
        io::write_json(json, io::xva_json(run.report, cfg.model, cfg.market, cfg.contract));
        res.files.push_back(csv);
        res.files.push_back(json);
        res.runs.push_back(std::move(run));
    }

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = cfg.sim.seed;
    manifest["paths"] = cfg.sim.n_paths;
    manifest["threads"] = resolve_threads(cfg.sim.threads);
    manifest["config"] = config_json(cfg);
    manifest["timings_seconds"]["simulation"] = res.simulation_seconds;
    for (const auto& r : res.runs) {
        manifest["timings_seconds"][r.engine] = r.seconds;
        manifest["diagnostics"][r.engine] = {{"clamped_lookups", r.clamped}, {"exercised_paths", r.exercised}};
    }
    auto files = nlohmann::ordered_json::array();
    for (const auto& f : res.files) files.push_back(f.filename().string());
    manifest["files"] = files;
    io::write_json(out / "manifest.json", manifest);
    res.files.push_back(out / "manifest.json");
    return res;
}

struct BenchRow {
    std::string engine;
    std::size_t paths;
    double seconds;
    double xva_pct;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::map<std::string, double> ratio;  ///< time(largest count) / time(smallest count)
};

/// Wall-clock time of Steps 2-4 per engine and path count; path simulation is shared and not timed.
inline BenchResult run_bench(const ExperimentConfig& cfg, std::vector<std::size_t> counts) {
    if (counts.empty()) throw ConfigError("counts", "need at least one path count");
    cfg.validate();
    std::sort(counts.begin(), counts.end());
    const ExerciseSchedule schedule(cfg.contract);
    BenchResult res;
    for (std::size_t n : counts) {
        ExperimentConfig c = cfg;
        c.sim.n_paths = n;
        const auto paths = simulate_paths(c.model, c.market, schedule, c.sim);
        for (const auto& name : engine_list(c.engine)) {
            const auto run = name == "fpde" ? run_fpde_engine(paths, c) : run_cos_engine(paths, c);
            res.rows.push_back({name, n, run.seconds, run.report.xva_pct()});
        }
    }
    for (const auto& name : engine_list(cfg.engine)) {
        double lo = 0.0, hi = 0.0;
        for (const auto& r : res.rows) {
            if (r.engine != name) continue;
            if (r.paths == counts.front()) lo = r.seconds;
            if (r.paths == counts.back()) hi = r.seconds;
        }
        res.ratio[name] = lo > 0.0 ? hi / lo : std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

inline void write_bench(const BenchResult& b, const std::filesystem::path& out) {
    io::CsvTable t({"engine", "paths", "seconds", "xva_pct"});
    for (const auto& r : b.rows) {
        t.add_raw_row({r.engine, std::to_string(r.paths), io::format_double(r.seconds), io::format_double(r.xva_pct)});
    }
    t.write(out / "bench.csv");
    io::CsvTable ratios({"engine", "time_ratio_largest_to_smallest"});
    for (const auto& [name, v] : b.ratio) ratios.add_raw_row({name, io::format_double(v)});
    ratios.write(out / "bench_ratios.csv");
}

struct ConvergenceOptions {
    int levels = 3;
    int base_grid = 256;
    int base_steps = 32;
};

/// European version of the configured contract, dyadic refinement with tau proportional to h.
inline std::vector<fpde::ConvergenceRow> run_convergence(const ExperimentConfig& cfg, const ConvergenceOptions& opt) {
    if (opt.levels < 3) throw ConfigError("levels", "convergence needs at least 3 levels");
    if (opt.base_grid < 8 || opt.base_steps < 1) throw ConfigError("base_grid", "invalid base resolution");
    fpde::WsgdConfig f = cfg.fpde;
    f.grid_n = opt.base_grid;
    try {
        f.validate(cfg.model, cfg.market.S0);
    } catch (const DomainError& e) {
        throw ConfigError("fpde", e.what());
    }
    return fpde::convergence_study(cfg.model, cfg.market, cfg.contract.expiry, f, opt.base_steps, opt.levels,
                                   fpde::european_payoff_problem(cfg.contract, cfg.market.r));
}

/// One EE curve per parameter value, each over paths simulated with the same seed.
inline io::CsvTable run_sweep(const ExperimentConfig& cfg, const std::string& param, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("values", "need at least one sweep value");
    if (param != "C" && param != "G" && param != "M" && param != "Y") {
        throw ConfigError("param", "sweep parameter must be one of C, G, M, Y");
    }
    const ExerciseSchedule schedule(cfg.contract);
    const std::string engine = cfg.engine == EngineChoice::Cos ? "cos" : "fpde";
    std::vector<std::string> header{"date"};
    std::vector<std::vector<double>> curves;
    for (double v : values) {
        ExperimentConfig c = cfg;
        (param == "C" ? c.model.C : param == "G" ? c.model.G : param == "M" ? c.model.M : c.model.Y) = v;
        try {
            c.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("values", "sweep value " + io::format_double(v) + " rejected: " + e.what());
        }
        const auto paths = simulate_paths(c.model, c.market, schedule, c.sim);
        const auto run = engine == "fpde" ? run_fpde_engine(paths, c) : run_cos_engine(paths, c);
        header.push_back("EE_" + param + "=" + io::format_double(v));
        curves.push_back(run.profile.ee);
    }
    io::CsvTable t(header);
    for (std::size_t m = 0; m < schedule.times().size(); ++m) {
        std::vector<double> row{schedule.time(static_cast<int>(m))};
        for (const auto& c : curves) row.push_back(c[m]);
        t.add_row(row);
    }
    return t;
}

}  // namespace cgmyxva
