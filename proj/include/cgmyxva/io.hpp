#pragma once

// CSV and JSON artifacts. CSV: comma separated, header row, LF line endings, 17 significant
// digits. Every file is written to a temporary sibling and renamed into place.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgmyxva/errors.hpp"
#include "cgmyxva/exposure.hpp"
#include "cgmyxva/fpde.hpp"
#include "cgmyxva/simulate.hpp"
#include "cgmyxva/xva.hpp"

namespace cgmyxva::io {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != header_.size()) throw std::logic_error("CSV row width does not match header");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += format_double(row[i]);
        }
        rows_.push_back(std::move(line));
    }

    void add_raw_row(const std::vector<std::string>& row) {
        if (row.size() != header_.size()) throw std::logic_error("CSV row width does not match header");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += row[i];
        }
        rows_.push_back(std::move(line));
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        for (const auto& r : rows_) {
            out += r;
            out += '\n';
        }
        return out;
    }

    void write(const std::filesystem::path& path) const { write_atomic(path, str()); }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

/// "PFE_2.5" for alpha = 0.025.
inline std::string pfe_column(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "PFE_%g", 100.0 * alpha);
    return buf;
}

inline CsvTable exposure_profile_csv(const ExposureProfile& p) {
    std::vector<std::string> header{"date", "EE", "EEstar"};
    for (const auto& [a, curve] : p.pfe) header.push_back(pfe_column(a));
    CsvTable t(header);
    for (std::size_t m = 0; m < p.dates.size(); ++m) {
        std::vector<double> row{p.dates[m], p.ee[m], p.ee_star[m]};
        for (const auto& [a, curve] : p.pfe) row.push_back(curve[m]);
        t.add_row(row);
    }
    return t;
}

inline CsvTable paths_csv(const PathMatrix& paths) {
    std::vector<std::string> header{"path"};
    for (std::size_t m = 0; m < paths.n_dates(); ++m) header.push_back("t" + std::to_string(m));
    CsvTable t(header);
    for (std::size_t i = 0; i < paths.n_paths(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (double v : paths.row(i)) row.push_back(format_double(v));
        t.add_raw_row(row);
    }
    return t;
}

/// Grid nodes and per-date continuation slices.
inline CsvTable grid_csv(const fpde::GridSolution& grid) {
    std::vector<std::string> header{"x"};
    for (std::size_t m = 0; m < grid.cont_values.size(); ++m) header.push_back("Vc_t" + std::to_string(m));
    CsvTable t(header);
    for (std::size_t n = 0; n < grid.x.size(); ++n) {
        std::vector<double> row{grid.x[n]};
        for (const auto& slice : grid.cont_values) row.push_back(slice[n]);
        t.add_row(row);
    }
    return t;
}

inline CsvTable convergence_csv(const std::vector<fpde::ConvergenceRow>& rows) {
    CsvTable t({"grid_n", "time_steps", "h", "tau", "error", "order"});
    for (const auto& r : rows) {
        t.add_raw_row({std::to_string(r.grid_n), std::to_string(r.time_steps), format_double(r.h), format_double(r.tau),
                       format_double(r.error), std::isnan(r.order) ? std::string{} : format_double(r.order)});
    }
    return t;
}

inline nlohmann::ordered_json spread_json(const SpreadCurve& c) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [t, s] : c.knots()) arr.push_back({t, s * 1e4});
    return arr;
}

inline nlohmann::ordered_json xva_json(const XvaReport& r, const CgmyParams& p, const MarketSpec& market,
                                       const ContractSpec& contract) {
    nlohmann::ordered_json j;
    j["engine"] = r.engine;
    j["seed"] = r.seed;
    j["value_t0"] = r.base_value;
    j["cva_abs"] = r.cva_abs;
    j["fva_abs"] = r.fva_abs;
    j["xva_abs"] = r.xva_abs;
    j["cva_pct"] = r.cva_pct();
    j["fva_pct"] = r.fva_pct();
    j["xva_pct"] = r.xva_pct();
    j["cva_pct_strike"] = r.cva_pct_strike();
    j["fva_pct_strike"] = r.fva_pct_strike();
    j["xva_pct_strike"] = r.xva_pct_strike();
    j["params"] = {
        {"model", {{"C", p.C}, {"G", p.G}, {"M", p.M}, {"Y", p.Y}}},
        {"market",
         {{"S0", market.S0},
          {"r", market.r},
          {"recovery", market.recovery_rate},
          {"credit_curve_bp", spread_json(market.credit_spread)},
          {"funding_curve_bp", spread_json(market.funding_spread)}}},
        {"contract",
         {{"type", to_string(contract.kind)},
          {"strike", contract.strike},
          {"expiry", contract.expiry},
          {"exercises", contract.num_exercises}}},
    };
    return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    write_atomic(path, j.dump(2) + "\n");
}

}  // namespace cgmyxva::io
