#pragma once

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/bench.hpp"
#include "isosim/csv.hpp"
#include "isosim/errors.hpp"
#include "isosim/scenario.hpp"

namespace isosim {

/// Sidecar metadata written next to every results file.
struct ResultMeta {
    std::string name;
    std::string device;
    std::string regime;
    std::string model;
    int n_processes = 2;
    int fixed_ims = 0;
    std::uint64_t seed = 0;
    int inferences_per_point = 0;
    Expectations expect;
};

inline nlohmann::ordered_json meta_to_json(const ResultMeta& m) {
    nlohmann::ordered_json j;
    j["name"] = m.name;
    j["device"] = m.device;
    j["regime"] = m.regime;
    j["model"] = m.model;
    j["n_processes"] = m.n_processes;
    j["fixed_ims"] = m.fixed_ims;
    j["seed"] = m.seed;
    j["inferences_per_point"] = m.inferences_per_point;
    if (m.expect.any()) j["expect"] = expectations_to_json(m.expect);
    return j;
}

inline ResultMeta meta_from_json(const nlohmann::json& j, const std::string& where) {
    detail::reject_unknown_keys(j,
        {"name", "device", "regime", "model", "n_processes", "fixed_ims", "seed",
         "inferences_per_point", "expect"}, where);
    ResultMeta m;
    m.name = j.at("name").get<std::string>();
    m.device = j.at("device").get<std::string>();
    m.regime = j.at("regime").get<std::string>();
    m.model = j.at("model").get<std::string>();
    m.n_processes = detail::get_or(j, "n_processes", 2);
    m.fixed_ims = detail::get_or(j, "fixed_ims", 0);
    m.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    m.inferences_per_point = detail::get_or(j, "inferences_per_point", 0);
    if (j.contains("expect")) m.expect = expectations_from_json(j["expect"], where + ".expect");
    return m;
}

inline std::vector<ResultRow> rows_from_csv(const CsvTable& t, const std::string& where) {
    const std::vector<std::string> want = {"adjusted_ims", "fixed_timeout_pct",
                                           "adjusted_timeout_pct", "avg_power_w",
                                           "throttle_events", "mean_freq_hz"};
    if (t.header != want) throw ParseError(where + ": unexpected result columns");
    std::vector<ResultRow> rows;
    for (const auto& r : t.rows) {
        try {
            ResultRow row;
            row.adjusted_ims = std::stoi(r[0]);
            row.fixed_timeout_pct = std::stod(r[1]);
            row.adjusted_timeout_pct = std::stod(r[2]);
            row.avg_power_w = std::stod(r[3]);
            row.throttle_events = std::stoi(r[4]);
            row.mean_freq_hz = std::stod(r[5]);
            rows.push_back(row);
        } catch (const std::exception&) {
            throw ParseError(where + ": malformed row");
        }
    }
    if (rows.empty()) throw ParseError(where + ": no result rows");
    return rows;
}

struct ExperimentSummary {
    ResultMeta meta;
    std::vector<ResultRow> rows;
    std::vector<std::string> expectation_failures;

    const ResultRow& top() const { return rows.back(); }
    double max_fixed_pct() const {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.fixed_timeout_pct);
        return m;
    }
    int total_throttles() const {
        int n = 0;
        for (const auto& r : rows) n += r.throttle_events;
        return n;
    }
};

inline std::vector<std::string> check_expectations(const Expectations& e,
                                                   const std::vector<ResultRow>& rows) {
    std::vector<std::string> fails;
    const auto& top = rows.back();
    if (e.max_fixed_timeout_pct)
        for (const auto& r : rows)
            if (r.fixed_timeout_pct > *e.max_fixed_timeout_pct) {
                std::ostringstream s;
                s << "row adjusted_ims=" << r.adjusted_ims << ": fixed_timeout_pct "
                  << r.fixed_timeout_pct << " > " << *e.max_fixed_timeout_pct;
                fails.push_back(s.str());
            }
    auto fail = [&fails](const std::string& msg) { fails.push_back(msg); };
    if (e.max_fixed_timeout_pct_top && top.fixed_timeout_pct > *e.max_fixed_timeout_pct_top)
        fail("top row: fixed_timeout_pct " + fmt_num(top.fixed_timeout_pct, 4) + " > " +
             fmt_num(*e.max_fixed_timeout_pct_top, 4));
    if (e.min_fixed_timeout_pct_top && top.fixed_timeout_pct < *e.min_fixed_timeout_pct_top)
        fail("top row: fixed_timeout_pct " + fmt_num(top.fixed_timeout_pct, 4) + " < " +
             fmt_num(*e.min_fixed_timeout_pct_top, 4));
    int throttles = 0;
    for (const auto& r : rows) throttles += r.throttle_events;
    if (e.min_throttle_events_total && throttles < *e.min_throttle_events_total)
        fail("total throttle events " + std::to_string(throttles) + " < " +
             std::to_string(*e.min_throttle_events_total));
    if (e.max_throttle_events_total && throttles > *e.max_throttle_events_total)
        fail("total throttle events " + std::to_string(throttles) + " > " +
             std::to_string(*e.max_throttle_events_total));
    if (e.avg_power_w_top_min && top.avg_power_w < *e.avg_power_w_top_min)
        fail("top row: avg_power_w " + fmt_num(top.avg_power_w, 3) + " < " +
             fmt_num(*e.avg_power_w_top_min, 3));
    if (e.avg_power_w_top_max && top.avg_power_w > *e.avg_power_w_top_max)
        fail("top row: avg_power_w " + fmt_num(top.avg_power_w, 3) + " > " +
             fmt_num(*e.avg_power_w_top_max, 3));
    return fails;
}

/// Loads every experiment (results csv + sidecar metadata) under a directory.
inline std::vector<ExperimentSummary> load_results_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ParseError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> metas;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto& p = entry.path();
        if (p.filename().string().size() > 10 &&
            p.filename().string().substr(p.filename().string().size() - 10) == ".meta.json")
            metas.push_back(p);
    }
    std::sort(metas.begin(), metas.end());
    if (metas.empty()) throw ParseError(dir.string() + ": no .meta.json files");

    std::vector<ExperimentSummary> out;
    for (const auto& mp : metas) {
        ExperimentSummary s;
        try {
            s.meta = meta_from_json(nlohmann::json::parse(read_text_file(mp)), mp.filename().string());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(mp.string() + ": " + e.what());
        }
        std::string stem = mp.filename().string();
        stem = stem.substr(0, stem.size() - 10); // strip .meta.json
        const auto csv_path = mp.parent_path() / (stem + ".csv");
        s.rows = rows_from_csv(parse_csv(read_text_file(csv_path), csv_path.filename().string()),
                               csv_path.filename().string());
        s.expectation_failures = check_expectations(s.meta.expect, s.rows);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string summary_text(const std::vector<ExperimentSummary>& summaries) {
    std::ostringstream out;
    for (const auto& s : summaries) {
        const auto& top = s.top();
        out << s.meta.name << ": " << s.meta.device << "/" << s.meta.regime << "/" << s.meta.model
            << " n=" << s.meta.n_processes << " fixed_ims=" << s.meta.fixed_ims
            << " points=" << s.rows.size() << "\n"
            << "  max fixed timeout " << fmt_num(s.max_fixed_pct(), 3) << "%"
            << ", top point: adjusted=" << top.adjusted_ims
            << " fixed_timeout=" << fmt_num(top.fixed_timeout_pct, 3) << "%"
            << " avg_power=" << fmt_num(top.avg_power_w, 2) << "W"
            << ", throttle events total " << s.total_throttles() << "\n";
        if (s.meta.expect.any()) {
            if (s.expectation_failures.empty()) {
                out << "  expectations: pass\n";
            } else {
                out << "  expectations: FAIL\n";
                for (const auto& f : s.expectation_failures) out << "    " << f << "\n";
            }
        }
    }
    return out.str();
}

} // namespace isosim
