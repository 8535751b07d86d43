#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/bench.hpp"
#include "isosim/csv.hpp"
#include "isosim/device.hpp"
#include "isosim/errors.hpp"

namespace isosim {

/// Bounds a result file is checked against by the report command.
struct Expectations {
    std::optional<double> max_fixed_timeout_pct;      // every row
    std::optional<double> max_fixed_timeout_pct_top;  // top sweep row
    std::optional<double> min_fixed_timeout_pct_top;
    std::optional<int> min_throttle_events_total;
    std::optional<int> max_throttle_events_total;
    std::optional<double> avg_power_w_top_min;
    std::optional<double> avg_power_w_top_max;

    bool any() const {
        return max_fixed_timeout_pct || max_fixed_timeout_pct_top || min_fixed_timeout_pct_top ||
               min_throttle_events_total || max_throttle_events_total || avg_power_w_top_min ||
               avg_power_w_top_max;
    }
};

inline Expectations expectations_from_json(const nlohmann::json& j, const std::string& where) {
    detail::reject_unknown_keys(j,
        {"max_fixed_timeout_pct", "max_fixed_timeout_pct_top", "min_fixed_timeout_pct_top",
         "min_throttle_events_total", "max_throttle_events_total",
         "avg_power_w_top_min", "avg_power_w_top_max"}, where);
    Expectations e;
    if (j.contains("max_fixed_timeout_pct")) e.max_fixed_timeout_pct = j["max_fixed_timeout_pct"].get<double>();
    if (j.contains("max_fixed_timeout_pct_top")) e.max_fixed_timeout_pct_top = j["max_fixed_timeout_pct_top"].get<double>();
    if (j.contains("min_fixed_timeout_pct_top")) e.min_fixed_timeout_pct_top = j["min_fixed_timeout_pct_top"].get<double>();
    if (j.contains("min_throttle_events_total")) e.min_throttle_events_total = j["min_throttle_events_total"].get<int>();
    if (j.contains("max_throttle_events_total")) e.max_throttle_events_total = j["max_throttle_events_total"].get<int>();
    if (j.contains("avg_power_w_top_min")) e.avg_power_w_top_min = j["avg_power_w_top_min"].get<double>();
    if (j.contains("avg_power_w_top_max")) e.avg_power_w_top_max = j["avg_power_w_top_max"].get<double>();
    return e;
}

inline nlohmann::json expectations_to_json(const Expectations& e) {
    nlohmann::json j = nlohmann::json::object();
    if (e.max_fixed_timeout_pct) j["max_fixed_timeout_pct"] = *e.max_fixed_timeout_pct;
    if (e.max_fixed_timeout_pct_top) j["max_fixed_timeout_pct_top"] = *e.max_fixed_timeout_pct_top;
    if (e.min_fixed_timeout_pct_top) j["min_fixed_timeout_pct_top"] = *e.min_fixed_timeout_pct_top;
    if (e.min_throttle_events_total) j["min_throttle_events_total"] = *e.min_throttle_events_total;
    if (e.max_throttle_events_total) j["max_throttle_events_total"] = *e.max_throttle_events_total;
    if (e.avg_power_w_top_min) j["avg_power_w_top_min"] = *e.avg_power_w_top_min;
    if (e.avg_power_w_top_max) j["avg_power_w_top_max"] = *e.avg_power_w_top_max;
    return j;
}

enum class TelemetryMode { Top, All, None };

/// A scenario file: device + experiment description + output location.
/// Unknown keys are rejected with their location.
struct ScenarioFile {
    std::string name;
    std::string device;
    std::vector<std::string> regimes; // one for bench, possibly several for search
    std::vector<std::string> models;
    int processes = 2;
    std::optional<int> fixed_ims; // unset = "auto"
    std::vector<int> sweep;
    double sweep_above_max_factor = 1.0;
    int inferences_per_point = 1000;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::optional<int> partition_sms;
    std::optional<int> partition_gpcs;
    std::optional<double> pin_freq_hz;
    std::optional<double> mig_residual_eps;
    std::optional<double> mps_residual_eps;
    std::optional<double> jitter;
    std::optional<DvfsParams> dvfs;
    TelemetryMode telemetry = TelemetryMode::Top;
    bool record_events = false;
    Expectations expect;
    std::string devices_file;

    ExperimentSpec to_experiment(const std::string& regime, const std::string& model) const {
        ExperimentSpec s;
        s.regime = regime;
        s.model = model;
        s.n_processes = processes;
        s.fixed_ims = fixed_ims;
        s.adjusted_sweep = sweep;
        s.inferences_per_point = inferences_per_point;
        s.seed = seed;
        s.above_max_factor = sweep_above_max_factor;
        s.partition_sms = partition_sms;
        s.partition_gpcs = partition_gpcs;
        s.pin_freq_hz = pin_freq_hz;
        s.mig_residual_eps = mig_residual_eps;
        s.mps_residual_eps = mps_residual_eps;
        s.jitter = jitter;
        s.dvfs = dvfs;
        s.record_events = record_events;
        return s;
    }
};

inline ScenarioFile scenario_from_json(const nlohmann::json& j, const std::string& where) {
    detail::reject_unknown_keys(j,
        {"name", "device", "regime", "regimes", "model", "models", "processes", "fixed_ims",
         "sweep", "sweep_above_max_factor", "inferences_per_point", "seed", "out",
         "partition_sms", "partition_gpcs", "pin_freq_hz", "mig_residual_eps",
         "mps_residual_eps", "jitter", "dvfs", "telemetry", "record_events", "expect",
         "devices_file"}, where);
    ScenarioFile s;
    s.name = detail::get_or<std::string>(j, "name", "");
    s.device = j.at("device").get<std::string>();
    if (j.contains("regime") && j.contains("regimes"))
        throw ParseError(where + ": give either 'regime' or 'regimes'");
    if (j.contains("regime")) s.regimes = {j["regime"].get<std::string>()};
    if (j.contains("regimes")) s.regimes = j["regimes"].get<std::vector<std::string>>();
    if (s.regimes.empty()) throw ParseError(where + ": 'regime' (or 'regimes') is required");
    for (const auto& r : s.regimes) parse_regime(r); // validate early
    if (j.contains("model") && j.contains("models"))
        throw ParseError(where + ": give either 'model' or 'models'");
    if (j.contains("model")) s.models = {j["model"].get<std::string>()};
    if (j.contains("models")) s.models = j["models"].get<std::vector<std::string>>();
    if (s.models.empty()) throw ParseError(where + ": 'model' (or 'models') is required");
    s.processes = detail::get_or(j, "processes", 2);
    if (j.contains("fixed_ims")) {
        const auto& f = j["fixed_ims"];
        if (f.is_string()) {
            if (f.get<std::string>() != "auto")
                throw ParseError(where + ".fixed_ims: expected integer or \"auto\"");
        } else {
            s.fixed_ims = f.get<int>();
        }
    }
    if (j.contains("sweep")) s.sweep = j["sweep"].get<std::vector<int>>();
    s.sweep_above_max_factor = detail::get_or(j, "sweep_above_max_factor", 1.0);
    s.inferences_per_point = detail::get_or(j, "inferences_per_point", 1000);
    s.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
    s.out_dir = detail::get_or<std::string>(j, "out", "");
    if (j.contains("partition_sms")) s.partition_sms = j["partition_sms"].get<int>();
    if (j.contains("partition_gpcs")) s.partition_gpcs = j["partition_gpcs"].get<int>();
    if (j.contains("pin_freq_hz")) s.pin_freq_hz = j["pin_freq_hz"].get<double>();
    if (j.contains("mig_residual_eps")) s.mig_residual_eps = j["mig_residual_eps"].get<double>();
    if (j.contains("mps_residual_eps")) s.mps_residual_eps = j["mps_residual_eps"].get<double>();
    if (j.contains("jitter")) s.jitter = j["jitter"].get<double>();
    if (j.contains("dvfs")) s.dvfs = dvfs_from_json(j["dvfs"], where + ".dvfs");
    if (j.contains("telemetry")) {
        const std::string t = j["telemetry"].get<std::string>();
        if (t == "top") s.telemetry = TelemetryMode::Top;
        else if (t == "all") s.telemetry = TelemetryMode::All;
        else if (t == "none") s.telemetry = TelemetryMode::None;
        else throw ParseError(where + ".telemetry: expected top|all|none");
    }
    s.record_events = detail::get_or(j, "record_events", false);
    if (j.contains("expect")) s.expect = expectations_from_json(j["expect"], where + ".expect");
    s.devices_file = detail::get_or<std::string>(j, "devices_file", "");
    return s;
}

inline ScenarioFile load_scenario(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        ScenarioFile s = scenario_from_json(j, path.filename().string());
        if (s.name.empty()) s.name = path.stem().string();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace isosim
