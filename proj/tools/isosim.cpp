// isosim command-line front end.
//
// Exit codes: 0 ok, 2 configuration error, 3 rate search failed,
// 4 malformed input/results, 5 expectation violated.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <isosim/isosim.hpp>

using namespace isosim;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSearch = 3;
constexpr int kExitParse = 4;
constexpr int kExitExpectation = 5;

DeviceRegistry load_registry(const std::string& devices_file) {
    DeviceRegistry reg = DeviceRegistry::builtin();
    if (!devices_file.empty()) {
        try {
            reg.load_json(nlohmann::json::parse(read_text_file(devices_file)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(devices_file + ": " + e.what());
        }
    }
    return reg;
}

int cmd_partitions(const std::string& device, const std::string& regime_str,
                   const std::string& devices_file) {
    const auto reg = load_registry(devices_file);
    const auto& dev = reg.get(device);
    const Regime regime = parse_regime(regime_str);
    switch (regime) {
        case Regime::Gc: {
            const auto sizes = gc_valid_sizes(dev.gpu);
            std::printf("%s: %d SMs, SM-capped partition sizes:", device.c_str(),
                        dev.gpu.total_sms);
            for (int s : sizes) std::printf(" %d", s);
            std::printf("\n");
            for (int s : sizes)
                std::printf("  %2d SMs -> up to %d concurrent partition(s)\n", s,
                            enumerate_gc_layouts(dev.gpu, s));
            break;
        }
        case Regime::Mig: {
            if (!dev.gpu.supports_mig) throw UnsupportedRegime(device + " does not support MIG");
            std::printf("%s: %d GPCs (%d SMs/GPC), instance sizes:\n", device.c_str(),
                        dev.gpu.gpc_count, sms_per_gpc(dev.gpu));
            for (int g : dev.mig_instance_gpcs)
                std::printf("  %d GPC (%3d SMs) -> up to %d concurrent instance(s)\n", g,
                            g * sms_per_gpc(dev.gpu), dev.gpu.gpc_count / g);
            break;
        }
        case Regime::StandAlone:
        case Regime::Mps:
            std::printf("%s: single span of %d SMs (no partitioning under %s)\n", device.c_str(),
                        dev.gpu.total_sms, regime_str.c_str());
            break;
    }
    return 0;
}

int cmd_calibrate(const std::string& out_dir, bool dump_anchors) {
    if (dump_anchors) {
        std::fputs(anchor_csv().c_str(), stdout);
        return 0;
    }
    const auto reg = DeviceRegistry::builtin();
    for (const auto* platform : {"a100", "orin-nano"}) {
        const auto profiles = builtin_profiles(reg, platform);
        for (const auto& [model, prof] : profiles) {
            const fs::path path = fs::path(out_dir) / ("profile-" + std::string(platform) + "-" +
                                                       model + ".json");
            write_text_file(path, profile_to_json(prof).dump(2) + "\n");
            std::printf("%-14s %-10s compute_work=%s mem_work=%s sm_saturation=%d -> %s\n",
                        model.c_str(), platform, fmt_sci(prof.compute_work).c_str(),
                        fmt_sci(prof.mem_work).c_str(), prof.sm_saturation, path.c_str());
        }
    }
    return 0;
}

int cmd_search(const std::string& scenario_path, std::string device, std::string regime,
               std::vector<std::string> models, std::uint64_t seed, std::string out_dir,
               const std::string& devices_file) {
    std::vector<std::string> regimes;
    std::string dev_file = devices_file;
    if (!scenario_path.empty()) {
        const auto sc = load_scenario(scenario_path);
        device = sc.device;
        regimes = sc.regimes;
        models = sc.models;
        seed = sc.seed;
        if (out_dir.empty()) out_dir = sc.out_dir;
        if (dev_file.empty()) dev_file = sc.devices_file;
    } else {
        if (device.empty() || regime.empty() || models.empty())
            throw ConfigError("search needs --scenario or --device/--regime/--model");
        regimes = {regime};
    }
    if (out_dir.empty()) out_dir = "out/search";

    const auto reg = load_registry(dev_file);
    const auto& dev = reg.get(device);
    const auto profiles = profiles_for_device(reg, dev);

    CsvTable summary;
    summary.header = {"model", "platform", "regime", "final_ims", "cap_reached"};
    for (const auto& regime_name : regimes) {
        const Regime r = parse_regime(regime_name);
        const PartitionPlan plan = experiment_plan(dev, r, 2, {}, {});
        for (const auto& model : models) {
            auto it = profiles.find(model);
            if (it == profiles.end()) throw ConfigError("unknown model '" + model + "'");
            const auto [sms, bw] = solo_allocation(dev, plan, it->second);
            LatencyModelExecutor exec(it->second, sms, bw, dev.gpu.f_max_hz, dev.jitter,
                                      mix_seed(seed, hash_str(model + "/" + regime_name)));
            const auto res = search_max_frequency(exec);
            std::printf("%-14s %-10s %-10s -> %d%s\n", model.c_str(), device.c_str(),
                        regime_name.c_str(), res.f, res.cap_reached ? " (CapReached)" : "");
            summary.rows.push_back({model, device, regime_name, std::to_string(res.f),
                                    res.cap_reached ? "1" : "0"});
            write_text_file(fs::path(out_dir) / ("trace-" + model + "-" + regime_name + ".csv"),
                            trace_csv(res.trace));
        }
    }
    write_text_file(fs::path(out_dir) / "search_summary.csv", summary.to_string());
    return 0;
}

int cmd_bench(const std::string& scenario_path, std::string out_dir,
              const std::string& devices_file) {
    const auto sc = load_scenario(scenario_path);
    if (sc.regimes.size() != 1 || sc.models.size() != 1)
        throw ConfigError(scenario_path + ": bench scenarios take exactly one regime and model");
    if (out_dir.empty()) out_dir = sc.out_dir.empty() ? "out/" + sc.name : sc.out_dir;
    const auto reg = load_registry(!devices_file.empty() ? devices_file : sc.devices_file);
    const auto& dev = reg.get(sc.device);
    const auto profiles = profiles_for_device(reg, dev);

    ExperimentSpec spec = sc.to_experiment(sc.regimes[0], sc.models[0]);
    const SweepOutput out = spec.n_processes == 4 ? run_four_process_sweep(dev, profiles, spec)
                                                  : run_two_process_sweep(dev, profiles, spec);

    const fs::path dir(out_dir);
    write_text_file(dir / (sc.name + ".csv"), rows_to_csv(out.rows).to_string());

    ResultMeta meta;
    meta.name = sc.name;
    meta.device = sc.device;
    meta.regime = sc.regimes[0];
    meta.model = sc.models[0];
    meta.n_processes = spec.n_processes;
    meta.fixed_ims = out.fixed_ims;
    meta.seed = sc.seed;
    meta.inferences_per_point = spec.inferences_per_point;
    meta.expect = sc.expect;
    write_text_file(dir / (sc.name + ".meta.json"), meta_to_json(meta).dump(2) + "\n");

    if (sc.telemetry == TelemetryMode::Top) {
        write_text_file(dir / (sc.name + ".telemetry.csv"),
                        telemetry_to_csv(out.top_telemetry).to_string());
    } else if (sc.telemetry == TelemetryMode::All) {
        for (std::size_t i = 0; i < out.rows.size(); ++i)
            write_text_file(dir / (sc.name + ".telemetry." +
                                   std::to_string(out.rows[i].adjusted_ims) + ".csv"),
                            telemetry_to_csv(out.point_results[i].telemetry).to_string());
    }
    if (sc.record_events && !out.point_results.empty())
        write_text_file(dir / (sc.name + ".events.csv"),
                        events_to_csv(out.point_results.back().events).to_string());

    std::printf("%s: fixed_ims=%d, %zu sweep points -> %s\n", sc.name.c_str(), out.fixed_ims,
                out.rows.size(), dir.c_str());
    return 0;
}

int cmd_impact(const std::string& device, const std::string& regime_str, const std::string& model,
               std::vector<int> sizes, std::uint64_t seed, std::string out_dir,
               const std::string& devices_file) {
    const auto reg = load_registry(devices_file);
    const auto& dev = reg.get(device);
    const auto profiles = profiles_for_device(reg, dev);
    const Regime regime = parse_regime(regime_str);
    if (sizes.empty()) {
        switch (regime) {
            case Regime::Mig: sizes = dev.mig_instance_gpcs; break;
            case Regime::Gc: sizes = gc_valid_sizes(dev.gpu); break;
            default: sizes = {0}; break;
        }
    }
    const auto rows = partition_impact_sweep(dev, profiles, regime, model, sizes, seed);
    const auto csv = impact_to_csv(rows);
    if (out_dir.empty()) out_dir = "out/impact";
    const fs::path path = fs::path(out_dir) / ("impact-" + device + "-" + regime_str + "-" +
                                               model + ".csv");
    write_text_file(path, csv.to_string());
    std::fputs(csv.to_string().c_str(), stdout);
    std::printf("-> %s\n", path.c_str());
    return 0;
}

int cmd_report(const std::string& dir) {
    const auto summaries = load_results_dir(dir);
    std::fputs(summary_text(summaries).c_str(), stdout);
    for (const auto& s : summaries)
        if (!s.expectation_failures.empty()) return kExitExpectation;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale simulator for temporal isolation of concurrent GPU inference"};
    app.require_subcommand(1);

    std::string device, regime, model, scenario, out_dir, devices_file, report_dir;
    std::vector<std::string> models;
    std::vector<int> sizes;
    std::uint64_t seed = 1;
    bool dump_anchors = false;

    auto* partitions = app.add_subcommand("partitions", "List valid partition layouts");
    partitions->add_option("--device", device, "Device name")->required();
    partitions->add_option("--regime", regime, "standalone|mps|mig|gc")->required();
    partitions->add_option("--devices", devices_file, "Extra device registry file");

    auto* calibrate = app.add_subcommand("calibrate", "Write calibrated model profiles");
    calibrate->add_option("--out", out_dir, "Output directory")->default_val("profiles");
    calibrate->add_flag("--dump-anchors", dump_anchors, "Print the embedded anchor table");

    auto* search = app.add_subcommand("search", "Find maximum stable inference rates");
    search->add_option("--scenario", scenario, "Scenario file");
    search->add_option("--device", device, "Device name");
    search->add_option("--regime", regime, "standalone|mps|mig|gc");
    search->add_option("--model", models, "Model name(s)");
    search->add_option("--seed", seed, "Random seed");
    search->add_option("--out", out_dir, "Output directory");
    search->add_option("--devices", devices_file, "Extra device registry file");

    auto* bench = app.add_subcommand("bench", "Run a contention sweep from a scenario file");
    bench->add_option("--scenario", scenario, "Scenario file")->required();
    bench->add_option("--out", out_dir, "Output directory (overrides scenario)");
    bench->add_option("--devices", devices_file, "Extra device registry file");

    auto* impact = app.add_subcommand("impact", "Partition-size impact sweep");
    impact->add_option("--device", device, "Device name")->required();
    impact->add_option("--regime", regime, "standalone|mps|mig|gc")->required();
    impact->add_option("--model", model, "Model name")->required();
    impact->add_option("--sizes", sizes, "Partition sizes (GPCs for mig, SMs for gc)");
    impact->add_option("--seed", seed, "Random seed");
    impact->add_option("--out", out_dir, "Output directory");
    impact->add_option("--devices", devices_file, "Extra device registry file");

    auto* report = app.add_subcommand("report", "Summarize a results directory");
    report->add_option("dir", report_dir, "Results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (partitions->parsed()) return cmd_partitions(device, regime, devices_file);
        if (calibrate->parsed()) return cmd_calibrate(out_dir, dump_anchors);
        if (search->parsed())
            return cmd_search(scenario, device, regime, models, seed, out_dir, devices_file);
        if (bench->parsed()) return cmd_bench(scenario, out_dir, devices_file);
        if (impact->parsed())
            return cmd_impact(device, regime, model, sizes, seed, out_dir, devices_file);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const SearchFailed& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSearch;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return 0;
}
