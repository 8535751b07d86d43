#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "isosim/csv.hpp"
#include "isosim/device.hpp"
#include "isosim/errors.hpp"
#include "isosim/partition.hpp"
#include "isosim/search.hpp"
#include "isosim/sim.hpp"
#include "isosim/workload.hpp"

namespace isosim {

/// Throughput haircut applied to hard-partition rows of the impact sweep,
/// reflecting the small overhead a full-device hard partition shows against
/// the bare device. Modeling knob.
inline constexpr double kMigThroughputOverhead = 0.02;

/// Local memory bookkeeping per allocated SM in the impact sweep (MiB).
inline constexpr double kPerSmMemoryMib = 8.0;

/// One contention experiment: same model on every process, one adjusted
/// co-runner sweeping its rate, the rest fixed at their peak.
struct ExperimentSpec {
    std::string regime;              // standalone | mps | mig | gc
    std::string model;
    int n_processes = 2;             // 2 or 4
    std::optional<int> fixed_ims;    // unset = resolve via rate search
    std::vector<int> adjusted_sweep; // empty = 1..ceil(max * above_max_factor)
    int inferences_per_point = 1000;
    std::uint64_t seed = 1;
    double above_max_factor = 1.0;   // equivalence runs push the sweep past max
    std::optional<int> partition_sms;  // GC instance size override
    std::optional<int> partition_gpcs; // MIG instance size override
    std::optional<double> pin_freq_hz;
    std::optional<double> mig_residual_eps;
    std::optional<double> mps_residual_eps;
    std::optional<double> jitter;
    std::optional<DvfsParams> dvfs;
    bool record_events = false;
};

struct ResultRow {
    int adjusted_ims = 0;
    double fixed_timeout_pct = 0.0;
    double adjusted_timeout_pct = 0.0;
    double avg_power_w = 0.0;
    int throttle_events = 0;
    double mean_freq_hz = 0.0;
};

struct SweepOutput {
    Regime regime = Regime::StandAlone;
    std::string model;
    std::string device;
    int fixed_ims = 0;
    std::vector<ResultRow> rows;
    std::vector<TelemetrySample> top_telemetry; // telemetry of the top sweep point
    std::vector<SimResult> point_results;       // per sweep point, in row order
};

namespace detail {

inline int gc_pair_size(const DeviceEntry& dev, int count) {
    // largest valid size that still fits `count` non-overlapping partitions
    const auto sizes = gc_valid_sizes(dev.gpu);
    int best = -1;
    for (int s : sizes)
        if (dev.gpu.total_sms / s >= count) best = std::max(best, s);
    if (best < 0)
        throw ConfigError(dev.gpu.name + ": no partition size fits " + std::to_string(count) +
                          " concurrent partitions");
    return best;
}

inline int mig_pair_gpcs(const DeviceEntry& dev, int count) {
    int best = -1;
    for (int g : dev.mig_instance_gpcs)
        if (g * count <= dev.gpu.gpc_count) best = std::max(best, g);
    if (best < 0)
        throw ConfigError(dev.gpu.name + ": no instance size fits " + std::to_string(count) +
                          " concurrent instances");
    return best;
}

} // namespace detail

/// The plan an experiment runs on: single span for standalone/MPS, `count`
/// equal instances otherwise (the largest size that fits, unless overridden).
inline PartitionPlan experiment_plan(const DeviceEntry& dev, Regime regime, int count,
                                     std::optional<int> partition_sms,
                                     std::optional<int> partition_gpcs) {
    switch (regime) {
        case Regime::StandAlone: return make_standalone_plan(dev.gpu);
        case Regime::Mps: return make_mps_plan(dev.gpu);
        case Regime::Mig: {
            const int gpcs = partition_gpcs ? *partition_gpcs : detail::mig_pair_gpcs(dev, count);
            return make_mig_uniform_plan(dev, gpcs, count);
        }
        case Regime::Gc: {
            const int sms = partition_sms ? *partition_sms : detail::gc_pair_size(dev, count);
            return make_gc_uniform_plan(dev, sms, count);
        }
    }
    throw ConfigError("unknown regime");
}

/// Solo allocation (SMs, bandwidth in profile-calibration units) a process
/// of this experiment owns.
inline std::pair<double, double> solo_allocation(const DeviceEntry& dev, const PartitionPlan& plan,
                                                 const ModelProfile& prof) {
    const double rel = dev.gpu.mem_bandwidth_rel / prof.calib_bw_rel;
    switch (plan.regime) {
        case Regime::StandAlone:
        case Regime::Mps:
            return {static_cast<double>(dev.gpu.total_sms), rel};
        case Regime::Mig: {
            const Partition& p = plan.partitions.front();
            return {static_cast<double>(p.sms), p.mem_share * rel};
        }
        case Regime::Gc: {
            const Partition& p = plan.partitions.front();
            return {static_cast<double>(p.sms), rel};
        }
    }
    return {1.0, 1.0};
}

/// Peak stable rate of the model on this experiment's per-process
/// allocation, found with the iterative search against a solo executor.
inline int resolve_fixed_ims(const DeviceEntry& dev, const ProfileSet& profiles,
                             const ExperimentSpec& spec, const PartitionPlan& plan) {
    if (spec.fixed_ims) return *spec.fixed_ims;
    auto it = profiles.find(spec.model);
    if (it == profiles.end())
        throw ConfigError("no calibrated profile for model '" + spec.model + "'");
    const ModelProfile& prof = it->second;
    const auto [sms, bw] = solo_allocation(dev, plan, prof);
    const double freq = spec.pin_freq_hz.value_or(dev.gpu.f_max_hz);
    const double jitter = spec.jitter.value_or(dev.jitter);
    LatencyModelExecutor exec(prof, sms, bw, freq, jitter,
                              mix_seed(spec.seed, hash_str(spec.model + "/resolve")));
    return search_max_frequency(exec).f;
}

namespace detail {

inline SweepOutput run_sweep(const DeviceEntry& dev, const ProfileSet& profiles,
                             const ExperimentSpec& spec) {
    if (spec.n_processes != 2 && spec.n_processes != 4)
        throw ConfigError("n_processes must be 2 or 4");
    if (spec.inferences_per_point < 1)
        throw ConfigError("inferences_per_point must be >= 1");
    const Regime regime = parse_regime(spec.regime);
    const PartitionPlan plan =
        experiment_plan(dev, regime, spec.n_processes, spec.partition_sms, spec.partition_gpcs);
    const int fixed_ims = resolve_fixed_ims(dev, profiles, spec, plan);

    std::vector<int> sweep = spec.adjusted_sweep;
    if (sweep.empty()) {
        const int top = static_cast<int>(std::ceil(fixed_ims * spec.above_max_factor));
        for (int r = 1; r <= top; ++r) sweep.push_back(r);
    }
    for (std::size_t i = 1; i < sweep.size(); ++i)
        if (sweep[i] <= sweep[i - 1]) throw ConfigError("adjusted_sweep must be ascending");

    SweepOutput out;
    out.regime = regime;
    out.model = spec.model;
    out.device = dev.gpu.name;
    out.fixed_ims = fixed_ims;

    const int n_fixed = spec.n_processes - 1;
    for (std::size_t pi = 0; pi < sweep.size(); ++pi) {
        const int rate = sweep[pi];
        SimConfig cfg;
        cfg.plan = plan;
        // Point identity (the swept rate) keys the derived seed, so sweep
        // rows do not depend on execution order.
        cfg.seed = spec.seed ^ static_cast<std::uint64_t>(rate);
        cfg.duration = SimDuration::count(spec.inferences_per_point);
        if (spec.mig_residual_eps) cfg.mig_residual_eps = *spec.mig_residual_eps;
        if (spec.mps_residual_eps) cfg.mps_residual_eps = *spec.mps_residual_eps;
        cfg.jitter_override = spec.jitter;
        cfg.dvfs_override = spec.dvfs;
        cfg.pinned_freq_hz = spec.pin_freq_hz;
        cfg.record_events = spec.record_events;

        const bool bound = regime == Regime::Mig || regime == Regime::Gc;
        for (int i = 0; i < n_fixed; ++i) {
            ProcessSpec p;
            p.id = n_fixed == 1 ? "fixed" : "fixed-" + std::to_string(i + 1);
            p.model = spec.model;
            p.target_ims = fixed_ims;
            p.role = Role::Fixed;
            if (bound) p.partition_id = plan.partitions[i].id;
            cfg.processes.push_back(p);
        }
        {
            ProcessSpec p;
            p.id = "adjusted";
            p.model = spec.model;
            p.target_ims = rate;
            p.role = Role::Adjusted;
            if (bound) p.partition_id = plan.partitions[n_fixed].id;
            // the co-runner issues only for the fixed processes' measurement
            // window, whatever its own rate
            p.issue_limit = std::max<long>(
                1, std::lround(static_cast<double>(spec.inferences_per_point) * rate / fixed_ims));
            cfg.processes.push_back(p);
        }

        SimResult res = run_simulation(dev, profiles, cfg);

        ResultRow row;
        row.adjusted_ims = rate;
        double fixed_pct = 0.0;
        for (int i = 0; i < n_fixed; ++i) fixed_pct += res.processes[i].timeout_pct();
        row.fixed_timeout_pct = fixed_pct / n_fixed;
        row.adjusted_timeout_pct = res.processes[n_fixed].timeout_pct();
        row.avg_power_w = res.mean_power_w();
        row.throttle_events = res.throttle_count();
        row.mean_freq_hz = res.mean_freq_hz();
        out.rows.push_back(row);
        if (pi + 1 == sweep.size()) out.top_telemetry = res.telemetry;
        out.point_results.push_back(std::move(res));
    }
    return out;
}

} // namespace detail

/// Two processes contending: one fixed at its peak rate, one sweeping.
inline SweepOutput run_two_process_sweep(const DeviceEntry& dev, const ProfileSet& profiles,
                                         const ExperimentSpec& spec) {
    if (spec.n_processes != 2) throw ConfigError("two-process sweep needs n_processes == 2");
    return detail::run_sweep(dev, profiles, spec);
}

/// Four processes: three fixed at their peak, one sweeping. Rows carry the
/// mean timeout percentage of the three fixed processes.
inline SweepOutput run_four_process_sweep(const DeviceEntry& dev, const ProfileSet& profiles,
                                          const ExperimentSpec& spec) {
    if (spec.n_processes != 4) throw ConfigError("four-process sweep needs n_processes == 4");
    return detail::run_sweep(dev, profiles, spec);
}

struct ImpactRow {
    int size = 0; // GPCs for MIG, SMs for GC, 0 for whole device
    double throughput_ips = 0.0;
    double memory_mib = 0.0;
    double avg_power_w = 0.0;
};

/// Solo saturation run per partition size: throughput, resident memory, and
/// average power of one process driving that slice flat out.
inline std::vector<ImpactRow> partition_impact_sweep(const DeviceEntry& dev,
                                                     const ProfileSet& profiles,
                                                     Regime regime, const std::string& model,
                                                     const std::vector<int>& sizes,
                                                     std::uint64_t seed,
                                                     int inferences = 1000) {
    auto it = profiles.find(model);
    if (it == profiles.end()) throw ConfigError("no calibrated profile for model '" + model + "'");
    const ModelProfile& prof = it->second;

    std::vector<ImpactRow> out;
    for (const int size : sizes) {
        PartitionPlan plan;
        switch (regime) {
            case Regime::StandAlone:
                plan = make_standalone_plan(dev.gpu);
                break;
            case Regime::Mps:
                plan = make_mps_plan(dev.gpu);
                break;
            case Regime::Mig:
                plan = make_mig_uniform_plan(dev, size, 1);
                break;
            case Regime::Gc: {
                if (enumerate_gc_layouts(dev.gpu, size) < 1)
                    throw InvalidSize("partition size does not fit");
                plan = make_gc_uniform_plan(dev, size, 1);
                break;
            }
        }
        const auto [sms, bw] = solo_allocation(dev, plan, prof);
        LatencyModelExecutor exec(prof, sms, bw, dev.gpu.f_max_hz, dev.jitter,
                                  mix_seed(seed, hash_str(model + "/impact/" + std::to_string(size))));
        const int peak = search_max_frequency(exec).f;

        SimConfig cfg;
        cfg.plan = plan;
        cfg.seed = mix_seed(seed, static_cast<std::uint64_t>(size));
        cfg.duration = SimDuration::count(inferences);
        ProcessSpec p;
        p.id = "solo";
        p.model = model;
        p.target_ims = peak;
        if (regime == Regime::Mig || regime == Regime::Gc) p.partition_id = plan.partitions[0].id;
        cfg.processes.push_back(p);
        const SimResult res = run_simulation(dev, profiles, cfg);

        ImpactRow row;
        row.size = size;
        const double elapsed = res.end_time_s > 0.0 ? res.end_time_s : 1.0;
        row.throughput_ips = res.processes[0].completed / elapsed;
        if (regime == Regime::Mig) row.throughput_ips *= 1.0 - kMigThroughputOverhead;
        row.memory_mib = prof.mem_footprint_mib + kPerSmMemoryMib * sms;
        row.avg_power_w = res.mean_power_w();
        out.push_back(row);
    }
    return out;
}

inline CsvTable rows_to_csv(const std::vector<ResultRow>& rows) {
    CsvTable t;
    t.header = {"adjusted_ims", "fixed_timeout_pct", "adjusted_timeout_pct",
                "avg_power_w", "throttle_events", "mean_freq_hz"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.adjusted_ims), fmt_num(r.fixed_timeout_pct, 4),
                          fmt_num(r.adjusted_timeout_pct, 4), fmt_num(r.avg_power_w, 3),
                          std::to_string(r.throttle_events), fmt_num(r.mean_freq_hz, 0)});
    return t;
}

inline CsvTable impact_to_csv(const std::vector<ImpactRow>& rows) {
    CsvTable t;
    t.header = {"size", "throughput_ips", "memory_mib", "avg_power_w"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.size), fmt_num(r.throughput_ips, 3),
                          fmt_num(r.memory_mib, 1), fmt_num(r.avg_power_w, 3)});
    return t;
}

inline CsvTable telemetry_to_csv(const std::vector<TelemetrySample>& samples) {
    CsvTable t;
    t.header = {"t_s", "power_w", "freq_hz", "temp_c"};
    for (const auto& s : samples)
        t.rows.push_back({fmt_num(s.t_s, 4), fmt_num(s.power_w, 4), fmt_num(s.freq_hz, 0),
                          fmt_num(s.temp_c, 4)});
    return t;
}

inline CsvTable events_to_csv(const std::vector<InferenceRecord>& events) {
    CsvTable t;
    t.header = {"t_issue", "t_start", "t_end", "process", "deadline", "timeout"};
    for (const auto& e : events)
        t.rows.push_back({fmt_num(e.t_issue, 9), fmt_num(e.t_start, 9), fmt_num(e.t_end, 9),
                          e.process, fmt_num(e.deadline, 9), e.timeout ? "1" : "0"});
    return t;
}

} // namespace isosim
