#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "isosim/device.hpp"
#include "isosim/errors.hpp"

namespace isosim {

enum class Regime { StandAlone, Mps, Mig, Gc };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::StandAlone: return "standalone";
        case Regime::Mps: return "mps";
        case Regime::Mig: return "mig";
        case Regime::Gc: return "gc";
    }
    return "?";
}

inline Regime parse_regime(const std::string& s) {
    if (s == "standalone" || s == "stand-alone") return Regime::StandAlone;
    if (s == "mps") return Regime::Mps;
    if (s == "mig") return Regime::Mig;
    if (s == "gc") return Regime::Gc;
    throw ParseError("unknown regime '" + s + "'");
}

/// One slice of a device. gpcs is meaningful for MIG only; mem_share is a
/// hard fraction for MIG and 1.0 (shared) everywhere else.
struct Partition {
    std::string id;
    int gpcs = 0;
    int sms = 0;
    double mem_share = 1.0;
};

struct PartitionPlan {
    Regime regime = Regime::StandAlone;
    std::vector<Partition> partitions;
};

/// Valid SM sizes for capped-context partitions on this device, ascending.
inline std::vector<int> gc_valid_sizes(const GpuSpec& gpu) {
    if (!gpu.supports_gc)
        throw UnsupportedRegime(gpu.name + " does not support SM-capped contexts");
    const GcAllocationRule rule = gc_step_rule(gpu.arch_class);
    std::vector<int> sizes;
    for (int s = rule.min_sms; s <= gpu.total_sms; s += rule.step_sms)
        sizes.push_back(s);
    return sizes;
}

/// Maximum number of concurrent non-overlapping partitions of a given size.
inline int enumerate_gc_layouts(const GpuSpec& gpu, int size) {
    const auto sizes = gc_valid_sizes(gpu);
    if (std::find(sizes.begin(), sizes.end(), size) == sizes.end())
        throw InvalidSize(gpu.name + ": " + std::to_string(size) + " SMs is not a valid partition size");
    return gpu.total_sms / size;
}

inline int sms_per_gpc(const GpuSpec& gpu) {
    return gpu.tpc_per_gpc * gpu.sm_per_tpc;
}

/// SMs owned by a partition under the given regime.
inline int partition_sm_count(const Partition& p, const GpuSpec& gpu, Regime regime) {
    switch (regime) {
        case Regime::StandAlone:
        case Regime::Mps: return gpu.total_sms;
        case Regime::Mig: return p.gpcs * sms_per_gpc(gpu);
        case Regime::Gc: return p.sms;
    }
    return p.sms;
}

/// Checks a MIG plan against the device's instance-size table. Returns
/// human-readable violations; empty means the plan is accepted.
inline std::vector<std::string> validate_mig_plan(const PartitionPlan& plan, const DeviceEntry& dev) {
    std::vector<std::string> out;
    const GpuSpec& gpu = dev.gpu;
    if (plan.regime != Regime::Mig) {
        out.push_back("plan regime is not mig");
        return out;
    }
    if (!gpu.supports_mig) {
        out.push_back(gpu.name + " does not support MIG");
        return out;
    }
    const auto& legal = dev.mig_instance_gpcs;
    int total_gpcs = 0;
    for (const auto& p : plan.partitions) {
        if (std::find(legal.begin(), legal.end(), p.gpcs) == legal.end())
            out.push_back("partition '" + p.id + "': illegal instance size " +
                          std::to_string(p.gpcs) + " GPCs");
        if (p.sms != p.gpcs * sms_per_gpc(gpu))
            out.push_back("partition '" + p.id + "': sms=" + std::to_string(p.sms) +
                          " does not match " + std::to_string(p.gpcs) + " GPCs");
        total_gpcs += p.gpcs;
    }
    if (total_gpcs > gpu.gpc_count)
        out.push_back("oversubscribed: " + std::to_string(total_gpcs) + " GPCs requested, " +
                      std::to_string(gpu.gpc_count) + " available");
    return out;
}

/// Regime-dispatching plan validation. Empty result means valid.
inline std::vector<std::string> validate_plan(const PartitionPlan& plan, const DeviceEntry& dev) {
    std::vector<std::string> out;
    const GpuSpec& gpu = dev.gpu;
    switch (plan.regime) {
        case Regime::StandAlone:
        case Regime::Mps: {
            if (plan.partitions.size() != 1)
                out.push_back("standalone/mps plans need exactly one partition");
            else if (plan.partitions[0].sms != gpu.total_sms)
                out.push_back("standalone/mps partition must span all SMs");
            break;
        }
        case Regime::Mig:
            return validate_mig_plan(plan, dev);
        case Regime::Gc: {
            if (!gpu.supports_gc) {
                out.push_back(gpu.name + " does not support SM-capped contexts");
                break;
            }
            const GcAllocationRule rule = gc_step_rule(gpu.arch_class);
            int total = 0;
            for (const auto& p : plan.partitions) {
                if (p.sms < rule.min_sms || (p.sms - rule.min_sms) % rule.step_sms != 0)
                    out.push_back("partition '" + p.id + "': " + std::to_string(p.sms) +
                                  " SMs violates the (min " + std::to_string(rule.min_sms) +
                                  ", step " + std::to_string(rule.step_sms) + ") rule");
                total += p.sms;
            }
            if (total > gpu.total_sms)
                out.push_back("oversubscribed: " + std::to_string(total) + " SMs requested, " +
                              std::to_string(gpu.total_sms) + " available");
            break;
        }
    }
    for (const auto& p : plan.partitions) {
        if (p.mem_share <= 0.0 || p.mem_share > 1.0)
            out.push_back("partition '" + p.id + "': mem_share must be in (0,1]");
    }
    return out;
}

inline PartitionPlan make_standalone_plan(const GpuSpec& gpu) {
    return {Regime::StandAlone, {{"all", gpu.gpc_count, gpu.total_sms, 1.0}}};
}

inline PartitionPlan make_mps_plan(const GpuSpec& gpu) {
    return {Regime::Mps, {{"all", gpu.gpc_count, gpu.total_sms, 1.0}}};
}

/// `count` equal MIG instances of `gpcs` GPCs each; memory split follows
/// the compute split.
inline PartitionPlan make_mig_uniform_plan(const DeviceEntry& dev, int gpcs, int count) {
    PartitionPlan plan;
    plan.regime = Regime::Mig;
    for (int i = 0; i < count; ++i) {
        Partition p;
        p.id = "mig" + std::to_string(i);
        p.gpcs = gpcs;
        p.sms = gpcs * sms_per_gpc(dev.gpu);
        p.mem_share = static_cast<double>(gpcs) / dev.gpu.gpc_count;
        plan.partitions.push_back(p);
    }
    auto v = validate_mig_plan(plan, dev);
    if (!v.empty()) throw ConfigError("mig plan invalid: " + v.front());
    return plan;
}

/// `count` equal SM-capped partitions of `sms` SMs each (shared memory).
inline PartitionPlan make_gc_uniform_plan(const DeviceEntry& dev, int sms, int count) {
    if (enumerate_gc_layouts(dev.gpu, sms) < count)
        throw ConfigError(dev.gpu.name + ": cannot fit " + std::to_string(count) + " x " +
                          std::to_string(sms) + "-SM partitions");
    PartitionPlan plan;
    plan.regime = Regime::Gc;
    for (int i = 0; i < count; ++i)
        plan.partitions.push_back({"gc" + std::to_string(i), 0, sms, 1.0});
    return plan;
}

} // namespace isosim
