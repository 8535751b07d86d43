#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/errors.hpp"

namespace isosim {

/// Compute-architecture class; decides the SM-partition allocation rule.
enum class ArchClass { A6x, A7x, A8x, A90plus };

inline const char* to_string(ArchClass a) {
    switch (a) {
        case ArchClass::A6x: return "6.x";
        case ArchClass::A7x: return "7.x";
        case ArchClass::A8x: return "8.x";
        case ArchClass::A90plus: return "9.0+";
    }
    return "?";
}

inline ArchClass parse_arch_class(const std::string& s) {
    if (s == "6.x" || s == "6.X") return ArchClass::A6x;
    if (s == "7.x" || s == "7.X") return ArchClass::A7x;
    if (s == "8.x" || s == "8.X") return ArchClass::A8x;
    if (s == "9.0+") return ArchClass::A90plus;
    throw ParseError("unknown arch_class '" + s + "'");
}

/// Minimum SM count and step size for SM-capped context partitions.
struct GcAllocationRule {
    ArchClass arch_class;
    int min_sms;
    int step_sms;
};

/// Allocation rule per architecture class. Total over the enum.
inline GcAllocationRule gc_step_rule(ArchClass a) {
    switch (a) {
        case ArchClass::A6x: return {a, 2, 2};
        case ArchClass::A7x: return {a, 2, 2};
        case ArchClass::A8x: return {a, 4, 2};
        case ArchClass::A90plus: return {a, 8, 8};
    }
    return {a, 2, 2}; // unreachable
}

/// Static description of one device.
struct GpuSpec {
    std::string name;
    ArchClass arch_class = ArchClass::A8x;
    int gpc_count = 0;
    int tpc_per_gpc = 0;
    int sm_per_tpc = 0;
    int total_sms = 1;
    double f_max_hz = 1.0e9;
    double f_min_hz = 0.1e9;
    double power_cap_w = 100.0;
    double idle_power_w = 10.0;
    // Total memory bandwidth relative to the platform the model profiles
    // were calibrated on (that platform is 1.0).
    double mem_bandwidth_rel = 1.0;
    bool supports_mig = false;
    bool supports_gc = false;

    void validate() const {
        if (total_sms < 1) throw ConfigError(name + ": total_sms must be >= 1");
        if (gpc_count > 0 && total_sms != gpc_count * tpc_per_gpc * sm_per_tpc)
            throw ConfigError(name + ": total_sms != gpc_count * tpc_per_gpc * sm_per_tpc");
        if (!(f_min_hz < f_max_hz)) throw ConfigError(name + ": f_min_hz must be < f_max_hz");
        if (!(idle_power_w < power_cap_w)) throw ConfigError(name + ": idle_power_w must be < power_cap_w");
        if (mem_bandwidth_rel <= 0.0) throw ConfigError(name + ": mem_bandwidth_rel must be > 0");
    }
};

/// Power-governor parameters. cap_w <= 0 resolves to the device power cap;
/// +infinity disables throttling entirely.
struct DvfsParams {
    double cap_w = -1.0;
    double sustain_window_s = 0.1;   // time at/above cap before throttling
    double recover_window_s = 0.5;   // time below cap before recovering
    double throttle_factor = 0.5;
    double per_sm_power_w = -1.0;    // <= 0: derived so all SMs busy at f_max hit the cap
    double power_exponent = 2.0;     // applied to freq relative to f_max
};

/// First-order thermal proxy; telemetry only.
struct ThermalParams {
    double t_amb_c = 25.0;
    double k_c_per_w = 1.0;
    double tau_s = 10.0;
};

/// A registry record: the spec plus per-device simulation defaults.
struct DeviceEntry {
    GpuSpec gpu;
    double jitter = 0.01;               // latency noise factor range [1, 1+jitter]
    DvfsParams dvfs;
    ThermalParams thermal;
    std::vector<int> mig_instance_gpcs; // legal per-instance GPC counts
    std::string profile_platform;       // which calibrated profiles this device runs

    double per_sm_power_w() const {
        if (dvfs.per_sm_power_w > 0.0) return dvfs.per_sm_power_w;
        return (gpu.power_cap_w - gpu.idle_power_w) / gpu.total_sms;
    }
    double dvfs_cap_w() const {
        return dvfs.cap_w > 0.0 ? dvfs.cap_w : gpu.power_cap_w;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ParseError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

} // namespace detail

inline DvfsParams dvfs_from_json(const nlohmann::json& j, const std::string& where) {
    detail::reject_unknown_keys(j,
        {"cap_w", "sustain_window_s", "recover_window_s", "throttle_factor",
         "per_sm_power_w", "power_exponent"}, where);
    DvfsParams d;
    if (j.contains("cap_w")) {
        if (j["cap_w"].is_null()) d.cap_w = std::numeric_limits<double>::infinity();
        else d.cap_w = j["cap_w"].get<double>();
    }
    d.sustain_window_s = detail::get_or(j, "sustain_window_s", d.sustain_window_s);
    d.recover_window_s = detail::get_or(j, "recover_window_s", d.recover_window_s);
    d.throttle_factor = detail::get_or(j, "throttle_factor", d.throttle_factor);
    d.per_sm_power_w = detail::get_or(j, "per_sm_power_w", d.per_sm_power_w);
    d.power_exponent = detail::get_or(j, "power_exponent", d.power_exponent);
    if (d.cap_w > 0.0 && !(d.throttle_factor > 0.0 && d.throttle_factor < 1.0))
        throw ParseError(where + ": throttle_factor must be in (0,1)");
    return d;
}

inline DeviceEntry device_from_json(const std::string& name, const nlohmann::json& j) {
    const std::string where = "device '" + name + "'";
    detail::reject_unknown_keys(j,
        {"arch_class", "gpc_count", "tpc_per_gpc", "sm_per_tpc", "total_sms",
         "f_max_hz", "f_min_hz", "power_cap_w", "idle_power_w", "mem_bandwidth_rel",
         "supports_mig", "supports_gc", "sim"}, where);
    DeviceEntry e;
    e.gpu.name = name;
    e.gpu.arch_class = parse_arch_class(j.at("arch_class").get<std::string>());
    e.gpu.gpc_count = detail::get_or(j, "gpc_count", 0);
    e.gpu.tpc_per_gpc = detail::get_or(j, "tpc_per_gpc", 0);
    e.gpu.sm_per_tpc = detail::get_or(j, "sm_per_tpc", 0);
    e.gpu.total_sms = j.at("total_sms").get<int>();
    e.gpu.f_max_hz = j.at("f_max_hz").get<double>();
    e.gpu.f_min_hz = j.at("f_min_hz").get<double>();
    e.gpu.power_cap_w = j.at("power_cap_w").get<double>();
    e.gpu.idle_power_w = j.at("idle_power_w").get<double>();
    e.gpu.mem_bandwidth_rel = detail::get_or(j, "mem_bandwidth_rel", 1.0);
    e.gpu.supports_mig = detail::get_or(j, "supports_mig", false);
    e.gpu.supports_gc = detail::get_or(j, "supports_gc", false);
    e.profile_platform = name;
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        detail::reject_unknown_keys(s,
            {"jitter", "profile_platform", "mig_instance_gpcs", "dvfs", "thermal"},
            where + ".sim");
        e.jitter = detail::get_or(s, "jitter", e.jitter);
        e.profile_platform = detail::get_or<std::string>(s, "profile_platform", e.profile_platform);
        if (s.contains("mig_instance_gpcs"))
            e.mig_instance_gpcs = s["mig_instance_gpcs"].get<std::vector<int>>();
        if (s.contains("dvfs")) e.dvfs = dvfs_from_json(s["dvfs"], where + ".sim.dvfs");
        if (s.contains("thermal")) {
            const auto& t = s["thermal"];
            detail::reject_unknown_keys(t, {"t_amb_c", "k_c_per_w", "tau_s"}, where + ".sim.thermal");
            e.thermal.t_amb_c = detail::get_or(t, "t_amb_c", e.thermal.t_amb_c);
            e.thermal.k_c_per_w = detail::get_or(t, "k_c_per_w", e.thermal.k_c_per_w);
            e.thermal.tau_s = detail::get_or(t, "tau_s", e.thermal.tau_s);
        }
    }
    e.gpu.validate();
    return e;
}

/// Known devices, keyed by name. Ships the three built-in platforms;
/// more can be merged in from a registry file.
class DeviceRegistry {
public:
    static DeviceRegistry builtin() {
        DeviceRegistry r;
        {
            DeviceEntry e;
            e.gpu = {"a100", ArchClass::A8x, 7, 8, 2, 112,
                     1.41e9, 0.21e9, 250.0, 50.0, 1.0, true, true};
            e.jitter = 0.01;
            e.dvfs = {};
            e.thermal = {25.0, 0.22, 10.0};
            e.mig_instance_gpcs = {1, 2, 3, 4, 7};
            e.profile_platform = "a100";
            r.add(e);
        }
        {
            DeviceEntry e;
            e.gpu = {"orin-nano", ArchClass::A8x, 1, 4, 2, 8,
                     1.02e9, 0.306e9, 20.0, 5.0, 1.0, false, true};
            e.jitter = 0.005;
            // Governor windows match the observed duty cycle on this board:
            // long full-speed stretches punctuated by short half-clock dips.
            e.dvfs.sustain_window_s = 1.0;
            e.dvfs.recover_window_s = 0.1;
            e.thermal = {25.0, 1.75, 10.0};
            e.profile_platform = "orin-nano";
            r.add(e);
        }
        {
            DeviceEntry e;
            e.gpu = {"orin-agx", ArchClass::A8x, 2, 4, 2, 16,
                     1.3e9, 0.306e9, 50.0, 10.0, 3.0, false, true};
            e.jitter = 0.005;
            e.dvfs.sustain_window_s = 1.0;
            e.dvfs.recover_window_s = 0.1;
            e.thermal = {25.0, 0.7, 10.0};
            // Same chip generation as orin-nano; reuses its calibrated profiles.
            e.profile_platform = "orin-nano";
            r.add(e);
        }
        return r;
    }

    void add(DeviceEntry e) {
        e.gpu.validate();
        entries_[e.gpu.name] = std::move(e);
    }

    /// Merge records from a registry file into this registry.
    void load_json(const nlohmann::json& doc) {
        detail::reject_unknown_keys(doc, {"devices"}, "registry");
        const auto& devs = doc.at("devices");
        if (!devs.is_object()) throw ParseError("registry: 'devices' must be an object");
        for (auto it = devs.begin(); it != devs.end(); ++it)
            add(device_from_json(it.key(), it.value()));
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    const DeviceEntry& get(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown device '" + name + "'");
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, DeviceEntry> entries_;
};

} // namespace isosim
