#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/anchors.hpp"
#include "isosim/device.hpp"
#include "isosim/errors.hpp"
#include "isosim/partition.hpp"

namespace isosim {

/// Calibration keeps the worst-case latency (base * (1+jitter) * (1+margin))
/// exactly at the anchor period, so measured peak rates stay stable under
/// residual interference of up to this fraction.
inline constexpr double kContentionMargin = 0.005;

/// Roofline description of one model on one platform. Latency is the max of
/// a compute term (scales with SMs up to saturation and with clock) and a
/// memory term (scales with bandwidth share only).
struct ModelProfile {
    std::string name;
    std::string platform;
    double compute_work = 1.0;   // seconds at 1 effective SM, calibration clock
    double mem_work = 0.0;       // seconds at full calibration bandwidth
    int sm_saturation = 1;       // SMs beyond which the compute term stops improving
    double switch_cost_s = 1e-4; // context-switch penalty when another process was running
    double calib_freq_hz = 1.0e9;
    double calib_bw_rel = 1.0;
    double mem_footprint_mib = 100.0;
};

/// Period implied by a target rate (batch size is fixed at one).
inline double latency_from_ims(double ims) {
    if (!(ims > 0.0)) throw DomainError("ims must be > 0");
    return 1.0 / ims;
}

/// Core latency evaluation. `sms` may be fractional (spatial shares);
/// `bw` is bandwidth in units of the calibration platform's full bandwidth
/// and may exceed 1 on wider devices.
inline double latency_core(const ModelProfile& p, double sms, double freq_hz, double bw) {
    const double eff_sms = std::min(sms, static_cast<double>(p.sm_saturation));
    const double freq_rel = freq_hz / p.calib_freq_hz;
    const double compute = p.compute_work / (eff_sms * freq_rel);
    const double memory = p.mem_work > 0.0 ? p.mem_work / bw : 0.0;
    return std::max(compute, memory);
}

/// Checked single-device latency prediction; bw_share is a fraction of the
/// profile platform's bandwidth.
inline double predict_latency(const ModelProfile& p, int sms, double freq_hz, double bw_share) {
    if (sms < 1) throw DomainError("sms must be >= 1");
    if (!(bw_share > 0.0) || bw_share > 1.0) throw DomainError("bw_share must be in (0,1]");
    if (!(freq_hz > 0.0) || freq_hz > p.calib_freq_hz * (1.0 + 1e-12))
        throw DomainError("freq out of range");
    return latency_core(p, static_cast<double>(sms), freq_hz, bw_share);
}

/// One calibration point: an observed peak rate at a resource allocation.
struct AnchorPoint {
    double sms = 1.0;
    double bw_share = 1.0;
    int ims = 1;
};

struct CalibrationOptions {
    double jitter = 0.01;
    double margin = kContentionMargin;
    double calib_freq_hz = 1.0e9;
    double calib_bw_rel = 1.0;
    double switch_cost_s = 1e-4;
    double mem_footprint_mib = 100.0;
    double tolerance = 0.02;
};

namespace detail {

struct RooflineFit {
    double compute_work = 0.0;
    double mem_work = 0.0;
    int sat = 0;
    bool ok = false;
};

// Two-point roofline solve for a given saturation count. Tries compute
// binding at the large allocation first, then memory binding.
inline RooflineFit try_fit(double s1, double bw1, double t1,
                           double s2, double bw2, double t2, int sat) {
    const double c1 = std::min(s1, static_cast<double>(sat));
    const double c2 = std::min(s2, static_cast<double>(sat));
    const double eps = 1e-12;
    {
        // compute term binds the large allocation
        const double cw = c1 * t1;
        const double comp2 = cw / c2;
        if (comp2 <= t2 * (1.0 + eps)) {
            double mw;
            if (comp2 >= t2 * (1.0 - eps)) // compute also binds the small one
                mw = std::min(bw1 * t1, bw2 * t2);
            else
                mw = bw2 * t2; // memory must make up the difference
            if (mw / bw1 <= t1 * (1.0 + eps)) return {cw, mw, sat, true};
        }
    }
    {
        // memory term binds the large allocation
        const double mw = bw1 * t1;
        const double mem2 = mw / bw2;
        if (mem2 <= t2 * (1.0 + eps)) {
            double cw;
            if (mem2 >= t2 * (1.0 - eps))
                cw = std::min(c1 * t1, c2 * t2);
            else
                cw = c2 * t2;
            if (cw / c1 <= t1 * (1.0 + eps)) return {cw, mw, sat, true};
        }
    }
    return {};
}

} // namespace detail

/// Fits a roofline profile to anchor points so that the worst-case latency
/// (with jitter and contention margin) lands exactly on each anchor period.
/// Deterministic: scans saturation counts from the largest allocation down
/// and keeps the first exact fit.
inline ModelProfile calibrate_profile(const std::string& model, const std::string& platform,
                                      std::vector<AnchorPoint> points,
                                      const CalibrationOptions& opt) {
    // collapse duplicate allocations (e.g. identical full-device columns)
    std::sort(points.begin(), points.end(), [](const AnchorPoint& a, const AnchorPoint& b) {
        return a.sms > b.sms;
    });
    std::vector<AnchorPoint> distinct;
    for (const auto& p : points) {
        if (!distinct.empty() && distinct.back().sms == p.sms) {
            if (distinct.back().ims != p.ims)
                throw CalibrationError(model + "/" + platform + ": conflicting anchors at " +
                                       std::to_string(p.sms) + " SMs");
            continue;
        }
        distinct.push_back(p);
    }
    if (distinct.size() < 2)
        throw CalibrationError(model + "/" + platform + ": need >= 2 anchors with distinct SM allocations");
    if (distinct.size() > 2)
        throw CalibrationError(model + "/" + platform + ": two-point roofline fit expects 2 distinct allocations");

    const double headroom = (1.0 + opt.jitter) * (1.0 + opt.margin);
    const AnchorPoint& big = distinct[0];
    const AnchorPoint& small = distinct[1];
    const double t1 = 1.0 / (big.ims * headroom);
    const double t2 = 1.0 / (small.ims * headroom);

    ModelProfile prof;
    prof.name = model;
    prof.platform = platform;
    prof.calib_freq_hz = opt.calib_freq_hz;
    prof.calib_bw_rel = opt.calib_bw_rel;
    prof.switch_cost_s = opt.switch_cost_s;
    prof.mem_footprint_mib = opt.mem_footprint_mib;

    double best_residual = 1e300;
    for (int sat = static_cast<int>(big.sms); sat >= 1; --sat) {
        const auto fit = detail::try_fit(big.sms, big.bw_share, t1, small.sms, small.bw_share, t2, sat);
        if (!fit.ok) continue;
        prof.compute_work = fit.compute_work;
        prof.mem_work = fit.mem_work;
        prof.sm_saturation = fit.sat;
        double worst = 0.0;
        for (const auto& a : distinct) {
            const double lat = latency_core(prof, a.sms, opt.calib_freq_hz, a.bw_share) * headroom;
            worst = std::max(worst, std::abs(lat * a.ims - 1.0));
        }
        if (worst <= opt.tolerance) return prof;
        best_residual = std::min(best_residual, worst);
    }
    std::ostringstream msg;
    msg << model << "/" << platform << ": no roofline parameters fit within "
        << opt.tolerance * 100 << "% (best residual ";
    if (best_residual > 1e299) msg << "n/a";
    else msg << best_residual * 100 << "%";
    msg << ")";
    throw CalibrationError(msg.str());
}

namespace detail {

struct ModelMeta {
    const char* name;
    bool large;              // large models pay a bigger context-switch cost
    double footprint_mib;
};

inline const std::array<ModelMeta, 6>& model_meta() {
    static const std::array<ModelMeta, 6> meta = {{
        {"convnext-base", false, 350.0},
        {"convnext-large", true, 800.0},
        {"mobilenet-v2", false, 60.0},
        {"resnet18", false, 90.0},
        {"vit-b-16", false, 350.0},
        {"vit-l-32", true, 1250.0},
    }};
    return meta;
}

} // namespace detail

/// Maps an anchor configuration to the (SMs, bandwidth-share) allocation it
/// was measured under on the given device.
inline AnchorPoint anchor_point(const DeviceEntry& dev, const ImsAnchor& a) {
    AnchorPoint p;
    p.ims = a.ims;
    switch (a.config) {
        case AnchorConfig::FullGpu:
        case AnchorConfig::Mps:
            p.sms = dev.gpu.total_sms;
            p.bw_share = 1.0;
            break;
        case AnchorConfig::Mig3g:
            p.sms = 3.0 * sms_per_gpc(dev.gpu);
            p.bw_share = 3.0 / dev.gpu.gpc_count;
            break;
        case AnchorConfig::Gc4sm:
            p.sms = 4.0;
            p.bw_share = 1.0;
            break;
    }
    return p;
}

using ProfileSet = std::map<std::string, ModelProfile>;

/// Calibrated profiles for one platform, derived from the embedded anchors.
inline ProfileSet builtin_profiles(const DeviceRegistry& registry, const std::string& platform) {
    const DeviceEntry& dev = registry.get(platform);
    ProfileSet out;
    for (const auto& meta : detail::model_meta()) {
        const auto anchors = anchors_for(meta.name, platform);
        if (anchors.empty()) continue;
        std::vector<AnchorPoint> points;
        for (const auto& a : anchors) points.push_back(anchor_point(dev, a));
        CalibrationOptions opt;
        opt.jitter = dev.jitter;
        opt.calib_freq_hz = dev.gpu.f_max_hz;
        opt.calib_bw_rel = dev.gpu.mem_bandwidth_rel;
        opt.switch_cost_s = meta.large ? 5e-4 : 1e-4;
        opt.mem_footprint_mib = meta.footprint_mib;
        out[meta.name] = calibrate_profile(meta.name, platform, points, opt);
    }
    return out;
}

/// Profiles usable on a device (resolved through its profile platform).
inline ProfileSet profiles_for_device(const DeviceRegistry& registry, const DeviceEntry& dev) {
    return builtin_profiles(registry, dev.profile_platform);
}

inline nlohmann::json profile_to_json(const ModelProfile& p) {
    return nlohmann::json{
        {"name", p.name},
        {"platform", p.platform},
        {"compute_work", p.compute_work},
        {"mem_work", p.mem_work},
        {"sm_saturation", p.sm_saturation},
        {"switch_cost_s", p.switch_cost_s},
        {"calib_freq_hz", p.calib_freq_hz},
        {"calib_bw_rel", p.calib_bw_rel},
        {"mem_footprint_mib", p.mem_footprint_mib},
    };
}

inline ModelProfile profile_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
        {"name", "platform", "compute_work", "mem_work", "sm_saturation",
         "switch_cost_s", "calib_freq_hz", "calib_bw_rel", "mem_footprint_mib"},
        "profile");
    ModelProfile p;
    p.name = j.at("name").get<std::string>();
    p.platform = j.at("platform").get<std::string>();
    p.compute_work = j.at("compute_work").get<double>();
    p.mem_work = j.at("mem_work").get<double>();
    p.sm_saturation = j.at("sm_saturation").get<int>();
    p.switch_cost_s = detail::get_or(j, "switch_cost_s", 1e-4);
    p.calib_freq_hz = j.at("calib_freq_hz").get<double>();
    p.calib_bw_rel = detail::get_or(j, "calib_bw_rel", 1.0);
    p.mem_footprint_mib = detail::get_or(j, "mem_footprint_mib", 100.0);
    if (p.compute_work <= 0.0 || p.mem_work < 0.0 || p.sm_saturation < 1)
        throw ParseError("profile '" + p.name + "': invalid roofline parameters");
    return p;
}

} // namespace isosim
