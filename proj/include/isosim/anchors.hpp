#pragma once

#include <array>
#include <string>
#include <vector>

#include "isosim/errors.hpp"

namespace isosim {

/// Reference configuration an anchor was measured under.
enum class AnchorConfig { FullGpu, Mps, Mig3g, Gc4sm };

inline const char* to_string(AnchorConfig c) {
    switch (c) {
        case AnchorConfig::FullGpu: return "full-gpu";
        case AnchorConfig::Mps: return "mps";
        case AnchorConfig::Mig3g: return "mig-3g";
        case AnchorConfig::Gc4sm: return "gc-4sm";
    }
    return "?";
}

/// Peak stable inference rate (inferences/second) of one model under one
/// configuration on one platform. Calibration inverts these.
struct ImsAnchor {
    const char* model;
    const char* platform;
    AnchorConfig config;
    int ims;
};

inline const std::array<ImsAnchor, 36>& anchor_table() {
    static const std::array<ImsAnchor, 36> table = {{
        {"convnext-base", "a100", AnchorConfig::FullGpu, 61},
        {"convnext-base", "a100", AnchorConfig::Mps, 61},
        {"convnext-base", "a100", AnchorConfig::Mig3g, 54},
        {"convnext-large", "a100", AnchorConfig::FullGpu, 52},
        {"convnext-large", "a100", AnchorConfig::Mps, 52},
        {"convnext-large", "a100", AnchorConfig::Mig3g, 52},
        {"mobilenet-v2", "a100", AnchorConfig::FullGpu, 147},
        {"mobilenet-v2", "a100", AnchorConfig::Mps, 147},
        {"mobilenet-v2", "a100", AnchorConfig::Mig3g, 123},
        {"resnet18", "a100", AnchorConfig::FullGpu, 129},
        {"resnet18", "a100", AnchorConfig::Mps, 129},
        {"resnet18", "a100", AnchorConfig::Mig3g, 118},
        {"vit-b-16", "a100", AnchorConfig::FullGpu, 95},
        {"vit-b-16", "a100", AnchorConfig::Mps, 95},
        {"vit-b-16", "a100", AnchorConfig::Mig3g, 76},
        {"vit-l-32", "a100", AnchorConfig::FullGpu, 55},
        {"vit-l-32", "a100", AnchorConfig::Mps, 55},
        {"vit-l-32", "a100", AnchorConfig::Mig3g, 55},
        {"convnext-base", "orin-nano", AnchorConfig::FullGpu, 58},
        {"convnext-base", "orin-nano", AnchorConfig::Mps, 58},
        {"convnext-base", "orin-nano", AnchorConfig::Gc4sm, 35},
        {"convnext-large", "orin-nano", AnchorConfig::FullGpu, 33},
        {"convnext-large", "orin-nano", AnchorConfig::Mps, 33},
        {"convnext-large", "orin-nano", AnchorConfig::Gc4sm, 18},
        {"mobilenet-v2", "orin-nano", AnchorConfig::FullGpu, 134},
        {"mobilenet-v2", "orin-nano", AnchorConfig::Mps, 134},
        {"mobilenet-v2", "orin-nano", AnchorConfig::Gc4sm, 79},
        {"resnet18", "orin-nano", AnchorConfig::FullGpu, 127},
        {"resnet18", "orin-nano", AnchorConfig::Mps, 127},
        {"resnet18", "orin-nano", AnchorConfig::Gc4sm, 70},
        {"vit-b-16", "orin-nano", AnchorConfig::FullGpu, 58},
        {"vit-b-16", "orin-nano", AnchorConfig::Mps, 58},
        {"vit-b-16", "orin-nano", AnchorConfig::Gc4sm, 36},
        {"vit-l-32", "orin-nano", AnchorConfig::FullGpu, 42},
        {"vit-l-32", "orin-nano", AnchorConfig::Mps, 42},
        {"vit-l-32", "orin-nano", AnchorConfig::Gc4sm, 24},
    }};
    return table;
}

inline std::vector<ImsAnchor> anchors_for(const std::string& model, const std::string& platform) {
    std::vector<ImsAnchor> out;
    for (const auto& a : anchor_table())
        if (model == a.model && platform == a.platform) out.push_back(a);
    return out;
}

inline int anchor_ims(const std::string& model, const std::string& platform, AnchorConfig cfg) {
    for (const auto& a : anchor_table())
        if (model == a.model && platform == a.platform && cfg == a.config) return a.ims;
    throw DomainError("no anchor for " + model + "/" + platform);
}

inline const std::array<const char*, 6>& model_names() {
    static const std::array<const char*, 6> names = {
        "convnext-base", "convnext-large", "mobilenet-v2",
        "resnet18", "vit-b-16", "vit-l-32"};
    return names;
}

/// Audit dump of the embedded anchor table.
inline std::string anchor_csv() {
    std::string out = "model,platform,config,ims\n";
    for (const auto& a : anchor_table()) {
        out += a.model;
        out += ',';
        out += a.platform;
        out += ',';
        out += to_string(a.config);
        out += ',';
        out += std::to_string(a.ims);
        out += '\n';
    }
    return out;
}

} // namespace isosim
