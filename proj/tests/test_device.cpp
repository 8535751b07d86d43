#include <catch2/catch_amalgamated.hpp>

#include <isosim/device.hpp>

using namespace isosim;

TEST_CASE("gc_step_rule matches the architecture table", "[device]") {
    CHECK(gc_step_rule(ArchClass::A6x).min_sms == 2);
    CHECK(gc_step_rule(ArchClass::A6x).step_sms == 2);
    CHECK(gc_step_rule(ArchClass::A7x).min_sms == 2);
    CHECK(gc_step_rule(ArchClass::A7x).step_sms == 2);
    CHECK(gc_step_rule(ArchClass::A8x).min_sms == 4);
    CHECK(gc_step_rule(ArchClass::A8x).step_sms == 2);
    CHECK(gc_step_rule(ArchClass::A90plus).min_sms == 8);
    CHECK(gc_step_rule(ArchClass::A90plus).step_sms == 8);
}

TEST_CASE("builtin registry ships the three platforms", "[device]") {
    const auto reg = DeviceRegistry::builtin();
    REQUIRE(reg.has("a100"));
    REQUIRE(reg.has("orin-nano"));
    REQUIRE(reg.has("orin-agx"));

    const auto& a100 = reg.get("a100");
    CHECK(a100.gpu.gpc_count == 7);
    CHECK(a100.gpu.tpc_per_gpc == 8);
    CHECK(a100.gpu.sm_per_tpc == 2);
    CHECK(a100.gpu.total_sms == 112);
    CHECK(a100.gpu.supports_mig);
    CHECK(a100.mig_instance_gpcs == std::vector<int>{1, 2, 3, 4, 7});

    const auto& nano = reg.get("orin-nano");
    CHECK(nano.gpu.total_sms == 8);
    CHECK(nano.gpu.f_max_hz == Catch::Approx(1.02e9));
    CHECK(nano.gpu.power_cap_w == Catch::Approx(20.0));
    CHECK_FALSE(nano.gpu.supports_mig);

    const auto& agx = reg.get("orin-agx");
    CHECK(agx.gpu.total_sms == 16);
    CHECK(agx.gpu.f_max_hz == Catch::Approx(1.3e9));
    CHECK(agx.gpu.power_cap_w == Catch::Approx(50.0));
    CHECK(agx.profile_platform == "orin-nano");

    CHECK_THROWS_AS(reg.get("no-such-device"), ConfigError);
}

TEST_CASE("per-SM power is calibrated to the device ceiling", "[device]") {
    const auto reg = DeviceRegistry::builtin();
    for (const auto& name : reg.names()) {
        const auto& d = reg.get(name);
        const double full = d.gpu.idle_power_w + d.per_sm_power_w() * d.gpu.total_sms;
        CHECK(full == Catch::Approx(d.gpu.power_cap_w));
    }
}

TEST_CASE("spec invariants are enforced", "[device]") {
    GpuSpec g{"bad", ArchClass::A8x, 2, 4, 2, 15, 1e9, 0.5e9, 30, 5, 1.0, false, true};
    CHECK_THROWS_AS(g.validate(), ConfigError); // 2*4*2 != 15
    g.total_sms = 16;
    CHECK_NOTHROW(g.validate());
    g.f_min_hz = 2e9;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.f_min_hz = 0.5e9;
    g.idle_power_w = 31;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("registry files load and reject unknown keys", "[device]") {
    DeviceRegistry reg = DeviceRegistry::builtin();
    nlohmann::json doc = {
        {"devices",
         {{"toy-gpu",
           {{"arch_class", "9.0+"},
            {"gpc_count", 0},
            {"total_sms", 16},
            {"f_max_hz", 1.5e9},
            {"f_min_hz", 0.3e9},
            {"power_cap_w", 80.0},
            {"idle_power_w", 12.0},
            {"supports_gc", true},
            {"sim", {{"jitter", 0.004}}}}}}}};
    reg.load_json(doc);
    REQUIRE(reg.has("toy-gpu"));
    CHECK(reg.get("toy-gpu").jitter == Catch::Approx(0.004));
    CHECK(reg.get("toy-gpu").gpu.arch_class == ArchClass::A90plus);

    nlohmann::json bad = doc;
    bad["devices"]["toy-gpu"]["frobnicate"] = 1;
    CHECK_THROWS_AS(reg.load_json(bad), ParseError);

    nlohmann::json bad2 = doc;
    bad2["devices"]["toy-gpu"]["sim"]["unknown_knob"] = 1;
    CHECK_THROWS_AS(reg.load_json(bad2), ParseError);
}
