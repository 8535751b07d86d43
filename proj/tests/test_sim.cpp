#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include <isosim/sim.hpp>

using namespace isosim;

namespace {

const DeviceRegistry& reg() {
    static const DeviceRegistry r = DeviceRegistry::builtin();
    return r;
}
const ProfileSet& a100_profiles() {
    static const ProfileSet p = builtin_profiles(reg(), "a100");
    return p;
}
const ProfileSet& nano_profiles() {
    static const ProfileSet p = builtin_profiles(reg(), "orin-nano");
    return p;
}

/// Toy device with a generous cap: no throttling unless asked for.
DeviceEntry toy_device() {
    DeviceEntry e;
    e.gpu = {"toy", ArchClass::A8x, 0, 0, 0, 8, 1.0e9, 0.2e9, 1000.0, 10.0, 1.0, false, true};
    e.jitter = 0.0;
    e.thermal = {25.0, 0.5, 10.0};
    e.profile_platform = "toy";
    return e;
}

ModelProfile toy_profile(double compute_work, double mem_work, int sat, double switch_cost = 5e-4) {
    ModelProfile p;
    p.name = "toy-model";
    p.platform = "toy";
    p.compute_work = compute_work;
    p.mem_work = mem_work;
    p.sm_saturation = sat;
    p.switch_cost_s = switch_cost;
    p.calib_freq_hz = 1.0e9;
    return p;
}

SimConfig nano_gc_duo(int fixed_rate, int adjusted_rate, int n, std::uint64_t seed) {
    SimConfig cfg;
    cfg.plan = make_gc_uniform_plan(reg().get("orin-nano"), 4, 2);
    cfg.processes = {
        {"fixed", "convnext-large", fixed_rate, "gc0", Role::Fixed},
        {"adjusted", "convnext-large", adjusted_rate, "gc1", Role::Adjusted},
    };
    cfg.duration = SimDuration::count(n);
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("identical configs give byte-identical results", "[sim]") {
    const auto run_nano = [] {
        return run_simulation(reg().get("orin-nano"), nano_profiles(), nano_gc_duo(18, 18, 300, 77));
    };
    CHECK(run_nano().canonical_json().dump() == run_nano().canonical_json().dump());

    const auto run_a100 = [] {
        SimConfig cfg;
        cfg.plan = make_mps_plan(reg().get("a100").gpu);
        cfg.processes = {{"fixed", "convnext-large", 52, "", Role::Fixed},
                         {"adjusted", "convnext-large", 30, "", Role::Adjusted}};
        cfg.duration = SimDuration::count(200);
        cfg.seed = 5;
        return run_simulation(reg().get("a100"), a100_profiles(), cfg);
    };
    CHECK(run_a100().canonical_json().dump() == run_a100().canonical_json().dump());
}

TEST_CASE("issued inferences are conserved", "[sim]") {
    // count mode drains
    {
        const auto res =
            run_simulation(reg().get("orin-nano"), nano_profiles(), nano_gc_duo(18, 30, 250, 3));
        for (const auto& p : res.processes) {
            CHECK(p.issued == 250);
            CHECK(p.completed + p.in_flight_end == p.issued);
            CHECK(p.in_flight_end == 0);
            CHECK(p.timeouts <= p.issued);
        }
    }
    // horizon mode cuts work off mid-flight
    {
        SimConfig cfg = nano_gc_duo(18, 40, 1, 9);
        cfg.duration = SimDuration::horizon(2.0);
        const auto res = run_simulation(reg().get("orin-nano"), nano_profiles(), cfg);
        long total_in_flight = 0;
        for (const auto& p : res.processes) {
            CHECK(p.completed + p.in_flight_end == p.issued);
            total_in_flight += p.in_flight_end;
        }
        CHECK(total_in_flight > 0); // the over-driven co-runner is backlogged
    }
}

TEST_CASE("solo process at its peak rate stays clean", "[sim]") {
    SimConfig cfg;
    cfg.plan = make_standalone_plan(reg().get("a100").gpu);
    cfg.processes = {{"solo", "resnet18", 129, "", Role::Fixed}};
    cfg.duration = SimDuration::count(1000);
    cfg.seed = 21;
    const auto res = run_simulation(reg().get("a100"), a100_profiles(), cfg);
    CHECK(res.processes[0].timeouts * 100 < res.processes[0].issued); // < 1%
    CHECK(res.processes[0].timeouts == 0);
}

TEST_CASE("a trivial rate never misses", "[sim]") {
    SimConfig cfg;
    cfg.plan = make_standalone_plan(reg().get("a100").gpu);
    cfg.processes = {{"solo", "convnext-large", 1, "", Role::Fixed}};
    cfg.duration = SimDuration::count(50);
    const auto res = run_simulation(reg().get("a100"), a100_profiles(), cfg);
    CHECK(res.processes[0].timeouts == 0);
}

TEST_CASE("over-driven process still completes everything, late", "[sim]") {
    SimConfig cfg;
    cfg.plan = make_standalone_plan(reg().get("a100").gpu);
    cfg.processes = {{"solo", "convnext-large", 104, "", Role::Fixed}}; // 2x peak
    cfg.duration = SimDuration::count(300);
    const auto res = run_simulation(reg().get("a100"), a100_profiles(), cfg);
    CHECK(res.processes[0].completed == 300);
    CHECK(res.processes[0].timeouts > 250);
}

TEST_CASE("hard partitions with zero residual keep the fixed process bit-identical to solo",
          "[sim]") {
    const auto& a100 = reg().get("a100");
    const auto plan = make_mig_uniform_plan(a100, 3, 2);

    for (int adjusted_rate : {5, 40, 76}) {
        SimConfig duo;
        duo.plan = plan;
        duo.processes = {{"fixed", "vit-b-16", 76, "mig0", Role::Fixed},
                         {"adjusted", "vit-b-16", adjusted_rate, "mig1", Role::Adjusted}};
        duo.duration = SimDuration::count(400);
        duo.seed = 1234;
        duo.mig_residual_eps = 0.0;
        duo.record_events = true;

        SimConfig solo = duo;
        solo.processes = {duo.processes[0]};

        const auto rd = run_simulation(a100, a100_profiles(), duo);
        const auto rs = run_simulation(a100, a100_profiles(), solo);

        CHECK(rd.stats("fixed") == rs.stats("fixed"));
        // completion times match bit-for-bit
        std::vector<InferenceRecord> fixed_duo;
        for (const auto& e : rd.events)
            if (e.process == "fixed") fixed_duo.push_back(e);
        REQUIRE(fixed_duo.size() == rs.events.size());
        for (std::size_t i = 0; i < fixed_duo.size(); ++i) {
            CHECK(fixed_duo[i].t_end == rs.events[i].t_end);
            CHECK(fixed_duo[i].t_start == rs.events[i].t_start);
        }
    }
}

TEST_CASE("an idle co-partition changes nothing", "[sim]") {
    const auto& nano = reg().get("orin-nano");
    SimConfig two_parts;
    two_parts.plan = make_gc_uniform_plan(nano, 4, 2);
    two_parts.processes = {{"solo", "convnext-large", 18, "gc0", Role::Fixed}};
    two_parts.duration = SimDuration::count(300);
    two_parts.seed = 42;

    SimConfig one_part = two_parts;
    one_part.plan = make_gc_uniform_plan(nano, 4, 1);

    const auto a = run_simulation(nano, nano_profiles(), two_parts);
    const auto b = run_simulation(nano, nano_profiles(), one_part);
    CHECK(a.stats("solo") == b.stats("solo"));
}

TEST_CASE("serialized sharing halves throughput minus the switch overhead", "[sim]") {
    // zero jitter, generous cap: closed-form check
    const auto dev = toy_device();
    ProfileSet profiles{{"toy-model", toy_profile(0.08, 0.0, 8)}}; // 10 ms at 8 SMs

    SimConfig cfg;
    cfg.plan = make_standalone_plan(dev.gpu);
    cfg.processes = {{"p1", "toy-model", 200, "", Role::Fixed},
                     {"p2", "toy-model", 200, "", Role::Fixed}};
    cfg.duration = SimDuration::horizon(10.0);
    cfg.jitter_override = 0.0;
    DvfsParams uncapped;
    uncapped.cap_w = std::numeric_limits<double>::infinity();
    cfg.dvfs_override = uncapped;

    const auto res = run_simulation(dev, profiles, cfg);
    const double expected = 10.0 / (2 * (0.010 + 5e-4));
    for (const auto& p : res.processes)
        CHECK(std::abs(p.completed - expected) <= 0.02 * expected);
}

TEST_CASE("work in flight is re-timed exactly when spatial shares change", "[sim]") {
    // Two zero-jitter compute-bound models under equal-split sharing.
    // heavy needs 0.02 s at a half split, 0.01 s alone; light finishes at
    // t=0.01 with half of heavy's work done, so heavy ends at 0.015 exactly.
    const auto dev = toy_device();
    ProfileSet profiles{{"heavy", toy_profile(0.08, 0.0, 8)},
                        {"light", toy_profile(0.04, 0.0, 8)}};
    profiles.at("heavy").name = "heavy";
    profiles.at("light").name = "light";

    SimConfig cfg;
    cfg.plan = make_mps_plan(dev.gpu);
    cfg.processes = {{"a", "heavy", 1, "", Role::Fixed, 1},
                     {"b", "light", 1, "", Role::Fixed, 1}};
    cfg.duration = SimDuration::count(1);
    cfg.jitter_override = 0.0;
    cfg.mps_residual_eps = 0.0; // isolate the share arithmetic
    cfg.record_events = true;
    DvfsParams uncapped;
    uncapped.cap_w = std::numeric_limits<double>::infinity();
    cfg.dvfs_override = uncapped;

    const auto res = run_simulation(dev, profiles, cfg);
    REQUIRE(res.events.size() == 2);
    for (const auto& e : res.events) {
        if (e.process == "b") CHECK(e.t_end == Catch::Approx(0.010).epsilon(1e-12));
        if (e.process == "a") CHECK(e.t_end == Catch::Approx(0.015).epsilon(1e-12));
    }
}

TEST_CASE("work in flight is re-timed exactly when the bandwidth split changes", "[sim]") {
    // memory-bound analog on two 4-SM partitions sharing bandwidth
    const auto dev = toy_device();
    ProfileSet profiles{{"heavy", toy_profile(1e-6, 0.010, 8)},
                        {"light", toy_profile(1e-6, 0.005, 8)}};
    profiles.at("heavy").name = "heavy";
    profiles.at("light").name = "light";

    SimConfig cfg;
    cfg.plan = make_gc_uniform_plan(dev, 4, 2);
    cfg.processes = {{"a", "heavy", 1, "gc0", Role::Fixed, 1},
                     {"b", "light", 1, "gc1", Role::Fixed, 1}};
    cfg.duration = SimDuration::count(1);
    cfg.jitter_override = 0.0;
    cfg.record_events = true;
    DvfsParams uncapped;
    uncapped.cap_w = std::numeric_limits<double>::infinity();
    cfg.dvfs_override = uncapped;

    const auto res = run_simulation(dev, profiles, cfg);
    REQUIRE(res.events.size() == 2);
    for (const auto& e : res.events) {
        if (e.process == "b") CHECK(e.t_end == Catch::Approx(0.010).epsilon(1e-12));
        if (e.process == "a") CHECK(e.t_end == Catch::Approx(0.015).epsilon(1e-12));
    }
}

TEST_CASE("fixed-process misses grow with the co-runner rate (zero jitter)", "[sim]") {
    const auto dev = toy_device();
    // memory-heavy profile: a co-runner halves the bandwidth and doubles latency
    ProfileSet profiles{{"toy-model", toy_profile(0.008, 0.010, 8, 1e-4)}};
    DvfsParams uncapped;
    uncapped.cap_w = std::numeric_limits<double>::infinity();

    for (Regime regime : {Regime::StandAlone, Regime::Mps}) {
        long prev = -1;
        for (int rate : {1, 10, 25, 50, 80}) {
            SimConfig cfg;
            cfg.plan = regime == Regime::StandAlone ? make_standalone_plan(dev.gpu)
                                                    : make_mps_plan(dev.gpu);
            cfg.processes = {{"fixed", "toy-model", 95, "", Role::Fixed},
                             {"adjusted", "toy-model", rate, "", Role::Adjusted}};
            cfg.duration = SimDuration::count(400);
            cfg.jitter_override = 0.0;
            cfg.dvfs_override = uncapped;
            cfg.seed = 9;
            const auto res = run_simulation(dev, profiles, cfg);
            const long t = res.stats("fixed").timeouts;
            INFO(to_string(regime) << " rate " << rate);
            CHECK(t >= prev);
            prev = t;
        }
        CHECK(prev > 0);
    }
}

TEST_CASE("reported power stays within the physical envelope", "[sim]") {
    const auto res =
        run_simulation(reg().get("orin-nano"), nano_profiles(), nano_gc_duo(18, 18, 400, 4));
    const auto& nano = reg().get("orin-nano").gpu;
    REQUIRE_FALSE(res.telemetry.empty());
    for (const auto& s : res.telemetry) {
        CHECK(s.power_w >= nano.idle_power_w - 1e-9);
        CHECK(s.power_w <= nano.power_cap_w + 1e-9);
    }
    // both 4-SM partitions driven flat out reach the 20 W ceiling
    double peak = 0.0;
    for (const auto& s : res.telemetry) peak = std::max(peak, s.power_w);
    CHECK(peak == Catch::Approx(20.0).margin(0.05));
}

TEST_CASE("an idle device reports idle power", "[sim]") {
    const auto dev = toy_device();
    ProfileSet profiles{{"toy-model", toy_profile(0.08, 0.0, 8)}};
    SimConfig cfg;
    cfg.plan = make_standalone_plan(dev.gpu);
    cfg.duration = SimDuration::horizon(0.5);
    const auto res = run_simulation(dev, profiles, cfg);
    REQUIRE_FALSE(res.telemetry.empty());
    for (const auto& s : res.telemetry) CHECK(s.power_w == Catch::Approx(dev.gpu.idle_power_w));
}

TEST_CASE("half-loaded wide edge device stays well under its cap", "[sim]") {
    const auto& agx = reg().get("orin-agx");
    SimConfig cfg;
    cfg.plan = make_gc_uniform_plan(agx, 4, 2);
    cfg.processes = {{"p1", "convnext-large", 18, "gc0", Role::Fixed},
                     {"p2", "convnext-large", 18, "gc1", Role::Fixed}};
    cfg.duration = SimDuration::count(200);
    cfg.pinned_freq_hz = 1.02e9;
    const auto res = run_simulation(agx, nano_profiles(), cfg);
    double peak = 0.0;
    for (const auto& s : res.telemetry) peak = std::max(peak, s.power_w);
    // 8 of 16 SMs busy at 1.02 GHz: idle 10 + 2.5*8*(1.02/1.3)^2 = 22.3 W
    CHECK(peak == Catch::Approx(22.31).margin(0.3));
    CHECK(peak < 50.0);
    CHECK(res.throttle_count() == 0);
}

TEST_CASE("saturated edge device throttles to the half clock and back", "[sim]") {
    const auto res =
        run_simulation(reg().get("orin-nano"), nano_profiles(), nano_gc_duo(18, 18, 400, 8));
    CHECK(res.throttle_count() >= 1);
    const double f_max = reg().get("orin-nano").gpu.f_max_hz;
    bool saw_full = false, saw_half = false;
    int half_run = 0, best_half_run = 0;
    for (const auto& s : res.telemetry) {
        if (s.freq_hz == Catch::Approx(f_max)) saw_full = true;
        if (s.freq_hz == Catch::Approx(0.5 * f_max)) {
            saw_half = true;
            best_half_run = std::max(best_half_run, ++half_run);
        } else {
            half_run = 0;
        }
        CHECK(s.freq_hz >= reg().get("orin-nano").gpu.f_min_hz);
    }
    CHECK(saw_full);
    CHECK(saw_half);
    CHECK(best_half_run >= 3); // a real plateau, not a single sample
}

TEST_CASE("every throttle event is preceded by a full window at the cap", "[sim]") {
    const auto& nano = reg().get("orin-nano");
    const auto res = run_simulation(nano, nano_profiles(), nano_gc_duo(18, 18, 500, 15));
    REQUIRE(res.throttle_count() >= 1);
    const double cap = nano.gpu.power_cap_w;
    const int window = static_cast<int>(std::round(nano.dvfs.sustain_window_s / 0.010));
    for (const auto& ev : res.freq_events) {
        if (!ev.throttled) continue;
        // locate the telemetry sample at the event time
        int idx = -1;
        for (std::size_t i = 0; i < res.telemetry.size(); ++i)
            if (res.telemetry[i].t_s == ev.t_s) idx = static_cast<int>(i);
        REQUIRE(idx >= window - 1);
        for (int i = idx - window + 1; i <= idx; ++i)
            CHECK(res.telemetry[i].power_w >= cap - 1e-6);
    }
}

TEST_CASE("an infinite cap pins the clock at maximum", "[sim]") {
    SimConfig cfg = nano_gc_duo(18, 18, 300, 2);
    DvfsParams uncapped;
    uncapped.cap_w = std::numeric_limits<double>::infinity();
    cfg.dvfs_override = uncapped;
    const auto res = run_simulation(reg().get("orin-nano"), nano_profiles(), cfg);
    CHECK(res.throttle_count() == 0);
    for (const auto& s : res.telemetry)
        CHECK(s.freq_hz == Catch::Approx(reg().get("orin-nano").gpu.f_max_hz));
}

TEST_CASE("a pinned clock never moves", "[sim]") {
    const auto& agx = reg().get("orin-agx");
    SimConfig cfg;
    cfg.plan = make_gc_uniform_plan(agx, 4, 4);
    cfg.processes = {{"p1", "resnet18", 70, "gc0", Role::Fixed},
                     {"p2", "resnet18", 70, "gc1", Role::Fixed},
                     {"p3", "resnet18", 70, "gc2", Role::Fixed},
                     {"p4", "resnet18", 70, "gc3", Role::Adjusted}};
    cfg.duration = SimDuration::count(300);
    cfg.pinned_freq_hz = 1.02e9;
    const auto res = run_simulation(agx, nano_profiles(), cfg);
    CHECK(res.throttle_count() == 0);
    for (const auto& s : res.telemetry) CHECK(s.freq_hz == Catch::Approx(1.02e9));
}

TEST_CASE("temperature proxy follows the discrete first-order response", "[sim]") {
    DeviceEntry dev = toy_device();
    dev.gpu.idle_power_w = 40.0;
    dev.gpu.power_cap_w = 200.0;
    dev.thermal = {25.0, 0.5, 5.0};
    ProfileSet profiles;
    SimConfig cfg;
    cfg.plan = make_standalone_plan(dev.gpu);
    cfg.duration = SimDuration::horizon(40.0);
    const auto res = run_simulation(dev, profiles, cfg);
    REQUIRE_FALSE(res.telemetry.empty());

    // independent recurrence with constant power
    const double target = 25.0 + 0.5 * 40.0;
    double t_ref = 25.0;
    double prev = 25.0;
    for (const auto& s : res.telemetry) {
        t_ref += (0.010 / 5.0) * (25.0 + 0.5 * s.power_w - t_ref);
        CHECK(s.temp_c == Catch::Approx(t_ref).epsilon(1e-12));
        CHECK(s.temp_c >= prev - 1e-12); // monotone rise
        CHECK(s.temp_c <= target + 1e-9); // no overshoot
        prev = s.temp_c;
    }
    CHECK(res.telemetry.back().temp_c == Catch::Approx(target).margin(0.05));
}

TEST_CASE("ambient equilibrium holds at zero power", "[sim]") {
    DeviceEntry dev = toy_device();
    dev.gpu.idle_power_w = 0.0;
    ProfileSet profiles;
    SimConfig cfg;
    cfg.plan = make_standalone_plan(dev.gpu);
    cfg.duration = SimDuration::horizon(5.0);
    const auto res = run_simulation(dev, profiles, cfg);
    for (const auto& s : res.telemetry) CHECK(s.temp_c == Catch::Approx(dev.thermal.t_amb_c));
}

TEST_CASE("configuration errors are rejected up front", "[sim]") {
    const auto& nano = reg().get("orin-nano");

    SimConfig cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.processes[0].model = "no-such-model";
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.processes[0].partition_id = "";
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.processes[0].partition_id = "nowhere";
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.processes[0].target_ims = 0;
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.plan = PartitionPlan{Regime::Gc, {{"gc0", 0, 6, 1.0}, {"gc1", 0, 6, 1.0}}};
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.duration = SimDuration{100, 5.0}; // both set
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);

    SimConfig mps;
    mps.plan = make_mps_plan(nano.gpu);
    mps.processes = {{"p", "resnet18", 10, "gc0", Role::Fixed}}; // partition under MPS
    mps.duration = SimDuration::count(10);
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), mps), ConfigError);

    cfg = nano_gc_duo(18, 18, 10, 1);
    cfg.processes[1].id = cfg.processes[0].id; // ambiguous ordering and stats
    CHECK_THROWS_AS(run_simulation(nano, nano_profiles(), cfg), ConfigError);
}
