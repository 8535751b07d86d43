#include <catch2/catch_amalgamated.hpp>

#include <isosim/partition.hpp>
#include <isosim/rng.hpp>

using namespace isosim;

namespace {
const DeviceRegistry& reg() {
    static const DeviceRegistry r = DeviceRegistry::builtin();
    return r;
}
} // namespace

TEST_CASE("gc_valid_sizes follows the (min, step) rule", "[partition]") {
    CHECK(gc_valid_sizes(reg().get("orin-nano").gpu) == std::vector<int>{4, 6, 8});
    CHECK(gc_valid_sizes(reg().get("orin-agx").gpu) ==
          std::vector<int>{4, 6, 8, 10, 12, 14, 16});

    GpuSpec hyp{"hyp", ArchClass::A90plus, 0, 0, 0, 16, 1e9, 0.3e9, 50, 10, 1.0, false, true};
    CHECK(gc_valid_sizes(hyp) == std::vector<int>{8, 16});

    GpuSpec no_gc = hyp;
    no_gc.supports_gc = false;
    CHECK_THROWS_AS(gc_valid_sizes(no_gc), UnsupportedRegime);
}

TEST_CASE("gc size list properties hold on every device", "[partition]") {
    for (const auto& name : reg().names()) {
        const auto& gpu = reg().get(name).gpu;
        if (!gpu.supports_gc) continue;
        const auto rule = gc_step_rule(gpu.arch_class);
        for (int s : gc_valid_sizes(gpu)) {
            CHECK(s >= rule.min_sms);
            CHECK((s - rule.min_sms) % rule.step_sms == 0);
            CHECK(s <= gpu.total_sms);
            CHECK(enumerate_gc_layouts(gpu, s) * s <= gpu.total_sms);
        }
    }
}

TEST_CASE("enumerate_gc_layouts counts non-overlapping partitions", "[partition]") {
    CHECK(enumerate_gc_layouts(reg().get("orin-nano").gpu, 4) == 2);
    CHECK(enumerate_gc_layouts(reg().get("orin-nano").gpu, 6) == 1);
    CHECK(enumerate_gc_layouts(reg().get("orin-agx").gpu, 4) == 4);
    CHECK_THROWS_AS(enumerate_gc_layouts(reg().get("orin-nano").gpu, 5), InvalidSize);
}

TEST_CASE("MIG plan validation", "[partition]") {
    const auto& a100 = reg().get("a100");

    auto two3 = make_mig_uniform_plan(a100, 3, 2);
    CHECK(validate_mig_plan(two3, a100).empty());

    auto one7 = make_mig_uniform_plan(a100, 7, 1);
    CHECK(validate_mig_plan(one7, a100).empty());

    PartitionPlan two4{Regime::Mig,
                       {{"m0", 4, 64, 4.0 / 7}, {"m1", 4, 64, 4.0 / 7}}};
    const auto v = validate_mig_plan(two4, a100);
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().find("oversubscribed") != std::string::npos);

    PartitionPlan bad5{Regime::Mig, {{"m0", 5, 80, 5.0 / 7}}};
    REQUIRE_FALSE(validate_mig_plan(bad5, a100).empty());

    // every legal single-instance size is accepted
    for (int g : {1, 2, 3, 4, 7}) {
        auto p = make_mig_uniform_plan(a100, g, 1);
        CHECK(validate_mig_plan(p, a100).empty());
    }

    // heterogeneous mixes of legal sizes are fine as long as they fit
    PartitionPlan mix{Regime::Mig,
                      {{"m0", 3, 48, 3.0 / 7}, {"m1", 2, 32, 2.0 / 7}, {"m2", 1, 16, 1.0 / 7}}};
    CHECK(validate_mig_plan(mix, a100).empty());

    // any mix with too many GPCs is rejected
    RandomStream rng(99);
    const int legal[] = {1, 2, 3, 4, 7};
    for (int trial = 0; trial < 50; ++trial) {
        PartitionPlan plan{Regime::Mig, {}};
        int total = 0;
        while (total <= 7) {
            int g = legal[rng.next_u64() % 5];
            plan.partitions.push_back(
                {"m" + std::to_string(plan.partitions.size()), g, g * 16, g / 7.0});
            total += g;
        }
        CHECK_FALSE(validate_mig_plan(plan, a100).empty());
    }
}

TEST_CASE("partition_sm_count per regime", "[partition]") {
    const auto& a100 = reg().get("a100");
    const auto& nano = reg().get("orin-nano");

    Partition mig3{"m", 3, 48, 3.0 / 7};
    CHECK(partition_sm_count(mig3, a100.gpu, Regime::Mig) == 48);

    Partition gc4{"g", 0, 4, 1.0};
    CHECK(partition_sm_count(gc4, nano.gpu, Regime::Gc) == 4);

    Partition all{"all", 7, 112, 1.0};
    CHECK(partition_sm_count(all, a100.gpu, Regime::StandAlone) == 112);
}

TEST_CASE("plan builders round-trip through their validators", "[partition]") {
    const auto& a100 = reg().get("a100");
    const auto& nano = reg().get("orin-nano");
    const auto& agx = reg().get("orin-agx");

    CHECK(validate_plan(make_standalone_plan(a100.gpu), a100).empty());
    CHECK(validate_plan(make_mps_plan(nano.gpu), nano).empty());
    CHECK(validate_plan(make_mig_uniform_plan(a100, 3, 2), a100).empty());
    CHECK(validate_plan(make_gc_uniform_plan(nano, 4, 2), nano).empty());
    CHECK(validate_plan(make_gc_uniform_plan(agx, 4, 4), agx).empty());

    CHECK_THROWS_AS(make_gc_uniform_plan(nano, 4, 4), ConfigError);
    CHECK_THROWS_AS(make_gc_uniform_plan(nano, 5, 1), InvalidSize);
    CHECK_THROWS_AS(make_mig_uniform_plan(a100, 4, 2), ConfigError);

    // MIG memory shares follow the compute split
    const auto mig = make_mig_uniform_plan(a100, 3, 2);
    CHECK(mig.partitions[0].mem_share == Catch::Approx(3.0 / 7));
}

TEST_CASE("gc plans violating the step rule are rejected", "[partition]") {
    const auto& nano = reg().get("orin-nano");
    PartitionPlan odd{Regime::Gc, {{"g0", 0, 5, 1.0}}};
    CHECK_FALSE(validate_plan(odd, nano).empty());
    PartitionPlan tiny{Regime::Gc, {{"g0", 0, 2, 1.0}}};
    CHECK_FALSE(validate_plan(tiny, nano).empty());
    PartitionPlan over{Regime::Gc, {{"g0", 0, 6, 1.0}, {"g1", 0, 6, 1.0}}};
    CHECK_FALSE(validate_plan(over, nano).empty());
}
