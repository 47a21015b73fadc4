#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "common.hpp"

using namespace statefuzz;

namespace {

// sample.json constraint map counted by hand: 3 OFFBOARD states, 2 LAND states.
std::size_t sample_pairs() { return 3 + 2; }

double ks_uniform(std::vector<double> xs, double lo, double hi)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

} // namespace

TEST(Enumerate, SampleCount)
{
    auto combos = enumerate_combinations(sfx::load_spec("sample"));
    EXPECT_EQ(combos.size(), sample_pairs() * 3 * 3 * 1);
    std::set<std::tuple<int, int, int, std::string>> unique;
    for (const auto& c : combos)
        unique.insert({static_cast<int>(c.mode), static_cast<int>(c.state), static_cast<int>(c.action), c.band});
    EXPECT_EQ(unique.size(), combos.size());
}

TEST(Enumerate, SingleValueSpec)
{
    auto spec = parse_fuzz_spec(R"({
      "FROM_PX4_modes": ["OFFBOARD"], "FROM_APP_states": ["HOVERING"], "RC_INPUT_EVENTS": ["POSCTL"],
      "ENVIRONMENT": {"transition_delay": {"bands": {"only": {"min": 10, "max": 20}}}},
      "MISSION_CONTEXT": ["Flight plan A"],
      "CONSTRAINTS": {"REQUIRES_PX4_MODE": {"OFFBOARD": ["HOVERING"]}}})");
    EXPECT_EQ(enumerate_combinations(spec).size(), 1u);
}

TEST(Enumerate, EmptyProduct)
{
    auto spec = parse_fuzz_spec(R"({
      "FROM_PX4_modes": ["LAND"], "FROM_APP_states": ["LANDING"], "RC_INPUT_EVENTS": ["POSCTL"],
      "ENVIRONMENT": {"transition_delay": {"bands": {"only": {"min": 10, "max": 20}}}},
      "MISSION_CONTEXT": ["Flight plan A"],
      "CONSTRAINTS": {"REQUIRES_PX4_MODE": {}}})");
    EXPECT_THROW(enumerate_combinations(spec), EmptyProduct);
    EXPECT_THROW(generate(spec, {}), EmptyProduct);
}

TEST(Generate, Fspec1Scale)
{
    auto spec = sfx::load_spec("fspec1");
    GeneratorConfig gc;
    gc.repetitions_per_combination = 80;
    auto tests = generate(spec, gc);
    EXPECT_EQ(tests.size(), 3600u);
    for (const auto& t : tests) {
        EXPECT_TRUE(spec.allows(t.target_px4_mode, t.target_app_state));
        const auto& b = spec.environment.band(t.delay_band);
        EXPECT_GE(t.delay_ms, b.min_ms);
        EXPECT_LT(t.delay_ms, b.max_ms);
    }
}

TEST(Generate, DistinctSeedsAndIds)
{
    auto tests = generate(sfx::load_spec("sample"), {});
    ASSERT_EQ(tests.size(), 45u);
    std::set<std::uint64_t> seeds;
    std::set<std::string> ids;
    for (const auto& t : tests) {
        seeds.insert(t.rng_seed);
        ids.insert(t.id);
    }
    EXPECT_EQ(seeds.size(), 45u);
    EXPECT_EQ(ids.size(), 45u);
    EXPECT_THROW(generate(sfx::load_spec("sample"), {0, 0, MissionPolicy::CROSS_PRODUCT}), ConfigError);
}

TEST(Generate, Pure)
{
    auto spec = sfx::load_spec("fspec2");
    GeneratorConfig gc{3, 1234, MissionPolicy::CROSS_PRODUCT};
    EXPECT_EQ(to_json(generate(spec, gc)).dump(), to_json(generate(spec, gc)).dump());
    gc.master_seed = 1235;
    EXPECT_NE(to_json(generate(spec, gc)).dump(), to_json(generate(spec, {3, 1234, MissionPolicy::CROSS_PRODUCT})).dump());
}

TEST(Generate, MissionPolicy)
{
    auto spec = sfx::load_spec("fspec2");
    const auto combos = enumerate_combinations(spec).size();
    EXPECT_EQ(generate(spec, {1, 0, MissionPolicy::CROSS_PRODUCT}).size(), combos * 2);
    auto first = generate(spec, {1, 0, MissionPolicy::FIRST_ONLY});
    EXPECT_EQ(first.size(), combos);
    for (const auto& t : first) EXPECT_EQ(t.mission_id, "Flight plan A");
}

TEST(Generate, DelaysUniformWithinBand)
{
    auto spec = sfx::load_spec("fspec1");
    auto tests = generate(spec, {80, 5, MissionPolicy::CROSS_PRODUCT});
    for (const auto& band : spec.environment.bands) {
        std::vector<double> xs;
        for (const auto& t : tests)
            if (t.delay_band == band.name)
                xs.push_back(static_cast<double>(t.delay_ms));
        ASSERT_GE(xs.size(), 1000u);
        const double crit = 1.63 / std::sqrt(static_cast<double>(xs.size()));
        EXPECT_LT(ks_uniform(xs, band.min_ms, band.max_ms), crit) << band.name;
    }
}

TEST(Focused, BandAxis)
{
    auto spec = sfx::load_spec("fspec1");
    auto base = generate(spec, {}).at(3);
    auto tests = focused_generate(spec, base, {"delay_band"}, 20, 7);
    ASSERT_EQ(tests.size(), 60u);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        EXPECT_EQ(tests[i].delay_band, spec.environment.bands[i / 20].name);
        EXPECT_EQ(tests[i].injected_action, base.injected_action);
        EXPECT_EQ(tests[i].target_app_state, base.target_app_state);
        const auto& b = spec.environment.band(tests[i].delay_band);
        EXPECT_GE(tests[i].delay_ms, b.min_ms);
        EXPECT_LT(tests[i].delay_ms, b.max_ms);
    }
}

TEST(Focused, NoAxesReplays)
{
    auto spec = sfx::load_spec("fspec1");
    auto base = generate(spec, {}).at(0);
    auto tests = focused_generate(spec, base, {}, 20, 7);
    ASSERT_EQ(tests.size(), 20u);
    std::set<std::uint64_t> seeds;
    for (const auto& t : tests) {
        seeds.insert(t.rng_seed);
        EXPECT_EQ(t.delay_ms, base.delay_ms);
        EXPECT_EQ(t.delay_band, base.delay_band);
    }
    EXPECT_EQ(seeds.size(), 20u);
}

TEST(Focused, TwoAxes)
{
    auto spec = sfx::load_spec("sample");
    auto base = generate(spec, {}).at(0);
    EXPECT_EQ(focused_generate(spec, base, {"delay_band", "action"}, 20, 1).size(), 180u);
    EXPECT_THROW(focused_generate(spec, base, {"altitude"}, 20, 1), UnknownAxis);
    EXPECT_THROW(focused_generate(spec, base, {"action"}, 0, 1), ConfigError);
}
