#ifndef STATEFUZZ_TESTGEN_HPP
#define STATEFUZZ_TESTGEN_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/random.hpp"

/**
 * @file testgen.hpp
 * @brief Expands a fuzz specification into concrete test cases.
 *
 * Enumeration is exhaustive over the constrained product; randomness only
 * enters through the per-test seed and the delay sampled inside its band.
 */

namespace statefuzz {

enum class MissionPolicy
{
    CROSS_PRODUCT,
    FIRST_ONLY,
};

struct GeneratorConfig
{
    int repetitions_per_combination = 1;
    std::uint64_t master_seed = 0;
    MissionPolicy mission_policy = MissionPolicy::CROSS_PRODUCT;
};

struct Combination
{
    AutopilotMode mode;
    AppState state;
    RcAction action;
    std::string band;
    EnvironmentState environment;

    friend bool operator==(const Combination&, const Combination&) = default;
};

/// Order: constraint modes and their states in document order, then
/// actions, bands, throttle, geofence, wind, gps, compass.
inline std::vector<Combination> enumerate_combinations(const FuzzSpecification& spec)
{
    std::vector<Combination> out;
    const auto& env = spec.environment;
    for (auto [mode, state] : spec.allowed_pairs()) {
        if (std::find(spec.modes.begin(), spec.modes.end(), mode) == spec.modes.end()
            || std::find(spec.states.begin(), spec.states.end(), state) == spec.states.end())
            continue;
        for (auto action : spec.actions)
            for (const auto& band : env.bands)
                for (auto th : env.throttle)
                    for (auto gf : env.geofence)
                        for (auto wind : env.wind)
                            for (auto gps : env.gps_noise)
                                for (auto compass : env.compass_interference) {
                                    EnvironmentState e;
                                    e.throttle = th;
                                    e.geofence = gf;
                                    e.wind = wind;
                                    e.gps_noise = gps;
                                    e.compass_interference = compass;
                                    out.push_back({mode, state, action, band.name, e});
                                }
    }
    if (out.empty())
        throw EmptyProduct("constraints of spec '" + spec.id + "' admit no combination");
    return out;
}

inline std::string test_id(std::size_t index)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%05zu", index);
    return buf;
}

/// Uniform integer delay on [band.min, band.max) drawn from a stream
/// derived from the test seed (independent of the SuT stream).
inline std::int64_t sample_delay(const DelayBand& band, std::uint64_t test_seed)
{
    Rng rng(derive_seed(test_seed, hash_name("delay")));
    return rng.uniform_int(band.min_ms, band.max_ms);
}

inline std::vector<TestCase> generate(const FuzzSpecification& spec, const GeneratorConfig& config)
{
    if (config.repetitions_per_combination < 1)
        throw ConfigError("repetitions_per_combination must be at least 1");
    const auto combos = enumerate_combinations(spec);
    std::vector<std::string> missions = spec.mission_context;
    if (missions.empty())
        missions.push_back("default");
    if (config.mission_policy == MissionPolicy::FIRST_ONLY)
        missions.resize(1);

    std::vector<TestCase> out;
    out.reserve(combos.size() * missions.size() * static_cast<std::size_t>(config.repetitions_per_combination));
    for (const auto& c : combos)
        for (const auto& m : missions)
            for (int r = 0; r < config.repetitions_per_combination; ++r) {
                const std::size_t index = out.size();
                TestCase t;
                t.id = test_id(index);
                t.spec_id = spec.id;
                t.mission_id = m;
                t.target_app_state = c.state;
                t.target_px4_mode = c.mode;
                t.injected_action = c.action;
                t.delay_band = c.band;
                t.environment = c.environment;
                t.rng_seed = derive_seed(config.master_seed, index);
                t.delay_ms = sample_delay(spec.environment.band(c.band), t.rng_seed);
                out.push_back(std::move(t));
            }
    return out;
}

inline const std::vector<std::string>& focus_axes()
{
    static const std::vector<std::string> axes{"delay_band", "action", "context", "throttle", "geofence",
                                               "wind",       "gps",    "compass", "mission"};
    return axes;
}

/// Varies `axes` over their full spec ranges (first axis outermost) and
/// holds everything else at `base`. Cells get `runs_per_cell` fresh seeds.
inline std::vector<TestCase> focused_generate(const FuzzSpecification& spec, const TestCase& base,
                                              const std::vector<std::string>& axes, int runs_per_cell,
                                              std::uint64_t seed)
{
    if (runs_per_cell < 1)
        throw ConfigError("runs_per_cell must be at least 1");
    for (const auto& a : axes)
        if (std::find(focus_axes().begin(), focus_axes().end(), a) == focus_axes().end())
            throw UnknownAxis("unknown focus axis '" + a + "'");

    // Each axis is a list of mutators over a test case.
    using Mutator = std::function<void(TestCase&)>;
    std::vector<std::vector<Mutator>> dims;
    const auto& env = spec.environment;
    for (const auto& a : axes) {
        std::vector<Mutator> values;
        if (a == "delay_band") {
            for (const auto& b : env.bands) values.push_back([name = b.name](TestCase& t) { t.delay_band = name; });
        } else if (a == "action") {
            for (auto act : spec.actions) values.push_back([act](TestCase& t) { t.injected_action = act; });
        } else if (a == "context") {
            for (auto [mode, state] : spec.allowed_pairs())
                values.push_back([mode, state](TestCase& t) {
                    t.target_px4_mode = mode;
                    t.target_app_state = state;
                });
        } else if (a == "throttle") {
            for (auto v : env.throttle) values.push_back([v](TestCase& t) { t.environment.throttle = v; });
        } else if (a == "geofence") {
            for (auto v : env.geofence) values.push_back([v](TestCase& t) { t.environment.geofence = v; });
        } else if (a == "wind") {
            for (auto v : env.wind) values.push_back([v](TestCase& t) { t.environment.wind = v; });
        } else if (a == "gps") {
            for (auto v : env.gps_noise) values.push_back([v](TestCase& t) { t.environment.gps_noise = v; });
        } else if (a == "compass") {
            for (auto v : env.compass_interference)
                values.push_back([v](TestCase& t) { t.environment.compass_interference = v; });
        } else if (a == "mission") {
            for (const auto& m : spec.mission_context) values.push_back([m](TestCase& t) { t.mission_id = m; });
        }
        dims.push_back(std::move(values));
    }

    const bool resample = std::find(axes.begin(), axes.end(), "delay_band") != axes.end();
    const std::uint64_t salt = derive_seed(seed, hash_name(base.id));
    std::vector<TestCase> out;
    for (std::size_t d = 0; d < dims.size(); ++d)
        if (dims[d].empty())
            throw EmptyProduct("focus axis '" + axes[d] + "' has no values in spec '" + spec.id + "'");
    std::vector<std::size_t> idx(dims.size(), 0);
    bool done = false;
    while (!done) {
        TestCase cell = base;
        for (std::size_t d = 0; d < dims.size(); ++d) dims[d][idx[d]](cell);
        for (int r = 0; r < runs_per_cell; ++r) {
            const std::size_t n = out.size();
            TestCase t = cell;
            t.id = base.id + "-f" + std::to_string(n);
            t.rng_seed = derive_seed(salt, n);
            if (resample)
                t.delay_ms = sample_delay(env.band(t.delay_band), t.rng_seed);
            out.push_back(std::move(t));
        }
        // Odometer, last axis fastest.
        done = true;
        for (std::size_t d = dims.size(); d-- > 0;) {
            if (++idx[d] < dims[d].size()) {
                done = false;
                break;
            }
            idx[d] = 0;
        }
    }
    return out;
}

inline json to_json(const std::vector<TestCase>& tests)
{
    json a = json::array();
    for (const auto& t : tests) a.push_back(to_json(t));
    return a;
}

} // namespace statefuzz

#endif // STATEFUZZ_TESTGEN_HPP
