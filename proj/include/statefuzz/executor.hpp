#ifndef STATEFUZZ_EXECUTOR_HPP
#define STATEFUZZ_EXECUTOR_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/random.hpp"
#include "statefuzz/sutmodel.hpp"
#include "statefuzz/vocabulary.hpp"

/**
 * @file executor.hpp
 * @brief Discrete-event test execution: arm the SuT, watch for the target
 * context, inject the action after the sampled delay, log everything.
 *
 * Time is simulated. The engine ticks in 10 ms steps but shortens a step
 * so that it lands exactly on the next injection or internal timer, so
 * `actual_time - context_reached_time == delay_ms` holds exactly.
 */

namespace statefuzz {

inline constexpr std::int64_t tick_ms = 10;
inline constexpr std::int64_t sim_ceiling_ms = 600'000;
/// Window used to count LAND / non-LAND alternations.
inline constexpr std::int64_t oscillation_window_ms = 5000;

struct TestCase
{
    std::string id;
    std::string spec_id;
    std::string mission_id;
    AppState target_app_state = AppState::TAKEOFF;
    AutopilotMode target_px4_mode = AutopilotMode::OFFBOARD;
    RcAction injected_action = RcAction::NONE;
    std::string delay_band;
    std::int64_t delay_ms = 0;
    EnvironmentState environment;
    std::uint64_t rng_seed = 0;

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

struct TraceEntry
{
    std::int64_t time_ms = 0;
    AppState app = AppState::PRE_ARM;
    AutopilotMode mode = AutopilotMode::STABILIZED;
    /// Waypoint leg, meaningful while FLYING_TO_WAYPOINT.
    std::size_t leg = 0;

    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct InjectionRecord
{
    std::int64_t scheduled_time_ms = 0;
    std::int64_t actual_time_ms = 0;
    RcAction action = RcAction::NONE;
    bool delivered = false;
    bool acknowledged = false;
    AutopilotMode mode_at_injection = AutopilotMode::STABILIZED;
    AppState app_state_at_injection = AppState::PRE_ARM;
    std::optional<std::int64_t> ack_time_ms;
    AutopilotMode resulting_mode = AutopilotMode::STABILIZED;
    /// SuT telemetry verdict on the request (accepted, ignored, deferred).
    std::string outcome;

    friend bool operator==(const InjectionRecord&, const InjectionRecord&) = default;
};

struct ExecutionProfile
{
    std::string test_case_id;
    std::vector<TraceEntry> trace;
    std::vector<InjectionRecord> injections;
    std::vector<FailsafeEvent> failsafe_events;
    bool context_reached = false;
    std::optional<std::int64_t> context_reached_time_ms;
    bool mission_completed = false;
    std::vector<AppState> realized_sequence;
    std::vector<AppState> expected_sequence;
    double path_deviation_max = 0.0;
    bool jerk_flag = false;
    int oscillation_count = 0;
    bool landed_without_disarm = false;
    bool geofence_exit_observed = false;
    bool timed_out = false;
    AppState final_app_state = AppState::PRE_ARM;
    AutopilotMode final_mode = AutopilotMode::STABILIZED;
    std::int64_t end_time_ms = 0;
    std::vector<std::string> exceptions;

    friend bool operator==(const ExecutionProfile&, const ExecutionProfile&) = default;
};

// ---------------------------------------------------------------------------
// JSON

inline json env_to_json(const EnvironmentState& e)
{
    return json{{"throttle", to_string(e.throttle)},
                {"geofence", to_string(e.geofence)},
                {"wind", to_string(e.wind)},
                {"gps_noise", to_string(e.gps_noise)},
                {"compass_interference", to_string(e.compass_interference)}};
}

inline EnvironmentState env_from_json(const json& j)
{
    EnvironmentState e;
    e.throttle = parse_throttle(j.at("throttle").get<std::string>());
    e.geofence = parse_geofence(j.at("geofence").get<std::string>());
    e.wind = parse_level(j.at("wind").get<std::string>());
    e.gps_noise = parse_level(j.at("gps_noise").get<std::string>());
    e.compass_interference = parse_level(j.at("compass_interference").get<std::string>());
    return e;
}

inline json to_json(const TestCase& t)
{
    return json{{"id", t.id},
                {"spec_id", t.spec_id},
                {"mission_id", t.mission_id},
                {"target_app_state", to_string(t.target_app_state)},
                {"target_px4_mode", to_string(t.target_px4_mode)},
                {"injected_action", to_string(t.injected_action)},
                {"delay_band", t.delay_band},
                {"delay_ms", t.delay_ms},
                {"environment", env_to_json(t.environment)},
                {"rng_seed", t.rng_seed}};
}

inline TestCase test_case_from_json(const json& j)
{
    TestCase t;
    try {
        t.id = j.at("id").get<std::string>();
        t.spec_id = j.at("spec_id").get<std::string>();
        t.mission_id = j.at("mission_id").get<std::string>();
        t.target_app_state = parse_app_state(j.at("target_app_state").get<std::string>());
        t.target_px4_mode = parse_mode(j.at("target_px4_mode").get<std::string>());
        t.injected_action = parse_action(j.at("injected_action").get<std::string>());
        t.delay_band = j.at("delay_band").get<std::string>();
        t.delay_ms = j.at("delay_ms").get<std::int64_t>();
        t.environment = env_from_json(j.at("environment"));
        t.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("test case: ") + e.what());
    }
    return t;
}

inline json to_json(const FailsafeEvent& f)
{
    return json{{"kind", to_string(f.kind)}, {"action", to_string(f.action)}, {"time_ms", f.time_ms}};
}

inline FailsafeEvent failsafe_from_json(const json& j)
{
    static const std::map<std::string, FailsafeKind> kinds{
        {"GEOFENCE", FailsafeKind::GEOFENCE},
        {"APP_LOSS_OF_SIGNAL", FailsafeKind::APP_LOSS_OF_SIGNAL},
        {"AUTOPILOT_LOSS_OF_SIGNAL", FailsafeKind::AUTOPILOT_LOSS_OF_SIGNAL},
        {"DEGRADED_NAVIGATION", FailsafeKind::DEGRADED_NAVIGATION}};
    static const std::map<std::string, FailsafeAction> actions{{"WARN", FailsafeAction::WARN},
                                                               {"RTL", FailsafeAction::RTL},
                                                               {"LAND", FailsafeAction::LAND},
                                                               {"APP_RETURN", FailsafeAction::APP_RETURN}};
    const auto k = kinds.find(j.at("kind").get<std::string>());
    const auto a = actions.find(j.at("action").get<std::string>());
    if (k == kinds.end() || a == actions.end())
        throw VocabularyError("unknown failsafe " + j.dump());
    return {k->second, a->second, j.at("time_ms").get<std::int64_t>()};
}

inline json to_json(const InjectionRecord& r)
{
    json j{{"scheduled_time_ms", r.scheduled_time_ms},
           {"actual_time_ms", r.actual_time_ms},
           {"action", to_string(r.action)},
           {"delivered", r.delivered},
           {"acknowledged", r.acknowledged},
           {"mode_at_injection", to_string(r.mode_at_injection)},
           {"app_state_at_injection", to_string(r.app_state_at_injection)},
           {"ack_time_ms", nullptr},
           {"resulting_mode", to_string(r.resulting_mode)},
           {"outcome", r.outcome}};
    if (r.ack_time_ms)
        j["ack_time_ms"] = *r.ack_time_ms;
    return j;
}

inline InjectionRecord injection_from_json(const json& j)
{
    InjectionRecord r;
    r.scheduled_time_ms = j.at("scheduled_time_ms").get<std::int64_t>();
    r.actual_time_ms = j.at("actual_time_ms").get<std::int64_t>();
    r.action = parse_action(j.at("action").get<std::string>());
    r.delivered = j.at("delivered").get<bool>();
    r.acknowledged = j.at("acknowledged").get<bool>();
    r.mode_at_injection = parse_mode(j.at("mode_at_injection").get<std::string>());
    r.app_state_at_injection = parse_app_state(j.at("app_state_at_injection").get<std::string>());
    if (j.contains("ack_time_ms") && !j.at("ack_time_ms").is_null())
        r.ack_time_ms = j.at("ack_time_ms").get<std::int64_t>();
    r.resulting_mode = parse_mode(j.at("resulting_mode").get<std::string>());
    r.outcome = j.at("outcome").get<std::string>();
    return r;
}

inline json to_json(const ExecutionProfile& p)
{
    json trace = json::array();
    for (const auto& e : p.trace)
        trace.push_back(json::array({e.time_ms, to_string(e.app), to_string(e.mode), e.leg}));
    json injections = json::array();
    for (const auto& r : p.injections) injections.push_back(to_json(r));
    json failsafes = json::array();
    for (const auto& f : p.failsafe_events) failsafes.push_back(to_json(f));
    auto states = [](const std::vector<AppState>& v) {
        json a = json::array();
        for (auto s : v) a.push_back(to_string(s));
        return a;
    };
    json j{{"test_case_id", p.test_case_id},
           {"context_reached", p.context_reached},
           {"context_reached_time_ms", nullptr},
           {"mission_completed", p.mission_completed},
           {"path_deviation_max", p.path_deviation_max},
           {"jerk_flag", p.jerk_flag},
           {"oscillation_count", p.oscillation_count},
           {"landed_without_disarm", p.landed_without_disarm},
           {"geofence_exit_observed", p.geofence_exit_observed},
           {"timed_out", p.timed_out},
           {"final_app_state", to_string(p.final_app_state)},
           {"final_mode", to_string(p.final_mode)},
           {"end_time_ms", p.end_time_ms},
           {"realized_sequence", states(p.realized_sequence)},
           {"expected_sequence", states(p.expected_sequence)},
           {"injections", injections},
           {"failsafe_events", failsafes},
           {"exceptions", p.exceptions},
           {"trace", trace}};
    if (p.context_reached_time_ms)
        j["context_reached_time_ms"] = *p.context_reached_time_ms;
    return j;
}

inline ExecutionProfile profile_from_json(const json& j)
{
    ExecutionProfile p;
    try {
        p.test_case_id = j.at("test_case_id").get<std::string>();
        p.context_reached = j.at("context_reached").get<bool>();
        if (!j.at("context_reached_time_ms").is_null())
            p.context_reached_time_ms = j.at("context_reached_time_ms").get<std::int64_t>();
        p.mission_completed = j.at("mission_completed").get<bool>();
        p.path_deviation_max = j.at("path_deviation_max").get<double>();
        p.jerk_flag = j.at("jerk_flag").get<bool>();
        p.oscillation_count = j.at("oscillation_count").get<int>();
        p.landed_without_disarm = j.at("landed_without_disarm").get<bool>();
        p.geofence_exit_observed = j.at("geofence_exit_observed").get<bool>();
        p.timed_out = j.at("timed_out").get<bool>();
        p.final_app_state = parse_app_state(j.at("final_app_state").get<std::string>());
        p.final_mode = parse_mode(j.at("final_mode").get<std::string>());
        p.end_time_ms = j.at("end_time_ms").get<std::int64_t>();
        for (const auto& s : j.at("realized_sequence")) p.realized_sequence.push_back(parse_app_state(s.get<std::string>()));
        for (const auto& s : j.at("expected_sequence")) p.expected_sequence.push_back(parse_app_state(s.get<std::string>()));
        for (const auto& r : j.at("injections")) p.injections.push_back(injection_from_json(r));
        for (const auto& f : j.at("failsafe_events")) p.failsafe_events.push_back(failsafe_from_json(f));
        p.exceptions = j.at("exceptions").get<std::vector<std::string>>();
        for (const auto& e : j.at("trace"))
            p.trace.push_back({e.at(0).get<std::int64_t>(), parse_app_state(e.at(1).get<std::string>()),
                               parse_mode(e.at(2).get<std::string>()), e.at(3).get<std::size_t>()});
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("execution profile: ") + e.what());
    }
    return p;
}

// ---------------------------------------------------------------------------
// Derived observables

/// Largest number of LAND / non-LAND alternations inside any window of
/// `oscillation_window_ms`.
inline int count_oscillations(const std::vector<TraceEntry>& trace)
{
    std::vector<std::int64_t> flips;
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (is_land_mode(trace[i].mode) != is_land_mode(trace[i - 1].mode))
            flips.push_back(trace[i].time_ms);
    int best = 0;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < flips.size(); ++hi) {
        while (flips[hi] - flips[lo] > oscillation_window_ms) ++lo;
        best = std::max(best, static_cast<int>(hi - lo + 1));
    }
    return best;
}

/// App-state walk of a trace: one entry per state visit (one per leg while
/// flying), PRE_ARM and DONE dropped.
inline std::vector<AppState> realized_sequence(const std::vector<TraceEntry>& trace)
{
    std::vector<AppState> out;
    const TraceEntry* prev = nullptr;
    for (const auto& e : trace) {
        const bool same = prev && prev->app == e.app
                       && (e.app != AppState::FLYING_TO_WAYPOINT || prev->leg == e.leg);
        prev = &e;
        if (same || e.app == AppState::PRE_ARM || e.app == AppState::DONE)
            continue;
        out.push_back(e.app);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Engine

using MissionSet = std::map<std::string, std::shared_ptr<const MissionPlan>>;

class Engine
{
public:
    /// Runs one test from arming to DONE, end of observation, or the ceiling.
    ExecutionProfile execute(const TestCase& test, std::shared_ptr<const MissionPlan> mission, const SutConfig& config)
    {
        reset();
        ExecutionProfile p;
        p.test_case_id = test.id;
        p.expected_sequence = mission->expected_state_sequence;
        try {
            run(test, std::move(mission), config, p);
        } catch (const Error& e) {
            p.exceptions.push_back(e.what());
        }
        p.oscillation_count = count_oscillations(p.trace);
        p.realized_sequence = realized_sequence(p.trace);
        p.mission_completed = p.final_app_state == AppState::DONE && p.realized_sequence == p.expected_sequence;
        ++executed_;
        return p;
    }

    ExecutionProfile execute(const TestCase& test, const MissionPlan& mission, const SutConfig& config)
    {
        return execute(test, std::make_shared<const MissionPlan>(mission), config);
    }

    /// Drops all per-run scratch state. Safe on a fresh engine.
    void reset()
    {
        snapshot_.reset();
    }

    std::size_t executed() const { return executed_; }

private:
    void record(ExecutionProfile& p, const SutSnapshot& s)
    {
        TraceEntry e{s.time_ms, s.app, s.mode, s.app == AppState::FLYING_TO_WAYPOINT ? s.leg : 0};
        if (!p.trace.empty()) {
            auto& last = p.trace.back();
            if (last.app == e.app && last.mode == e.mode && last.leg == e.leg)
                return;
            if (last.time_ms == e.time_ms) {
                last = e;
                if (p.trace.size() >= 2) {
                    const auto& before = p.trace[p.trace.size() - 2];
                    if (before.app == e.app && before.mode == e.mode && before.leg == e.leg)
                        p.trace.pop_back();
                }
                return;
            }
        }
        p.trace.push_back(e);
    }

    void absorb(ExecutionProfile& p, StepResult&& r, const TestCase& test)
    {
        for (const auto& f : r.failsafes) p.failsafe_events.push_back(f);
        for (const auto& rec : r.records) {
            if (rec.kind == TelemetryKind::DEFERRED_APPLIED && !p.injections.empty()) {
                auto& inj = p.injections.back();
                if (!inj.acknowledged) {
                    inj.acknowledged = true;
                    inj.ack_time_ms = rec.time_ms;
                }
            }
        }
        snapshot_ = std::move(r.next);
        const auto& s = *snapshot_;
        if (s.airborne() && s.mission && s.mission->geofence_polygon && test.environment.geofence != GeofenceSetting::NONE
            && !geometry::point_in_polygon(s.actual_position().xy(), *s.mission->geofence_polygon))
            p.geofence_exit_observed = true;
        record(p, s);
        if (!p.context_reached && s.app == test.target_app_state && s.commanded == test.target_px4_mode) {
            p.context_reached = true;
            p.context_reached_time_ms = s.time_ms;
        }
    }

    void run(const TestCase& test, std::shared_ptr<const MissionPlan> mission, const SutConfig& config,
             ExecutionProfile& p)
    {
        Rng rng(test.rng_seed);
        snapshot_ = initial_snapshot(std::move(mission), test.environment);
        record(p, *snapshot_);
        absorb(p, step(*snapshot_, TimerExpiry{}, config, rng), test);

        std::optional<std::int64_t> inject_at;
        bool injected = false;
        bool signal_dropped = false;

        for (;;) {
            const SutSnapshot& s = *snapshot_;
            const std::int64_t now = s.time_ms;

            if (!inject_at && p.context_reached && test.injected_action != RcAction::NONE)
                inject_at = *p.context_reached_time_ms + test.delay_ms;

            if (inject_at && !injected && now >= *inject_at && s.app != AppState::DONE) {
                injected = true;
                InjectionRecord inj;
                inj.scheduled_time_ms = *inject_at;
                inj.actual_time_ms = now;
                inj.action = test.injected_action;
                inj.delivered = true;
                inj.mode_at_injection = s.mode;
                inj.app_state_at_injection = s.app;
                auto r = step(s, RcInjection{test.injected_action}, config, rng);
                for (const auto& rec : r.records) {
                    if (rec.kind == TelemetryKind::INJECTION_ACCEPTED) {
                        inj.acknowledged = true;
                        inj.ack_time_ms = rec.time_ms;
                        inj.outcome = "accepted";
                    } else if (rec.kind == TelemetryKind::INJECTION_IGNORED) {
                        inj.outcome = "ignored";
                    } else if (rec.kind == TelemetryKind::INJECTION_DEFERRED) {
                        inj.outcome = "deferred";
                    }
                }
                inj.resulting_mode = r.next.mode;
                p.injections.push_back(inj);
                absorb(p, std::move(r), test);
                continue;
            }

            if (s.app == AppState::DONE || s.observation_complete)
                break;

            if (now >= sim_ceiling_ms) {
                p.timed_out = true;
                p.exceptions.push_back(SimTimeout("no terminal state after " + std::to_string(sim_ceiling_ms)
                                                  + " ms of simulated time")
                                           .what());
                break;
            }

            if (config.signal_loss_at_ms && !signal_dropped && now >= *config.signal_loss_at_ms) {
                signal_dropped = true;
                EnvironmentState env = s.env;
                env.signal_lost = true;
                env.signal_lost_ms = 0;
                absorb(p, step(s, EnvironmentChange{env}, config, rng), test);
                continue;
            }

            std::int64_t dt = std::min(tick_ms, sim_ceiling_ms - now);
            auto clip = [&](std::optional<std::int64_t> t) {
                if (t && *t > now)
                    dt = std::min(dt, *t - now);
            };
            if (!injected)
                clip(inject_at);
            clip(s.next_deadline());
            if (!signal_dropped)
                clip(config.signal_loss_at_ms);
            absorb(p, step(s, Tick{dt}, config, rng), test);
        }

        // Scheduled but never delivered: the mission ended first.
        if (inject_at && !injected) {
            InjectionRecord inj;
            inj.scheduled_time_ms = *inject_at;
            inj.actual_time_ms = snapshot_->time_ms;
            inj.action = test.injected_action;
            inj.mode_at_injection = snapshot_->mode;
            inj.app_state_at_injection = snapshot_->app;
            inj.resulting_mode = snapshot_->mode;
            inj.outcome = "not delivered";
            p.injections.push_back(inj);
        }

        const auto& s = *snapshot_;
        p.path_deviation_max = s.path_deviation_max;
        p.jerk_flag = s.jerk_flag;
        p.landed_without_disarm = s.landed_armed;
        p.final_app_state = s.app;
        p.final_mode = s.mode;
        p.end_time_ms = s.time_ms;
    }

    std::optional<SutSnapshot> snapshot_;
    std::size_t executed_ = 0;
};

inline ExecutionProfile execute(const TestCase& test, const MissionPlan& mission, const SutConfig& config)
{
    Engine engine;
    return engine.execute(test, mission, config);
}

/// Runs every test; profiles come back in test order for any parallelism.
/// A test whose mission is unknown yields a profile carrying the error.
inline std::vector<ExecutionProfile> run_campaign(const std::vector<TestCase>& tests, const MissionSet& missions,
                                                  const SutConfig& config, unsigned parallelism = 1)
{
    if (parallelism == 0)
        throw ConfigError("parallelism must be at least 1");
    std::vector<ExecutionProfile> out(tests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        Engine engine;
        for (std::size_t i = next++; i < tests.size(); i = next++) {
            const auto it = missions.find(tests[i].mission_id);
            if (it == missions.end()) {
                out[i].test_case_id = tests[i].id;
                out[i].exceptions.push_back(
                    VocabularyError("unknown mission '" + tests[i].mission_id + "'").what());
                continue;
            }
            out[i] = engine.execute(tests[i], it->second, config);
        }
    };
    const unsigned n = std::min<std::size_t>(parallelism, std::max<std::size_t>(1, tests.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

} // namespace statefuzz

#endif // STATEFUZZ_EXECUTOR_HPP
