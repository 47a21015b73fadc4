#ifndef STATEFUZZ_SUTMODEL_HPP
#define STATEFUZZ_SUTMODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/geometry.hpp"
#include "statefuzz/random.hpp"
#include "statefuzz/vocabulary.hpp"

/**
 * @file sutmodel.hpp
 * @brief Reference system under test: an application mission state machine
 * composed with an autopilot mode machine, plus failsafes and a registry of
 * seedable faults.
 *
 * The application drives the mission (TAKEOFF, FLYING_TO_WAYPOINT, HOVERING,
 * LANDING, DISARMING) under the autopilot mode it commands. RC injections
 * and failsafes change the autopilot mode; the application follows. Motion
 * is kinematic with constant rates.
 *
 * `step` is pure apart from the caller-supplied Rng, which is only drawn
 * from when the vehicle arms (TAKEOFF latency sample).
 */

namespace statefuzz {

// ---------------------------------------------------------------------------
// Fault registry

enum class FaultId
{
    F1,  ///< LAND request ignored while HOVERING.
    F2,  ///< POSCTL ignored during TAKEOFF while the autopilot is still STABILIZED.
    F3,  ///< OFFBOARD reactivation during LAND reuses a stale setpoint.
    F4,  ///< POSCTL deferred during a geofence RTL until the landing completes.
    F5,  ///< RTL ignored during TAKEOFF.
    F6,  ///< High GPS noise makes the landing thrash between LAND and TAKEOFF.
    F7,  ///< POSCTL ignored after a geofence WARN breach.
    F8,  ///< No disarm after touchdown in STABILIZED.
    F9,  ///< Throttle toggle is realized as POSCTL (always on).
    F10, ///< AUTO_LOITER realized as POSCTL in flight (always on).
    F11, ///< AUTO_LOITER realized as POSCTL while landing (always on).
};

inline constexpr std::array<FaultId, 11> all_faults{FaultId::F1, FaultId::F2, FaultId::F3, FaultId::F4,
                                                    FaultId::F5, FaultId::F6, FaultId::F7, FaultId::F8,
                                                    FaultId::F9, FaultId::F10, FaultId::F11};

inline std::string to_string(FaultId f) { return "F" + std::to_string(static_cast<int>(f) + 1); }

inline FaultId parse_fault(std::string_view name)
{
    for (auto f : all_faults)
        if (to_string(f) == name)
            return f;
    throw UnknownFault("unknown fault id '" + std::string(name) + "'");
}

/// F9 to F11 are correct autopilot semantics, not optional faults.
inline bool is_always_on(FaultId f) { return f == FaultId::F9 || f == FaultId::F10 || f == FaultId::F11; }

// ---------------------------------------------------------------------------
// Configuration

struct LatencyWindow
{
    std::int64_t min_ms = 2200;
    std::int64_t max_ms = 5000;

    friend bool operator==(const LatencyWindow&, const LatencyWindow&) = default;
};

struct SutConfig
{
    /// STABILIZED to OFFBOARD switch latency during TAKEOFF, uniform on [min, max).
    LatencyWindow takeoff_latency;
    double app_loss_of_signal_s = 20.0;
    double autopilot_loss_of_signal_s = 60.0;
    /// Action applied when a test's geofence setting is `active`.
    GeofenceSetting geofence_action = GeofenceSetting::RETURN;
    Level gps_sensitivity = Level::HIGH;
    Level compass_sensitivity = Level::HIGH;
    std::set<FaultId> seeded_faults;

    double jerk_threshold_m = 2.0;
    double climb_rate_mps = 1.0;
    double descent_rate_mps = 0.5;
    std::int64_t hover_duration_ms = 12000;
    std::int64_t disarm_delay_ms = 2000;
    /// How long a human takeover is observed before the run ends.
    std::int64_t observe_window_ms = 5000;
    /// When set, the RC link drops at this sim time and stays down.
    std::optional<std::int64_t> signal_loss_at_ms;

    bool active(FaultId f) const { return is_always_on(f) || seeded_faults.count(f) > 0; }

    void validate() const
    {
        if (takeoff_latency.min_ms < 0 || takeoff_latency.min_ms >= takeoff_latency.max_ms)
            throw ConfigError("takeoff latency window needs 0 <= min < max");
        if (!(app_loss_of_signal_s < autopilot_loss_of_signal_s))
            throw ConfigError("application loss-of-signal threshold must be below the autopilot threshold");
        if (geofence_action == GeofenceSetting::NONE || geofence_action == GeofenceSetting::ACTIVE)
            throw ConfigError("geofence_action must be WARN, RETURN or LAND");
        if (!(climb_rate_mps > 0) || !(descent_rate_mps > 0) || hover_duration_ms <= 0 || disarm_delay_ms < 0
            || observe_window_ms <= 0 || !(jerk_threshold_m > 0))
            throw ConfigError("rates, durations and thresholds must be positive");
    }

    /// The latency window must lie inside the longest delay band of the spec.
    void validate_against(const FuzzSpecification& spec) const
    {
        validate();
        if (takeoff_latency.max_ms > spec.environment.max_delay_ms())
            throw ConfigError("takeoff latency window exceeds the longest delay band of spec '" + spec.id + "'");
    }

    friend bool operator==(const SutConfig&, const SutConfig&) = default;
};

inline json to_json(const SutConfig& c)
{
    json faults = json::array();
    for (auto f : c.seeded_faults) faults.push_back(to_string(f));
    json out{{"takeoff_latency_ms", {{"min", c.takeoff_latency.min_ms}, {"max", c.takeoff_latency.max_ms}}},
                       {"app_loss_of_signal_s", c.app_loss_of_signal_s},
                       {"autopilot_loss_of_signal_s", c.autopilot_loss_of_signal_s},
                       {"geofence_action", to_string(c.geofence_action)},
                       {"gps_sensitivity", to_string(c.gps_sensitivity)},
                       {"compass_sensitivity", to_string(c.compass_sensitivity)},
                       {"seeded_faults", faults},
                       {"jerk_threshold_m", c.jerk_threshold_m},
                       {"climb_rate_mps", c.climb_rate_mps},
                       {"descent_rate_mps", c.descent_rate_mps},
                       {"hover_duration_ms", c.hover_duration_ms},
                       {"disarm_delay_ms", c.disarm_delay_ms},
                       {"observe_window_ms", c.observe_window_ms}};
    if (c.signal_loss_at_ms)
        out["signal_loss_at_ms"] = *c.signal_loss_at_ms;
    return out;
}

/// Every key is optional; missing keys keep their defaults.
inline SutConfig parse_sut_config(std::string_view text)
{
    const json doc = [&] {
        try {
            return json::parse(text.begin(), text.end());
        } catch (const json::parse_error& e) {
            throw SyntaxError(e.what());
        }
    }();
    if (!doc.is_object())
        throw SyntaxError("SuT config must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        static const std::set<std::string> known{
            "takeoff_latency_ms", "app_loss_of_signal_s", "autopilot_loss_of_signal_s", "geofence_action",
            "gps_sensitivity",    "compass_sensitivity",  "seeded_faults",              "jerk_threshold_m",
            "climb_rate_mps",     "descent_rate_mps",     "hover_duration_ms",          "disarm_delay_ms",
            "observe_window_ms",  "signal_loss_at_ms"};
        if (!known.count(key))
            throw VocabularyError("unknown key '" + key + "' in SuT config");
    }
    SutConfig c;
    try {
        if (doc.contains("takeoff_latency_ms")) {
            c.takeoff_latency.min_ms = doc["takeoff_latency_ms"].at("min").get<std::int64_t>();
            c.takeoff_latency.max_ms = doc["takeoff_latency_ms"].at("max").get<std::int64_t>();
        }
        c.app_loss_of_signal_s = doc.value("app_loss_of_signal_s", c.app_loss_of_signal_s);
        c.autopilot_loss_of_signal_s = doc.value("autopilot_loss_of_signal_s", c.autopilot_loss_of_signal_s);
        if (doc.contains("geofence_action"))
            c.geofence_action = parse_geofence(doc["geofence_action"].get<std::string>());
        if (doc.contains("gps_sensitivity"))
            c.gps_sensitivity = parse_level(doc["gps_sensitivity"].get<std::string>());
        if (doc.contains("compass_sensitivity"))
            c.compass_sensitivity = parse_level(doc["compass_sensitivity"].get<std::string>());
        if (doc.contains("seeded_faults"))
            for (const auto& f : doc["seeded_faults"]) c.seeded_faults.insert(parse_fault(f.get<std::string>()));
        c.jerk_threshold_m = doc.value("jerk_threshold_m", c.jerk_threshold_m);
        c.climb_rate_mps = doc.value("climb_rate_mps", c.climb_rate_mps);
        c.descent_rate_mps = doc.value("descent_rate_mps", c.descent_rate_mps);
        c.hover_duration_ms = doc.value("hover_duration_ms", c.hover_duration_ms);
        c.disarm_delay_ms = doc.value("disarm_delay_ms", c.disarm_delay_ms);
        c.observe_window_ms = doc.value("observe_window_ms", c.observe_window_ms);
        if (doc.contains("signal_loss_at_ms"))
            c.signal_loss_at_ms = doc["signal_loss_at_ms"].get<std::int64_t>();
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("SuT config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Environment, snapshot, events

struct EnvironmentState
{
    Throttle throttle = Throttle::MID;
    GeofenceSetting geofence = GeofenceSetting::NONE;
    Level wind = Level::NONE;
    Level gps_noise = Level::NONE;
    Level compass_interference = Level::NONE;
    bool signal_lost = false;
    std::int64_t signal_lost_ms = 0;

    friend bool operator==(const EnvironmentState&, const EnvironmentState&) = default;
};

/// Lateral offset (m) a wind level pushes the vehicle off its leg.
inline double wind_drift_m(Level l)
{
    switch (l) {
    case Level::NONE: return 0.0;
    case Level::LOW: return 1.0;
    case Level::MEDIUM: return 2.0;
    case Level::HIGH: return 3.5;
    }
    return 0.0;
}

/// Heading-error induced lateral offset (m) per compass interference level.
inline double compass_drift_m(Level l)
{
    switch (l) {
    case Level::NONE: return 0.0;
    case Level::LOW: return 0.5;
    case Level::MEDIUM: return 1.0;
    case Level::HIGH: return 1.5;
    }
    return 0.0;
}

enum class FailsafeKind
{
    GEOFENCE,
    APP_LOSS_OF_SIGNAL,
    AUTOPILOT_LOSS_OF_SIGNAL,
    DEGRADED_NAVIGATION,
};

enum class FailsafeAction
{
    WARN,
    RTL,
    LAND,
    APP_RETURN,
};

inline std::string to_string(FailsafeKind k)
{
    switch (k) {
    case FailsafeKind::GEOFENCE: return "GEOFENCE";
    case FailsafeKind::APP_LOSS_OF_SIGNAL: return "APP_LOSS_OF_SIGNAL";
    case FailsafeKind::AUTOPILOT_LOSS_OF_SIGNAL: return "AUTOPILOT_LOSS_OF_SIGNAL";
    case FailsafeKind::DEGRADED_NAVIGATION: return "DEGRADED_NAVIGATION";
    }
    return "?";
}

inline std::string to_string(FailsafeAction a)
{
    switch (a) {
    case FailsafeAction::WARN: return "WARN";
    case FailsafeAction::RTL: return "RTL";
    case FailsafeAction::LAND: return "LAND";
    case FailsafeAction::APP_RETURN: return "APP_RETURN";
    }
    return "?";
}

struct FailsafeEvent
{
    FailsafeKind kind;
    FailsafeAction action;
    std::int64_t time_ms = 0;

    friend bool operator==(const FailsafeEvent&, const FailsafeEvent&) = default;
};

struct SutSnapshot
{
    std::shared_ptr<const MissionPlan> mission;
    std::int64_t time_ms = 0;
    AppState app = AppState::PRE_ARM;
    AutopilotMode mode = AutopilotMode::STABILIZED;
    /// Mode the application (or last accepted request) has asked for.
    AutopilotMode commanded = AutopilotMode::STABILIZED;

    Vec3 position{};  ///< on-path position
    Vec3 drift{};     ///< lateral environment offset on top of `position`
    std::size_t leg = 0;
    bool armed = false;
    bool on_ground = true;

    std::optional<std::int64_t> offboard_switch_at;
    std::optional<std::int64_t> hover_until;
    std::optional<std::int64_t> disarm_at;
    std::optional<std::int64_t> observe_until;

    AppState takeover_from = AppState::PRE_ARM;
    bool human_lands = false;
    Vec3 last_offboard_setpoint{};

    bool geofence_breached = false;
    bool geofence_warned = false;
    bool geofence_rtl = false;
    bool app_los_fired = false;
    bool autopilot_los_fired = false;
    bool degraded_fired = false;

    std::optional<RcAction> deferred;
    int thrash_remaining = 0;
    bool thrash_done = false;
    std::optional<std::int64_t> next_thrash_at;

    bool landed_armed = false;
    bool observation_complete = false;
    bool jerk_flag = false;
    double path_deviation_max = 0.0;

    EnvironmentState env;

    Vec3 actual_position() const { return position + drift; }
    bool airborne() const { return !on_ground; }

    /// Earliest pending internal timer strictly after now.
    std::optional<std::int64_t> next_deadline() const
    {
        std::optional<std::int64_t> best;
        for (const auto& t : {offboard_switch_at, hover_until, disarm_at, observe_until, next_thrash_at})
            if (t && *t > time_ms && (!best || *t < *best))
                best = t;
        return best;
    }

    friend bool operator==(const SutSnapshot&, const SutSnapshot&) = default;
};

inline SutSnapshot initial_snapshot(std::shared_ptr<const MissionPlan> mission, EnvironmentState env = {})
{
    SutSnapshot s;
    s.mission = std::move(mission);
    s.env = env;
    return s;
}

enum class TelemetryKind
{
    TRANSITION,
    LEG_START,
    INJECTION_ACCEPTED,
    INJECTION_IGNORED,
    INJECTION_DEFERRED,
    DEFERRED_APPLIED,
    SETPOINT_JUMP,
    FAILSAFE,
    DISARMED,
    DISARM_MISSED,
};

inline std::string to_string(TelemetryKind k)
{
    switch (k) {
    case TelemetryKind::TRANSITION: return "TRANSITION";
    case TelemetryKind::LEG_START: return "LEG_START";
    case TelemetryKind::INJECTION_ACCEPTED: return "INJECTION_ACCEPTED";
    case TelemetryKind::INJECTION_IGNORED: return "INJECTION_IGNORED";
    case TelemetryKind::INJECTION_DEFERRED: return "INJECTION_DEFERRED";
    case TelemetryKind::DEFERRED_APPLIED: return "DEFERRED_APPLIED";
    case TelemetryKind::SETPOINT_JUMP: return "SETPOINT_JUMP";
    case TelemetryKind::FAILSAFE: return "FAILSAFE";
    case TelemetryKind::DISARMED: return "DISARMED";
    case TelemetryKind::DISARM_MISSED: return "DISARM_MISSED";
    }
    return "?";
}

struct TelemetryRecord
{
    std::int64_t time_ms = 0;
    TelemetryKind kind = TelemetryKind::TRANSITION;
    AppState app = AppState::PRE_ARM;
    AutopilotMode mode = AutopilotMode::STABILIZED;
    RcAction action = RcAction::NONE;
    std::string detail;

    friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

struct Tick
{
    std::int64_t dt_ms = 10;
};

struct RcInjection
{
    RcAction action = RcAction::NONE;
};

struct EnvironmentChange
{
    EnvironmentState env;
};

/// Fires internal timers due at the current instant without advancing time.
struct TimerExpiry
{ };

using Event = std::variant<Tick, RcInjection, EnvironmentChange, TimerExpiry>;

struct StepResult
{
    SutSnapshot next;
    std::vector<TelemetryRecord> records;
    std::vector<FailsafeEvent> failsafes;
};

// ---------------------------------------------------------------------------
// Fault behavior

struct TransitionRequest
{
    RcAction action = RcAction::NONE;
    AppState app = AppState::PRE_ARM;
    AutopilotMode mode = AutopilotMode::STABILIZED;
    bool geofence_rtl_active = false;
    bool geofence_warned = false;
};

inline TransitionRequest make_request(const SutSnapshot& s, RcAction a)
{
    return {a, s.app, s.mode, s.geofence_rtl && s.app == AppState::RETURNING, s.geofence_warned};
}

struct OverrideDecision
{
    enum class Kind
    {
        PASS_THROUGH,
        IGNORE,
        DEFER,
        CORRUPT,
        REALIZE_AS,
    };

    Kind kind = Kind::PASS_THROUGH;
    /// REALIZE_AS: the mode actually entered.
    std::optional<AutopilotMode> realized;
    /// DEFER: condition under which the request is finally applied.
    std::string until;

    friend bool operator==(const OverrideDecision&, const OverrideDecision&) = default;
};

inline std::string to_string(OverrideDecision::Kind k)
{
    switch (k) {
    case OverrideDecision::Kind::PASS_THROUGH: return "PASS_THROUGH";
    case OverrideDecision::Kind::IGNORE: return "IGNORE";
    case OverrideDecision::Kind::DEFER: return "DEFER";
    case OverrideDecision::Kind::CORRUPT: return "CORRUPT";
    case OverrideDecision::Kind::REALIZE_AS: return "REALIZE_AS";
    }
    return "?";
}

/// The documented signature of one fault applied to one transition request.
/// Environment-triggered faults (F6, F8) never override a request.
inline OverrideDecision inject_fault_behavior(FaultId fault, const TransitionRequest& req)
{
    using K = OverrideDecision::Kind;
    const auto a = req.action;
    switch (fault) {
    case FaultId::F1:
        if (req.app == AppState::HOVERING && (a == RcAction::LAND || a == RcAction::AUTO_LAND))
            return {K::IGNORE, {}, {}};
        break;
    case FaultId::F2:
        if (req.app == AppState::TAKEOFF && req.mode == AutopilotMode::STABILIZED && a == RcAction::POSCTL)
            return {K::IGNORE, {}, {}};
        break;
    case FaultId::F3:
        if (req.app == AppState::LANDING && req.mode == AutopilotMode::LAND && a == RcAction::OFFBOARD)
            return {K::CORRUPT, AutopilotMode::OFFBOARD, {}};
        break;
    case FaultId::F4:
        if (req.geofence_rtl_active && a == RcAction::POSCTL)
            return {K::DEFER, {}, "landing completed"};
        break;
    case FaultId::F5:
        if (req.app == AppState::TAKEOFF && a == RcAction::RTL)
            return {K::IGNORE, {}, {}};
        break;
    case FaultId::F7:
        if (req.geofence_warned && a == RcAction::POSCTL)
            return {K::IGNORE, {}, {}};
        break;
    case FaultId::F9:
        if (a == RcAction::THROTTLE_TOGGLED)
            return {K::REALIZE_AS, AutopilotMode::POSCTL, {}};
        break;
    case FaultId::F10:
        if (a == RcAction::AUTO_LOITER && req.app != AppState::LANDING)
            return {K::REALIZE_AS, AutopilotMode::POSCTL, {}};
        break;
    case FaultId::F11:
        if (a == RcAction::AUTO_LOITER && req.app == AppState::LANDING)
            return {K::REALIZE_AS, AutopilotMode::POSCTL, {}};
        break;
    case FaultId::F6:
    case FaultId::F8: break;
    default: throw UnknownFault("fault ordinal " + std::to_string(static_cast<int>(fault)));
    }
    return {};
}

// ---------------------------------------------------------------------------
// Failsafes

inline GeofenceSetting effective_geofence(const EnvironmentState& env, const SutConfig& config)
{
    return env.geofence == GeofenceSetting::ACTIVE ? config.geofence_action : env.geofence;
}

inline bool exceeds(Level level, Level sensitivity)
{
    return level != Level::NONE && static_cast<int>(level) >= static_cast<int>(sensitivity);
}

/// Failsafe conditions present in `state` that have not fired yet.
inline std::vector<FailsafeEvent> check_failsafes(const SutSnapshot& state, const EnvironmentState& env,
                                                  const SutConfig& config)
{
    std::vector<FailsafeEvent> out;
    if (!state.airborne())
        return out;
    const auto t = state.time_ms;

    const auto fence = effective_geofence(env, config);
    if (fence != GeofenceSetting::NONE && !state.geofence_breached && state.mission && state.mission->geofence_polygon
        && !geometry::point_in_polygon(state.actual_position().xy(), *state.mission->geofence_polygon)) {
        const auto action = fence == GeofenceSetting::WARN     ? FailsafeAction::WARN
                            : fence == GeofenceSetting::LAND   ? FailsafeAction::LAND
                                                               : FailsafeAction::RTL;
        out.push_back({FailsafeKind::GEOFENCE, action, t});
    }

    if (env.signal_lost) {
        const double lost_s = static_cast<double>(env.signal_lost_ms) / 1000.0;
        if (lost_s >= config.app_loss_of_signal_s && !state.app_los_fired)
            out.push_back({FailsafeKind::APP_LOSS_OF_SIGNAL, FailsafeAction::APP_RETURN, t});
        if (lost_s >= config.autopilot_loss_of_signal_s && !state.autopilot_los_fired)
            out.push_back({FailsafeKind::AUTOPILOT_LOSS_OF_SIGNAL, FailsafeAction::RTL, t});
    }

    if (!state.degraded_fired
        && (exceeds(env.gps_noise, config.gps_sensitivity)
            || exceeds(env.compass_interference, config.compass_sensitivity)))
        out.push_back({FailsafeKind::DEGRADED_NAVIGATION, FailsafeAction::WARN, t});
    return out;
}

// ---------------------------------------------------------------------------
// Transition function

namespace detail {

class Stepper
{
public:
    Stepper(const SutSnapshot& s, const SutConfig& c, Rng& rng) : s_(s), config_(c), rng_(rng) { }

    StepResult finish() { return {std::move(s_), std::move(records_), std::move(failsafes_)}; }

    void tick(std::int64_t dt_ms)
    {
        if (dt_ms < 0)
            throw IllegalEvent("negative tick");
        if (s_.app == AppState::DONE)
            throw IllegalEvent("tick after the vehicle is done");
        if (s_.app == AppState::PRE_ARM) {
            arm();
            s_.time_ms += dt_ms;
            fire_timers();
            return;
        }
        s_.time_ms += dt_ms;
        if (s_.env.signal_lost)
            s_.env.signal_lost_ms += dt_ms;
        move(static_cast<double>(dt_ms) / 1000.0);
        fire_timers();
        run_failsafes();
    }

    void timer_expiry()
    {
        if (s_.app == AppState::DONE)
            throw IllegalEvent("timer expiry after the vehicle is done");
        if (s_.app == AppState::PRE_ARM)
            arm();
        fire_timers();
        run_failsafes();
    }

    void environment_change(const EnvironmentState& env)
    {
        const bool was_lost = s_.env.signal_lost;
        s_.env = env;
        if (!env.signal_lost)
            s_.env.signal_lost_ms = 0;
        else if (!was_lost)
            s_.env.signal_lost_ms = env.signal_lost_ms;
    }

    void inject(RcAction action)
    {
        if (s_.app == AppState::PRE_ARM || s_.app == AppState::DONE)
            throw IllegalEvent("RC injection while " + to_string(s_.app));
        if (action == RcAction::NONE)
            throw IllegalEvent("NONE is not an injectable action");

        OverrideDecision decision;
        const auto req = make_request(s_, action);
        for (auto f : all_faults) {
            if (!config_.active(f))
                continue;
            auto d = inject_fault_behavior(f, req);
            if (d.kind != OverrideDecision::Kind::PASS_THROUGH) {
                decision = d;
                break;
            }
        }

        using K = OverrideDecision::Kind;
        switch (decision.kind) {
        case K::IGNORE: emit(TelemetryKind::INJECTION_IGNORED, action, "request ignored"); return;
        case K::DEFER:
            s_.deferred = action;
            emit(TelemetryKind::INJECTION_DEFERRED, action, "deferred until " + decision.until);
            return;
        case K::CORRUPT: reactivate_offboard(s_.last_offboard_setpoint); break;
        case K::REALIZE_AS: apply_mode_request(*decision.realized); break;
        case K::PASS_THROUGH: {
            auto m = requested_mode(action);
            if (!m)
                throw IllegalEvent("action " + to_string(action) + " has no mode semantics");
            apply_mode_request(*m);
            break;
        }
        }
        emit(TelemetryKind::INJECTION_ACCEPTED, action, "now " + to_string(s_.mode));
    }

private:
    void emit(TelemetryKind kind, RcAction action = RcAction::NONE, std::string detail = {})
    {
        records_.push_back({s_.time_ms, kind, s_.app, s_.mode, action, std::move(detail)});
    }

    void enter(AppState app, AutopilotMode mode)
    {
        const bool changed = app != s_.app || mode != s_.mode;
        s_.app = app;
        s_.mode = mode;
        s_.commanded = mode;
        if (mode == AutopilotMode::OFFBOARD)
            s_.last_offboard_setpoint = s_.actual_position();
        if (changed)
            emit(TelemetryKind::TRANSITION);
    }

    void set_mode(AutopilotMode mode)
    {
        if (mode == s_.mode)
            return;
        s_.mode = mode;
        s_.commanded = mode;
        emit(TelemetryKind::TRANSITION);
    }

    void arm()
    {
        s_.armed = true;
        s_.offboard_switch_at =
            s_.time_ms + rng_.uniform_int(config_.takeoff_latency.min_ms, config_.takeoff_latency.max_ms);
        s_.app = AppState::TAKEOFF;
        s_.mode = AutopilotMode::STABILIZED;
        s_.commanded = AutopilotMode::OFFBOARD;
        emit(TelemetryKind::TRANSITION);
    }

    const MissionPlan& mission() const
    {
        if (!s_.mission)
            throw IllegalEvent("snapshot has no mission");
        return *s_.mission;
    }

    // Moves `position` toward `target` by at most `dist`; true on arrival.
    bool travel(const Vec3& target, double dist)
    {
        const Vec3 delta = target - s_.position;
        const double len = delta.norm();
        if (len <= dist) {
            s_.position = target;
            return true;
        }
        s_.position = s_.position + delta * (dist / len);
        return false;
    }

    void descend(double dt)
    {
        s_.position.z = std::max(0.0, s_.position.z - config_.descent_rate_mps * dt);
        if (s_.position.z <= 0.0)
            touchdown();
    }

    void touchdown()
    {
        if (s_.on_ground)
            return;
        s_.on_ground = true;
        if (s_.deferred) {
            const RcAction a = *s_.deferred;
            s_.deferred.reset();
            s_.takeover_from = s_.app;
            s_.human_lands = true;
            enter(AppState::HUMAN_CONTROL, *requested_mode(a));
            emit(TelemetryKind::DEFERRED_APPLIED, a, "applied after landing");
            s_.disarm_at = s_.time_ms + config_.disarm_delay_ms;
            return;
        }
        switch (s_.app) {
        case AppState::LANDING:
        case AppState::RETURNING:
            enter(AppState::DISARMING, s_.mode);
            s_.disarm_at = s_.time_ms + config_.disarm_delay_ms;
            break;
        case AppState::HUMAN_CONTROL:
            if (config_.active(FaultId::F8) && s_.mode == AutopilotMode::STABILIZED) {
                s_.landed_armed = true;
                s_.observe_until = s_.time_ms + config_.observe_window_ms;
                emit(TelemetryKind::DISARM_MISSED, RcAction::NONE, "landed armed in STABILIZED");
            } else {
                s_.disarm_at = s_.time_ms + config_.disarm_delay_ms;
            }
            break;
        default: break;
        }
    }

    void move(double dt)
    {
        const auto& m = mission();
        switch (s_.app) {
        case AppState::TAKEOFF:
            if (s_.mode == AutopilotMode::OFFBOARD && s_.thrash_remaining == 0) {
                s_.on_ground = false;
                s_.position.z = std::min(m.takeoff_altitude(), s_.position.z + config_.climb_rate_mps * dt);
                if (s_.position.z >= m.takeoff_altitude()) {
                    s_.leg = 0;
                    enter(AppState::FLYING_TO_WAYPOINT, AutopilotMode::OFFBOARD);
                    emit(TelemetryKind::LEG_START, RcAction::NONE, "leg 0");
                }
            }
            break;
        case AppState::FLYING_TO_WAYPOINT: {
            const Vec3 from = s_.position;
            const Vec3 target = m.waypoints[s_.leg];
            const bool arrived = travel(target, m.cruise_speed * dt);
            const Vec3 dir = target - from;
            const double horizontal = std::hypot(dir.x, dir.y);
            const double offset = wind_drift_m(s_.env.wind) + compass_drift_m(s_.env.compass_interference);
            if (horizontal > 0 && offset > 0)
                s_.drift = Vec3{-dir.y / horizontal, dir.x / horizontal, 0.0} * offset;
            s_.path_deviation_max = std::max(s_.path_deviation_max, s_.drift.norm());
            s_.last_offboard_setpoint = target;
            if (arrived) {
                if (s_.leg + 1 < m.waypoints.size()) {
                    ++s_.leg;
                    emit(TelemetryKind::LEG_START, RcAction::NONE, "leg " + std::to_string(s_.leg));
                } else {
                    s_.hover_until = s_.time_ms + config_.hover_duration_ms;
                    enter(AppState::HOVERING, AutopilotMode::OFFBOARD);
                }
            }
            break;
        }
        case AppState::LANDING: descend(dt); break;
        case AppState::RETURNING: {
            const Vec3 above_home{0.0, 0.0, s_.position.z};
            if (std::hypot(s_.position.x, s_.position.y) > 1e-9)
                travel(above_home, m.cruise_speed * dt);
            else
                descend(dt);
            break;
        }
        case AppState::HUMAN_CONTROL:
            if (s_.human_lands) {
                if (!s_.on_ground)
                    descend(dt);
            } else if (!s_.on_ground) {
                const double rate = s_.env.throttle == Throttle::LOW    ? -config_.descent_rate_mps
                                    : s_.env.throttle == Throttle::HIGH ? config_.climb_rate_mps
                                                                        : 0.0;
                s_.position.z = std::max(0.0, s_.position.z + rate * dt);
                if (s_.position.z <= 0.0)
                    touchdown();
            }
            break;
        default: break;
        }
    }

    void fire_timers()
    {
        const auto t = s_.time_ms;
        auto due = [t](std::optional<std::int64_t>& timer) {
            if (timer && *timer <= t) {
                timer.reset();
                return true;
            }
            return false;
        };

        if (due(s_.offboard_switch_at) && s_.app == AppState::TAKEOFF && s_.mode == AutopilotMode::STABILIZED)
            enter(AppState::TAKEOFF, AutopilotMode::OFFBOARD);

        if (due(s_.hover_until) && s_.app == AppState::HOVERING) {
            enter(AppState::LANDING, AutopilotMode::LAND);
            if (config_.active(FaultId::F6) && s_.env.gps_noise == Level::HIGH && !s_.thrash_done) {
                s_.thrash_remaining = 4;
                s_.next_thrash_at = t + thrash_period_ms;
            }
        }

        if (due(s_.next_thrash_at) && s_.thrash_remaining > 0) {
            --s_.thrash_remaining;
            if (s_.app == AppState::LANDING)
                enter(AppState::TAKEOFF, AutopilotMode::OFFBOARD);
            else
                enter(AppState::LANDING, AutopilotMode::LAND);
            if (s_.thrash_remaining > 0) {
                s_.next_thrash_at = t + thrash_period_ms;
            } else {
                s_.thrash_done = true;
                if (s_.app != AppState::LANDING)
                    enter(AppState::LANDING, AutopilotMode::LAND);
            }
        }

        if (due(s_.disarm_at) && (s_.app == AppState::DISARMING || s_.app == AppState::HUMAN_CONTROL)) {
            s_.armed = false;
            emit(TelemetryKind::DISARMED);
            enter(AppState::DONE, s_.mode);
        }

        if (due(s_.observe_until))
            s_.observation_complete = true;
    }

    void run_failsafes()
    {
        if (s_.app == AppState::DONE)
            return;
        for (const auto& ev : check_failsafes(s_, s_.env, config_)) {
            failsafes_.push_back(ev);
            emit(TelemetryKind::FAILSAFE, RcAction::NONE, to_string(ev.kind) + ":" + to_string(ev.action));
            switch (ev.kind) {
            case FailsafeKind::GEOFENCE:
                s_.geofence_breached = true;
                if (ev.action == FailsafeAction::WARN) {
                    s_.geofence_warned = true;
                } else if (ev.action == FailsafeAction::RTL) {
                    s_.geofence_rtl = true;
                    s_.human_lands = false;
                    enter(AppState::RETURNING, AutopilotMode::RTL);
                } else {
                    enter(AppState::LANDING, AutopilotMode::LAND);
                }
                break;
            case FailsafeKind::APP_LOSS_OF_SIGNAL:
                s_.app_los_fired = true;
                if (s_.mode == AutopilotMode::OFFBOARD)
                    enter(AppState::RETURNING, AutopilotMode::OFFBOARD);
                break;
            case FailsafeKind::AUTOPILOT_LOSS_OF_SIGNAL:
                s_.autopilot_los_fired = true;
                enter(AppState::RETURNING, AutopilotMode::RTL);
                break;
            case FailsafeKind::DEGRADED_NAVIGATION: s_.degraded_fired = true; break;
            }
        }
    }

    void reactivate_offboard(const Vec3& setpoint)
    {
        const double jump = (setpoint - s_.actual_position()).norm();
        if (jump > config_.jerk_threshold_m) {
            s_.jerk_flag = true;
            emit(TelemetryKind::SETPOINT_JUMP, RcAction::OFFBOARD, "setpoint jump " + std::to_string(jump) + " m");
        }
        s_.hover_until = s_.time_ms + config_.hover_duration_ms;
        s_.app = AppState::HOVERING;
        s_.mode = AutopilotMode::OFFBOARD;
        s_.commanded = AutopilotMode::OFFBOARD;
        s_.last_offboard_setpoint = setpoint;
        emit(TelemetryKind::TRANSITION);
    }

    void apply_mode_request(AutopilotMode m)
    {
        if (is_manual(m)) {
            s_.takeover_from = s_.app;
            s_.human_lands = s_.app == AppState::LANDING || s_.app == AppState::DISARMING;
            s_.hover_until.reset();
            s_.offboard_switch_at.reset();
            s_.next_thrash_at.reset();
            s_.thrash_remaining = 0;
            enter(AppState::HUMAN_CONTROL, m);
            if (s_.on_ground && s_.human_lands && !s_.disarm_at) {
                touchdown_on_ground_takeover();
            } else if (!s_.human_lands) {
                s_.disarm_at.reset();
                s_.observe_until = s_.time_ms + config_.observe_window_ms;
            }
            return;
        }
        switch (m) {
        case AutopilotMode::OFFBOARD:
            if (s_.mode == AutopilotMode::OFFBOARD)
                return;
            if (s_.app == AppState::TAKEOFF) {
                s_.offboard_switch_at.reset();
                enter(AppState::TAKEOFF, AutopilotMode::OFFBOARD);
            } else if (s_.airborne()) {
                reactivate_offboard(s_.actual_position());
            } else {
                set_mode(AutopilotMode::OFFBOARD);
            }
            return;
        case AutopilotMode::LAND:
        case AutopilotMode::AUTO_LAND:
            if (s_.app == AppState::LANDING || s_.app == AppState::DISARMING) {
                set_mode(AutopilotMode::LAND);
            } else {
                s_.hover_until.reset();
                s_.offboard_switch_at.reset();
                enter(AppState::LANDING, AutopilotMode::LAND);
                if (s_.on_ground) {
                    s_.on_ground = false;
                    touchdown();
                }
            }
            return;
        case AutopilotMode::RTL:
            if (s_.app == AppState::DISARMING) {
                set_mode(AutopilotMode::RTL);
            } else {
                s_.hover_until.reset();
                s_.offboard_switch_at.reset();
                enter(AppState::RETURNING, AutopilotMode::RTL);
                if (s_.on_ground) {
                    s_.on_ground = false;
                    touchdown();
                }
            }
            return;
        default: throw IllegalEvent("mode " + to_string(m) + " cannot be requested directly");
        }
    }

    // A takeover on the ground (e.g. during DISARMING) behaves like a landing.
    void touchdown_on_ground_takeover()
    {
        s_.on_ground = false;
        touchdown();
    }

    static constexpr std::int64_t thrash_period_ms = 800;

    SutSnapshot s_;
    const SutConfig& config_;
    Rng& rng_;
    std::vector<TelemetryRecord> records_;
    std::vector<FailsafeEvent> failsafes_;
};

} // namespace detail

/// Applies one event to a snapshot. Pure apart from draws on `rng`.
inline StepResult step(const SutSnapshot& state, const Event& event, const SutConfig& config, Rng& rng)
{
    detail::Stepper stepper(state, config, rng);
    std::visit(
        [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, Tick>)
                stepper.tick(e.dt_ms);
            else if constexpr (std::is_same_v<E, RcInjection>)
                stepper.inject(e.action);
            else if constexpr (std::is_same_v<E, EnvironmentChange>)
                stepper.environment_change(e.env);
            else
                stepper.timer_expiry();
        },
        event);
    return stepper.finish();
}

} // namespace statefuzz

#endif // STATEFUZZ_SUTMODEL_HPP
