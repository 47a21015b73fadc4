#ifndef STATEFUZZ_FUZZSPEC_HPP
#define STATEFUZZ_FUZZSPEC_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statefuzz/error.hpp"
#include "statefuzz/geometry.hpp"
#include "statefuzz/vocabulary.hpp"

/**
 * @file fuzzspec.hpp
 * @brief Fuzz specification and mission documents: data model, parsing,
 * serialization and mission coverage checks.
 *
 * Fuzz specifications use upper-case top-level keys:
 *
 *     FROM_PX4_modes, FROM_APP_states, RC_INPUT_EVENTS, ENVIRONMENT,
 *     MISSION_CONTEXT, CONSTRAINTS.REQUIRES_PX4_MODE
 *
 * Key order inside objects is preserved (bands and constraint maps are
 * enumerated in document order). Unknown keys are rejected.
 */

namespace statefuzz {

using json = nlohmann::ordered_json;

struct DelayBand
{
    std::string name;
    std::int64_t min_ms = 0;
    std::int64_t max_ms = 0;

    friend bool operator==(const DelayBand&, const DelayBand&) = default;
};

struct EnvironmentSpace
{
    std::vector<DelayBand> bands;
    std::vector<Throttle> throttle{Throttle::MID};
    std::vector<GeofenceSetting> geofence{GeofenceSetting::NONE};
    std::vector<Level> wind{Level::NONE};
    std::vector<Level> gps_noise{Level::NONE};
    std::vector<Level> compass_interference{Level::NONE};

    const DelayBand& band(std::string_view name) const
    {
        for (const auto& b : bands)
            if (b.name == name)
                return b;
        throw VocabularyError("unknown delay band '" + std::string(name) + "'");
    }

    /// Spec-wide delay range used to normalize delays for clustering.
    std::int64_t min_delay_ms() const
    {
        std::int64_t m = bands.front().min_ms;
        for (const auto& b : bands) m = std::min(m, b.min_ms);
        return m;
    }

    std::int64_t max_delay_ms() const
    {
        std::int64_t m = bands.front().max_ms;
        for (const auto& b : bands) m = std::max(m, b.max_ms);
        return m;
    }

    bool uses_geofence() const
    {
        return std::any_of(geofence.begin(), geofence.end(),
                           [](GeofenceSetting g) { return g != GeofenceSetting::NONE; });
    }

    friend bool operator==(const EnvironmentSpace&, const EnvironmentSpace&) = default;
};

/// A state allowed under a mode; `repeatable` is the trailing `*` marker
/// (the state recurs once per waypoint leg).
struct StateConstraint
{
    AppState state;
    bool repeatable = false;

    friend bool operator==(const StateConstraint&, const StateConstraint&) = default;
};

struct ModeConstraint
{
    AutopilotMode mode;
    std::vector<StateConstraint> states;

    friend bool operator==(const ModeConstraint&, const ModeConstraint&) = default;
};

struct FuzzSpecification
{
    std::string id = "fspec";
    std::vector<AutopilotMode> modes;
    std::vector<AppState> states;
    std::vector<RcAction> actions;
    EnvironmentSpace environment;
    std::vector<std::string> mission_context;
    std::vector<ModeConstraint> constraints;

    bool allows(AutopilotMode mode, AppState state) const
    {
        for (const auto& c : constraints)
            if (c.mode == mode)
                for (const auto& s : c.states)
                    if (s.state == state)
                        return true;
        return false;
    }

    /// All (mode, state) pairs allowed by the constraint map, in document order.
    std::vector<std::pair<AutopilotMode, AppState>> allowed_pairs() const
    {
        std::vector<std::pair<AutopilotMode, AppState>> out;
        for (const auto& c : constraints)
            for (const auto& s : c.states)
                out.emplace_back(c.mode, s.state);
        return out;
    }

    friend bool operator==(const FuzzSpecification&, const FuzzSpecification&) = default;
};

struct MissionPlan
{
    std::string id;
    std::vector<Vec3> waypoints;
    double cruise_speed = 5.0;
    std::optional<std::vector<Vec2>> geofence_polygon;
    std::vector<AppState> expected_state_sequence;

    double takeoff_altitude() const { return waypoints.front().z; }

    friend bool operator==(const MissionPlan&, const MissionPlan&) = default;
};

/// The nominal application-state walk for a mission with `legs` waypoints.
inline std::vector<AppState> nominal_sequence(std::size_t legs)
{
    std::vector<AppState> seq{AppState::TAKEOFF};
    seq.insert(seq.end(), legs, AppState::FLYING_TO_WAYPOINT);
    seq.push_back(AppState::HOVERING);
    seq.push_back(AppState::LANDING);
    seq.push_back(AppState::DISARMING);
    return seq;
}

namespace detail {

inline json parse_json_text(std::string_view text)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.what());
    }
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where)
{
    if (!obj.is_object())
        throw SyntaxError(std::string(where) + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw VocabularyError("unknown key '" + key + "' in " + std::string(where));
    }
}

inline const json& require(const json& obj, const char* key, std::string_view where)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw SyntaxError(std::string(where) + " is missing '" + key + "'");
    return *it;
}

inline std::vector<std::string> string_list(const json& j, std::string_view what)
{
    if (!j.is_array())
        throw SyntaxError(std::string(what) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string())
            throw SyntaxError(std::string(what) + " must be an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

template <class T, class Parse>
std::vector<T> vocabulary_list(const json& j, std::string_view what, Parse parse)
{
    auto names = string_list(j, what);
    if (names.empty())
        throw VocabularyError(std::string(what) + " must not be empty");
    std::vector<T> out;
    for (const auto& n : names) {
        T v = parse(n);
        if (std::find(out.begin(), out.end(), v) != out.end())
            throw VocabularyError("duplicate entry '" + n + "' in " + std::string(what));
        out.push_back(v);
    }
    return out;
}

inline std::int64_t integral_ms(const json& j, std::string_view what)
{
    if (!j.is_number())
        throw SyntaxError(std::string(what) + " must be a number");
    return j.is_number_integer() ? j.get<std::int64_t>() : static_cast<std::int64_t>(j.get<double>());
}

} // namespace detail

inline EnvironmentSpace parse_environment(const json& env)
{
    using namespace detail;
    reject_unknown_keys(env, {"transition_delay", "throttle", "geofence", "wind", "GPS", "COMPASS_INTERFERENCE"},
                        "ENVIRONMENT");
    EnvironmentSpace out;

    const json& delay = require(env, "transition_delay", "ENVIRONMENT");
    reject_unknown_keys(delay, {"bands"}, "transition_delay");
    const json& bands = require(delay, "bands", "transition_delay");
    if (!bands.is_object() || bands.empty())
        throw BandError("transition_delay.bands must be a non-empty object");
    for (const auto& [name, band] : bands.items()) {
        reject_unknown_keys(band, {"min", "max"}, "band '" + name + "'");
        DelayBand b{name, integral_ms(require(band, "min", name), "band min"),
                    integral_ms(require(band, "max", name), "band max")};
        if (b.min_ms < 0 || b.min_ms >= b.max_ms)
            throw BandError("band '" + name + "' needs 0 <= min < max");
        out.bands.push_back(b);
    }

    if (env.contains("throttle"))
        out.throttle = vocabulary_list<Throttle>(env["throttle"], "throttle", parse_throttle);
    if (env.contains("geofence"))
        out.geofence = vocabulary_list<GeofenceSetting>(env["geofence"], "geofence", parse_geofence);
    if (env.contains("wind"))
        out.wind = vocabulary_list<Level>(env["wind"], "wind", parse_level);
    if (env.contains("GPS"))
        out.gps_noise = vocabulary_list<Level>(env["GPS"], "GPS", parse_level);
    if (env.contains("COMPASS_INTERFERENCE"))
        out.compass_interference =
            vocabulary_list<Level>(env["COMPASS_INTERFERENCE"], "COMPASS_INTERFERENCE", parse_level);
    return out;
}

/// Parses and validates a fuzz specification document.
inline FuzzSpecification parse_fuzz_spec(std::string_view text, std::string id = "fspec")
{
    using namespace detail;
    const json doc = parse_json_text(text);
    reject_unknown_keys(doc,
                        {"FROM_PX4_modes", "FROM_APP_states", "RC_INPUT_EVENTS", "ENVIRONMENT", "MISSION_CONTEXT",
                         "CONSTRAINTS"},
                        "fuzz specification");

    FuzzSpecification spec;
    spec.id = std::move(id);
    spec.modes = vocabulary_list<AutopilotMode>(require(doc, "FROM_PX4_modes", "spec"), "FROM_PX4_modes", parse_mode);
    spec.states = vocabulary_list<AppState>(require(doc, "FROM_APP_states", "spec"), "FROM_APP_states",
                                            [](const std::string& n) {
                                                AppState s = parse_app_state(n);
                                                if (s == AppState::DONE || s == AppState::PRE_ARM)
                                                    throw VocabularyError("state '" + n + "' is not targetable");
                                                return s;
                                            });
    spec.actions = vocabulary_list<RcAction>(require(doc, "RC_INPUT_EVENTS", "spec"), "RC_INPUT_EVENTS",
                                             [](const std::string& n) {
                                                 RcAction a = parse_action(n);
                                                 if (a == RcAction::NONE)
                                                     throw VocabularyError("NONE is not an injectable action");
                                                 return a;
                                             });
    spec.environment = parse_environment(require(doc, "ENVIRONMENT", "spec"));
    spec.mission_context = string_list(require(doc, "MISSION_CONTEXT", "spec"), "MISSION_CONTEXT");
    if (spec.mission_context.empty())
        throw VocabularyError("MISSION_CONTEXT must not be empty");

    const json& constraints = require(doc, "CONSTRAINTS", "spec");
    reject_unknown_keys(constraints, {"REQUIRES_PX4_MODE"}, "CONSTRAINTS");
    const json& by_mode = require(constraints, "REQUIRES_PX4_MODE", "CONSTRAINTS");
    if (!by_mode.is_object())
        throw SyntaxError("REQUIRES_PX4_MODE must be an object");
    for (const auto& [mode_name, states] : by_mode.items()) {
        AutopilotMode mode = parse_mode(mode_name);
        if (std::find(spec.modes.begin(), spec.modes.end(), mode) == spec.modes.end())
            throw ConstraintError("constraint key '" + mode_name + "' is not in FROM_PX4_modes");
        ModeConstraint mc{mode, {}};
        for (std::string name : string_list(states, "REQUIRES_PX4_MODE." + mode_name)) {
            bool repeatable = false;
            if (!name.empty() && name.back() == '*') {
                repeatable = true;
                name.pop_back();
            }
            AppState s = parse_app_state(name);
            if (std::find(spec.states.begin(), spec.states.end(), s) == spec.states.end())
                throw ConstraintError("constraint state '" + name + "' is not in FROM_APP_states");
            mc.states.push_back({s, repeatable});
        }
        spec.constraints.push_back(std::move(mc));
    }
    return spec;
}

inline json to_json(const EnvironmentSpace& env)
{
    json bands = json::object();
    for (const auto& b : env.bands)
        bands[b.name] = json{{"min", b.min_ms}, {"max", b.max_ms}};
    auto names = [](const auto& values) {
        json arr = json::array();
        for (auto v : values) arr.push_back(to_string(v));
        return arr;
    };
    return json{{"transition_delay", {{"bands", bands}}},
                {"throttle", names(env.throttle)},
                {"geofence", names(env.geofence)},
                {"wind", names(env.wind)},
                {"GPS", names(env.gps_noise)},
                {"COMPASS_INTERFERENCE", names(env.compass_interference)}};
}

inline json to_json(const FuzzSpecification& spec)
{
    auto names = [](const auto& values) {
        json arr = json::array();
        for (auto v : values) arr.push_back(to_string(v));
        return arr;
    };
    json by_mode = json::object();
    for (const auto& c : spec.constraints) {
        json arr = json::array();
        for (const auto& s : c.states) arr.push_back(to_string(s.state) + (s.repeatable ? "*" : ""));
        by_mode[to_string(c.mode)] = arr;
    }
    return json{{"FROM_PX4_modes", names(spec.modes)},
                {"FROM_APP_states", names(spec.states)},
                {"RC_INPUT_EVENTS", names(spec.actions)},
                {"ENVIRONMENT", to_json(spec.environment)},
                {"MISSION_CONTEXT", spec.mission_context},
                {"CONSTRAINTS", {{"REQUIRES_PX4_MODE", by_mode}}}};
}

inline std::string serialize_fuzz_spec(const FuzzSpecification& spec) { return to_json(spec).dump(2); }

/// Parses a mission document:
///
///     { "id": "...", "waypoints": [[x,y,z], ...], "cruise_speed": 5.0,
///       "geofence_polygon": [[x,y], ...],            (optional)
///       "expected_state_sequence": ["TAKEOFF", ...] } (optional, derived)
inline MissionPlan parse_mission(std::string_view text)
{
    using namespace detail;
    const json doc = parse_json_text(text);
    reject_unknown_keys(doc, {"id", "waypoints", "cruise_speed", "geofence_polygon", "expected_state_sequence"},
                        "mission");
    MissionPlan m;
    const json& id = require(doc, "id", "mission");
    if (!id.is_string())
        throw SyntaxError("mission id must be a string");
    m.id = id.get<std::string>();

    const json& wps = require(doc, "waypoints", "mission");
    if (!wps.is_array() || wps.empty())
        throw GeometryError("mission needs at least one waypoint");
    for (const auto& wp : wps) {
        if (!wp.is_array() || wp.size() != 3 || !wp[0].is_number() || !wp[1].is_number() || !wp[2].is_number())
            throw SyntaxError("waypoints must be [x, y, z] triples");
        m.waypoints.push_back({wp[0].get<double>(), wp[1].get<double>(), wp[2].get<double>()});
    }
    if (m.takeoff_altitude() <= 0)
        throw GeometryError("first waypoint must be above the home point");

    if (doc.contains("cruise_speed")) {
        if (!doc["cruise_speed"].is_number())
            throw SyntaxError("cruise_speed must be a number");
        m.cruise_speed = doc["cruise_speed"].get<double>();
    }
    if (!(m.cruise_speed > 0))
        throw GeometryError("cruise_speed must be positive");

    if (doc.contains("geofence_polygon")) {
        std::vector<Vec2> poly;
        for (const auto& v : doc["geofence_polygon"]) {
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                throw SyntaxError("geofence_polygon vertices must be [x, y] pairs");
            poly.push_back({v[0].get<double>(), v[1].get<double>()});
        }
        if (poly.size() > 3 && poly.front() == poly.back())
            poly.pop_back();
        if (!geometry::is_simple_polygon(poly))
            throw GeometryError("geofence polygon must be simple with at least 3 vertices");
        m.geofence_polygon = std::move(poly);
    }

    const auto nominal = nominal_sequence(m.waypoints.size());
    if (doc.contains("expected_state_sequence")) {
        for (const auto& n : string_list(doc["expected_state_sequence"], "expected_state_sequence"))
            m.expected_state_sequence.push_back(parse_app_state(n));
        const auto& seq = m.expected_state_sequence;
        if (seq.empty() || seq.front() != AppState::TAKEOFF || seq.back() != AppState::DISARMING)
            throw SequenceError("expected_state_sequence must start with TAKEOFF and end with DISARMING");
        if (seq != nominal)
            throw SequenceError("expected_state_sequence does not match the waypoint legs of the plan");
    } else {
        m.expected_state_sequence = nominal;
    }
    return m;
}

inline json to_json(const MissionPlan& m)
{
    json wps = json::array();
    for (const auto& w : m.waypoints) wps.push_back({w.x, w.y, w.z});
    json seq = json::array();
    for (auto s : m.expected_state_sequence) seq.push_back(to_string(s));
    json out{{"id", m.id}, {"waypoints", wps}, {"cruise_speed", m.cruise_speed}};
    if (m.geofence_polygon) {
        json poly = json::array();
        for (const auto& v : *m.geofence_polygon) poly.push_back({v.x, v.y});
        out["geofence_polygon"] = poly;
    }
    out["expected_state_sequence"] = seq;
    return out;
}

struct PairCoverage
{
    AutopilotMode mode;
    AppState state;
    bool reachable = false;
};

struct CoverageReport
{
    std::vector<PairCoverage> pairs;
    bool geofence_required = false;
    /// True when no geofence is needed, or the mission carries a polygon
    /// that its path crosses or approaches.
    bool geofence_covered = true;

    bool complete() const
    {
        return geofence_covered
            && std::all_of(pairs.begin(), pairs.end(), [](const PairCoverage& p) { return p.reachable; });
    }
};

/// Distance (m) at which a waypoint counts as approaching the fence.
inline constexpr double geofence_approach_margin_m = 10.0;

inline CoverageReport validate_coverage(const FuzzSpecification& spec, const MissionPlan& mission)
{
    CoverageReport report;
    const auto& seq = mission.expected_state_sequence;
    for (auto [mode, state] : spec.allowed_pairs()) {
        const bool in_sequence = std::find(seq.begin(), seq.end(), state) != seq.end();
        const bool mode_matches = nominal_mode(state) == mode;
        report.pairs.push_back({mode, state, in_sequence && mode_matches});
    }
    report.geofence_required = spec.environment.uses_geofence();
    if (report.geofence_required) {
        report.geofence_covered = false;
        if (mission.geofence_polygon) {
            for (const auto& wp : mission.waypoints) {
                const Vec2 p = wp.xy();
                if (!geometry::point_in_polygon(p, *mission.geofence_polygon)
                    || geometry::distance_to_boundary(p, *mission.geofence_polygon) <= geofence_approach_margin_m)
                    report.geofence_covered = true;
            }
        }
    }
    return report;
}

inline json to_json(const CoverageReport& r)
{
    json pairs = json::array();
    for (const auto& p : r.pairs)
        pairs.push_back({{"mode", to_string(p.mode)}, {"state", to_string(p.state)}, {"reachable", p.reachable}});
    return json{{"pairs", pairs},
                {"geofence_required", r.geofence_required},
                {"geofence_covered", r.geofence_covered},
                {"complete", r.complete()}};
}

} // namespace statefuzz

#endif // STATEFUZZ_FUZZSPEC_HPP
