#ifndef STATEFUZZ_VOCABULARY_HPP
#define STATEFUZZ_VOCABULARY_HPP

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "statefuzz/error.hpp"

/**
 * @file vocabulary.hpp
 * @brief Closed vocabulary of the reference system under test: application
 * states, autopilot modes, injectable RC actions and environment levels.
 *
 * Names are the exact upper-case spellings used in fuzz specification files.
 * A handful of aliases (`AUTO.LOITER`, `AUTO.RTL`, ...) are accepted on input
 * and normalized to the canonical spelling.
 */

namespace statefuzz {

enum class AppState
{
    PRE_ARM,
    TAKEOFF,
    FLYING_TO_WAYPOINT,
    HOVERING,
    LANDING,
    DISARMING,
    HUMAN_CONTROL,
    RETURNING,
    DONE,
};

enum class AutopilotMode
{
    STABILIZED,
    OFFBOARD,
    POSCTL,
    ALTCTL,
    LAND,
    RTL,
    AUTO_LOITER,
    AUTO_LAND,
};

enum class RcAction
{
    NONE,
    ALTCTL,
    POSCTL,
    STABILIZED,
    OFFBOARD,
    LAND,
    RTL,
    AUTO_LOITER,
    AUTO_LAND,
    THROTTLE_TOGGLED,
};

/// Ordinal level shared by wind, GPS noise and compass interference.
enum class Level
{
    NONE,
    LOW,
    MEDIUM,
    HIGH,
};

enum class Throttle
{
    LOW,
    MID,
    HIGH,
};

/// Geofence configuration of a test environment. `ACTIVE` defers to the
/// action configured on the SuT.
enum class GeofenceSetting
{
    NONE,
    WARN,
    RETURN,
    LAND,
    ACTIVE,
};

namespace detail {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

inline constexpr NameTable<AppState, 9> app_state_names{{
    {AppState::PRE_ARM, "PRE_ARM"},
    {AppState::TAKEOFF, "TAKEOFF"},
    {AppState::FLYING_TO_WAYPOINT, "FLYING_TO_WAYPOINT"},
    {AppState::HOVERING, "HOVERING"},
    {AppState::LANDING, "LANDING"},
    {AppState::DISARMING, "DISARMING"},
    {AppState::HUMAN_CONTROL, "HUMAN_CONTROL"},
    {AppState::RETURNING, "RETURNING"},
    {AppState::DONE, "DONE"},
}};

inline constexpr NameTable<AutopilotMode, 8> mode_names{{
    {AutopilotMode::STABILIZED, "STABILIZED"},
    {AutopilotMode::OFFBOARD, "OFFBOARD"},
    {AutopilotMode::POSCTL, "POSCTL"},
    {AutopilotMode::ALTCTL, "ALTCTL"},
    {AutopilotMode::LAND, "LAND"},
    {AutopilotMode::RTL, "RTL"},
    {AutopilotMode::AUTO_LOITER, "AUTO_LOITER"},
    {AutopilotMode::AUTO_LAND, "AUTO_LAND"},
}};

inline constexpr NameTable<RcAction, 10> action_names{{
    {RcAction::NONE, "NONE"},
    {RcAction::ALTCTL, "ALTCTL"},
    {RcAction::POSCTL, "POSCTL"},
    {RcAction::STABILIZED, "STABILIZED"},
    {RcAction::OFFBOARD, "OFFBOARD"},
    {RcAction::LAND, "LAND"},
    {RcAction::RTL, "RTL"},
    {RcAction::AUTO_LOITER, "AUTO_LOITER"},
    {RcAction::AUTO_LAND, "AUTO_LAND"},
    {RcAction::THROTTLE_TOGGLED, "THROTTLE_TOGGLED"},
}};

inline constexpr NameTable<Level, 4> level_names{{
    {Level::NONE, "none"},
    {Level::LOW, "low"},
    {Level::MEDIUM, "medium"},
    {Level::HIGH, "high"},
}};

inline constexpr NameTable<Throttle, 3> throttle_names{{
    {Throttle::LOW, "low"},
    {Throttle::MID, "mid"},
    {Throttle::HIGH, "high"},
}};

inline constexpr NameTable<GeofenceSetting, 5> geofence_names{{
    {GeofenceSetting::NONE, "none"},
    {GeofenceSetting::WARN, "WARN"},
    {GeofenceSetting::RETURN, "RETURN"},
    {GeofenceSetting::LAND, "LAND"},
    {GeofenceSetting::ACTIVE, "active"},
}};

template <class E, std::size_t N>
std::string_view lookup_name(const NameTable<E, N>& table, E value)
{
    for (const auto& [v, name] : table)
        if (v == value)
            return name;
    return "?";
}

template <class E, std::size_t N>
std::optional<E> lookup_value(const NameTable<E, N>& table, std::string_view name)
{
    for (const auto& [v, n] : table)
        if (n == name)
            return v;
    return std::nullopt;
}

inline std::string_view canonical_alias(std::string_view name)
{
    if (name == "AUTO.LOITER") return "AUTO_LOITER";
    if (name == "AUTO.LAND") return "AUTO_LAND";
    if (name == "AUTO.RTL") return "RTL";
    if (name == "THROTTLE_TOGGLE") return "THROTTLE_TOGGLED";
    return name;
}

} // namespace detail

inline std::string to_string(AppState s) { return std::string(detail::lookup_name(detail::app_state_names, s)); }
inline std::string to_string(AutopilotMode m) { return std::string(detail::lookup_name(detail::mode_names, m)); }
inline std::string to_string(RcAction a) { return std::string(detail::lookup_name(detail::action_names, a)); }
inline std::string to_string(Level l) { return std::string(detail::lookup_name(detail::level_names, l)); }
inline std::string to_string(Throttle t) { return std::string(detail::lookup_name(detail::throttle_names, t)); }
inline std::string to_string(GeofenceSetting g) { return std::string(detail::lookup_name(detail::geofence_names, g)); }

inline AppState parse_app_state(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::app_state_names, name))
        return *v;
    throw VocabularyError("unknown application state '" + std::string(name) + "'");
}

inline AutopilotMode parse_mode(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::mode_names, detail::canonical_alias(name)))
        return *v;
    throw VocabularyError("unknown autopilot mode '" + std::string(name) + "'");
}

inline RcAction parse_action(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::action_names, detail::canonical_alias(name)))
        return *v;
    throw VocabularyError("unknown RC action '" + std::string(name) + "'");
}

inline Level parse_level(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::level_names, name))
        return *v;
    throw VocabularyError("unknown level '" + std::string(name) + "'");
}

inline Throttle parse_throttle(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::throttle_names, name))
        return *v;
    throw VocabularyError("unknown throttle position '" + std::string(name) + "'");
}

inline GeofenceSetting parse_geofence(std::string_view name)
{
    if (auto v = detail::lookup_value(detail::geofence_names, name))
        return *v;
    throw VocabularyError("unknown geofence configuration '" + std::string(name) + "'");
}

/// Mode the autopilot is asked for by an RC action; nullopt for actions that
/// are not mode requests (NONE, throttle toggle).
inline std::optional<AutopilotMode> requested_mode(RcAction a)
{
    switch (a) {
    case RcAction::ALTCTL: return AutopilotMode::ALTCTL;
    case RcAction::POSCTL: return AutopilotMode::POSCTL;
    case RcAction::STABILIZED: return AutopilotMode::STABILIZED;
    case RcAction::OFFBOARD: return AutopilotMode::OFFBOARD;
    case RcAction::LAND: return AutopilotMode::LAND;
    case RcAction::RTL: return AutopilotMode::RTL;
    case RcAction::AUTO_LOITER: return AutopilotMode::AUTO_LOITER;
    case RcAction::AUTO_LAND: return AutopilotMode::AUTO_LAND;
    case RcAction::NONE:
    case RcAction::THROTTLE_TOGGLED: return std::nullopt;
    }
    return std::nullopt;
}

/// Manual (pilot-flown) modes. Entering one hands the vehicle to the human.
inline bool is_manual(AutopilotMode m)
{
    return m == AutopilotMode::POSCTL || m == AutopilotMode::ALTCTL || m == AutopilotMode::STABILIZED;
}

inline bool is_land_mode(AutopilotMode m)
{
    return m == AutopilotMode::LAND || m == AutopilotMode::AUTO_LAND;
}

/// Mode the application layer runs under in a nominal mission state.
inline std::optional<AutopilotMode> nominal_mode(AppState s)
{
    switch (s) {
    case AppState::TAKEOFF:
    case AppState::FLYING_TO_WAYPOINT:
    case AppState::HOVERING: return AutopilotMode::OFFBOARD;
    case AppState::LANDING:
    case AppState::DISARMING: return AutopilotMode::LAND;
    case AppState::RETURNING: return AutopilotMode::RTL;
    default: return std::nullopt;
    }
}

} // namespace statefuzz

#endif // STATEFUZZ_VOCABULARY_HPP
