#ifndef STATEFUZZ_ORACLE_HPP
#define STATEFUZZ_ORACLE_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/fuzzspec.hpp"

/**
 * @file oracle.hpp
 * @brief Decision-tree oracle. Trees are data: internal nodes name a
 * predicate from a closed library, leaves carry a verdict and reason code.
 *
 * Tree JSON:
 *
 *     {"version": "v1", "root": NODE}
 *     NODE := {"predicate": NAME, "if_true": NODE, "if_false": NODE}
 *           | {"verdict": "SUCCESS" | "FAILURE" | "INVALID", "reason": CODE}
 */

namespace statefuzz {

enum class Label
{
    SUCCESS,
    FAILURE,
    INVALID,
};

inline std::string to_string(Label l)
{
    switch (l) {
    case Label::SUCCESS: return "SUCCESS";
    case Label::FAILURE: return "FAILURE";
    case Label::INVALID: return "INVALID";
    }
    return "?";
}

inline Label parse_label(std::string_view s)
{
    if (s == "SUCCESS") return Label::SUCCESS;
    if (s == "FAILURE") return Label::FAILURE;
    if (s == "INVALID") return Label::INVALID;
    throw MalformedTree("unknown verdict '" + std::string(s) + "'");
}

/// Reason codes, one per failure category plus the pass/invalid reasons.
inline const std::vector<std::string>& reason_codes()
{
    static const std::vector<std::string> codes{
        "context-not-met",        "wrong-context",        "erratic-mode-changes",
        "thrashing",              "px4-issue-within-mode", "failsafe-not-triggered",
        "mission-aborted",        "mode-change-ignored",  "ignored-during-failed-transition",
        "delayed-mode-change",    "unexpected-mode",      "unexpected-mission-outcome",
        "excessive-deviation",    "nominal",              "as-expected"};
    return codes;
}

struct Verdict
{
    Label label = Label::INVALID;
    std::string reason;
    std::vector<std::pair<std::string, bool>> fired_path;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline json to_json(const Verdict& v)
{
    json path = json::array();
    for (const auto& [name, value] : v.fired_path) path.push_back(json::array({name, value}));
    return json{{"label", to_string(v.label)}, {"reason", v.reason}, {"fired_path", path}};
}

inline Verdict verdict_from_json(const json& j)
{
    Verdict v;
    v.label = parse_label(j.at("label").get<std::string>());
    v.reason = j.at("reason").get<std::string>();
    for (const auto& e : j.at("fired_path")) v.fired_path.emplace_back(e.at(0).get<std::string>(), e.at(1).get<bool>());
    return v;
}

// ---------------------------------------------------------------------------
// Predicate library

struct OracleThresholds
{
    double path_deviation_m = 5.0;
    std::int64_t ack_timeout_ms = 2000;
    int oscillation_count = 3;
};

using Predicate = std::function<bool(const TestCase&, const ExecutionProfile&, const OracleThresholds&)>;

namespace detail {

inline const InjectionRecord& injection(const TestCase& t, const ExecutionProfile& p)
{
    if (p.injections.empty())
        throw MissingDatum("test " + t.id + " reached its context but recorded no injection");
    return p.injections.front();
}

inline std::int64_t ack_time(const TestCase& t, const ExecutionProfile& p)
{
    const auto& inj = injection(t, p);
    if (!inj.ack_time_ms)
        throw MissingDatum("test " + t.id + " has an acknowledged injection without an acknowledgement time");
    return *inj.ack_time_ms;
}

/// Reported mode just after `time` (the trace keeps the post-event entry
/// for each timestamp).
inline AutopilotMode mode_at(const ExecutionProfile& p, std::int64_t time)
{
    AutopilotMode m = AutopilotMode::STABILIZED;
    for (const auto& e : p.trace) {
        if (e.time_ms > time)
            break;
        m = e.mode;
    }
    return m;
}

inline bool failsafe_before(const ExecutionProfile& p, std::int64_t time)
{
    for (const auto& f : p.failsafe_events)
        if (f.kind != FailsafeKind::DEGRADED_NAVIGATION && f.time_ms <= time)
            return true;
    return false;
}

/// Expected reported mode after a request. `literal` is the naive reading
/// that takes the request at face value.
inline AutopilotMode expected_mode(RcAction a, AutopilotMode before, bool literal)
{
    switch (a) {
    case RcAction::AUTO_LOITER: return literal ? AutopilotMode::AUTO_LOITER : AutopilotMode::POSCTL;
    case RcAction::THROTTLE_TOGGLED: return literal ? before : AutopilotMode::POSCTL;
    case RcAction::AUTO_LAND:
    case RcAction::LAND: return AutopilotMode::LAND;
    default: return *requested_mode(a);
    }
}

inline bool hands_over_to_pilot(RcAction a)
{
    return a == RcAction::AUTO_LOITER || a == RcAction::THROTTLE_TOGGLED || (requested_mode(a) && is_manual(*requested_mode(a)));
}

inline bool expected_mode_check(const TestCase& t, const ExecutionProfile& p, bool literal)
{
    const auto& inj = injection(t, p);
    return mode_at(p, ack_time(t, p)) == expected_mode(t.injected_action, inj.mode_at_injection, literal);
}

} // namespace detail

inline const std::map<std::string, Predicate>& predicate_library()
{
    using namespace detail;
    static const std::map<std::string, Predicate> lib{
        {"context_reached", [](const TestCase&, const ExecutionProfile& p, const OracleThresholds&) { return p.context_reached; }},
        {"injected_in_target_context",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             if (t.injected_action == RcAction::NONE)
                 return true;
             const auto& inj = injection(t, p);
             if (!inj.delivered)
                 return false;
             return inj.app_state_at_injection == t.target_app_state || failsafe_before(p, inj.actual_time_ms);
         }},
        {"oscillation_count_at_least_threshold",
         [](const TestCase&, const ExecutionProfile& p, const OracleThresholds& th) {
             return p.oscillation_count >= th.oscillation_count;
         }},
        {"jerk_flag", [](const TestCase&, const ExecutionProfile& p, const OracleThresholds&) { return p.jerk_flag; }},
        {"landed_without_disarm",
         [](const TestCase&, const ExecutionProfile& p, const OracleThresholds&) { return p.landed_without_disarm; }},
        {"failsafe_fired_when_expected",
         [](const TestCase&, const ExecutionProfile& p, const OracleThresholds&) {
             if (!p.geofence_exit_observed)
                 return true;
             for (const auto& f : p.failsafe_events)
                 if (f.kind == FailsafeKind::GEOFENCE)
                     return true;
             return false;
         }},
        {"action_is_none",
         [](const TestCase& t, const ExecutionProfile&, const OracleThresholds&) {
             return t.injected_action == RcAction::NONE;
         }},
        {"mission_completed",
         [](const TestCase&, const ExecutionProfile& p, const OracleThresholds&) { return p.mission_completed; }},
        {"injection_acknowledged",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             return injection(t, p).acknowledged;
         }},
        {"failsafe_before_injection",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             return failsafe_before(p, injection(t, p).actual_time_ms);
         }},
        {"acknowledged_promptly",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds& th) {
             return ack_time(t, p) - injection(t, p).actual_time_ms <= th.ack_timeout_ms;
         }},
        {"expected_mode_after_action",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             return expected_mode_check(t, p, false);
         }},
        {"expected_mode_after_action_literal",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             return expected_mode_check(t, p, true);
         }},
        {"mission_completed_when_expected",
         [](const TestCase& t, const ExecutionProfile& p, const OracleThresholds&) {
             if (hands_over_to_pilot(t.injected_action))
                 return !p.mission_completed;
             return p.final_app_state == AppState::DONE;
         }},
        {"path_deviation_within_threshold",
         [](const TestCase&, const ExecutionProfile& p, const OracleThresholds& th) {
             return p.path_deviation_max <= th.path_deviation_m;
         }},
    };
    return lib;
}

// ---------------------------------------------------------------------------
// Tree

struct OracleNode
{
    // Internal node when `predicate` is non-empty.
    std::string predicate;
    std::unique_ptr<OracleNode> if_true;
    std::unique_ptr<OracleNode> if_false;
    // Leaf.
    Label label = Label::INVALID;
    std::string reason;

    bool is_leaf() const { return predicate.empty(); }
};

struct OracleTree
{
    std::string version;
    std::unique_ptr<OracleNode> root;
    OracleThresholds thresholds;
};

namespace detail {

inline std::unique_ptr<OracleNode> parse_node(const json& j, const std::string& where)
{
    if (!j.is_object())
        throw MalformedTree("node at " + where + " is not an object");
    auto n = std::make_unique<OracleNode>();
    if (j.contains("verdict")) {
        for (const auto& [k, _] : j.items())
            if (k != "verdict" && k != "reason")
                throw MalformedTree("unexpected key '" + k + "' in leaf at " + where);
        n->label = parse_label(j.at("verdict").get<std::string>());
        n->reason = j.value("reason", std::string());
        return n;
    }
    if (!j.contains("predicate"))
        throw MalformedTree("node at " + where + " is neither a leaf nor a predicate");
    for (const auto& [k, _] : j.items())
        if (k != "predicate" && k != "if_true" && k != "if_false")
            throw MalformedTree("unexpected key '" + k + "' in node at " + where);
    n->predicate = j.at("predicate").get<std::string>();
    if (!predicate_library().count(n->predicate))
        throw UnknownPredicate("unknown predicate '" + n->predicate + "'");
    if (!j.contains("if_true") || !j.contains("if_false"))
        throw MalformedTree("predicate '" + n->predicate + "' at " + where + " lacks a branch");
    n->if_true = parse_node(j.at("if_true"), where + "/" + n->predicate + "=1");
    n->if_false = parse_node(j.at("if_false"), where + "/" + n->predicate + "=0");
    return n;
}

inline json node_to_json(const OracleNode& n)
{
    if (n.is_leaf())
        return json{{"verdict", to_string(n.label)}, {"reason", n.reason}};
    return json{{"predicate", n.predicate}, {"if_true", node_to_json(*n.if_true)}, {"if_false", node_to_json(*n.if_false)}};
}

inline std::unique_ptr<OracleNode> leaf(Label l, std::string reason)
{
    auto n = std::make_unique<OracleNode>();
    n->label = l;
    n->reason = std::move(reason);
    return n;
}

inline std::unique_ptr<OracleNode> node(std::string pred, std::unique_ptr<OracleNode> t, std::unique_ptr<OracleNode> f)
{
    auto n = std::make_unique<OracleNode>();
    n->predicate = std::move(pred);
    n->if_true = std::move(t);
    n->if_false = std::move(f);
    return n;
}

} // namespace detail

inline OracleTree parse_tree(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.what());
    }
    if (!doc.is_object())
        throw MalformedTree("tree document must be an object");
    OracleTree t;
    if (doc.contains("root")) {
        t.version = doc.value("version", std::string());
        if (doc.contains("thresholds")) {
            const auto& th = doc["thresholds"];
            t.thresholds.path_deviation_m = th.value("path_deviation_m", t.thresholds.path_deviation_m);
            t.thresholds.ack_timeout_ms = th.value("ack_timeout_ms", t.thresholds.ack_timeout_ms);
            t.thresholds.oscillation_count = th.value("oscillation_count", t.thresholds.oscillation_count);
        }
        t.root = detail::parse_node(doc["root"], "root");
    } else {
        t.root = detail::parse_node(doc, "root");
    }
    return t;
}

inline json to_json(const OracleTree& t)
{
    return json{{"version", t.version},
                {"thresholds",
                 {{"path_deviation_m", t.thresholds.path_deviation_m},
                  {"ack_timeout_ms", t.thresholds.ack_timeout_ms},
                  {"oscillation_count", t.thresholds.oscillation_count}}},
                {"root", detail::node_to_json(*t.root)}};
}

inline std::string serialize_tree(const OracleTree& t) { return to_json(t).dump(2); }

/// v1 maps AUTO_LOITER and throttle-toggle expectations to POSCTL; v0 reads
/// them literally. Everything else is shared.
inline OracleTree default_tree(std::string_view version)
{
    using namespace detail;
    if (version != "v0" && version != "v1")
        throw MalformedTree("unknown default tree version '" + std::string(version) + "'");
    const std::string mode_pred = version == "v0" ? "expected_mode_after_action_literal" : "expected_mode_after_action";

    auto after_mode = node("mission_completed_when_expected",
                           node("path_deviation_within_threshold", leaf(Label::SUCCESS, "as-expected"),
                                leaf(Label::FAILURE, "excessive-deviation")),
                           leaf(Label::FAILURE, "unexpected-mission-outcome"));
    auto acked = node("acknowledged_promptly",
                      node(mode_pred, std::move(after_mode), leaf(Label::FAILURE, "unexpected-mode")),
                      leaf(Label::FAILURE, "delayed-mode-change"));
    auto injected = node("injection_acknowledged", std::move(acked),
                         node("failsafe_before_injection", leaf(Label::FAILURE, "ignored-during-failed-transition"),
                              leaf(Label::FAILURE, "mode-change-ignored")));
    auto none = node("action_is_none",
                     node("mission_completed", leaf(Label::SUCCESS, "nominal"), leaf(Label::FAILURE, "mission-aborted")),
                     std::move(injected));
    auto failsafe = node("failsafe_fired_when_expected", std::move(none), leaf(Label::FAILURE, "failsafe-not-triggered"));
    auto disarm = node("landed_without_disarm", leaf(Label::FAILURE, "px4-issue-within-mode"), std::move(failsafe));
    auto jerk = node("jerk_flag", leaf(Label::FAILURE, "thrashing"), std::move(disarm));
    auto osc = node("oscillation_count_at_least_threshold", leaf(Label::FAILURE, "erratic-mode-changes"), std::move(jerk));
    auto ctx = node("injected_in_target_context", std::move(osc), leaf(Label::INVALID, "wrong-context"));
    OracleTree t;
    t.version = std::string(version);
    t.root = node("context_reached", std::move(ctx), leaf(Label::INVALID, "context-not-met"));
    return t;
}

inline Verdict classify(const TestCase& test, const ExecutionProfile& profile, const OracleTree& tree)
{
    Verdict v;
    const OracleNode* n = tree.root.get();
    if (!n)
        throw MalformedTree("empty tree");
    while (!n->is_leaf()) {
        const bool value = predicate_library().at(n->predicate)(test, profile, tree.thresholds);
        v.fired_path.emplace_back(n->predicate, value);
        n = value ? n->if_true.get() : n->if_false.get();
    }
    v.label = n->label;
    v.reason = n->reason;
    return v;
}

} // namespace statefuzz

#endif // STATEFUZZ_ORACLE_HPP
