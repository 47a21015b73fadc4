#ifndef STATEFUZZ_CUTSET_HPP
#define STATEFUZZ_CUTSET_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/oracle.hpp"
#include "statefuzz/testgen.hpp"

/**
 * @file cutset.hpp
 * @brief Truth tables from focused re-fuzzing, minimal cut sets over the
 * valid rows, and fault trees (DOT and JSON).
 *
 * Only rows present in a table are valid; every other assignment of its
 * columns is a don't-care. A row counts as a definite failure only at a
 * 100% failure rate. Rows with 0 < rate < 100 are flaky: they never
 * support a cut set and are reported as residual risk.
 */

namespace statefuzz {

inline constexpr const char* not_applicable = "N/A";

struct Literal
{
    std::string column;
    std::string value;

    friend bool operator==(const Literal&, const Literal&) = default;
    friend auto operator<=>(const Literal&, const Literal&) = default;
};

inline std::string to_string(const Literal& l) { return l.column + "=" + l.value; }

using CutSet = std::vector<Literal>;

inline std::string to_string(const CutSet& c)
{
    std::string s = "{";
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? ", " : "") + to_string(c[i]);
    return s + "}";
}

struct TruthRow
{
    std::vector<std::string> values;
    int runs = 0;
    int failures = 0;
    /// INVALID runs, excluded from `runs`.
    int invalid = 0;

    double failure_rate() const { return runs ? 100.0 * failures / runs : 0.0; }
    int status() const { return failures > 0 ? 1 : 0; }
    bool definite_failure() const { return runs > 0 && failures == runs; }
    bool flaky() const { return failures > 0 && failures < runs; }

    friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

struct TruthTable
{
    std::vector<std::string> columns;
    std::vector<TruthRow> rows;
    /// Literals shared by every row (the representative's fixed context).
    std::vector<Literal> held;
    /// Rows before the observed-predicate split; empty when no split happened.
    std::vector<std::string> unsplit_columns;
    std::vector<TruthRow> unsplit_rows;
    std::string reason;

    bool split() const { return !unsplit_columns.empty(); }

    std::vector<TruthRow> residual_risk() const
    {
        std::vector<TruthRow> out;
        for (const auto& r : rows)
            if (r.flaky())
                out.push_back(r);
        return out;
    }

    friend bool operator==(const TruthTable&, const TruthTable&) = default;
};

// ---------------------------------------------------------------------------
// Minimization

namespace detail {

struct Encoded
{
    std::vector<std::vector<std::string>> domains;  // per column, sorted
    std::vector<std::size_t> radix;                 // domain size + 1 ('*' is the last digit)
    std::vector<std::size_t> stride;
    std::size_t size = 1;
};

inline Encoded encode_table(const TruthTable& t)
{
    Encoded e;
    e.domains.resize(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        std::set<std::string> vals;
        for (const auto& r : t.rows) vals.insert(r.values[c]);
        e.domains[c].assign(vals.begin(), vals.end());
    }
    e.radix.resize(t.columns.size());
    e.stride.resize(t.columns.size());
    for (std::size_t c = t.columns.size(); c-- > 0;) {
        e.radix[c] = e.domains[c].size() + 1;
        e.stride[c] = e.size;
        e.size *= e.radix[c];
    }
    return e;
}

inline std::size_t digit(std::size_t code, const Encoded& e, std::size_t c) { return code / e.stride[c] % e.radix[c]; }

} // namespace detail

/// All prime conjunctions: sufficient (matches at least one valid row, all
/// of them definite failures) and no single literal can be dropped. Ordered
/// by (size, literal list).
inline std::vector<CutSet> minimize(const TruthTable& table)
{
    using namespace detail;
    const std::size_t p = table.columns.size();
    const Encoded e = encode_table(table);
    if (e.size > (std::size_t{1} << 26))
        throw ConfigError("truth table too wide to minimize");

    // fail/pass counts per conjunction via a mixed-radix superset sum.
    std::vector<std::uint32_t> fail(e.size, 0), pass(e.size, 0);
    for (const auto& r : table.rows) {
        std::size_t code = 0;
        for (std::size_t c = 0; c < p; ++c) {
            const auto& d = e.domains[c];
            code += static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), r.values[c]) - d.begin()) * e.stride[c];
        }
        (r.definite_failure() ? fail : pass)[code] += 1;
    }
    for (std::size_t c = 0; c < p; ++c) {
        const std::size_t star = e.radix[c] - 1;
        for (std::size_t code = 0; code < e.size; ++code) {
            const std::size_t dg = digit(code, e, c);
            if (dg == star)
                continue;
            const std::size_t to = code + (star - dg) * e.stride[c];
            fail[to] += fail[code];
            pass[to] += pass[code];
        }
    }
    auto sufficient = [&](std::size_t code) { return fail[code] > 0 && pass[code] == 0; };

    std::vector<CutSet> out;
    for (std::size_t code = 0; code < e.size; ++code) {
        if (!sufficient(code))
            continue;
        bool prime = true;
        CutSet cs;
        for (std::size_t c = 0; c < p && prime; ++c) {
            const std::size_t dg = digit(code, e, c);
            const std::size_t star = e.radix[c] - 1;
            if (dg == star)
                continue;
            if (sufficient(code + (star - dg) * e.stride[c]))
                prime = false;
            cs.push_back({table.columns[c], e.domains[c][dg]});
        }
        if (prime)
            out.push_back(std::move(cs));
    }
    std::sort(out.begin(), out.end(), [](const CutSet& a, const CutSet& b) {
        if (a.size() != b.size())
            return a.size() < b.size();
        return a < b;
    });
    return out;
}

inline bool matches(const CutSet& cs, const std::vector<std::string>& columns, const std::vector<std::string>& values)
{
    for (const auto& l : cs) {
        auto it = std::find(columns.begin(), columns.end(), l.column);
        if (it == columns.end())
            continue;
        if (values[static_cast<std::size_t>(it - columns.begin())] != l.value)
            return false;
    }
    return true;
}

/// Picks primes covering every definite-failure row: essential primes
/// first, then greedily by rows covered with (size, literal list) as the
/// tie-break. Held literals are prepended to each result.
inline std::vector<CutSet> extract_cut_sets(const TruthTable& table)
{
    const auto primes = minimize(table);
    std::vector<std::size_t> failing;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        if (table.rows[i].definite_failure())
            failing.push_back(i);

    std::vector<std::vector<std::size_t>> covers(primes.size());
    for (std::size_t j = 0; j < primes.size(); ++j)
        for (auto i : failing)
            if (matches(primes[j], table.columns, table.rows[i].values))
                covers[j].push_back(i);

    std::set<std::size_t> uncovered(failing.begin(), failing.end());
    std::vector<std::size_t> chosen;
    auto take = [&](std::size_t j) {
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end())
            return;
        chosen.push_back(j);
        for (auto i : covers[j]) uncovered.erase(i);
    };
    for (auto i : failing) {
        std::size_t count = 0, only = 0;
        for (std::size_t j = 0; j < primes.size(); ++j)
            if (std::find(covers[j].begin(), covers[j].end(), i) != covers[j].end()) {
                ++count;
                only = j;
            }
        if (count == 1)
            take(only);
    }
    while (!uncovered.empty()) {
        std::size_t best = primes.size(), best_n = 0;
        for (std::size_t j = 0; j < primes.size(); ++j) {
            std::size_t n = 0;
            for (auto i : covers[j]) n += uncovered.count(i);
            if (n > best_n) {  // primes are already in (size, lex) order
                best_n = n;
                best = j;
            }
        }
        if (best == primes.size())
            break;
        take(best);
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<CutSet> out;
    for (auto j : chosen) {
        CutSet cs = table.held;
        cs.insert(cs.end(), primes[j].begin(), primes[j].end());
        out.push_back(std::move(cs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Truth table construction

/// Everything needed to execute and classify focused tests.
struct FocusRunner
{
    const FuzzSpecification& spec;
    const MissionSet& missions;
    const SutConfig& config;
    const OracleTree& tree;
    unsigned parallelism = 1;
};

struct FocusRun
{
    TestCase test;
    ExecutionProfile profile;
    Verdict verdict;
};

inline std::vector<FocusRun> run_focused(const std::vector<TestCase>& tests, const FocusRunner& runner)
{
    auto profiles = run_campaign(tests, runner.missions, runner.config, runner.parallelism);
    std::vector<FocusRun> out;
    out.reserve(tests.size());
    for (std::size_t i = 0; i < tests.size(); ++i) {
        Verdict v = classify(tests[i], profiles[i], runner.tree);
        out.push_back({tests[i], std::move(profiles[i]), std::move(v)});
    }
    return out;
}

inline std::string axis_value(const std::string& axis, const TestCase& t)
{
    if (axis == "action") return to_string(t.injected_action);
    if (axis == "delay_band") return t.injected_action == RcAction::NONE ? not_applicable : t.delay_band;
    if (axis == "context") return to_string(t.target_app_state) + "/" + to_string(t.target_px4_mode);
    if (axis == "throttle") return to_string(t.environment.throttle);
    if (axis == "geofence") return to_string(t.environment.geofence);
    if (axis == "wind") return to_string(t.environment.wind);
    if (axis == "gps") return to_string(t.environment.gps_noise);
    if (axis == "compass") return to_string(t.environment.compass_interference);
    if (axis == "mission") return t.mission_id;
    throw UnknownAxis("unknown focus axis '" + axis + "'");
}

inline std::string observed_mode(const FocusRun& r)
{
    if (r.test.injected_action == RcAction::NONE || r.profile.injections.empty())
        return not_applicable;
    return to_string(r.profile.injections.front().mode_at_injection);
}

/// Literals fixed by the representative: its app state, plus environment
/// values that are held away from their defaults.
inline std::vector<Literal> held_literals(const TestCase& rep, const std::vector<std::string>& axes)
{
    auto varied = [&](const char* a) { return std::find(axes.begin(), axes.end(), a) != axes.end(); };
    std::vector<Literal> held;
    if (!varied("context"))
        held.push_back({"app_state", to_string(rep.target_app_state)});
    const auto& e = rep.environment;
    if (!varied("throttle") && e.throttle != Throttle::MID) held.push_back({"throttle", to_string(e.throttle)});
    if (!varied("geofence") && e.geofence != GeofenceSetting::NONE) held.push_back({"geofence", to_string(e.geofence)});
    if (!varied("wind") && e.wind != Level::NONE) held.push_back({"wind", to_string(e.wind)});
    if (!varied("gps") && e.gps_noise != Level::NONE) held.push_back({"gps", to_string(e.gps_noise)});
    if (!varied("compass") && e.compass_interference != Level::NONE)
        held.push_back({"compass", to_string(e.compass_interference)});
    return held;
}

/// Groups runs into rows over `columns`; `mode_split` appends the observed
/// mode_at_injection. INVALID runs only count in `invalid`.
inline std::vector<TruthRow> tabulate(const std::vector<FocusRun>& runs, const std::vector<std::string>& axes,
                                      bool mode_split)
{
    std::vector<TruthRow> rows;
    std::map<std::vector<std::string>, std::size_t> index;
    for (const auto& r : runs) {
        std::vector<std::string> key;
        for (const auto& a : axes) key.push_back(axis_value(a, r.test));
        if (mode_split)
            key.push_back(observed_mode(r));
        auto [it, fresh] = index.emplace(key, rows.size());
        if (fresh)
            rows.push_back({key, 0, 0, 0});
        auto& row = rows[it->second];
        if (r.verdict.label == Label::INVALID) {
            ++row.invalid;
            continue;
        }
        ++row.runs;
        if (r.verdict.label == Label::FAILURE)
            ++row.failures;
    }
    rows.erase(std::remove_if(rows.begin(), rows.end(), [](const TruthRow& r) { return r.runs == 0; }), rows.end());
    return rows;
}

/// True when grouping a mixed cell's runs by observed mode leaves only
/// 0% and 100% groups.
inline bool mode_separates(const std::vector<FocusRun>& runs, const std::vector<std::string>& axes,
                           const std::vector<std::string>& cell)
{
    std::map<std::string, std::pair<int, int>> by_mode;  // failures, valid runs
    for (const auto& r : runs) {
        if (r.verdict.label == Label::INVALID)
            continue;
        std::vector<std::string> key;
        for (const auto& a : axes) key.push_back(axis_value(a, r.test));
        if (key != cell)
            continue;
        auto& [f, n] = by_mode[observed_mode(r)];
        ++n;
        if (r.verdict.label == Label::FAILURE)
            ++f;
    }
    for (const auto& [_, fn] : by_mode)
        if (fn.first != 0 && fn.first != fn.second)
            return false;
    return true;
}

/// Builds a table from already executed runs.
inline TruthTable tabulate_truth_table(const std::vector<FocusRun>& runs, const TestCase& rep,
                                       std::vector<std::string> axes, const std::string& reason)
{
    if (std::find(axes.begin(), axes.end(), "action") == axes.end())
        axes.insert(axes.begin(), "action");
    TruthTable t;
    t.reason = reason;
    t.held = held_literals(rep, axes);
    t.columns = axes;
    t.rows = tabulate(runs, axes, false);
    if (t.rows.empty())
        throw InvalidOnly("every focused run around " + rep.id + " was INVALID");

    bool split = false;
    for (const auto& r : t.rows)
        if (r.flaky() && mode_separates(runs, axes, r.values))
            split = true;
    if (split) {
        t.unsplit_columns = t.columns;
        t.unsplit_rows = std::move(t.rows);
        t.columns.push_back("mode_at_injection");
        t.rows = tabulate(runs, axes, true);
    }
    return t;
}

/// Focused re-fuzz of `rep` over `axes` plus a NONE baseline, executed and
/// classified, then tabulated.
inline TruthTable build_truth_table(const TestCase& rep, const std::vector<std::string>& axes, int runs_per_cell,
                                    const FocusRunner& runner, std::uint64_t seed, const std::string& reason = {},
                                    std::vector<FocusRun>* runs_out = nullptr)
{
    auto tests = focused_generate(runner.spec, rep, axes, runs_per_cell, seed);

    std::vector<std::string> other;
    for (const auto& a : axes)
        if (a != "action" && a != "delay_band")
            other.push_back(a);
    TestCase base = rep;
    base.id = rep.id + "-none";
    for (auto t : focused_generate(runner.spec, base, other, runs_per_cell, derive_seed(seed, hash_name("baseline")))) {
        t.injected_action = RcAction::NONE;
        t.delay_ms = 0;
        tests.push_back(std::move(t));
    }

    auto runs = run_focused(tests, runner);
    auto table = tabulate_truth_table(runs, rep, axes, reason);
    if (runs_out)
        *runs_out = std::move(runs);
    return table;
}

struct CutSetCheck
{
    bool sound = true;
    int runs_matched = 0;
    int runs_failed = 0;
};

/// Re-executes the representative's cells with fresh seeds and checks that
/// every run satisfying the cut set (observed mode included) fails.
inline CutSetCheck verify_cut_set(const CutSet& cs, const TruthTable& table, const TestCase& rep,
                                  const std::vector<std::string>& axes, int runs_per_cell, const FocusRunner& runner,
                                  std::uint64_t seed)
{
    auto tests = focused_generate(runner.spec, rep, axes, runs_per_cell, seed);
    auto runs = run_focused(tests, runner);
    std::vector<std::string> cols = table.unsplit_columns.empty() ? table.columns : table.unsplit_columns;
    CutSetCheck check;
    for (const auto& r : runs) {
        if (r.verdict.label == Label::INVALID)
            continue;
        std::vector<std::string> values;
        for (const auto& c : cols) values.push_back(axis_value(c, r.test));
        auto all_cols = cols;
        all_cols.push_back("mode_at_injection");
        values.push_back(observed_mode(r));
        all_cols.push_back("app_state");
        values.push_back(to_string(r.test.target_app_state));
        if (!matches(cs, all_cols, values))
            continue;
        ++check.runs_matched;
        if (r.verdict.label == Label::FAILURE)
            ++check.runs_failed;
        else
            check.sound = false;
    }
    if (check.runs_matched == 0)
        check.sound = false;
    return check;
}

// ---------------------------------------------------------------------------
// Serialization of tables

inline std::string to_csv(const TruthTable& t, bool unsplit = false)
{
    const auto& cols = unsplit && t.split() ? t.unsplit_columns : t.columns;
    const auto& rows = unsplit && t.split() ? t.unsplit_rows : t.rows;
    std::ostringstream os;
    for (const auto& c : cols) os << c << ',';
    os << "status,failure_rate,failures,runs,invalid\n";
    for (const auto& r : rows) {
        for (const auto& v : r.values) os << v << ',';
        char rate[32];
        std::snprintf(rate, sizeof rate, "%.1f", r.failure_rate());
        os << r.status() << ',' << rate << ',' << r.failures << ',' << r.runs << ',' << r.invalid << '\n';
    }
    return os.str();
}

inline json to_json(const TruthTable& t)
{
    auto rows_json = [](const std::vector<TruthRow>& rows) {
        json a = json::array();
        for (const auto& r : rows)
            a.push_back(json{{"values", r.values},
                             {"status", r.status()},
                             {"failure_rate", r.failure_rate()},
                             {"failures", r.failures},
                             {"runs", r.runs},
                             {"invalid", r.invalid}});
        return a;
    };
    json held = json::array();
    for (const auto& l : t.held) held.push_back(json{{"column", l.column}, {"value", l.value}});
    return json{{"reason", t.reason},
                {"held", held},
                {"columns", t.columns},
                {"rows", rows_json(t.rows)},
                {"unsplit_columns", t.unsplit_columns},
                {"unsplit_rows", rows_json(t.unsplit_rows)}};
}

inline TruthTable truth_table_from_json(const json& j)
{
    TruthTable t;
    auto rows = [](const json& a) {
        std::vector<TruthRow> out;
        for (const auto& r : a)
            out.push_back({r.at("values").get<std::vector<std::string>>(), r.at("runs").get<int>(),
                           r.at("failures").get<int>(), r.at("invalid").get<int>()});
        return out;
    };
    t.reason = j.at("reason").get<std::string>();
    for (const auto& l : j.at("held")) t.held.push_back({l.at("column").get<std::string>(), l.at("value").get<std::string>()});
    t.columns = j.at("columns").get<std::vector<std::string>>();
    t.rows = rows(j.at("rows"));
    t.unsplit_columns = j.at("unsplit_columns").get<std::vector<std::string>>();
    t.unsplit_rows = rows(j.at("unsplit_rows"));
    return t;
}

// ---------------------------------------------------------------------------
// Fault trees

enum class LiteralTag
{
    STATE,
    ACTION,
    ENVIRONMENT,
};

inline std::string to_string(LiteralTag t)
{
    switch (t) {
    case LiteralTag::STATE: return "state";
    case LiteralTag::ACTION: return "action";
    case LiteralTag::ENVIRONMENT: return "environment";
    }
    return "?";
}

inline LiteralTag tag_of(const Literal& l)
{
    if (l.column == "app_state" || l.column == "mode_at_injection" || l.column == "context")
        return LiteralTag::STATE;
    if (l.column == "action")
        return LiteralTag::ACTION;
    return LiteralTag::ENVIRONMENT;
}

struct FaultTree
{
    std::string root;        ///< oracle reason code
    std::string description;
    std::vector<CutSet> cut_sets;

    bool empty() const { return cut_sets.empty(); }

    friend bool operator==(const FaultTree&, const FaultTree&) = default;
};

inline FaultTree build_fault_tree(const std::vector<CutSet>& cut_sets, const TestCase& rep, const TruthTable& table)
{
    FaultTree t;
    t.root = table.reason.empty() ? std::string("failure") : table.reason;
    t.description = to_string(rep.injected_action) + " during " + to_string(rep.target_app_state) + " (" + rep.id + ")";
    t.cut_sets = cut_sets;
    return t;
}

inline json to_json(const FaultTree& t)
{
    json sets = json::array();
    for (const auto& cs : t.cut_sets) {
        json a = json::array();
        for (const auto& l : cs) a.push_back(json{{"column", l.column}, {"value", l.value}, {"tag", to_string(tag_of(l))}});
        sets.push_back(a);
    }
    json j{{"root", t.root}, {"description", t.description}, {"cut_sets", sets}};
    if (t.empty())
        j["annotation"] = "no failing conjunction";
    return j;
}

inline FaultTree fault_tree_from_json(const json& j)
{
    FaultTree t;
    try {
        t.root = j.at("root").get<std::string>();
        t.description = j.at("description").get<std::string>();
        for (const auto& a : j.at("cut_sets")) {
            CutSet cs;
            for (const auto& l : a) cs.push_back({l.at("column").get<std::string>(), l.at("value").get<std::string>()});
            t.cut_sets.push_back(std::move(cs));
        }
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("fault tree: ") + e.what());
    }
    return t;
}

namespace detail {

inline std::string dot_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out;
}

inline const char* leaf_color(LiteralTag t)
{
    switch (t) {
    case LiteralTag::STATE: return "yellow";
    case LiteralTag::ACTION: return "pink";
    case LiteralTag::ENVIRONMENT: return "palegreen";
    }
    return "white";
}

} // namespace detail

/// Root, then an OR gate when there is more than one cut set, one AND gate
/// per non-empty cut set, one colored leaf per literal.
inline std::string to_dot(const FaultTree& t)
{
    using detail::dot_escape;
    std::ostringstream os;
    os << "digraph fault_tree {\n";
    os << "  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n";
    os << "  root [shape=box, style=bold, label=\"" << dot_escape(t.root) << "\\n" << dot_escape(t.description)
       << (t.empty() ? "\\n(no failing conjunction)" : "") << "\"];\n";

    std::vector<std::size_t> nonempty;
    for (std::size_t i = 0; i < t.cut_sets.size(); ++i)
        if (!t.cut_sets[i].empty())
            nonempty.push_back(i);
    std::string parent = "root";
    if (nonempty.size() > 1) {
        os << "  or0 [shape=invhouse, label=\"OR\"];\n  root -> or0;\n";
        parent = "or0";
    }
    for (auto i : nonempty) {
        os << "  and" << i << " [shape=house, label=\"AND\"];\n";
        os << "  " << parent << " -> and" << i << ";\n";
        for (std::size_t k = 0; k < t.cut_sets[i].size(); ++k) {
            const auto& l = t.cut_sets[i][k];
            os << "  leaf" << i << '_' << k << " [shape=ellipse, style=filled, fillcolor="
               << detail::leaf_color(tag_of(l)) << ", label=\"" << dot_escape(to_string(l)) << "\"];\n";
            os << "  and" << i << " -> leaf" << i << '_' << k << ";\n";
        }
    }
    os << "}\n";
    return os.str();
}

} // namespace statefuzz

#endif // STATEFUZZ_CUTSET_HPP
