#ifndef STATEFUZZ_CAMPAIGN_HPP
#define STATEFUZZ_CAMPAIGN_HPP

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "statefuzz/analysis.hpp"
#include "statefuzz/cutset.hpp"
#include "statefuzz/error.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/oracle.hpp"
#include "statefuzz/sutmodel.hpp"
#include "statefuzz/testgen.hpp"

/**
 * @file campaign.hpp
 * @brief End-to-end pipeline: generate, execute, classify, cluster, focus,
 * minimize, emit. Flat-file storage under `<out>/<campaign-id>/`:
 *
 *     manifest.json            inputs, seeds, test list, counts
 *     <test-id>.json           {"test", "profile", "verdict"}
 *     clusters.json            encoding header, WCSS curve, clustering
 *     truthtables/<rep>.csv|json
 *     faulttrees/<rep>.dot|json
 *     cutsets.json             deduplicated cut sets with provenance
 *     report.txt
 */

namespace statefuzz {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw StorageError("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const fs::path& p, const std::string& text)
{
    std::error_code ec;
    if (p.has_parent_path())
        fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw StorageError("cannot write " + p.string());
    out << text;
    if (!out)
        throw StorageError("short write to " + p.string());
}

struct CampaignInputs
{
    FuzzSpecification spec;
    std::vector<MissionPlan> missions;
    OracleTree tree;
    SutConfig config;
    std::map<std::string, std::string> paths;  ///< role -> path, informational

    MissionSet mission_set() const
    {
        MissionSet out;
        for (const auto& m : missions) out[m.id] = std::make_shared<const MissionPlan>(m);
        return out;
    }
};

inline CampaignInputs load_inputs(const fs::path& spec, const std::vector<fs::path>& missions, const fs::path& oracle,
                                  const std::optional<fs::path>& sut)
{
    CampaignInputs in;
    in.spec = parse_fuzz_spec(read_file(spec), spec.stem().string());
    for (const auto& m : missions) in.missions.push_back(parse_mission(read_file(m)));
    in.tree = parse_tree(read_file(oracle));
    if (sut)
        in.config = parse_sut_config(read_file(*sut));
    in.paths["spec"] = spec.string();
    for (std::size_t i = 0; i < missions.size(); ++i) in.paths["mission" + std::to_string(i)] = missions[i].string();
    in.paths["oracle"] = oracle.string();
    if (sut)
        in.paths["sut"] = sut->string();
    return in;
}

struct PipelineOptions
{
    std::string campaign_id;
    fs::path out_dir;  ///< empty: keep everything in memory
    std::uint64_t seed = 1;
    unsigned parallelism = 1;
    int repetitions = 1;
    MissionPolicy mission_policy = MissionPolicy::CROSS_PRODUCT;
    std::vector<std::string> focus_axes{"action", "delay_band"};
    int runs_per_cell = 20;
    std::size_t k_max = 0;  ///< 0: min(10, failures)
    bool analyze = true;
};

struct Counts
{
    std::size_t generated = 0;
    std::size_t invalid = 0;
    std::size_t pass = 0;
    std::size_t fail = 0;
};

struct CutSetRecord
{
    CutSet cut_set;
    std::string reason;
    std::vector<std::string> representatives;
    bool sound = true;
    int verify_runs = 0;
};

struct FocusResult
{
    std::string representative;
    TruthTable table;
    std::vector<CutSet> cut_sets;
    std::vector<CutSetCheck> checks;
    FaultTree tree;
};

struct AnalysisResult
{
    bool empty_failure_set = false;
    std::vector<std::string> header;
    std::vector<std::string> failure_ids;
    ElbowResult elbow;
    Clustering clustering;
    std::vector<Representative> representatives;
    std::vector<FocusResult> focus;
    std::vector<CutSetRecord> cut_sets;
};

struct Campaign
{
    std::string id;
    std::vector<TestCase> tests;
    std::vector<ExecutionProfile> profiles;
    std::vector<Verdict> verdicts;
    Counts counts;
    std::vector<std::pair<std::string, CoverageReport>> coverage;
    std::optional<AnalysisResult> analysis;
    std::vector<std::string> artifacts;
};

inline Counts count_verdicts(const std::vector<Verdict>& verdicts)
{
    Counts c;
    c.generated = verdicts.size();
    for (const auto& v : verdicts) {
        if (v.label == Label::INVALID) ++c.invalid;
        else if (v.label == Label::SUCCESS) ++c.pass;
        else ++c.fail;
    }
    return c;
}

/// Runs one representative through focused re-fuzzing, minimization,
/// soundness re-execution and fault-tree assembly.
inline FocusResult focus_representative(const TestCase& rep, const std::string& reason, const CampaignInputs& in,
                                        const MissionSet& missions, const PipelineOptions& opt)
{
    FocusRunner runner{in.spec, missions, in.config, in.tree, opt.parallelism};
    const std::uint64_t seed = derive_seed(opt.seed, hash_name("focus:" + rep.id));
    FocusResult r;
    r.representative = rep.id;
    r.table = build_truth_table(rep, opt.focus_axes, opt.runs_per_cell, runner, seed, reason);
    r.cut_sets = extract_cut_sets(r.table);
    for (const auto& cs : r.cut_sets)
        r.checks.push_back(verify_cut_set(cs, r.table, rep, opt.focus_axes, opt.runs_per_cell, runner,
                                          derive_seed(seed, hash_name("verify"))));
    r.tree = build_fault_tree(r.cut_sets, rep, r.table);
    return r;
}

inline AnalysisResult analyze(const CampaignInputs& in, const MissionSet& missions, const std::vector<TestCase>& tests,
                              const std::vector<Verdict>& verdicts, const PipelineOptions& opt)
{
    AnalysisResult a;
    EncodedFailures enc;
    try {
        enc = encode(in.spec, tests, verdicts);
    } catch (const EmptyFailureSet&) {
        a.empty_failure_set = true;
        return a;
    }
    a.header = enc.header;
    for (const auto& v : enc.vectors) a.failure_ids.push_back(v.test_id);
    const auto points = enc.points();
    const std::size_t k_max = opt.k_max ? std::min(opt.k_max, points.size()) : std::min<std::size_t>(10, points.size());
    a.elbow = select_k(points, k_max, derive_seed(opt.seed, hash_name("elbow")));
    a.clustering = a.elbow.clusterings[a.elbow.k - 1];
    a.representatives = select_representatives(a.clustering, points, a.failure_ids);

    std::vector<std::size_t> reps;
    for (const auto& r : a.representatives)
        for (auto i : {r.closest, r.farthest})
            if (std::find(reps.begin(), reps.end(), i) == reps.end())
                reps.push_back(i);

    for (auto i : reps) {
        const std::size_t ti = enc.test_index[i];
        a.focus.push_back(focus_representative(tests[ti], verdicts[ti].reason, in, missions, opt));
        const auto& f = a.focus.back();
        for (std::size_t c = 0; c < f.cut_sets.size(); ++c) {
            auto it = std::find_if(a.cut_sets.begin(), a.cut_sets.end(),
                                   [&](const CutSetRecord& rec) { return rec.cut_set == f.cut_sets[c]; });
            if (it == a.cut_sets.end()) {
                a.cut_sets.push_back({f.cut_sets[c], f.table.reason, {}, true, 0});
                it = a.cut_sets.end() - 1;
            }
            it->representatives.push_back(f.representative);
            it->sound = it->sound && f.checks[c].sound;
            it->verify_runs += f.checks[c].runs_matched;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const CutSet& cs)
{
    json a = json::array();
    for (const auto& l : cs) a.push_back(json{{"column", l.column}, {"value", l.value}, {"tag", to_string(tag_of(l))}});
    return a;
}

inline json clusters_json(const AnalysisResult& a)
{
    if (a.empty_failure_set)
        return json{{"empty_failure_set", true}};
    json reps = json::array();
    for (const auto& r : a.representatives)
        reps.push_back(json{{"cluster", r.cluster}, {"closest", r.closest_id}, {"farthest", r.farthest_id}});
    return json{{"empty_failure_set", false},
                {"header", a.header},
                {"failures", a.failure_ids},
                {"k", a.elbow.k},
                {"wcss_curve", a.elbow.wcss_curve},
                {"clustering", to_json(a.clustering)},
                {"representatives", reps}};
}

inline json cutsets_json(const AnalysisResult& a)
{
    json out = json::array();
    for (const auto& r : a.cut_sets)
        out.push_back(json{{"cut_set", to_json(r.cut_set)},
                           {"reason", r.reason},
                           {"representatives", r.representatives},
                           {"sound", r.sound},
                           {"verify_runs", r.verify_runs}});
    return out;
}

inline std::string format_report(const Campaign& c)
{
    std::ostringstream os;
    os << "campaign " << c.id << "\n\n";
    os << "tests generated  " << c.counts.generated << "\n";
    os << "invalid          " << c.counts.invalid << "\n";
    os << "pass             " << c.counts.pass << "\n";
    os << "fail             " << c.counts.fail << "\n\n";

    for (const auto& [mission, cov] : c.coverage) {
        os << "coverage " << mission << ": " << (cov.complete() ? "complete" : "incomplete") << "\n";
        for (const auto& p : cov.pairs)
            if (!p.reachable)
                os << "  unreachable " << to_string(p.mode) << "/" << to_string(p.state) << "\n";
        if (!cov.geofence_covered)
            os << "  geofence context not covered\n";
    }
    os << "\n";

    std::map<std::string, std::size_t> by_reason;
    for (const auto& v : c.verdicts)
        if (v.label == Label::FAILURE)
            ++by_reason[v.reason];
    os << "failures by reason\n";
    if (by_reason.empty())
        os << "  no failures\n";
    for (const auto& [reason, n] : by_reason) os << "  " << reason << "  " << n << "\n";
    os << "\n";

    if (!c.analysis) {
        os << "analysis not run\n";
        return os.str();
    }
    const auto& a = *c.analysis;
    if (a.empty_failure_set) {
        os << "analysis skipped: EmptyFailureSet (no FAILED tests)\n";
        return os.str();
    }
    os << "clusters  K=" << a.elbow.k << "\n  WCSS";
    char buf[64];
    for (double w : a.elbow.wcss_curve) {
        std::snprintf(buf, sizeof buf, " %.4f", w);
        os << buf;
    }
    os << "\n";
    for (const auto& r : a.representatives) {
        std::size_t size = std::count(a.clustering.assignments.begin(), a.clustering.assignments.end(), r.cluster);
        os << "  cluster " << r.cluster << "  size " << size << "  closest " << r.closest_id << "  farthest "
           << r.farthest_id << "\n";
    }
    os << "\ncut sets\n";
    if (a.cut_sets.empty())
        os << "  no failing conjunction\n";
    for (const auto& r : a.cut_sets) {
        os << "  " << to_string(r.cut_set) << "  [" << r.reason << "]  " << (r.sound ? "sound" : "NOT SOUND") << " ("
           << r.verify_runs << " re-runs)  from";
        for (const auto& rep : r.representatives) os << " " << rep;
        os << "\n";
    }
    bool any_residual = false;
    for (const auto& f : a.focus)
        for (const auto& row : f.table.residual_risk()) {
            if (!any_residual)
                os << "\nresidual risk (flaky rows)\n";
            any_residual = true;
            std::snprintf(buf, sizeof buf, "%.1f", row.failure_rate());
            os << "  " << f.representative << " ";
            for (std::size_t i = 0; i < row.values.size(); ++i)
                os << (i ? "," : "") << f.table.columns[i] << "=" << row.values[i];
            os << "  " << buf << "% of " << row.runs << "\n";
        }
    os << "\nfault trees\n";
    for (const auto& f : a.focus) os << "  faulttrees/" << f.representative << ".dot\n";
    return os.str();
}

inline json stored_test_json(const TestCase& t, const ExecutionProfile& p, const Verdict& v)
{
    return json{{"test", to_json(t)}, {"profile", to_json(p)}, {"verdict", to_json(v)}};
}

inline std::string iso_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json options_json(const PipelineOptions& o)
{
    return json{{"seed", o.seed},
                {"repetitions", o.repetitions},
                {"mission_policy", o.mission_policy == MissionPolicy::CROSS_PRODUCT ? "cross-product" : "first-only"},
                {"focus_axes", o.focus_axes},
                {"runs_per_cell", o.runs_per_cell},
                {"k_max", o.k_max}};
}

inline void write_analysis(const fs::path& dir, Campaign& c)
{
    const auto& a = *c.analysis;
    write_file(dir / "clusters.json", clusters_json(a).dump(2) + "\n");
    c.artifacts.push_back("clusters.json");
    for (const auto& f : a.focus) {
        write_file(dir / "truthtables" / (f.representative + ".csv"), to_csv(f.table));
        write_file(dir / "truthtables" / (f.representative + ".json"), to_json(f.table).dump(2) + "\n");
        write_file(dir / "faulttrees" / (f.representative + ".dot"), to_dot(f.tree));
        write_file(dir / "faulttrees" / (f.representative + ".json"), to_json(f.tree).dump(2) + "\n");
        for (const char* p : {"truthtables/", "faulttrees/"})
            for (const char* ext : {".csv", ".json", ".dot"}) {
                const std::string rel = std::string(p) + f.representative + ext;
                if (fs::exists(dir / rel))
                    c.artifacts.push_back(rel);
            }
    }
    write_file(dir / "cutsets.json", cutsets_json(a).dump(2) + "\n");
    c.artifacts.push_back("cutsets.json");
}

inline void write_manifest(const fs::path& dir, const Campaign& c, const CampaignInputs& in, const PipelineOptions& opt,
                           const std::string& started)
{
    json tests = json::array();
    for (const auto& t : c.tests) tests.push_back(to_json(t));
    json missions = json::array();
    for (const auto& m : in.missions) missions.push_back(to_json(m));
    json paths = json::object();
    for (const auto& [k, v] : in.paths) paths[k] = v;
    json m{{"id", c.id},
           {"paths", paths},
           {"spec_id", in.spec.id},
           {"spec", to_json(in.spec)},
           {"missions", missions},
           {"oracle", to_json(in.tree)},
           {"sut_config", to_json(in.config)},
           {"generator", options_json(opt)},
           {"counts",
            {{"generated", c.counts.generated}, {"invalid", c.counts.invalid}, {"pass", c.counts.pass}, {"fail", c.counts.fail}}},
           {"artifacts", c.artifacts},
           {"timestamps", {{"started", started}, {"finished", iso_now()}}},
           {"tests", tests}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

/// generate, execute, classify, then (optionally) analyze; writes to
/// `opt.out_dir / id` when out_dir is set.
inline Campaign run_pipeline(const CampaignInputs& in, const PipelineOptions& opt)
{
    const std::string started = iso_now();
    in.config.validate_against(in.spec);
    Campaign c;
    c.id = opt.campaign_id.empty() ? in.spec.id + "-" + std::to_string(opt.seed) : opt.campaign_id;
    const auto missions = in.mission_set();
    for (const auto& m : in.missions) c.coverage.emplace_back(m.id, validate_coverage(in.spec, m));

    c.tests = generate(in.spec, {opt.repetitions, opt.seed, opt.mission_policy});
    c.profiles = run_campaign(c.tests, missions, in.config, opt.parallelism);
    for (std::size_t i = 0; i < c.tests.size(); ++i) c.verdicts.push_back(classify(c.tests[i], c.profiles[i], in.tree));
    c.counts = count_verdicts(c.verdicts);
    if (opt.analyze)
        c.analysis = analyze(in, missions, c.tests, c.verdicts, opt);

    if (!opt.out_dir.empty()) {
        const fs::path dir = opt.out_dir / c.id;
        for (std::size_t i = 0; i < c.tests.size(); ++i) {
            write_file(dir / (c.tests[i].id + ".json"), stored_test_json(c.tests[i], c.profiles[i], c.verdicts[i]).dump(2) + "\n");
            c.artifacts.push_back(c.tests[i].id + ".json");
        }
        if (c.analysis)
            write_analysis(dir, c);
        write_file(dir / "report.txt", format_report(c));
        c.artifacts.push_back("report.txt");
        write_manifest(dir, c, in, opt, started);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Stored campaigns

struct StoredCampaign
{
    fs::path dir;
    json manifest;
    CampaignInputs inputs;
    PipelineOptions options;
    std::vector<TestCase> tests;
};

inline StoredCampaign load_campaign(const fs::path& dir)
{
    StoredCampaign s;
    s.dir = dir;
    try {
        s.manifest = json::parse(read_file(dir / "manifest.json"));
        const auto& m = s.manifest;
        s.inputs.spec = parse_fuzz_spec(m.at("spec").dump(), m.at("spec_id").get<std::string>());
        for (const auto& mj : m.at("missions")) s.inputs.missions.push_back(parse_mission(mj.dump()));
        s.inputs.tree = parse_tree(m.at("oracle").dump());
        s.inputs.config = parse_sut_config(m.at("sut_config").dump());
        const auto& g = m.at("generator");
        s.options.campaign_id = m.at("id").get<std::string>();
        s.options.seed = g.at("seed").get<std::uint64_t>();
        s.options.repetitions = g.at("repetitions").get<int>();
        s.options.mission_policy =
            g.at("mission_policy").get<std::string>() == "first-only" ? MissionPolicy::FIRST_ONLY : MissionPolicy::CROSS_PRODUCT;
        s.options.focus_axes = g.at("focus_axes").get<std::vector<std::string>>();
        s.options.runs_per_cell = g.at("runs_per_cell").get<int>();
        s.options.k_max = g.at("k_max").get<std::size_t>();
        for (const auto& t : m.at("tests")) s.tests.push_back(test_case_from_json(t));
    } catch (const json::exception& e) {
        throw StorageError("manifest in " + dir.string() + ": " + e.what());
    }
    return s;
}

/// Re-executes one stored test from its manifest entry.
inline std::pair<ExecutionProfile, Verdict> replay(const StoredCampaign& s, const std::string& test_id)
{
    auto it = std::find_if(s.tests.begin(), s.tests.end(), [&](const TestCase& t) { return t.id == test_id; });
    if (it == s.tests.end())
        throw UnknownTestId("no test '" + test_id + "' in campaign " + s.dir.string());
    const auto missions = s.inputs.mission_set();
    const auto m = missions.find(it->mission_id);
    if (m == missions.end())
        throw UnknownTestId("test '" + test_id + "' names an unknown mission");
    Engine engine;
    auto profile = engine.execute(*it, m->second, s.inputs.config);
    auto verdict = classify(*it, profile, s.inputs.tree);
    return {std::move(profile), std::move(verdict)};
}

/// Reclassifies stored profiles (optionally with another oracle tree) and
/// reruns the analysis stage. No campaign test is simulated again.
inline Campaign analyze_stored(StoredCampaign& s, const std::optional<OracleTree>& tree, unsigned parallelism,
                               bool write = true)
{
    if (tree)
        s.inputs.tree = parse_tree(serialize_tree(*tree));
    s.options.parallelism = parallelism;
    Campaign c;
    c.id = s.options.campaign_id;
    c.tests = s.tests;
    for (const auto& t : s.tests) {
        const json stored = json::parse(read_file(s.dir / (t.id + ".json")));
        c.profiles.push_back(profile_from_json(stored.at("profile")));
        c.verdicts.push_back(classify(t, c.profiles.back(), s.inputs.tree));
    }
    c.counts = count_verdicts(c.verdicts);
    for (const auto& m : s.inputs.missions) c.coverage.emplace_back(m.id, validate_coverage(s.inputs.spec, m));
    c.analysis = analyze(s.inputs, s.inputs.mission_set(), c.tests, c.verdicts, s.options);
    if (write) {
        for (std::size_t i = 0; i < c.tests.size(); ++i) {
            write_file(s.dir / (c.tests[i].id + ".json"),
                       stored_test_json(c.tests[i], c.profiles[i], c.verdicts[i]).dump(2) + "\n");
            c.artifacts.push_back(c.tests[i].id + ".json");
        }
        std::error_code ec;
        fs::remove_all(s.dir / "truthtables", ec);
        fs::remove_all(s.dir / "faulttrees", ec);
        write_analysis(s.dir, c);
        write_file(s.dir / "report.txt", format_report(c));
        c.artifacts.push_back("report.txt");
        const std::string started = s.manifest.at("timestamps").at("started").get<std::string>();
        write_manifest(s.dir, c, s.inputs, s.options, started);
        s.manifest = json::parse(read_file(s.dir / "manifest.json"));
    }
    return c;
}

/// Focused re-fuzz of one stored test; writes its table and fault tree.
inline FocusResult focus_stored(const StoredCampaign& s, const std::string& test_id, unsigned parallelism)
{
    auto it = std::find_if(s.tests.begin(), s.tests.end(), [&](const TestCase& t) { return t.id == test_id; });
    if (it == s.tests.end())
        throw UnknownTestId("no test '" + test_id + "' in campaign " + s.dir.string());
    std::string reason;
    const fs::path stored = s.dir / (test_id + ".json");
    if (fs::exists(stored))
        reason = json::parse(read_file(stored)).at("verdict").at("reason").get<std::string>();
    PipelineOptions opt = s.options;
    opt.parallelism = parallelism;
    auto f = focus_representative(*it, reason, s.inputs, s.inputs.mission_set(), opt);
    write_file(s.dir / "truthtables" / (test_id + ".csv"), to_csv(f.table));
    write_file(s.dir / "truthtables" / (test_id + ".json"), to_json(f.table).dump(2) + "\n");
    write_file(s.dir / "faulttrees" / (test_id + ".dot"), to_dot(f.tree));
    write_file(s.dir / "faulttrees" / (test_id + ".json"), to_json(f.tree).dump(2) + "\n");
    return f;
}

} // namespace statefuzz

#endif // STATEFUZZ_CAMPAIGN_HPP
