#include <gtest/gtest.h>

#include <cstdio>
#include <regex>

#include "common.hpp"

using namespace statefuzz;

namespace {

CampaignInputs inputs(const std::string& spec, const std::string& oracle, const std::string& sut)
{
    const auto root = sfx::source_dir() / "specs";
    return load_inputs(root / (spec + ".json"), {root / "missions" / "plan_a.json"}, root / "oracle" / (oracle + ".json"),
                       root / "sut" / (sut + ".json"));
}

PipelineOptions options(const fs::path& out, const std::string& id, std::uint64_t seed = 1)
{
    PipelineOptions o;
    o.campaign_id = id;
    o.out_dir = out;
    o.seed = seed;
    return o;
}

std::string strip_timestamps(std::string manifest)
{
    static const std::regex stamp(R"re("(started|finished)": "[^"]*")re");
    return std::regex_replace(manifest, stamp, "\"$1\": \"\"");
}

std::string run_cli(const std::string& args, int* status = nullptr)
{
    const std::string cmd = std::string(STATEFUZZ_CLI) + " " + args + " 2>&1";
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return out;
    char buf[4096];
    while (auto n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int rc = pclose(pipe);
    if (status)
        *status = WEXITSTATUS(rc);
    return out;
}

} // namespace

TEST(Pipeline, F2SingleCutSet)
{
    auto c = run_pipeline(inputs("fspec1", "v1", "f2"), options({}, "f2"));
    EXPECT_EQ(c.counts.generated, 45u);
    EXPECT_EQ(c.counts.invalid + c.counts.pass + c.counts.fail, c.counts.generated);
    EXPECT_GT(c.counts.fail, 0u);
    ASSERT_TRUE(c.analysis);
    ASSERT_EQ(c.analysis->cut_sets.size(), 1u);
    const auto& rec = c.analysis->cut_sets[0];
    EXPECT_EQ(rec.cut_set, (CutSet{{"app_state", "TAKEOFF"}, {"action", "POSCTL"}, {"mode_at_injection", "STABILIZED"}}));
    EXPECT_EQ(rec.reason, "mode-change-ignored");
    EXPECT_TRUE(rec.sound);
    EXPECT_TRUE(c.artifacts.empty());
}

TEST(Pipeline, HealthyHasNoFailures)
{
    auto c = run_pipeline(inputs("fspec1", "v1", "healthy"), options({}, "ok"));
    EXPECT_EQ(c.counts.fail, 0u);
    ASSERT_TRUE(c.analysis);
    EXPECT_TRUE(c.analysis->empty_failure_set);
    const auto report = format_report(c);
    EXPECT_NE(report.find("no failures"), std::string::npos);
    EXPECT_NE(report.find("EmptyFailureSet"), std::string::npos);
}

TEST(Pipeline, MultiFaultDistinctCutSets)
{
    auto c = run_pipeline(inputs("accept4", "v1", "multi"), options({}, "multi"));
    ASSERT_TRUE(c.analysis);
    EXPECT_GE(c.analysis->elbow.k, 3u);
    std::set<CutSet> sets;
    for (const auto& r : c.analysis->cut_sets) {
        EXPECT_TRUE(r.sound) << to_string(r.cut_set);
        sets.insert(r.cut_set);
    }
    EXPECT_TRUE(sets.count({{"app_state", "HOVERING"}, {"action", "AUTO_LAND"}}));
    EXPECT_TRUE(sets.count({{"app_state", "TAKEOFF"}, {"action", "RTL"}}));
    const auto report = format_report(c);
    EXPECT_NE(report.find("{app_state=HOVERING, action=AUTO_LAND}"), std::string::npos);
    EXPECT_NE(report.find("{app_state=TAKEOFF, action=RTL}"), std::string::npos);
}

TEST(Pipeline, ConfigMismatchRejected)
{
    auto in = inputs("sample", "v1", "healthy");
    EXPECT_THROW(run_pipeline(in, options({}, "x")), ConfigError);
}

TEST(Storage, ArtifactsWritten)
{
    const auto out = sfx::scratch("artifacts");
    auto c = run_pipeline(inputs("fspec1", "v1", "f2"), options(out, "a"));
    const auto dir = out / "a";
    for (const auto& a : c.artifacts) EXPECT_TRUE(fs::exists(dir / a)) << a;
    for (const char* f : {"manifest.json", "clusters.json", "cutsets.json", "report.txt"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    for (const auto& t : c.tests) EXPECT_TRUE(fs::exists(dir / (t.id + ".json"))) << t.id;
    for (const auto& f : c.analysis->focus) {
        EXPECT_TRUE(fs::exists(dir / "truthtables" / (f.representative + ".csv")));
        EXPECT_TRUE(fs::exists(dir / "faulttrees" / (f.representative + ".dot")));
    }
    const auto m = json::parse(read_file(dir / "manifest.json"));
    const auto& counts = m.at("counts");
    EXPECT_EQ(counts.at("invalid").get<int>() + counts.at("pass").get<int>() + counts.at("fail").get<int>(),
              counts.at("generated").get<int>());
    EXPECT_EQ(read_file(dir / "report.txt"), format_report(c));
}

TEST(Storage, RerunIsByteIdentical)
{
    const auto out1 = sfx::scratch("rerun1"), out2 = sfx::scratch("rerun2");
    auto opt2 = options(out2, "r");
    opt2.parallelism = 4;
    auto c1 = run_pipeline(inputs("fspec1", "v1", "f2"), options(out1, "r"));
    run_pipeline(inputs("fspec1", "v1", "f2"), opt2);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(out1 / "r")) {
        if (!e.is_regular_file())
            continue;
        const auto rel = fs::relative(e.path(), out1 / "r");
        auto a = read_file(e.path()), b = read_file(out2 / "r" / rel);
        if (rel == "manifest.json") {
            a = strip_timestamps(a);
            b = strip_timestamps(b);
        }
        EXPECT_EQ(a, b) << rel;
        ++compared;
    }
    EXPECT_GT(compared, c1.tests.size());
}

TEST(Storage, ReplayMatchesStored)
{
    const auto out = sfx::scratch("replay");
    auto c = run_pipeline(inputs("fspec1", "v1", "f2"), options(out, "p"));
    auto s = load_campaign(out / "p");
    ASSERT_EQ(s.tests, c.tests);
    for (std::size_t i : {std::size_t{0}, std::size_t{7}, c.tests.size() - 1}) {
        auto [profile, verdict] = replay(s, c.tests[i].id);
        EXPECT_EQ(profile, c.profiles[i]);
        EXPECT_EQ(verdict, c.verdicts[i]);
    }
    fs::remove(out / "p" / (c.tests[3].id + ".json"));
    EXPECT_EQ(replay(s, c.tests[3].id).first, c.profiles[3]);
    EXPECT_THROW(replay(s, "t99999"), UnknownTestId);
    EXPECT_THROW(load_campaign(out / "missing"), StorageError);
}

TEST(Storage, AnalyzeWithSwappedOracle)
{
    const auto out = sfx::scratch("swap");
    auto c = run_pipeline(inputs("accept5", "v0", "healthy"), options(out, "s"));
    EXPECT_GT(c.counts.fail, 0u);
    for (const auto& v : c.verdicts)
        if (v.label == Label::FAILURE)
            EXPECT_EQ(v.reason, "unexpected-mode");

    auto s = load_campaign(out / "s");
    auto again = analyze_stored(s, default_tree("v1"), 1);
    EXPECT_EQ(again.counts.fail, 0u);
    EXPECT_EQ(again.counts.generated, c.counts.generated);
    EXPECT_EQ(again.profiles, c.profiles);
    EXPECT_TRUE(again.analysis->empty_failure_set);
    auto reloaded = load_campaign(out / "s");
    EXPECT_EQ(serialize_tree(reloaded.inputs.tree), serialize_tree(default_tree("v1")));
    EXPECT_NE(read_file(out / "s" / "report.txt").find("no failures"), std::string::npos);
}

TEST(Storage, FocusStored)
{
    const auto out = sfx::scratch("focus");
    auto c = run_pipeline(inputs("fspec1", "v1", "f2"), options(out, "f"));
    std::string failing;
    for (std::size_t i = 0; i < c.tests.size() && failing.empty(); ++i)
        if (c.verdicts[i].label == Label::FAILURE)
            failing = c.tests[i].id;
    ASSERT_FALSE(failing.empty());
    auto s = load_campaign(out / "f");
    auto f = focus_stored(s, failing, 2);
    ASSERT_EQ(f.cut_sets.size(), 1u);
    EXPECT_EQ(f.table.reason, "mode-change-ignored");
    EXPECT_TRUE(fs::exists(out / "f" / "faulttrees" / (failing + ".dot")));
    EXPECT_THROW(focus_stored(s, "nope", 1), UnknownTestId);
}

TEST(Cli, RunReplayAndErrors)
{
    const auto out = sfx::scratch("cli");
    const auto specs = (sfx::source_dir() / "specs").string();
    int rc = -1;
    auto text = run_cli("run --spec " + specs + "/fspec1.json --mission " + specs + "/missions/plan_a.json --oracle " +
                            specs + "/oracle/v1.json --sut " + specs + "/sut/f2.json --out " + out.string() + " --id c",
                        &rc);
    EXPECT_EQ(rc, 0) << text;
    EXPECT_NE(text.find("{app_state=TAKEOFF, action=POSCTL, mode_at_injection=STABILIZED}"), std::string::npos);

    auto replayed = json::parse(run_cli("replay " + (out / "c").string() + " --test t00000", &rc));
    EXPECT_EQ(rc, 0);
    EXPECT_EQ(replayed.at("test"), "t00000");
    EXPECT_FALSE(replayed.at("profile").contains("trace"));

    EXPECT_EQ(run_cli("report " + (out / "c").string(), &rc), read_file(out / "c" / "report.txt"));

    text = run_cli("replay " + (out / "c").string() + " --test bogus", &rc);
    EXPECT_EQ(rc, 1);
    EXPECT_NE(text.find("UnknownTestId"), std::string::npos);
    text = run_cli("run --spec " + specs + "/missions/plan_a.json --mission " + specs + "/missions/plan_a.json --oracle " +
                       specs + "/oracle/v1.json --out " + out.string(),
                   &rc);
    EXPECT_EQ(rc, 1);
    EXPECT_NE(text.find("statefuzz: "), std::string::npos);
}
