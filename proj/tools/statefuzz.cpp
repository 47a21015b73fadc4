// statefuzz command line: run, analyze, focus, report, replay.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "statefuzz/statefuzz.hpp"

namespace sf = statefuzz;

namespace {

std::uint64_t env_seed(std::uint64_t fallback)
{
    const char* s = std::getenv("STATEFUZZ_SEED");
    if (!s || !*s)
        return fallback;
    try {
        return std::stoull(s, nullptr, 0);
    } catch (const std::exception&) {
        throw sf::ConfigError(std::string("STATEFUZZ_SEED is not an integer: ") + s);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"statefuzz: state-aware fuzzing of a simulated autopilot"};
    app.require_subcommand(1);

    unsigned parallelism = 1;
    app.add_option("-j,--parallelism", parallelism, "worker threads")->check(CLI::PositiveNumber);

    // run
    auto* run = app.add_subcommand("run", "run a campaign end to end");
    std::string spec, oracle, sut, out = "campaigns", id, policy = "cross-product";
    std::vector<std::string> missions;
    sf::PipelineOptions opt;
    std::string axes = "action,delay_band";
    bool no_analyze = false;
    run->add_option("--spec", spec, "fuzz specification (json)")->required()->check(CLI::ExistingFile);
    run->add_option("--mission", missions, "mission plan (json), repeatable")->required()->check(CLI::ExistingFile);
    run->add_option("--oracle", oracle, "oracle tree (json)")->required()->check(CLI::ExistingFile);
    run->add_option("--sut", sut, "SuT config (json); default healthy")->check(CLI::ExistingFile);
    run->add_option("--out", out, "output root")->capture_default_str();
    run->add_option("--id", id, "campaign id; default <spec>-<seed>");
    run->add_option("--seed", opt.seed, "master seed (STATEFUZZ_SEED overrides)")->capture_default_str();
    run->add_option("--repetitions", opt.repetitions, "runs per combination")->capture_default_str();
    run->add_option("--mission-policy", policy, "cross-product | first-only")
        ->check(CLI::IsMember({"cross-product", "first-only"}))
        ->capture_default_str();
    run->add_option("--focus-axes", axes, "comma separated focus axes")->capture_default_str();
    run->add_option("--runs-per-cell", opt.runs_per_cell, "focused runs per truth-table cell")->capture_default_str();
    run->add_option("--k-max", opt.k_max, "largest K tried by the elbow (0: min(10, failures))");
    run->add_flag("--no-analyze", no_analyze, "stop after classification");

    // analyze
    auto* ana = app.add_subcommand("analyze", "reclassify a stored campaign and redo the analysis");
    std::string dir, new_oracle;
    ana->add_option("dir", dir, "campaign directory")->required()->check(CLI::ExistingDirectory);
    ana->add_option("--oracle", new_oracle, "replacement oracle tree")->check(CLI::ExistingFile);

    // focus
    auto* foc = app.add_subcommand("focus", "focused re-fuzz of one stored test");
    std::string test;
    foc->add_option("dir", dir, "campaign directory")->required()->check(CLI::ExistingDirectory);
    foc->add_option("--test", test, "test id")->required();

    // report
    auto* rep = app.add_subcommand("report", "print the stored report");
    rep->add_option("dir", dir, "campaign directory")->required()->check(CLI::ExistingDirectory);

    // replay
    auto* rpl = app.add_subcommand("replay", "re-execute one stored test and print profile and verdict");
    bool trace = false;
    rpl->add_option("dir", dir, "campaign directory")->required()->check(CLI::ExistingDirectory);
    rpl->add_option("--test", test, "test id")->required();
    rpl->add_flag("--trace", trace, "include the full trace");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto in = sf::load_inputs(spec, {missions.begin(), missions.end()}, oracle,
                                      sut.empty() ? std::nullopt : std::optional<sf::fs::path>(sut));
            opt.seed = env_seed(opt.seed);
            opt.parallelism = parallelism;
            opt.mission_policy = policy == "first-only" ? sf::MissionPolicy::FIRST_ONLY : sf::MissionPolicy::CROSS_PRODUCT;
            opt.focus_axes.clear();
            std::stringstream ss(axes);
            for (std::string a; std::getline(ss, a, ',');)
                if (!a.empty()) opt.focus_axes.push_back(a);
            opt.analyze = !no_analyze;
            opt.campaign_id = id.empty() ? in.spec.id + "-" + std::to_string(opt.seed) : id;
            opt.out_dir = out;
            auto c = sf::run_pipeline(in, opt);
            std::cout << sf::format_report(c);
            std::cout << "\nwritten to " << (sf::fs::path(out) / opt.campaign_id).string() << "\n";
        } else if (*ana) {
            auto s = sf::load_campaign(dir);
            std::optional<sf::OracleTree> tree;
            if (!new_oracle.empty())
                tree = sf::parse_tree(sf::read_file(new_oracle));
            auto c = sf::analyze_stored(s, tree, parallelism);
            std::cout << sf::format_report(c);
        } else if (*foc) {
            auto s = sf::load_campaign(dir);
            auto f = sf::focus_stored(s, test, parallelism);
            std::cout << sf::to_csv(f.table);
            std::cout << "\ncut sets " << f.cut_sets.size() << "\n";
            for (const auto& cs : f.cut_sets) std::cout << "  " << sf::to_json(cs).dump() << "\n";
        } else if (*rep) {
            std::cout << sf::read_file(sf::fs::path(dir) / "report.txt");
        } else if (*rpl) {
            auto s = sf::load_campaign(dir);
            auto [profile, verdict] = sf::replay(s, test);
            auto pj = sf::to_json(profile);
            if (!trace)
                pj.erase("trace");
            std::cout << sf::json{{"test", test}, {"verdict", sf::to_json(verdict)}, {"profile", pj}}.dump(2) << "\n";
        }
    } catch (const sf::Error& e) {
        std::cerr << "statefuzz: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "statefuzz: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
