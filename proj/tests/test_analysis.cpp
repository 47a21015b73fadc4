#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "common.hpp"
#include "oracles.hpp"

using namespace statefuzz;
using sfx::brute_force_optimum;
using sfx::partition_wcss;
using sfx::random_points;

namespace {

std::vector<Point> blobs(const std::vector<Point>& centers, std::size_t per, double spread, std::uint64_t seed,
                         std::vector<std::size_t>* labels = nullptr)
{
    Rng rng(seed);
    std::vector<Point> out;
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t i = 0; i < per; ++i) {
            Point p = centers[c];
            for (auto& v : p) v += (rng.uniform01() - 0.5) * spread;
            out.push_back(p);
            if (labels)
                labels->push_back(c);
        }
    return out;
}

} // namespace

TEST(Encode, DelayNormalizedOverSpecRange)
{
    auto spec = sfx::load_spec("sample");
    auto tests = generate(spec, {});
    tests[0].delay_ms = 600;
    std::vector<Verdict> verdicts(tests.size(), Verdict{Label::SUCCESS, "nominal", {}});
    verdicts[0] = {Label::FAILURE, "mode-change-ignored", {}};
    auto enc = encode(spec, tests, verdicts);
    ASSERT_EQ(enc.vectors.size(), 1u);
    EXPECT_EQ(enc.header[0], "delay_ms");
    EXPECT_NEAR(enc.vectors[0].x[0], (600.0 - 50.0) / (1200.0 - 50.0), 1e-12);
    EXPECT_EQ(enc.vectors[0].y, 1);
    EXPECT_EQ(enc.header.size(), enc.vectors[0].x.size());
}

TEST(Encode, OneHotBlocks)
{
    auto spec = sfx::load_spec("sample");
    auto tests = generate(spec, {});
    std::vector<Verdict> verdicts(tests.size(), Verdict{Label::FAILURE, "unexpected-mode", {}});
    auto enc = encode(spec, tests, verdicts);
    // Group dimensions by header prefix and check each block sums to one.
    for (const auto& v : enc.vectors) {
        std::map<std::string, double> block;
        for (std::size_t d = 1; d < enc.header.size(); ++d)
            block[enc.header[d].substr(0, enc.header[d].find('='))] += v.x[d];
        for (const auto& [name, sum] : block) EXPECT_EQ(sum, 1.0) << name;
        EXPECT_EQ(block.size(), 9u);
    }
    std::size_t actions = 0;
    for (const auto& h : enc.header) actions += h.rfind("action=", 0) == 0;
    EXPECT_EQ(actions, 3u);
}

TEST(Encode, Injective)
{
    auto spec = sfx::load_spec("fspec2");
    auto tests = generate(spec, {1, 3, MissionPolicy::FIRST_ONLY});
    for (auto& t : tests) t.delay_ms = spec.environment.band(t.delay_band).min_ms;
    std::vector<Verdict> verdicts(tests.size(), Verdict{Label::FAILURE, "unexpected-mode", {}});
    auto enc = encode(spec, tests, verdicts);
    std::set<Point> unique;
    for (const auto& v : enc.vectors) unique.insert(v.x);
    EXPECT_EQ(unique.size(), tests.size());
}

TEST(Encode, EmptyFailureSet)
{
    auto spec = sfx::load_spec("sample");
    auto tests = generate(spec, {});
    std::vector<Verdict> verdicts(tests.size(), Verdict{Label::SUCCESS, "nominal", {}});
    EXPECT_THROW(encode(spec, tests, verdicts), EmptyFailureSet);
}

TEST(KMeans, SingleClusterIsMean)
{
    Rng rng(1);
    auto pts = random_points(20, 3, rng);
    auto c = kmeans(pts, 1, 5);
    Point mean(3, 0.0);
    for (const auto& p : pts)
        for (std::size_t d = 0; d < 3; ++d) mean[d] += p[d] / 20.0;
    double var = 0;
    for (const auto& p : pts) var += sq_dist(p, mean);
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(c.centroids[0][d], mean[d], 1e-12);
    EXPECT_NEAR(c.wcss, var, 1e-9);
}

TEST(KMeans, OnePointPerCluster)
{
    Rng rng(2);
    auto pts = random_points(9, 2, rng);
    EXPECT_NEAR(kmeans(pts, 9, 1).wcss, 0.0, 1e-12);
    EXPECT_THROW(kmeans(pts, 10, 1), DegenerateK);
    EXPECT_THROW(kmeans(pts, 0, 1), DegenerateK);
}

TEST(KMeans, Invariants)
{
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto pts = random_points(25, 4, rng);
        const std::size_t k = 1 + trial % 5;
        auto c = kmeans(pts, k, trial);
        ASSERT_FALSE(c.history.empty());
        for (std::size_t i = 1; i < c.history.size(); ++i) EXPECT_LE(c.history[i], c.history[i - 1] + 1e-12);
        std::vector<int> label(c.assignments.begin(), c.assignments.end());
        EXPECT_NEAR(c.wcss, partition_wcss(pts, label, static_cast<int>(k)), 1e-9);
        double sum = 0;
        for (double w : c.cluster_wcss) sum += w;
        EXPECT_NEAR(sum, c.wcss, 1e-9);
        auto again = kmeans(pts, k, trial);
        EXPECT_EQ(again.assignments, c.assignments);
        EXPECT_EQ(again.wcss, c.wcss);
    }
}

TEST(KMeans, TwoBlobsMatchLabels)
{
    std::vector<std::size_t> labels;
    auto pts = blobs({{0, 0}, {10, 10}}, 6, 1.0, 4, &labels);
    auto c = kmeans(pts, 2, 9);
    for (std::size_t i = 0; i < pts.size(); ++i)
        EXPECT_EQ(c.assignments[i] == c.assignments[0], labels[i] == labels[0]);
    EXPECT_NEAR(c.wcss, brute_force_optimum(pts, 2), 1e-9);
}

TEST(KMeans, BestOfFiftyMatchesExhaustive)
{
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 6 + trial % 7;
        auto pts = random_points(n, 2 + trial % 3, rng);
        for (int k = 1; k <= 3; ++k)
            EXPECT_NEAR(kmeans_best(pts, k, trial, 50).wcss, brute_force_optimum(pts, k), 1e-9)
                << "n=" << n << " k=" << k;
    }
}

TEST(Elbow, ThreeBlobs)
{
    auto pts = blobs({{0, 0}, {10, 0}, {5, 9}}, 8, 1.0, 6);
    auto r = select_k(pts, 8, 1);
    EXPECT_EQ(r.k, 3u);
    ASSERT_EQ(r.wcss_curve.size(), 8u);
    for (std::size_t i = 1; i < r.wcss_curve.size(); ++i) EXPECT_LE(r.wcss_curve[i], r.wcss_curve[i - 1]);
}

TEST(Elbow, TwoBlobs)
{
    auto pts = blobs({{0, 0, 0}, {6, 6, 6}}, 10, 1.0, 8);
    EXPECT_EQ(select_k(pts, 8, 2).k, 2u);
}

TEST(Elbow, IdenticalPoints)
{
    std::vector<Point> pts(7, Point{0.3, 0.3});
    auto r = select_k(pts, 0, 1);
    EXPECT_EQ(r.k, 1u);
    EXPECT_EQ(r.wcss_curve.size(), 7u);
}

TEST(Elbow, MonotoneOnRandomData)
{
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        auto pts = random_points(15 + trial, 5, rng);
        auto r = select_k(pts, 10, trial);
        for (std::size_t i = 1; i < r.wcss_curve.size(); ++i)
            EXPECT_LE(r.wcss_curve[i], r.wcss_curve[i - 1]) << "trial " << trial << " K=" << i + 1;
    }
}

TEST(Representatives, Cases)
{
    std::vector<Point> pts{{0, 0}, {1, 0}, {2, 0}, {50, 50}};
    Clustering c;
    c.k = 2;
    c.assignments = {0, 0, 0, 1};
    c.centroids = {{1, 0}, {50, 50}};
    auto reps = select_representatives(c, pts, {"a", "b", "c", "d"});
    ASSERT_EQ(reps.size(), 2u);
    EXPECT_EQ(reps[0].closest_id, "b");
    EXPECT_EQ(reps[0].farthest_id, "a");  // tie with "c", lowest id wins
    EXPECT_EQ(reps[1].closest_id, "d");
    EXPECT_EQ(reps[1].farthest_id, "d");
}
