#ifndef STATEFUZZ_ANALYSIS_HPP
#define STATEFUZZ_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "statefuzz/error.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/oracle.hpp"
#include "statefuzz/random.hpp"

/**
 * @file analysis.hpp
 * @brief Failure identification: feature encoding of failed tests, k-means
 * with k-means++ seeding, elbow selection of K and representative picking.
 */

namespace statefuzz {

using Point = std::vector<double>;

struct FeatureVector
{
    std::string test_id;
    Point x;
    int y = 1;
};

struct EncodedFailures
{
    std::vector<std::string> header;
    std::vector<FeatureVector> vectors;
    /// Position of each vector's test in the encoded campaign.
    std::vector<std::size_t> test_index;

    std::vector<Point> points() const
    {
        std::vector<Point> out;
        out.reserve(vectors.size());
        for (const auto& v : vectors) out.push_back(v.x);
        return out;
    }
};

namespace detail {

template <class T, class F>
void one_hot(std::vector<double>& x, const std::vector<T>& domain, const T& value, F&& name_of,
             std::vector<std::string>* header, const char* prefix)
{
    for (const auto& d : domain) {
        if (header)
            header->push_back(std::string(prefix) + "=" + name_of(d));
        x.push_back(d == value ? 1.0 : 0.0);
    }
}

} // namespace detail

/// Encodes FAILURE verdicts only. delay_ms is min-max normalized over the
/// spec-wide band range; categoricals are one-hot over the spec domains.
inline EncodedFailures encode(const FuzzSpecification& spec, const std::vector<TestCase>& tests,
                              const std::vector<Verdict>& verdicts)
{
    EncodedFailures out;
    const double lo = static_cast<double>(spec.environment.min_delay_ms());
    const double hi = static_cast<double>(spec.environment.max_delay_ms());
    const auto& env = spec.environment;
    auto str = [](const auto& v) { return to_string(v); };
    auto id = [](const std::string& s) { return s; };

    for (std::size_t i = 0; i < tests.size() && i < verdicts.size(); ++i) {
        if (verdicts[i].label != Label::FAILURE)
            continue;
        const auto& t = tests[i];
        std::vector<std::string>* header = out.header.empty() ? &out.header : nullptr;
        Point x;
        if (header)
            header->push_back("delay_ms");
        x.push_back(hi > lo ? (static_cast<double>(t.delay_ms) - lo) / (hi - lo) : 0.0);
        detail::one_hot(x, spec.states, t.target_app_state, str, header, "state");
        detail::one_hot(x, spec.modes, t.target_px4_mode, str, header, "mode");
        detail::one_hot(x, spec.actions, t.injected_action, str, header, "action");
        detail::one_hot(x, env.throttle, t.environment.throttle, str, header, "throttle");
        detail::one_hot(x, env.geofence, t.environment.geofence, str, header, "geofence");
        detail::one_hot(x, env.wind, t.environment.wind, str, header, "wind");
        detail::one_hot(x, env.gps_noise, t.environment.gps_noise, str, header, "gps");
        detail::one_hot(x, env.compass_interference, t.environment.compass_interference, str, header, "compass");
        detail::one_hot(x, reason_codes(), verdicts[i].reason, id, header, "reason");
        out.vectors.push_back({t.id, std::move(x), 1});
        out.test_index.push_back(i);
    }
    if (out.vectors.empty())
        throw EmptyFailureSet("campaign has no FAILURE verdicts");
    return out;
}

inline double sq_dist(const Point& a, const Point& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct Clustering
{
    std::size_t k = 0;
    std::vector<Point> centroids;
    std::vector<std::size_t> assignments;
    std::vector<double> cluster_wcss;
    double wcss = 0.0;
    /// Total WCSS after each Lloyd iteration, last entry after refinement.
    std::vector<double> history;
    std::uint64_t seed = 0;
    int iterations = 0;
};

/// Recomputes per-cluster and total WCSS of an assignment around given centroids.
inline void recompute_wcss(Clustering& c, const std::vector<Point>& points)
{
    c.cluster_wcss.assign(c.k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i)
        c.cluster_wcss[c.assignments[i]] += sq_dist(points[i], c.centroids[c.assignments[i]]);
    c.wcss = 0.0;
    for (double w : c.cluster_wcss) c.wcss += w;
}

namespace detail {

inline std::size_t nearest(const Point& p, const std::vector<Point>& centroids)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = sq_dist(p, centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

inline std::vector<Point> kmeanspp(const std::vector<Point>& points, std::size_t k, Rng& rng)
{
    std::vector<Point> centroids;
    centroids.push_back(points[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(points.size())))]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d2[i] = sq_dist(points[i], centroids[nearest(points[i], centroids)]);
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            // D^2 weighting; zero-weight points are never picked.
            const double r = rng.uniform01() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (d2[i] == 0.0)
                    continue;
                pick = i;
                cum += d2[i];
                if (r < cum)
                    break;
            }
        } else {
            pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(points.size())));
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

/// Lloyd iterations from given centroids to an assignment fixpoint or 300 rounds.
inline Clustering lloyd(const std::vector<Point>& points, std::vector<Point> centroids, std::uint64_t seed)
{
    const std::size_t k = centroids.size();
    const std::size_t dim = points.front().size();
    Clustering c;
    c.k = k;
    c.seed = seed;
    c.centroids = std::move(centroids);
    c.assignments.assign(points.size(), k);
    for (int it = 0; it < 300; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t j = nearest(points[i], c.centroids);
            if (j != c.assignments[i]) {
                c.assignments[i] = j;
                changed = true;
            }
        }
        // Empty clusters take the point farthest from its own centroid.
        for (std::size_t j = 0; j < k; ++j) {
            if (std::find(c.assignments.begin(), c.assignments.end(), j) != c.assignments.end())
                continue;
            std::size_t far = 0;
            double far_d = -1.0;
            std::vector<std::size_t> sizes(k, 0);
            for (auto a : c.assignments) ++sizes[a];
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = sq_dist(points[i], c.centroids[c.assignments[i]]);
                if (sizes[c.assignments[i]] > 1 && d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            c.assignments[far] = j;
            c.centroids[j] = points[far];
            changed = true;
        }
        if (!changed && it > 0)
            break;
        std::vector<Point> sums(k, Point(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& s = sums[c.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
            ++counts[c.assignments[i]];
        }
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t d = 0; d < dim; ++d) c.centroids[j][d] = sums[j][d] / static_cast<double>(counts[j]);
        recompute_wcss(c, points);
        c.history.push_back(c.wcss);
        c.iterations = it + 1;
    }
    return c;
}

/// Hartigan single-point transfers: move a point when the exact change in
/// WCSS is negative, until no move helps. Sizes never drop to zero.
inline void hartigan(Clustering& c, const std::vector<Point>& points)
{
    const std::size_t k = c.k;
    const std::size_t dim = points.front().size();
    std::vector<double> n(k, 0.0);
    for (auto a : c.assignments) n[a] += 1.0;
    for (int round = 0; round < 100; ++round) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t a = c.assignments[i];
            if (n[a] <= 1.0)
                continue;
            const double remove = n[a] / (n[a] - 1.0) * sq_dist(points[i], c.centroids[a]);
            std::size_t best = a;
            double best_add = remove;
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a)
                    continue;
                const double add = n[b] / (n[b] + 1.0) * sq_dist(points[i], c.centroids[b]);
                if (add < best_add - 1e-12) {
                    best_add = add;
                    best = b;
                }
            }
            if (best == a)
                continue;
            for (std::size_t d = 0; d < dim; ++d) {
                c.centroids[a][d] = (c.centroids[a][d] * n[a] - points[i][d]) / (n[a] - 1.0);
                c.centroids[best][d] = (c.centroids[best][d] * n[best] + points[i][d]) / (n[best] + 1.0);
            }
            n[a] -= 1.0;
            n[best] += 1.0;
            c.assignments[i] = best;
            moved = true;
        }
        if (!moved)
            break;
    }
    // Recompute means exactly; incremental updates drift.
    std::vector<Point> sums(k, Point(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t d = 0; d < dim; ++d) sums[c.assignments[i]][d] += points[i][d];
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t d = 0; d < dim; ++d) c.centroids[j][d] = sums[j][d] / n[j];
    recompute_wcss(c, points);
    c.history.push_back(c.wcss);
}

} // namespace detail

inline Clustering kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed)
{
    if (k < 1 || k > points.size())
        throw DegenerateK("K=" + std::to_string(k) + " outside [1, " + std::to_string(points.size()) + "]");
    Rng rng(seed);
    auto c = detail::lloyd(points, detail::kmeanspp(points, k, rng), seed);
    detail::hartigan(c, points);
    return c;
}

/// Lowest WCSS over `restarts` seeded runs; ties keep the earliest restart.
inline Clustering kmeans_best(const std::vector<Point>& points, std::size_t k, std::uint64_t seed, int restarts)
{
    Clustering best;
    for (int r = 0; r < restarts; ++r) {
        auto c = kmeans(points, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
        if (r == 0 || c.wcss < best.wcss)
            best = std::move(c);
    }
    return best;
}

struct ElbowResult
{
    std::size_t k = 1;
    std::vector<double> wcss_curve;  ///< index K-1
    std::vector<Clustering> clusterings;
};

/// Index (0-based) of the knee: largest positive distance below the chord
/// joining the curve's endpoints, both axes scaled to [0, 1].
inline std::size_t knee_index(const std::vector<double>& curve)
{
    const std::size_t n = curve.size();
    if (n < 3)
        return 0;
    const double y0 = curve.front();
    const double y1 = curve.back();
    const double hi = *std::max_element(curve.begin(), curve.end());
    const double lo = *std::min_element(curve.begin(), curve.end());
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi)))
        return 0;
    const double ny0 = (y0 - lo) / (hi - lo);
    const double ny1 = (y1 - lo) / (hi - lo);
    const double len = std::hypot(1.0, ny1 - ny0);
    std::size_t best = 0;
    double best_d = 1e-12;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n - 1);
        const double y = (curve[i] - lo) / (hi - lo);
        const double chord = ny0 + (ny1 - ny0) * x;
        const double d = (chord - y) / len;
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// WCSS(K) for K = 1..k_max, best of 10 seeded restarts each plus one run
/// grown from the K-1 solution, then the elbow. k_max = 0 means min(10, n).
inline ElbowResult select_k(const std::vector<Point>& points, std::size_t k_max, std::uint64_t seed)
{
    if (points.empty())
        throw EmptyFailureSet("no points to cluster");
    if (k_max == 0)
        k_max = std::min<std::size_t>(10, points.size());
    if (k_max > points.size())
        throw DegenerateK("k_max exceeds the number of points");
    ElbowResult r;
    for (std::size_t k = 1; k <= k_max; ++k) {
        auto best = kmeans_best(points, k, derive_seed(seed, k), 10);
        if (k > 1) {
            // Grow the previous optimum by the point farthest from it.
            const auto& prev = r.clusterings.back();
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = sq_dist(points[i], prev.centroids[prev.assignments[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            auto centroids = prev.centroids;
            centroids.push_back(points[far]);
            auto grown = detail::lloyd(points, std::move(centroids), prev.seed);
            detail::hartigan(grown, points);
            if (grown.wcss < best.wcss)
                best = std::move(grown);
        }
        r.wcss_curve.push_back(best.wcss);
        r.clusterings.push_back(std::move(best));
    }
    r.k = knee_index(r.wcss_curve) + 1;
    return r;
}

struct Representative
{
    std::size_t cluster = 0;
    std::size_t closest = 0;   ///< index into the encoded points
    std::size_t farthest = 0;
    std::string closest_id;
    std::string farthest_id;
};

/// Per cluster, the points nearest to and farthest from the centroid; ties
/// go to the lowest test id.
inline std::vector<Representative> select_representatives(const Clustering& c, const std::vector<Point>& points,
                                                          const std::vector<std::string>& ids)
{
    std::vector<Representative> out;
    for (std::size_t j = 0; j < c.k; ++j) {
        Representative r;
        r.cluster = j;
        double best_near = std::numeric_limits<double>::infinity();
        double best_far = -1.0;
        bool any = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (c.assignments[i] != j)
                continue;
            any = true;
            const double d = sq_dist(points[i], c.centroids[j]);
            if (d < best_near || (d == best_near && ids[i] < r.closest_id)) {
                best_near = d;
                r.closest = i;
                r.closest_id = ids[i];
            }
            if (d > best_far || (d == best_far && ids[i] < r.farthest_id)) {
                best_far = d;
                r.farthest = i;
                r.farthest_id = ids[i];
            }
        }
        if (any)
            out.push_back(r);
    }
    return out;
}

inline json to_json(const Clustering& c)
{
    json centroids = json::array();
    for (const auto& m : c.centroids) centroids.push_back(m);
    return json{{"k", c.k},
                {"wcss", c.wcss},
                {"cluster_wcss", c.cluster_wcss},
                {"centroids", centroids},
                {"assignments", c.assignments},
                {"seed", c.seed},
                {"iterations", c.iterations}};
}

} // namespace statefuzz

#endif // STATEFUZZ_ANALYSIS_HPP
