#ifndef STATEFUZZ_TESTS_ORACLES_HPP
#define STATEFUZZ_TESTS_ORACLES_HPP

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary.

#include <functional>
#include <limits>
#include <set>

#include "statefuzz/statefuzz.hpp"

namespace sfx {

using namespace statefuzz;

// Sum of squared distances to the mean of each labelled group.
inline double partition_wcss(const std::vector<Point>& pts, const std::vector<int>& label, int k)
{
    const std::size_t dim = pts[0].size();
    std::vector<Point> sum(k, Point(dim, 0.0));
    std::vector<int> n(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ++n[label[i]];
        for (std::size_t d = 0; d < dim; ++d) sum[label[i]][d] += pts[i][d];
    }
    double w = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t d = 0; d < dim; ++d) {
            const double m = sum[label[i]][d] / n[label[i]];
            w += (pts[i][d] - m) * (pts[i][d] - m);
        }
    return w;
}

// Exhaustive optimum over all partitions into at most k groups
// (restricted growth strings).
inline double brute_force_optimum(const std::vector<Point>& pts, int k)
{
    std::vector<int> label(pts.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
        if (i == pts.size()) {
            best = std::min(best, partition_wcss(pts, label, used));
            return;
        }
        for (int l = 0; l < std::min(used + 1, k); ++l) {
            label[i] = l;
            rec(i + 1, std::max(used, l + 1));
        }
    };
    rec(0, 0);
    return best;
}

inline std::vector<Point> random_points(std::size_t n, std::size_t dim, Rng& rng)
{
    std::vector<Point> pts(n, Point(dim));
    for (auto& p : pts)
        for (auto& v : p) v = rng.uniform01();
    return pts;
}

inline std::string col(std::size_t i) { return (i < 10 ? "p0" : "p") + std::to_string(i); }

struct RandomTable
{
    TruthTable table;
    std::size_t p = 0;
};

// Binary predicates, a random subset of assignments valid, status drawn
// from a hidden DNF with some noise and some flaky rows.
inline RandomTable random_table(Rng& rng, std::size_t p)
{
    RandomTable out;
    out.p = p;
    for (std::size_t c = 0; c < p; ++c) out.table.columns.push_back(col(c));

    std::vector<std::vector<int>> terms(1 + rng.uniform_int(0, 2));
    for (auto& t : terms) {
        t.assign(p, -1);
        for (std::size_t c = 0; c < p; ++c)
            if (rng.uniform01() < 0.35)
                t[c] = rng.uniform01() < 0.5;
    }
    auto hidden = [&](std::size_t a) {
        for (const auto& t : terms) {
            bool ok = true;
            for (std::size_t c = 0; c < p; ++c)
                ok = ok && (t[c] < 0 || t[c] == static_cast<int>((a >> c) & 1));
            if (ok)
                return true;
        }
        return false;
    };

    std::set<std::size_t> valid;
    if (p <= 6) {
        for (std::size_t a = 0; a < (std::size_t{1} << p); ++a)
            if (rng.uniform01() < 0.7)
                valid.insert(a);
    } else {
        for (int i = 0; i < 64; ++i) valid.insert(rng.uniform_int(0, (std::int64_t{1} << p) - 1));
    }
    for (auto a : valid) {
        TruthRow r;
        for (std::size_t c = 0; c < p; ++c) r.values.push_back((a >> c) & 1 ? "1" : "0");
        r.runs = 10;
        bool fail = hidden(a);
        if (rng.uniform01() < 0.1)
            fail = !fail;
        r.failures = fail ? 10 : 0;
        if (rng.uniform01() < 0.05)
            r.failures = 4;
        out.table.rows.push_back(r);
    }
    return out;
}

// Exhaustive search over all 3^p conjunctions. A conjunction (care mask,
// value bits) is sufficient when some valid row matches and every valid
// matching row always fails.
inline std::vector<CutSet> brute_force_minimize(const RandomTable& rt)
{
    const std::size_t p = rt.p;
    std::vector<std::pair<unsigned, bool>> rows;  // assignment bits, definite failure
    for (const auto& r : rt.table.rows) {
        unsigned bits = 0;
        for (std::size_t c = 0; c < p; ++c) bits |= (r.values[c] == "1" ? 1u : 0u) << c;
        rows.push_back({bits, r.definite_failure()});
    }
    auto sufficient = [&](unsigned care, unsigned value) {
        bool any = false;
        for (const auto& [bits, fails] : rows) {
            if ((bits & care) != value)
                continue;
            if (!fails)
                return false;
            any = true;
        }
        return any;
    };
    // Every proper subset, i.e. every nonempty set of dropped literals.
    auto minimal = [&](unsigned care, unsigned value) {
        for (unsigned drop = care; drop; drop = (drop - 1) & care)
            if (sufficient(care & ~drop, value & ~drop))
                return false;
        return true;
    };

    std::vector<CutSet> out;
    for (unsigned care = 0; care < (1u << p); ++care)
        for (unsigned value = care;; value = (value - 1) & care) {
            if (sufficient(care, value) && minimal(care, value)) {
                CutSet cs;
                for (std::size_t i = 0; i < p; ++i)
                    if (care >> i & 1)
                        cs.push_back({col(i), value >> i & 1 ? "1" : "0"});
                out.push_back(cs);
            }
            if (value == 0)
                break;
        }
    std::sort(out.begin(), out.end(), [](const CutSet& a, const CutSet& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

} // namespace sfx

#endif
