#ifndef STATEFUZZ_GEOMETRY_HPP
#define STATEFUZZ_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace statefuzz {

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Local-frame position in meters; z is height above the home point.
struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec2 xy() const { return {x, y}; }

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

namespace geometry {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b)
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b)
{
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y
        && p.y <= std::max(a.y, b.y);
}

/// Closed-segment intersection test, collinear overlaps included.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(a, c, d)) return true;
    if (d2 == 0 && on_segment(b, c, d)) return true;
    if (d3 == 0 && on_segment(c, a, b)) return true;
    if (d4 == 0 && on_segment(d, a, b)) return true;
    return false;
}

/// A polygon (implicitly closed) is simple when no two non-adjacent edges meet.
inline bool is_simple_polygon(const std::vector<Vec2>& poly)
{
    const std::size_t n = poly.size();
    if (n < 3)
        return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if (a == b)
            return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent)
                continue;
            if (segments_intersect(a, b, poly[j], poly[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

/// Even-odd rule; points on the boundary count as inside.
inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly)
{
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if (cross(a, b, p) == 0 && on_segment(p, a, b))
            return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_at = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_at)
                inside = !inside;
        }
    }
    return inside;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - p.x;
    const double ey = a.y + t * dy - p.y;
    return std::sqrt(ex * ex + ey * ey);
}

inline double distance_to_boundary(const Vec2& p, const std::vector<Vec2>& poly)
{
    double best = INFINITY;
    for (std::size_t i = 0; i < poly.size(); ++i)
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    return best;
}

} // namespace geometry
} // namespace statefuzz

#endif // STATEFUZZ_GEOMETRY_HPP
