#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <tuple>
#include <utility>
#include <vector>

#include "faintedge/image.hpp"

namespace faintedge {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Additive sufficient statistics of a curve and its two offset families.
// Each *_int is a trapezoid-weighted sum of interpolated intensity, *_len the matching weight total.
struct CurveStats {
    double length = 0.0;
    double integral = 0.0;
    double plus_int = 0.0;
    double plus_len = 0.0;
    double minus_int = 0.0;
    double minus_len = 0.0;
    double plus_sq = 0.0;
    double minus_sq = 0.0;

    CurveStats& operator+=(const CurveStats& o) {
        length += o.length;
        integral += o.integral;
        plus_int += o.plus_int;
        plus_len += o.plus_len;
        minus_int += o.minus_int;
        minus_len += o.minus_len;
        plus_sq += o.plus_sq;
        minus_sq += o.minus_sq;
        return *this;
    }
    friend CurveStats operator+(CurveStats a, const CurveStats& b) { return a += b; }

    CurveStats reversed() const {
        CurveStats r = *this;
        std::swap(r.plus_int, r.minus_int);
        std::swap(r.plus_len, r.minus_len);
        std::swap(r.plus_sq, r.minus_sq);
        return r;
    }

    double mean() const { return length > 0.0 ? integral / length : 0.0; }

    // Pooled difference of the two offset families with the common-mode term removed:
    // 2 (S+ n- - S- n+) / (n+ + n-)^2, i.e. half the difference of the side means when both sides carry equal
    // length. Positive when the + side is brighter; zero when either side has no in-image samples.
    double signed_response() const {
        if (!(plus_len > 0.0) || !(minus_len > 0.0)) return 0.0;
        const double n = plus_len + minus_len;
        return 2.0 * (plus_int * minus_len - minus_int * plus_len) / (n * n);
    }

    double response() const { return std::abs(signed_response()); }

    // Length of an unclipped, symmetric curve whose response has the same noise variance.
    double effective_length(int w) const {
        if (!(plus_len > 0.0) || !(minus_len > 0.0)) return 0.0;
        const double n = plus_len + minus_len;
        return n * n * n / (4.0 * w * plus_len * minus_len);
    }

    // Pooled within-side intensity variance.
    double side_variance() const {
        double v = 0.0;
        int sides = 0;
        for (auto [s, q, n] : {std::tuple{plus_int, plus_sq, plus_len}, std::tuple{minus_int, minus_sq, minus_len}}) {
            if (n <= 0.0) continue;
            const double m = s / n;
            v += q / n - m * m;
            ++sides;
        }
        return sides ? std::max(0.0, v / sides) : 0.0;
    }
};

// Straight sub-segment of a detected curve, with its own statistics (beam-curve leaves).
struct EdgePiece {
    Point a;
    Point b;
    CurveStats stats;
    int tile = -1;
    std::int32_t key = -1;  // identity of the underlying leaf curve, shared by both orientations
};

enum class EdgeSource { lines, curves };
enum class OrientationClass { vertical = 0, horizontal = 1 };

// A detected edge. The + side of each polyline segment with direction d is the normal (d.y, -d.x);
// a positive response means the + side is brighter.
struct Edge {
    std::vector<Point> polyline;
    double length = 0.0;
    double response = 0.0;
    double min_sub = 0.0;
    double max_sub = 0.0;
    int level = 0;

    // Straight lines: grid identity and per-row filter values along the segment (class frame order).
    OrientationClass orientation_class = OrientationClass::vertical;
    int direction = 0;
    int grid_length = 0;
    bool partial = false;
    Point grid_from;  // endpoints of the full grid segment, unchanged when the edge is trimmed
    Point grid_to;
    std::vector<double> samples;
    std::vector<Point> sample_points;

    // Beam curves: leaf-level pieces in polyline order.
    std::vector<EdgePiece> pieces;

    double magnitude() const { return std::abs(response); }
};

struct EdgeSet {
    EdgeSource source = EdgeSource::lines;
    int width = 0;
    int height = 0;
    double family_pixels = 0.0;  // N used for the search-space size K_L
    std::vector<Edge> edges;

    std::size_t size() const { return edges.size(); }
    bool empty() const { return edges.empty(); }
};

// Calls f(x, y) for every Bresenham pixel from (x0, y0) to (x1, y1), endpoints included.
template <typename F>
void for_segment_pixels(long x0, long y0, long x1, long y1, F&& f) {
    const long dx = std::labs(x1 - x0), dy = -std::labs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    for (;;) {
        f(x0, y0);
        if (x0 == x1 && y0 == y1) break;
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

inline void draw_segment(EdgeMap& map, long x0, long y0, long x1, long y1) {
    for_segment_pixels(x0, y0, x1, y1, [&](long x, long y) {
        if (x >= 0 && y >= 0 && x < map.width() && y < map.height()) map(static_cast<int>(x), static_cast<int>(y)) = 1;
    });
}

// Bresenham over rounded vertices; pixels outside the map are dropped.
inline EdgeMap rasterize(const EdgeSet& edges, int width, int height) {
    EdgeMap map(width, height, 0);
    for (const Edge& e : edges.edges) {
        if (e.polyline.size() == 1) {
            draw_segment(map, std::lround(e.polyline[0].x), std::lround(e.polyline[0].y), std::lround(e.polyline[0].x),
                         std::lround(e.polyline[0].y));
        }
        for (std::size_t i = 1; i < e.polyline.size(); ++i) {
            const Point& a = e.polyline[i - 1];
            const Point& b = e.polyline[i];
            draw_segment(map, std::lround(a.x), std::lround(a.y), std::lround(b.x), std::lround(b.y));
        }
    }
    return map;
}

inline EdgeMap rasterize(const EdgeSet& edges) { return rasterize(edges, edges.width, edges.height); }

}  // namespace faintedge
