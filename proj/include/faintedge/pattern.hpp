#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "faintedge/error.hpp"
#include "faintedge/image.hpp"

namespace faintedge {

struct PatternSpec {
    int side = 129;
    double contrast = 1.0;
};

struct TestPattern {
    GrayImage image;
    EdgeMap truth;
};

namespace pattern_layout {
// Geometry in the 129x129 reference frame; other sides scale by (side - 1) / 128. Stroke widths stay 2 px.
inline constexpr double reference_extent = 128.0;
inline constexpr double ring_center[2] = {36.0, 36.0};
inline constexpr double ring_radii[2] = {28.0, 18.0};
inline constexpr double vbar_x = 76.0;
inline constexpr double vbar_y[2] = {8.0, 120.0};
inline constexpr double dbar_from[2] = {86.0, 72.0};
inline constexpr double dbar_to[2] = {120.0, 122.0};
inline constexpr double triangle[3][2] = {{8.0, 76.0}, {60.0, 96.0}, {10.0, 120.0}};
inline constexpr double s_upper_center[2] = {106.0, 22.0};
inline constexpr double s_lower_center[2] = {106.0, 44.0};
inline constexpr double s_radius = 11.0;
inline constexpr double half_stroke = 1.0;
inline constexpr int min_side = 65;
}  // namespace pattern_layout

inline EdgeMap pattern_mask(int side) {
    namespace pl = pattern_layout;
    if (side < pl::min_side) throw ParameterError("pattern side must be at least 65");
    const double k = (side - 1) / pl::reference_extent;
    EdgeMap mask(side, side, 0);

    const double rcx = pl::ring_center[0] * k, rcy = pl::ring_center[1] * k;
    const double bx = std::round(pl::vbar_x * k);
    const double by0 = pl::vbar_y[0] * k, by1 = pl::vbar_y[1] * k;
    const double ax = pl::dbar_from[0] * k, ay = pl::dbar_from[1] * k;
    const double ex = pl::dbar_to[0] * k - ax, ey = pl::dbar_to[1] * k - ay;
    std::array<std::array<double, 2>, 3> tri{};
    for (int i = 0; i < 3; ++i) tri[i] = {pl::triangle[i][0] * k, pl::triangle[i][1] * k};
    const double sr = pl::s_radius * k;

    auto cross = [](double ox, double oy, double px, double py, double qx, double qy) {
        return (px - ox) * (qy - oy) - (py - oy) * (qx - ox);
    };
    auto in_triangle = [&](double x, double y) {
        const double d0 = cross(tri[0][0], tri[0][1], tri[1][0], tri[1][1], x, y);
        const double d1 = cross(tri[1][0], tri[1][1], tri[2][0], tri[2][1], x, y);
        const double d2 = cross(tri[2][0], tri[2][1], tri[0][0], tri[0][1], x, y);
        return (d0 >= 0 && d1 >= 0 && d2 >= 0) || (d0 <= 0 && d1 <= 0 && d2 <= 0);
    };
    // Arc test; phi measured counter-clockwise with y pointing up, degrees in (-180, 180].
    auto on_arc = [&](double x, double y, double cx, double cy, bool upper) {
        const double dx = x - cx, dy = y - cy;
        if (std::abs(std::hypot(dx, dy) - sr) >= pl::half_stroke) return false;
        const double phi = std::atan2(-dy, dx) * 180.0 / std::numbers::pi;
        return upper ? (phi >= 0.0 || phi <= -90.0) : (phi <= 90.0);
    };

    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            bool on = false;
            const double d = std::hypot(x - rcx, y - rcy);
            for (double r : pl::ring_radii)
                if (d >= r * k - pl::half_stroke && d < r * k + pl::half_stroke) on = true;
            if (x >= bx && x <= bx + 1 && y >= by0 && y <= by1) on = true;
            const double t = std::clamp(((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
            if (std::hypot(x - ax - t * ex, y - ay - t * ey) < pl::half_stroke) on = true;
            if (in_triangle(x, y)) on = true;
            if (on_arc(x, y, pl::s_upper_center[0] * k, pl::s_upper_center[1] * k, true)) on = true;
            if (on_arc(x, y, pl::s_lower_center[0] * k, pl::s_lower_center[1] * k, false)) on = true;
            mask(x, y) = on ? 1 : 0;
        }
    }
    return mask;
}

// Foreground pixels with at least one background pixel among their 8 neighbours (outside counts as background).
inline EdgeMap boundary_of(const EdgeMap& mask) {
    EdgeMap out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx)
                    if ((dx || dy) && (!mask.contains(x + dx, y + dy) || !mask(x + dx, y + dy))) edge = true;
            out(x, y) = edge ? 1 : 0;
        }
    }
    return out;
}

inline TestPattern generate_test_pattern(const PatternSpec& spec) {
    if (!std::isfinite(spec.contrast)) throw ParameterError("pattern contrast must be finite");
    EdgeMap mask = pattern_mask(spec.side);
    GrayImage img(spec.side, spec.side, 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels()[i] = mask.pixels()[i] ? spec.contrast : 0.0;
    return {std::move(img), boundary_of(mask)};
}

}  // namespace faintedge
