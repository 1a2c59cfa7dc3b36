#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "faintedge/edges.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"
#include "faintedge/line_pyramid.hpp"
#include "faintedge/parallel.hpp"
#include "faintedge/params.hpp"
#include "faintedge/suppression.hpp"

namespace faintedge {

// Direction fibers are expected to run in. Edge signs are read along its normal: +x for vertical, +y for horizontal.
enum class FiberOrientation { vertical, horizontal };

inline std::string to_string(FiberOrientation o) { return o == FiberOrientation::vertical ? "vertical" : "horizontal"; }

inline FiberOrientation parse_fiber_orientation(const std::string& s) {
    if (s == "vertical") return FiberOrientation::vertical;
    if (s == "horizontal") return FiberOrientation::horizontal;
    throw ParameterError("orientation must be 'vertical' or 'horizontal'");
}

// var_x applies across the canonical orientation (image x when vertical), var_y along it.
struct DiffusionParams {
    double var_x = 2.25;
    double var_y = 1.0;
    FiberOrientation orientation = FiberOrientation::vertical;

    void validate() const {
        if (!(var_x > 0.0) || !(var_y > 0.0) || !std::isfinite(var_x) || !std::isfinite(var_y))
            throw ParameterError("diffusion variances must be positive");
    }
};

// red: dark to light along the canonical normal; blue: light to dark. Disjoint.
struct SignedEdgeMaps {
    EdgeMap red;
    EdgeMap blue;
};

// Each rasterised edge pixel takes the sign of R times the alignment of the edge's + normal with the canonical
// normal. A pixel drawn by several edges goes to the one with the largest |R cos|; edges perpendicular to the
// normal use the sign of R.
inline SignedEdgeMaps classify_signs(const EdgeSet& edges, FiberOrientation orientation, int width, int height) {
    SignedEdgeMaps out{EdgeMap(width, height, 0), EdgeMap(width, height, 0)};
    GrayImage best(width, height, 0.0);
    const Point n = orientation == FiberOrientation::vertical ? Point{1.0, 0.0} : Point{0.0, 1.0};
    for (const Edge& e : edges.edges) {
        for (std::size_t i = 1; i < e.polyline.size(); ++i) {
            const Point a = e.polyline[i - 1], b = e.polyline[i];
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            if (!(len > 0.0)) continue;
            const double cosine = ((b.y - a.y) * n.x - (b.x - a.x) * n.y) / len;
            double v = e.response * cosine;
            if (v == 0.0) v = e.response;
            if (v == 0.0) continue;
            for_segment_pixels(std::lround(a.x), std::lround(a.y), std::lround(b.x), std::lround(b.y), [&](long x, long y) {
                if (x < 0 || y < 0 || x >= width || y >= height) return;
                const int xi = static_cast<int>(x), yi = static_cast<int>(y);
                if (std::abs(v) <= best(xi, yi)) return;
                best(xi, yi) = std::abs(v);
                out.red(xi, yi) = v > 0.0;
                out.blue(xi, yi) = v < 0.0;
            });
        }
    }
    return out;
}

inline SignedEdgeMaps classify_signs(const EdgeSet& edges, FiberOrientation orientation) {
    return classify_signs(edges, orientation, edges.width, edges.height);
}

namespace detail {

// Sampled Gaussian truncated at 4 standard deviations, normalised to unit sum.
inline std::vector<double> gaussian_kernel(double variance) {
    const double sd = std::sqrt(variance);
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sd)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / variance);
    for (double& v : k) v /= sum;
    return k;
}

// Zero-padded separable convolution.
inline GrayImage separable_blur(const GrayImage& img, const std::vector<double>& kx, const std::vector<double>& ky) {
    const int W = img.width(), H = img.height();
    const int rx = static_cast<int>(kx.size() / 2), ry = static_cast<int>(ky.size() / 2);
    GrayImage tmp(W, H, 0.0), out(W, H, 0.0);
    parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = std::max(-rx, -x); i <= std::min(rx, W - 1 - x); ++i) s += kx[static_cast<std::size_t>(i + rx)] * img(x + i, y);
            tmp(x, y) = s;
        }
    });
    parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int j = std::max(-ry, -y); j <= std::min(ry, H - 1 - y); ++j) s += ky[static_cast<std::size_t>(j + ry)] * tmp(x, y + j);
            out(x, y) = s;
        }
    });
    return out;
}

}  // namespace detail

inline GrayImage diffusion_map(const EdgeMap& binary, const DiffusionParams& p) {
    p.validate();
    GrayImage img(binary.width(), binary.height(), 0.0);
    for (std::size_t i = 0; i < binary.size(); ++i) img.pixels()[i] = binary.pixels()[i] ? 1.0 : 0.0;
    const bool vertical = p.orientation == FiberOrientation::vertical;
    return detail::separable_blur(img, detail::gaussian_kernel(vertical ? p.var_x : p.var_y),
                                  detail::gaussian_kernel(vertical ? p.var_y : p.var_x));
}

// Product of the two diffusion maps: only edges with an opposite-sign partner nearby survive.
inline GrayImage enhance_fibers(const SignedEdgeMaps& maps, const DiffusionParams& p) {
    if (maps.red.width() != maps.blue.width() || maps.red.height() != maps.blue.height())
        throw ParameterError("red and blue maps must have the same dimensions");
    const GrayImage r = diffusion_map(maps.red, p), b = diffusion_map(maps.blue, p);
    GrayImage out(r.width(), r.height(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] = r.pixels()[i] * b.pixels()[i];
    return out;
}

struct FiberResult {
    EdgeSet edges;
    SignedEdgeMaps maps;
    GrayImage enhanced;
};

// Straight-line detection with suppression, sign classification, diffusion and product.
inline FiberResult enhance_image_fibers(const GrayImage& img, const DetectorParams& params, const DiffusionParams& p) {
    params.validate();
    p.validate();
    FiberResult out;
    const LinePyramid pyr(img, params, params.consistent_contrast);
    out.edges = line_nms(detect_lines(pyr, params), params);
    out.maps = classify_signs(out.edges, p.orientation, img.width(), img.height());
    out.enhanced = enhance_fibers(out.maps, p);
    return out;
}

// Zhang-Suen thinning of a binary map.
inline EdgeMap thin(const EdgeMap& in) {
    const int W = in.width(), H = in.height();
    EdgeMap m = in;
    auto at = [&](int x, int y) -> int { return m.contains(x, y) && m(x, y) ? 1 : 0; };
    for (bool changed = true; changed;) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<std::pair<int, int>> drop;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (!m(x, y)) continue;
                    // P2..P9 clockwise from north.
                    const int p[8] = {at(x, y - 1), at(x + 1, y - 1), at(x + 1, y), at(x + 1, y + 1),
                                      at(x, y + 1), at(x - 1, y + 1), at(x - 1, y), at(x - 1, y - 1)};
                    int b = 0, a = 0;
                    for (int k = 0; k < 8; ++k) {
                        b += p[k];
                        a += p[k] == 0 && p[(k + 1) % 8] == 1;
                    }
                    if (b < 2 || b > 6 || a != 1) continue;
                    if (pass == 0 ? ((p[0] && p[2] && p[4]) || (p[2] && p[4] && p[6]))
                                  : ((p[0] && p[2] && p[6]) || (p[0] && p[4] && p[6])))
                        continue;
                    drop.emplace_back(x, y);
                }
            }
            for (auto [x, y] : drop) m(x, y) = 0;
            changed = changed || !drop.empty();
        }
    }
    return m;
}

// Arc length of an 8-connected skeleton: 1 per axial link, sqrt 2 per diagonal link not already bridged by two
// axial links.
inline double skeleton_length(const EdgeMap& skel) {
    auto on = [&](int x, int y) { return skel.contains(x, y) && skel(x, y); };
    double len = 0.0;
    for (int y = 0; y < skel.height(); ++y) {
        for (int x = 0; x < skel.width(); ++x) {
            if (!skel(x, y)) continue;
            if (on(x + 1, y)) len += 1.0;
            if (on(x, y + 1)) len += 1.0;
            for (int dx : {-1, 1})
                if (on(x + dx, y + 1) && !on(x + dx, y) && !on(x, y + 1)) len += std::numbers::sqrt2;
        }
    }
    return len;
}

// Thresholds the enhanced map, thins it to unit width and measures the skeleton length in pixels. Thinning eats
// into blunt ridge ends, so each skeleton endpoint is extended along its last link to the edge of the mask
// (pixel extent, so an isolated pixel counts 1).
inline double total_fiber_length(const GrayImage& enhanced, double threshold) {
    EdgeMap bin(enhanced.width(), enhanced.height(), 0);
    for (std::size_t i = 0; i < bin.size(); ++i) bin.pixels()[i] = enhanced.pixels()[i] > threshold;
    const EdgeMap skel = thin(bin);
    auto in = [](const EdgeMap& m, int x, int y) { return m.contains(x, y) && m(x, y); };
    double len = skeleton_length(skel);
    for (int y = 0; y < skel.height(); ++y) {
        for (int x = 0; x < skel.width(); ++x) {
            if (!skel(x, y)) continue;
            int n = 0, dx = 0, dy = 0;
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i)
                    if ((i || j) && in(skel, x + i, y + j)) {
                        ++n;
                        dx = -i;
                        dy = -j;
                    }
            if (n == 0) len += 1.0;
            if (n != 1) continue;
            int k = 0;
            while (in(bin, x + (k + 1) * dx, y + (k + 1) * dy)) ++k;
            len += (k + 0.5) * std::hypot(dx, dy);
        }
    }
    return len;
}

}  // namespace faintedge
