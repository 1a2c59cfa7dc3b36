#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "faintedge/edges.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"
#include "faintedge/params.hpp"
#include "faintedge/thresholds.hpp"

namespace faintedge {

inline constexpr double invalid_response = std::numeric_limits<double>::quiet_NaN();

inline bool is_valid(double v) { return !std::isnan(v); }

// Per-pixel filter output; NaN marks pixels whose stencil leaves the image.
struct ResponseGrid {
    int width = 0;
    int height = 0;
    double center_offset = 0.0;
    std::vector<double> values;

    double operator()(int x, int y) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
    bool valid(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height && is_valid((*this)(x, y)); }
};

namespace detail {

// Cross-section stencil taps relative to x: [x - c, x - c + w + s - 1], c = floor((w + s - 1) / 2).
inline int stencil_lead(int w, int s) { return (w + s - 1) / 2; }
inline double stencil_offset(int w, int s) { return (w + s - 1) / 2.0 - stencil_lead(w, s); }

struct SideMeans {
    ResponseGrid r;      // (right mean - left mean) / 2
    ResponseGrid msum;   // right mean + left mean
    ResponseGrid qleft;  // mean of I^2, left half
    ResponseGrid qright;
};

// Horizontal pass over a class-frame image (vertical class = image, horizontal class = transposed image).
inline SideMeans side_means(const GrayImage& img, int w, int s, bool with_aux) {
    if (w < 2 || w % 2 != 0) throw ParameterError("filter width w must be an even integer >= 2");
    if (s < 0) throw ParameterError("spacing s must be nonnegative");
    const int W = img.width(), H = img.height();
    const int c = stencil_lead(w, s), half = w / 2;
    const double off = stencil_offset(w, s);
    SideMeans out;
    auto init = [&](ResponseGrid& g) {
        g.width = W;
        g.height = H;
        g.center_offset = off;
        g.values.assign(static_cast<std::size_t>(W) * H, invalid_response);
    };
    init(out.r);
    if (with_aux) {
        init(out.msum);
        init(out.qleft);
        init(out.qright);
    }
    for (int y = 0; y < H; ++y) {
        for (int x = c; x - c + w + s - 1 < W; ++x) {
            double sl = 0.0, sr = 0.0, ql = 0.0, qr = 0.0;
            for (int i = 0; i < half; ++i) {
                const double a = img(x - c + i, y);
                const double b = img(x - c + half + s + i, y);
                sl += a;
                sr += b;
                ql += a * a;
                qr += b * b;
            }
            const std::size_t idx = static_cast<std::size_t>(y) * W + x;
            out.r.values[idx] = (sr - sl) / w;
            if (with_aux) {
                out.msum.values[idx] = (sr + sl) / half;
                out.qleft.values[idx] = ql / half;
                out.qright.values[idx] = qr / half;
            }
        }
    }
    return out;
}

inline ResponseGrid transposed(const ResponseGrid& g) {
    ResponseGrid t;
    t.width = g.height;
    t.height = g.width;
    t.center_offset = g.center_offset;
    t.values.resize(g.values.size());
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
            t.values[static_cast<std::size_t>(x) * t.width + y] = g.values[static_cast<std::size_t>(y) * g.width + x];
    return t;
}

}  // namespace detail

// Filter response of the cross-section stencil [-1 x w/2, 0 x s, +1 x w/2] / w, in image coordinates.
// The vertical class filters along rows; the horizontal class along columns (+ side is +y).
inline ResponseGrid cross_section_responses(const GrayImage& img, int w, int s, OrientationClass cls) {
    if (cls == OrientationClass::vertical) return detail::side_means(img, w, s, false).r;
    return detail::transposed(detail::side_means(img.transposed(), w, s, false).r);
}

// Trapezoid average of r along the class-frame segment (x0, y0) -> (x0 + dx, y0 + L), with 3-point Lagrange
// interpolation across each row. x0 is in grid index units.
inline double sample_row(const ResponseGrid& r, double x, int y) {
    if (y < 0 || y >= r.height) return invalid_response;
    const double fi = std::round(x);
    const int i = static_cast<int>(fi);
    const double u = x - fi;
    if (i < 0 || i >= r.width) return invalid_response;
    if (u == 0.0) return r(i, y);
    const double lo = i - 1 >= 0 ? r(i - 1, y) : invalid_response;
    const double hi = i + 1 < r.width ? r(i + 1, y) : invalid_response;
    if (is_valid(lo) && is_valid(hi))
        return lo * 0.5 * u * (u - 1.0) + r(i, y) * (1.0 - u * u) + hi * 0.5 * u * (u + 1.0);
    // Near invalid pixels fall back to the two bracketing samples.
    return u > 0.0 ? (1.0 - u) * r(i, y) + u * hi : (1.0 + u) * r(i, y) - u * lo;
}

inline double direct_line_response(const ResponseGrid& r, double x0, int y0, double dx, int L) {
    if (L < 1) throw ParameterError("length must be positive");
    double sum = 0.0;
    for (int t = 0; t <= L; ++t) {
        const double v = sample_row(r, x0 + dx * t / L, y0 + t);
        sum += (t == 0 || t == L) ? 0.5 * v : v;
    }
    return sum / L;
}

struct LineResponse {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // image-frame endpoints (class-frame start and end)
    int length = 0;
    int level = 0;
    int orientation_index = 0;  // dx in class frame, in [-L, L]
    OrientationClass orientation_class = OrientationClass::vertical;
    double response = invalid_response;
    double min_sub = invalid_response;
    double max_sub = invalid_response;
    double mean_left = invalid_response, mean_right = invalid_response;
    double sq_mean_left = invalid_response, sq_mean_right = invalid_response;

    bool valid() const { return is_valid(response); }

    double side_sigma() const {
        const double v = 0.5 * ((sq_mean_left - mean_left * mean_left) + (sq_mean_right - mean_right * mean_right));
        return std::sqrt(std::max(0.0, v));
    }
};

struct LineLevelCount {
    int length = 0;
    std::size_t slots = 0;  // distinct segments on the level grid, boundary-clipped ones included
    std::size_t valid = 0;  // those whose filter support lies inside the image
};

class LinePyramid {
public:
    // All responses of one length in one orientation class. Start rows are multiples of row_step; every column;
    // class-frame directions dx in [-L, L].
    struct Level {
        int length = 0;
        int row_step = 1;
        int rows = 0;
        int width = 0;
        int sub_depth = 0;                // smin/smax range over the 2^sub_depth descendants of each segment
        std::vector<double> r, msum, qleft, qright;
        std::vector<double> smin, smax;

        int directions() const { return 2 * length + 1; }
        std::size_t index(int row, int x, int dx) const {
            return (static_cast<std::size_t>(row) * width + x) * directions() + (dx + length);
        }
        double at(int row, int x, int dx) const {
            if (row < 0 || row >= rows || x < 0 || x >= width || dx < -length || dx > length) return invalid_response;
            return r[index(row, x, dx)];
        }
    };

    struct ClassData {
        int width = 0;  // class frame
        int height = 0;
        detail::SideMeans base;
        std::vector<Level> levels;
    };

    LinePyramid(const GrayImage& img, const DetectorParams& params, bool with_aux = true)
        : width_(img.width()), height_(img.height()), w_(params.w), s_(params.s), depth_(params.cct_depth),
          aux_(with_aux) {
        params.validate();
        offset_ = detail::stencil_offset(w_, s_);
        const int side = std::min(width_, height_) - 1;
        int max_len = 1;
        while (max_len * 2 <= side && (params.max_length == 0 || max_len * 2 <= params.max_length)) max_len *= 2;
        if (side < 1) max_len = 0;
        build_class(classes_[0], img, max_len);
        build_class(classes_[1], img.transposed(), max_len);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int w() const { return w_; }
    int s() const { return s_; }
    int cct_depth() const { return depth_; }
    bool has_aux() const { return aux_; }
    double center_offset() const { return offset_; }
    int level_count() const { return static_cast<int>(classes_[0].levels.size()); }
    int length(int level) const { return classes_[0].levels.at(level).length; }

    const ClassData& data(OrientationClass c) const { return classes_[static_cast<int>(c)]; }

    // The two half-length responses a level >= 1 response was averaged from; level 0 returns the response twice.
    std::array<double, 2> halves(OrientationClass c, int level, int row, int x, int dx) const {
        if (level == 0) {
            const double v = data(c).levels[0].at(row, x, dx);
            return {v, v};
        }
        const Level& lv = data(c).levels[level - 1];
        const int L = lv.length;
        const int ra = row * L / lv.row_step;
        const int rb = (row * L + L) / lv.row_step;
        if (dx % 2 == 0) return {lv.at(ra, x, dx / 2), lv.at(rb, x + dx / 2, dx / 2)};
        const int d = (dx - 1) / 2;
        const double h1 = 0.5 * (lv.at(ra, x, d) + lv.at(ra, x, d + 1));
        const double h2 = 0.5 * (lv.at(rb, x + d, d + 1) + lv.at(rb, x + d + 1, d));
        return {h1, h2};
    }

    LineResponse at(OrientationClass c, int level, int row, int x, int dx) const {
        const Level& lv = data(c).levels.at(level);
        LineResponse out;
        out.length = lv.length;
        out.level = level;
        out.orientation_index = dx;
        out.orientation_class = c;
        const int y0 = row * lv.row_step;
        double cx0 = x + offset_, cy0 = y0, cx1 = x + dx + offset_, cy1 = y0 + lv.length;
        if (c == OrientationClass::horizontal) {
            std::swap(cx0, cy0);
            std::swap(cx1, cy1);
        }
        out.x0 = cx0;
        out.y0 = cy0;
        out.x1 = cx1;
        out.y1 = cy1;
        out.response = lv.at(row, x, dx);
        if (!out.valid()) return out;
        if (aux_) {
            const std::size_t i = lv.index(row, x, dx);
            out.min_sub = lv.smin[i];
            out.max_sub = lv.smax[i];
            out.mean_right = 0.5 * (lv.msum[i] + 2.0 * out.response);
            out.mean_left = 0.5 * (lv.msum[i] - 2.0 * out.response);
            out.sq_mean_left = lv.qleft[i];
            out.sq_mean_right = lv.qright[i];
        } else {
            const auto h = halves(c, level, row, x, dx);
            out.min_sub = std::min(h[0], h[1]);
            out.max_sub = std::max(h[0], h[1]);
        }
        return out;
    }

    // Distinct geometric segments per level. Start rows run over [0, height - 2]. Diagonals (|dx| = L) exist in
    // both classes and are counted once when the two grids place them at the same position.
    std::vector<LineLevelCount> count_audit() const {
        std::vector<LineLevelCount> out;
        for (int l = 0; l < level_count(); ++l) {
            LineLevelCount cnt;
            cnt.length = length(l);
            const Level& vert = classes_[0].levels[l];
            auto shared_diagonal = [&](int x, int dx) {
                if (offset_ != 0.0 || std::abs(dx) != vert.length) return false;
                const int start = dx > 0 ? x : x - vert.length;
                return start >= 0 && start % vert.row_step == 0 && start / vert.row_step < vert.rows;
            };
            for (int ci = 0; ci < 2; ++ci) {
                const Level& lv = classes_[ci].levels[l];
                for (int row = 0; row < lv.rows; ++row) {
                    for (int x = 0; x < lv.width; ++x) {
                        for (int dx = -lv.length; dx <= lv.length; ++dx) {
                            if (ci == 1 && shared_diagonal(x, dx)) continue;
                            ++cnt.slots;
                            if (is_valid(lv.r[lv.index(row, x, dx)])) ++cnt.valid;
                        }
                    }
                }
            }
            out.push_back(cnt);
        }
        return out;
    }

private:
    void build_class(ClassData& cd, const GrayImage& frame, int max_len) {
        cd.width = frame.width();
        cd.height = frame.height();
        cd.base = detail::side_means(frame, w_, s_, aux_);
        if (max_len < 1) return;
        cd.levels.push_back(base_level(cd));
        // ext[d] holds the min (first) and max (second) over depth-d descendants of the newest level.
        std::vector<std::pair<std::vector<double>, std::vector<double>>> ext;
        if (aux_) {
            ext.emplace_back(cd.levels.back().r, cd.levels.back().r);
            store_extremes(cd.levels.back(), ext);
        }
        while (cd.levels.back().length * 2 <= max_len) {
            cd.levels.push_back(double_level(cd.levels.back(), cd.height));
            if (!aux_) continue;
            const Level& src = cd.levels[cd.levels.size() - 2];
            Level& lv = cd.levels.back();
            std::vector<std::pair<std::vector<double>, std::vector<double>>> next;
            next.emplace_back(lv.r, lv.r);
            for (std::size_t d = 1; d <= std::min<std::size_t>(ext.size(), static_cast<std::size_t>(depth_)); ++d)
                next.push_back(child_extremes(src, lv, ext[d - 1]));
            ext = std::move(next);
            store_extremes(lv, ext);
        }
    }

    void store_extremes(Level& lv, const std::vector<std::pair<std::vector<double>, std::vector<double>>>& ext) const {
        lv.sub_depth = static_cast<int>(ext.size()) - 1;
        lv.smin = ext.back().first;
        lv.smax = ext.back().second;
    }

    // Min/max over children of their own extremes. An odd direction's half is the mean of two children, so its
    // extreme is taken as the mean of theirs (exact one level down).
    std::pair<std::vector<double>, std::vector<double>> child_extremes(
        const Level& src, const Level& lv, const std::pair<std::vector<double>, std::vector<double>>& in) const {
        const int L = src.length;
        const std::size_t n = lv.r.size();
        std::pair<std::vector<double>, std::vector<double>> out{std::vector<double>(n, invalid_response),
                                                                std::vector<double>(n, invalid_response)};
        for (int row = 0; row < lv.rows; ++row) {
            const int y0 = row * L;
            const int ra = y0 / src.row_step;
            const int rb = (y0 + L) / src.row_step;
            if (rb >= src.rows) continue;
            for (int x = 0; x < lv.width; ++x) {
                for (int dx = -2 * L; dx <= 2 * L; ++dx) {
                    const std::size_t i = lv.index(row, x, dx);
                    if (!is_valid(lv.r[i])) continue;
                    auto get = [&](const std::vector<double>& v, int r, int xx, int d) {
                        return v[src.index(r, xx, d)];
                    };
                    for (int k = 0; k < 2; ++k) {
                        const std::vector<double>& v = k == 0 ? in.first : in.second;
                        double h1, h2;
                        if (dx % 2 == 0) {
                            h1 = get(v, ra, x, dx / 2);
                            h2 = get(v, rb, x + dx / 2, dx / 2);
                        } else {
                            const int d = (dx - 1) / 2;
                            h1 = 0.5 * (get(v, ra, x, d) + get(v, ra, x, d + 1));
                            h2 = 0.5 * (get(v, rb, x + d, d + 1) + get(v, rb, x + d + 1, d));
                        }
                        (k == 0 ? out.first : out.second)[i] = k == 0 ? std::min(h1, h2) : std::max(h1, h2);
                    }
                }
            }
        }
        return out;
    }

    Level base_level(const ClassData& cd) const {
        Level lv;
        lv.length = 1;
        lv.row_step = 1;
        lv.rows = std::max(1, cd.height - 1);
        lv.width = cd.width;
        const std::size_t n = static_cast<std::size_t>(lv.rows) * lv.width * lv.directions();
        auto fill = [&](std::vector<double>& dst, const ResponseGrid& g) {
            dst.assign(n, invalid_response);
            for (int y = 0; y + 1 < cd.height; ++y)
                for (int x = 0; x < cd.width; ++x)
                    for (int dx = -1; dx <= 1; ++dx)
                        if (x + dx >= 0 && x + dx < cd.width) dst[lv.index(y, x, dx)] = 0.5 * (g(x, y) + g(x + dx, y + 1));
        };
        fill(lv.r, cd.base.r);
        if (aux_) {
            fill(lv.msum, cd.base.msum);
            fill(lv.qleft, cd.base.qleft);
            fill(lv.qright, cd.base.qright);
        }
        return lv;
    }

    // Same-direction children share an endpoint; a new (odd) direction averages the four nearest children
    // forming the parallelogram around the target segment.
    Level double_level(const Level& src, int height) const {
        Level lv;
        const int L = src.length;
        lv.length = 2 * L;
        lv.row_step = L;
        lv.rows = std::max(1, (height - 1 + L - 1) / L);
        lv.width = src.width;
        const int D = lv.directions();
        const std::size_t n = static_cast<std::size_t>(lv.rows) * lv.width * D;
        auto build = [&](std::vector<double>& dst, const std::vector<double>& in) {
            dst.assign(n, invalid_response);
            auto get = [&](int row, int x, int d) -> double {
                if (row >= src.rows || x < 0 || x >= src.width) return invalid_response;
                return in[src.index(row, x, d)];
            };
            for (int row = 0; row < lv.rows; ++row) {
                const int y0 = row * L;
                const int ra = y0 / src.row_step;
                const int rb = (y0 + L) / src.row_step;
                if (rb >= src.rows) continue;
                for (int x = 0; x < lv.width; ++x) {
                    double* out = &dst[lv.index(row, x, -2 * L)];
                    for (int d = -L; d <= L; ++d) {
                        out[2 * d + 2 * L] = 0.5 * (get(ra, x, d) + get(rb, x + d, d));
                        if (d < L) {
                            const double h1 = 0.5 * (get(ra, x, d) + get(ra, x, d + 1));
                            const double h2 = 0.5 * (get(rb, x + d, d + 1) + get(rb, x + d + 1, d));
                            out[2 * d + 1 + 2 * L] = 0.5 * (h1 + h2);
                        }
                    }
                }
            }
        };
        build(lv.r, src.r);
        if (aux_) {
            build(lv.msum, src.msum);
            build(lv.qleft, src.qleft);
            build(lv.qright, src.qright);
        }
        return lv;
    }

    int width_, height_, w_, s_, depth_;
    bool aux_;
    double offset_ = 0.0;
    std::array<ClassData, 2> classes_;
};

inline LinePyramid build_line_pyramid(const GrayImage& img, const DetectorParams& params, bool with_aux = true) {
    return LinePyramid(img, params, with_aux);
}

// Segment endpoints in the class frame, then oriented in the image so that the + side is the filter's bright side.
inline Edge make_line_edge(const LinePyramid& pyr, OrientationClass c, int level, int row, int x, int dx) {
    const LineResponse lr = pyr.at(c, level, row, x, dx);
    const auto& cd = pyr.data(c);
    const int L = lr.length;
    const int y0 = row * cd.levels[level].row_step;
    Edge e;
    e.length = L;
    e.response = lr.response;
    e.min_sub = lr.min_sub;
    e.max_sub = lr.max_sub;
    e.level = level;
    e.orientation_class = c;
    e.direction = dx;
    e.grid_length = L;
    e.samples.resize(static_cast<std::size_t>(L) + 1);
    e.sample_points.resize(static_cast<std::size_t>(L) + 1);
    for (int t = 0; t <= L; ++t) {
        const double gx = x + static_cast<double>(dx) * t / L;
        double v = sample_row(cd.base.r, gx, y0 + t);
        if (!is_valid(v)) v = lr.response;
        Point p{gx + pyr.center_offset(), static_cast<double>(y0 + t)};
        if (c == OrientationClass::horizontal) std::swap(p.x, p.y);
        e.samples[static_cast<std::size_t>(t)] = v;
        e.sample_points[static_cast<std::size_t>(t)] = p;
    }
    if (c == OrientationClass::horizontal) {
        std::reverse(e.samples.begin(), e.samples.end());
        std::reverse(e.sample_points.begin(), e.sample_points.end());
    }
    e.polyline = {e.sample_points.front(), e.sample_points.back()};
    e.grid_from = e.polyline.front();
    e.grid_to = e.polyline.back();
    return e;
}

// Threshold |R| > T(L, 8N), then the consistent-contrast test against the extreme descendant of length L / 2^depth.
inline EdgeSet detect_lines(const LinePyramid& pyr, const DetectorParams& params) {
    params.validate();
    const ThresholdParams tp = params.thresholds();
    const double n_pixels = static_cast<double>(pyr.width()) * pyr.height();
    EdgeSet out;
    out.source = EdgeSource::lines;
    out.width = pyr.width();
    out.height = pyr.height();
    out.family_pixels = n_pixels;
    for (int l = 0; l < pyr.level_count(); ++l) {
        const int L = pyr.length(l);
        const double T = detection_threshold(L, line_family_size(n_pixels), tp);
        const double ell = pyr.has_aux() ? std::max(1.0, L / std::pow(2.0, pyr.data(OrientationClass::vertical).levels[l].sub_depth))
                                         : (l == 0 ? 1.0 : L / 2.0);
        for (OrientationClass c : {OrientationClass::vertical, OrientationClass::horizontal}) {
            const auto& lv = pyr.data(c).levels[l];
            for (int row = 0; row < lv.rows; ++row) {
                for (int x = 0; x < lv.width; ++x) {
                    for (int dx = -L; dx <= L; ++dx) {
                        const double R = lv.r[lv.index(row, x, dx)];
                        if (!(std::abs(R) > T)) continue;
                        if (params.consistent_contrast) {
                            const LineResponse lr = pyr.at(c, l, row, x, dx);
                            const double sigma_e = pyr.has_aux() ? lr.side_sigma() : params.sigma;
                            const double b = cct_threshold({std::abs(R), sigma_e, params.sigma, params.w, ell});
                            if (R > 0 ? !(lr.min_sub > b) : !(lr.max_sub < -b)) continue;
                        }
                        out.edges.push_back(make_line_edge(pyr, c, l, row, x, dx));
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace faintedge
