#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "faintedge/edges.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"
#include "faintedge/parallel.hpp"
#include "faintedge/params.hpp"
#include "faintedge/thresholds.hpp"

namespace faintedge {

enum class Side : std::uint8_t { top = 0, right = 1, bottom = 2, left = 3 };

// Inclusive pixel rectangle; neighbouring tiles share their boundary row or column.
struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct SidePoint {
    int x = 0;
    int y = 0;
    Side side = Side::top;
};

// Unit vector along a side, in the sense that walks the boundary clockwise (y pointing down).
inline std::array<int, 2> side_tangent(Side s) {
    switch (s) {
        case Side::top: return {1, 0};
        case Side::right: return {0, 1};
        case Side::bottom: return {-1, 0};
        case Side::left: return {0, -1};
    }
    return {0, 0};
}

struct Tile {
    Rect rect;
    int level = 0;
    int parent = -1;
    std::array<int, 2> children{-1, -1};
    bool vertical_split = true;  // children side by side (split along x) when true
    std::size_t table_offset = 0;

    bool leaf() const { return children[0] < 0; }

    // Side points: top (left to right), right (top to bottom), bottom (left to right), left (top to bottom).
    // Corners appear once on each incident side.
    int point_count() const { return 2 * (rect.width() + 1) + 2 * (rect.height() + 1); }

    SidePoint point(int i) const {
        const int a = rect.width() + 1, b = rect.height() + 1;
        if (i < a) return {rect.x0 + i, rect.y0, Side::top};
        i -= a;
        if (i < b) return {rect.x1, rect.y0 + i, Side::right};
        i -= b;
        if (i < a) return {rect.x0 + i, rect.y1, Side::bottom};
        i -= a;
        return {rect.x0, rect.y0 + i, Side::left};
    }

    int index_of(Side s, int x, int y) const {
        const int a = rect.width() + 1, b = rect.height() + 1;
        switch (s) {
            case Side::top: return (y == rect.y0 && x >= rect.x0 && x <= rect.x1) ? x - rect.x0 : -1;
            case Side::right: return (x == rect.x1 && y >= rect.y0 && y <= rect.y1) ? a + y - rect.y0 : -1;
            case Side::bottom: return (y == rect.y1 && x >= rect.x0 && x <= rect.x1) ? a + b + x - rect.x0 : -1;
            case Side::left: return (x == rect.x0 && y >= rect.y0 && y <= rect.y1) ? 2 * a + b + y - rect.y0 : -1;
        }
        return -1;
    }

    static bool pairable(const SidePoint& p, const SidePoint& q) {
        return p.side != q.side && (p.x != q.x || p.y != q.y);
    }

    std::size_t pair_slots() const {
        const std::size_t P = static_cast<std::size_t>(point_count());
        return P * (P - 1) / 2;
    }

    // Packed upper triangle, i < j.
    std::size_t pair_index(int i, int j) const {
        const std::size_t P = static_cast<std::size_t>(point_count());
        const std::size_t a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
        return a * P - a * (a + 1) / 2 + (b - a - 1);
    }
};

// Curve table entries encode (record index << 1) | reversed; -1 means no curve.
using CurveRef = std::int32_t;
inline constexpr CurveRef no_curve = -1;
inline CurveRef make_ref(std::int64_t record, bool reversed) { return static_cast<CurveRef>((record << 1) | (reversed ? 1 : 0)); }
inline std::int32_t ref_record(CurveRef r) { return r >> 1; }
inline bool ref_reversed(CurveRef r) { return (r & 1) != 0; }
inline CurveRef flip_ref(CurveRef r) { return r < 0 ? r : (r ^ 1); }

struct CurveRecord {
    CurveStats stats;
    double min_sub = 0.0;  // signed extreme child responses, in the record's own direction
    double max_sub = 0.0;
    double min_sub_length = 0.0;
    double max_sub_length = 0.0;
    CurveRef first = no_curve;  // children in traversal order; no_curve at leaves
    CurveRef second = no_curve;
    std::int32_t tile = -1;
    std::int16_t x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

struct BeamCurve {
    Point p1;
    Point p2;
    std::vector<Point> polyline;
    std::vector<EdgePiece> pieces;
    CurveStats stats;
    double min_sub = 0.0;
    double max_sub = 0.0;
    double min_sub_length = 0.0;
    double max_sub_length = 0.0;

    double F() const { return stats.mean(); }
    double L() const { return stats.length; }
    double R() const { return stats.response(); }
    double signed_response() const { return stats.signed_response(); }

    static BeamCurve identity(Point p) {
        BeamCurve c;
        c.p1 = c.p2 = p;
        c.polyline = {p};
        return c;
    }
};

struct BeamOps {
    std::uint64_t stitches = 0;   // stitch candidates evaluated
    std::uint64_t selection = 0;  // interface points scored in greedy mode
    std::uint64_t total() const { return stitches + selection; }
};

struct BeamLevelCount {
    int level = 0;
    int tiles = 0;
    std::size_t stored = 0;    // labelled side-point pairs holding a curve
    std::size_t distinct = 0;  // distinct endpoint location pairs
    std::size_t created = 0;   // records created at this level
};

namespace detail {

inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline double keys_weight(double t) {
    t = std::abs(t);
    constexpr double a = -0.5;
    if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

// Bicubic (Keys, a = -1/2) sampling of an image and its square, edge-clamped.
class Sampler {
public:
    explicit Sampler(const GrayImage& img) : img_(img), sq_(img) {
        for (double& v : sq_.pixels()) v *= v;
    }

    int width() const { return img_.width(); }
    int height() const { return img_.height(); }

    bool inside(double x, double y) const { return x >= 0.0 && y >= 0.0 && x <= width() - 1 && y <= height() - 1; }

    std::array<double, 2> at(double x, double y) const {
        const double fx = std::floor(x), fy = std::floor(y);
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        const double tx = x - fx, ty = y - fy;
        if (tx == 0.0 && ty == 0.0) return {img_(clampx(ix), clampy(iy)), sq_(clampx(ix), clampy(iy))};
        double v = 0.0, q = 0.0;
        if (tx == 0.0 || ty == 0.0) {
            const bool along_x = ty == 0.0;
            const double t = along_x ? tx : ty;
            for (int k = -1; k <= 2; ++k) {
                const double wk = keys_weight(t - k);
                const int px = along_x ? clampx(ix + k) : clampx(ix);
                const int py = along_x ? clampy(iy) : clampy(iy + k);
                v += wk * img_(px, py);
                q += wk * sq_(px, py);
            }
            return {v, q};
        }
        for (int j = -1; j <= 2; ++j) {
            const double wy = keys_weight(ty - j);
            const int py = clampy(iy + j);
            for (int k = -1; k <= 2; ++k) {
                const double w = wy * keys_weight(tx - k);
                v += w * img_(clampx(ix + k), py);
                q += w * sq_(clampx(ix + k), py);
            }
        }
        return {v, q};
    }

    // Trapezoid-weighted sums along a segment sampled at unit L-infinity steps; samples outside the image
    // are dropped together with their weight.
    struct Sums {
        double value = 0.0, square = 0.0, weight = 0.0;
    };

    Sums integrate(double ax, double ay, double bx, double by) const {
        Sums s;
        const int n = static_cast<int>(std::lround(std::max(std::abs(bx - ax), std::abs(by - ay))));
        if (n == 0) return s;
        for (int k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) / n;
            const double x = ax + t * (bx - ax), y = ay + t * (by - ay);
            if (!inside(x, y)) continue;
            const double w = (k == 0 || k == n) ? 0.5 : 1.0;
            const auto [v, q] = at(x, y);
            s.value += w * v;
            s.square += w * q;
            s.weight += w;
        }
        return s;
    }

private:
    int clampx(int x) const { return std::clamp(x, 0, width() - 1); }
    int clampy(int y) const { return std::clamp(y, 0, height() - 1); }

    const GrayImage& img_;
    GrayImage sq_;
};

// Statistics of the straight curve p -> q with its w/2 offset lines on each side. The + offset at distance s
// moves p by +s along its side tangent and q by -s along its side tangent.
inline CurveStats straight_curve_stats(const Sampler& smp, const SidePoint& p, const SidePoint& q, int w) {
    CurveStats st;
    const auto main = smp.integrate(p.x, p.y, q.x, q.y);
    st.length = std::max(std::abs(q.x - p.x), std::abs(q.y - p.y));
    st.integral = main.value;
    const auto tp = side_tangent(p.side), tq = side_tangent(q.side);
    for (int s = 1; s <= w / 2; ++s) {
        const auto plus = smp.integrate(p.x + s * tp[0], p.y + s * tp[1], q.x - s * tq[0], q.y - s * tq[1]);
        const auto minus = smp.integrate(p.x - s * tp[0], p.y - s * tp[1], q.x + s * tq[0], q.y + s * tq[1]);
        st.plus_int += plus.value;
        st.plus_sq += plus.square;
        st.plus_len += plus.weight;
        st.minus_int += minus.value;
        st.minus_sq += minus.square;
        st.minus_len += minus.weight;
    }
    return st;
}

}  // namespace detail

// All straight curves between side points of a leaf tile, keyed by packed pair index (i < j).
inline std::vector<std::pair<std::size_t, CurveStats>> bottom_level(const Tile& tile, const GrayImage& img, int w) {
    if (w < 2 || w % 2 != 0) throw ParameterError("filter width w must be an even integer >= 2");
    const detail::Sampler smp(img);
    std::vector<std::pair<std::size_t, CurveStats>> out;
    const int P = tile.point_count();
    for (int i = 0; i < P; ++i) {
        const SidePoint p = tile.point(i);
        for (int j = i + 1; j < P; ++j) {
            const SidePoint q = tile.point(j);
            if (!Tile::pairable(p, q)) continue;
            out.emplace_back(tile.pair_index(i, j), detail::straight_curve_stats(smp, p, q, w));
        }
    }
    return out;
}

// Concatenation of g1 and g2 at g1.p2 == g2.p1; statistics add, zero-length curves are identities.
inline BeamCurve stitch(const BeamCurve& g1, const BeamCurve& g2) {
    if (!(g1.p2 == g2.p1)) throw PreconditionError("stitch: first curve must end where the second starts");
    if (g1.stats.length == 0.0 && g1.pieces.empty()) return g2;
    if (g2.stats.length == 0.0 && g2.pieces.empty()) return g1;
    BeamCurve out;
    out.p1 = g1.p1;
    out.p2 = g2.p2;
    out.stats = g1.stats + g2.stats;
    out.polyline = g1.polyline;
    out.polyline.insert(out.polyline.end(), g2.polyline.begin() + 1, g2.polyline.end());
    out.pieces = g1.pieces;
    out.pieces.insert(out.pieces.end(), g2.pieces.begin(), g2.pieces.end());
    const double r1 = g1.signed_response(), r2 = g2.signed_response();
    out.min_sub = std::min(r1, r2);
    out.max_sub = std::max(r1, r2);
    out.min_sub_length = r1 <= r2 ? g1.L() : g2.L();
    out.max_sub_length = r1 >= r2 ? g1.L() : g2.L();
    return out;
}

class BeamTree {
public:
    BeamTree(const GrayImage& img, const DetectorParams& params, BeamMode mode)
        : width_(img.width()), height_(img.height()), w_(params.w), k_(params.k), mode_(mode) {
        params.validate();
        int side = 5;
        while (side < std::max(width_, height_)) side = 2 * side - 1;
        side_ = side;
        padded_ = GrayImage(side_, side_);
        for (int y = 0; y < side_; ++y)
            for (int x = 0; x < side_; ++x)
                padded_(x, y) = img(detail::reflect_index(x, width_), detail::reflect_index(y, height_));
        build_tiles();
        build_curves();
    }

    int side() const { return side_; }
    int width() const { return width_; }
    int height() const { return height_; }
    int w() const { return w_; }
    BeamMode mode() const { return mode_; }
    const GrayImage& padded() const { return padded_; }
    const std::vector<Tile>& tiles() const { return tiles_; }
    const std::vector<CurveRecord>& records() const { return records_; }
    int leaf_level() const { return static_cast<int>(by_level_.size()) - 1; }
    const std::vector<std::vector<int>>& tiles_by_level() const { return by_level_; }
    const BeamOps& ops() const { return ops_; }

    // Curve stored for the directed pair i -> j of a tile.
    CurveRef lookup(int tile, int i, int j) const {
        if (i == j) return no_curve;
        const Tile& t = tiles_[static_cast<std::size_t>(tile)];
        if (i < j) return table_[t.table_offset + t.pair_index(i, j)];
        return flip_ref(table_[t.table_offset + t.pair_index(j, i)]);
    }

    CurveStats oriented_stats(CurveRef r) const {
        const CurveStats& s = records_[static_cast<std::size_t>(ref_record(r))].stats;
        return ref_reversed(r) ? s.reversed() : s;
    }

    double signed_response(CurveRef r) const { return oriented_stats(r).signed_response(); }

    // Leaf pieces of a curve, in traversal order.
    std::vector<EdgePiece> pieces(CurveRef r) const {
        std::vector<EdgePiece> out;
        append_pieces(r, out);
        return out;
    }

    BeamCurve curve(CurveRef r) const {
        BeamCurve c;
        const CurveRecord& rec = records_[static_cast<std::size_t>(ref_record(r))];
        const bool rev = ref_reversed(r);
        c.stats = rev ? rec.stats.reversed() : rec.stats;
        c.min_sub = rev ? -rec.max_sub : rec.min_sub;
        c.max_sub = rev ? -rec.min_sub : rec.max_sub;
        c.min_sub_length = rev ? rec.max_sub_length : rec.min_sub_length;
        c.max_sub_length = rev ? rec.min_sub_length : rec.max_sub_length;
        c.pieces = pieces(r);
        for (const EdgePiece& p : c.pieces) {
            if (c.polyline.empty()) c.polyline.push_back(p.a);
            c.polyline.push_back(p.b);
        }
        c.p1 = c.polyline.front();
        c.p2 = c.polyline.back();
        return c;
    }

    BeamCurve curve(int tile, int i, int j) const {
        const CurveRef r = lookup(tile, i, j);
        if (r == no_curve) throw ParameterError("no curve stored for this side-point pair");
        return curve(r);
    }

    std::vector<BeamLevelCount> count_audit() const {
        std::vector<BeamLevelCount> out;
        std::vector<std::size_t> created(by_level_.size(), 0);
        for (const CurveRecord& rec : records_) ++created[static_cast<std::size_t>(tiles_[static_cast<std::size_t>(rec.tile)].level)];
        for (std::size_t lv = 0; lv < by_level_.size(); ++lv) {
            BeamLevelCount c;
            c.level = static_cast<int>(lv);
            c.tiles = static_cast<int>(by_level_[lv].size());
            c.created = created[lv];
            for (int ti : by_level_[lv]) {
                const Tile& t = tiles_[static_cast<std::size_t>(ti)];
                std::set<std::array<int, 4>> seen;
                const int P = t.point_count();
                for (int i = 0; i < P; ++i) {
                    const SidePoint p = t.point(i);
                    for (int j = i + 1; j < P; ++j) {
                        if (table_[t.table_offset + t.pair_index(i, j)] == no_curve) continue;
                        ++c.stored;
                        const SidePoint q = t.point(j);
                        std::array<int, 4> key{p.x, p.y, q.x, q.y};
                        if (std::make_pair(q.x, q.y) < std::make_pair(p.x, p.y)) key = {q.x, q.y, p.x, p.y};
                        seen.insert(key);
                    }
                }
                c.distinct += seen.size();
            }
            out.push_back(c);
        }
        return out;
    }

private:
    void build_tiles() {
        tiles_.push_back(Tile{Rect{0, 0, side_ - 1, side_ - 1}, 0});
        by_level_.push_back({0});
        for (std::size_t lv = 0;; ++lv) {
            std::vector<int> next;
            for (int ti : by_level_[lv]) {
                const Rect r = tiles_[static_cast<std::size_t>(ti)].rect;
                if (r.width() <= 4 && r.height() <= 4) continue;
                const bool vertical = r.width() >= r.height();
                Rect a = r, b = r;
                if (vertical) {
                    a.x1 = b.x0 = r.x0 + r.width() / 2;
                } else {
                    a.y1 = b.y0 = r.y0 + r.height() / 2;
                }
                tiles_[static_cast<std::size_t>(ti)].vertical_split = vertical;
                for (const Rect& c : {a, b}) {
                    Tile t;
                    t.rect = c;
                    t.level = static_cast<int>(lv) + 1;
                    t.parent = ti;
                    tiles_.push_back(t);
                    next.push_back(static_cast<int>(tiles_.size()) - 1);
                }
                tiles_[static_cast<std::size_t>(ti)].children = {next[next.size() - 2], next.back()};
            }
            if (next.empty()) break;
            by_level_.push_back(std::move(next));
        }
        std::size_t offset = 0;
        for (Tile& t : tiles_) {
            t.table_offset = offset;
            offset += t.pair_slots();
        }
        table_.assign(offset, no_curve);
        best_at_.resize(tiles_.size());
    }

    struct Decision {
        std::size_t slot = 0;
        CurveRef ref = no_curve;       // existing curve, used when first == no_curve
        CurveRef first = no_curve;     // stitched children in a -> b order
        CurveRef second = no_curve;
    };

    void build_curves() {
        const detail::Sampler smp(padded_);
        for (int lv = leaf_level(); lv >= 0; --lv) {
            const auto& ids = by_level_[static_cast<std::size_t>(lv)];
            std::vector<std::vector<Decision>> decisions(ids.size());
            std::vector<std::vector<std::pair<std::size_t, CurveStats>>> leaves(ids.size());
            std::vector<BeamOps> tile_ops(ids.size());
            parallel_for(ids.size(), [&](std::size_t n) {
                const Tile& t = tiles_[static_cast<std::size_t>(ids[n])];
                if (t.leaf())
                    leaves[n] = bottom_level(t, padded_, w_);
                else
                    decisions[n] = combine(t, tile_ops[n]);
            });
            for (std::size_t n = 0; n < ids.size(); ++n) {
                const int ti = ids[n];
                const Tile& t = tiles_[static_cast<std::size_t>(ti)];
                ops_.stitches += tile_ops[n].stitches;
                ops_.selection += tile_ops[n].selection;
                for (auto& [slot, st] : leaves[n]) {
                    CurveRecord rec;
                    rec.stats = st;
                    rec.min_sub = rec.max_sub = st.signed_response();
                    rec.min_sub_length = rec.max_sub_length = st.length;
                    rec.tile = ti;
                    set_endpoints(rec, t, slot);
                    table_[t.table_offset + slot] = make_ref(static_cast<std::int64_t>(records_.size()), false);
                    records_.push_back(rec);
                }
                for (const Decision& d : decisions[n]) {
                    if (d.first == no_curve) {
                        table_[t.table_offset + d.slot] = d.ref;
                        continue;
                    }
                    const CurveStats s1 = oriented_stats(d.first), s2 = oriented_stats(d.second);
                    CurveRecord rec;
                    rec.stats = s1 + s2;
                    const double r1 = s1.signed_response(), r2 = s2.signed_response();
                    rec.min_sub = std::min(r1, r2);
                    rec.max_sub = std::max(r1, r2);
                    rec.min_sub_length = r1 <= r2 ? s1.length : s2.length;
                    rec.max_sub_length = r1 >= r2 ? s1.length : s2.length;
                    rec.first = d.first;
                    rec.second = d.second;
                    rec.tile = ti;
                    set_endpoints(rec, t, d.slot);
                    table_[t.table_offset + d.slot] = make_ref(static_cast<std::int64_t>(records_.size()), false);
                    records_.push_back(rec);
                }
                if (mode_ == BeamMode::greedy) compute_best_at(ti);
            }
        }
    }

    void set_endpoints(CurveRecord& rec, const Tile& t, std::size_t slot) const {
        // Invert the packed index.
        const int P = t.point_count();
        int i = 0;
        std::size_t row_start = 0;
        while (row_start + static_cast<std::size_t>(P - i - 1) <= slot) {
            row_start += static_cast<std::size_t>(P - i - 1);
            ++i;
        }
        const int j = i + 1 + static_cast<int>(slot - row_start);
        const SidePoint p = t.point(i), q = t.point(j);
        rec.x1 = static_cast<std::int16_t>(p.x);
        rec.y1 = static_cast<std::int16_t>(p.y);
        rec.x2 = static_cast<std::int16_t>(q.x);
        rec.y2 = static_cast<std::int16_t>(q.y);
    }

    void compute_best_at(int ti) {
        const Tile& t = tiles_[static_cast<std::size_t>(ti)];
        const int P = t.point_count();
        std::vector<double> best(static_cast<std::size_t>(P), -1.0);
        for (int i = 0; i < P; ++i)
            for (int j = i + 1; j < P; ++j) {
                const CurveRef r = table_[t.table_offset + t.pair_index(i, j)];
                if (r == no_curve) continue;
                const double v = records_[static_cast<std::size_t>(ref_record(r))].stats.response();
                best[static_cast<std::size_t>(i)] = std::max(best[static_cast<std::size_t>(i)], v);
                best[static_cast<std::size_t>(j)] = std::max(best[static_cast<std::size_t>(j)], v);
            }
        best_at_[static_cast<std::size_t>(ti)] = std::move(best);
    }

    // For every pair of the parent's side points keep the best of: the child curve when both points lie in one
    // child, and every stitch child1 -> interface point -> child2.
    std::vector<Decision> combine(const Tile& t, BeamOps& ops) const {
        const int c1 = t.children[0], c2 = t.children[1];
        const Tile& t1 = tiles_[static_cast<std::size_t>(c1)];
        const Tile& t2 = tiles_[static_cast<std::size_t>(c2)];
        const Side s1 = t.vertical_split ? Side::right : Side::bottom;
        const Side s2 = t.vertical_split ? Side::left : Side::top;

        struct Iface {
            int x, y, i1, i2;
        };
        std::vector<Iface> iface;
        const int m = t.vertical_split ? t.rect.height() : t.rect.width();
        for (int k = 0; k <= m; ++k) {
            const int x = t.vertical_split ? t1.rect.x1 : t.rect.x0 + k;
            const int y = t.vertical_split ? t.rect.y0 + k : t1.rect.y1;
            iface.push_back({x, y, t1.index_of(s1, x, y), t2.index_of(s2, x, y)});
        }

        std::vector<int> scan(iface.size());
        std::iota(scan.begin(), scan.end(), 0);
        if (mode_ == BeamMode::greedy && static_cast<int>(iface.size()) > k_) {
            const auto& b1 = best_at_[static_cast<std::size_t>(c1)];
            const auto& b2 = best_at_[static_cast<std::size_t>(c2)];
            std::vector<double> score(iface.size());
            for (std::size_t k = 0; k < iface.size(); ++k)
                score[k] = std::max(b1[static_cast<std::size_t>(iface[k].i1)], b2[static_cast<std::size_t>(iface[k].i2)]);
            std::stable_sort(scan.begin(), scan.end(), [&](int a, int b) { return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)]; });
            scan.resize(static_cast<std::size_t>(k_));
            std::sort(scan.begin(), scan.end());
        }
        ops.selection += mode_ == BeamMode::greedy ? iface.size() : 0;
        const std::size_t K = scan.size();

        // Per parent side point: child indices, and the child curves to / from each scanned interface point.
        const int P = t.point_count();
        struct Member {
            int i1 = -1, i2 = -1;
            std::vector<CurveRef> to_iface;    // child1 curve point -> iface (i1 >= 0)
            std::vector<CurveRef> from_iface;  // child2 curve iface -> point (i2 >= 0)
            std::array<std::vector<double>, 4> s1, s2;  // plus_int, plus_len, minus_int, minus_len
        };
        std::vector<Member> mem(static_cast<std::size_t>(P));
        for (int a = 0; a < P; ++a) {
            const SidePoint p = t.point(a);
            Member& mb = mem[static_cast<std::size_t>(a)];
            mb.i1 = t1.index_of(p.side, p.x, p.y);
            mb.i2 = t2.index_of(p.side, p.x, p.y);
            auto fill = [&](int child, int idx, bool toward, std::vector<CurveRef>& refs,
                            std::array<std::vector<double>, 4>& sums) {
                refs.resize(K);
                for (auto& v : sums) v.assign(K, 0.0);
                for (std::size_t n = 0; n < K; ++n) {
                    const Iface& f = iface[static_cast<std::size_t>(scan[n])];
                    const int fi = child == c1 ? f.i1 : f.i2;
                    if (f.x == p.x && f.y == p.y) {
                        refs[n] = no_curve;
                        continue;
                    }
                    const CurveRef r = toward ? lookup(child, idx, fi) : lookup(child, fi, idx);
                    if (r == no_curve) throw InternalError("missing child curve");
                    const CurveStats s = oriented_stats(r);
                    refs[n] = r;
                    sums[0][n] = s.plus_int;
                    sums[1][n] = s.plus_len;
                    sums[2][n] = s.minus_int;
                    sums[3][n] = s.minus_len;
                }
            };
            if (mb.i1 >= 0) fill(c1, mb.i1, true, mb.to_iface, mb.s1);
            if (mb.i2 >= 0) fill(c2, mb.i2, false, mb.from_iface, mb.s2);
        }

        std::vector<Decision> out;
        out.reserve(t.pair_slots());
        for (int a = 0; a < P; ++a) {
            const SidePoint pa = t.point(a);
            const Member& ma = mem[static_cast<std::size_t>(a)];
            for (int b = a + 1; b < P; ++b) {
                const SidePoint pb = t.point(b);
                if (!Tile::pairable(pa, pb)) continue;
                const Member& mb = mem[static_cast<std::size_t>(b)];
                Decision best;
                best.slot = t.pair_index(a, b);
                double best_r = -1.0;
                auto consider_ref = [&](CurveRef r) {
                    const double v = std::abs(signed_response(r));
                    if (v > best_r) {
                        best_r = v;
                        best.ref = r;
                        best.first = best.second = no_curve;
                    }
                };
                if (ma.i1 >= 0 && mb.i1 >= 0) consider_ref(lookup(c1, ma.i1, mb.i1));
                if (ma.i2 >= 0 && mb.i2 >= 0) consider_ref(lookup(c2, ma.i2, mb.i2));
                // from -> iface in child 1, iface -> to in child 2; reversed when the pair runs b -> a.
                auto scan_stitches = [&](const Member& from, const Member& to, bool reversed) {
                    const double *pi1 = from.s1[0].data(), *pl1 = from.s1[1].data();
                    const double *mi1 = from.s1[2].data(), *ml1 = from.s1[3].data();
                    const double *pi2 = to.s2[0].data(), *pl2 = to.s2[1].data();
                    const double *mi2 = to.s2[2].data(), *ml2 = to.s2[3].data();
                    ops.stitches += K;
                    for (std::size_t n = 0; n < K; ++n) {
                        const double pl = pl1[n] + pl2[n], ml = ml1[n] + ml2[n];
                        const double tot = pl + ml;
                        const double v = (pl > 0.0 && ml > 0.0)
                                             ? 2.0 * std::abs((pi1[n] + pi2[n]) * ml - (mi1[n] + mi2[n]) * pl) / (tot * tot)
                                             : 0.0;
                        if (!(v > best_r)) continue;
                        best_r = v;
                        const CurveRef g1 = from.to_iface[n], g2 = to.from_iface[n];
                        if (g1 == no_curve || g2 == no_curve) {
                            const CurveRef only = g1 == no_curve ? g2 : g1;
                            best.ref = reversed ? flip_ref(only) : only;
                            best.first = best.second = no_curve;
                        } else if (!reversed) {
                            best.first = g1;
                            best.second = g2;
                        } else {
                            best.first = flip_ref(g2);
                            best.second = flip_ref(g1);
                        }
                    }
                };
                if (ma.i1 >= 0 && mb.i2 >= 0) scan_stitches(ma, mb, false);
                if (mb.i1 >= 0 && ma.i2 >= 0) scan_stitches(mb, ma, true);
                if (best_r < 0.0) throw InternalError("no candidate curve for a side-point pair");
                out.push_back(best);
            }
        }
        return out;
    }

    void append_pieces(CurveRef r, std::vector<EdgePiece>& out) const {
        const CurveRecord& rec = records_[static_cast<std::size_t>(ref_record(r))];
        const bool rev = ref_reversed(r);
        if (rec.first == no_curve) {
            EdgePiece p;
            p.a = {static_cast<double>(rec.x1), static_cast<double>(rec.y1)};
            p.b = {static_cast<double>(rec.x2), static_cast<double>(rec.y2)};
            p.stats = rec.stats;
            if (rev) {
                std::swap(p.a, p.b);
                p.stats = p.stats.reversed();
            }
            p.tile = rec.tile;
            p.key = ref_record(r);
            out.push_back(p);
            return;
        }
        if (!rev) {
            append_pieces(rec.first, out);
            append_pieces(rec.second, out);
        } else {
            append_pieces(flip_ref(rec.second), out);
            append_pieces(flip_ref(rec.first), out);
        }
    }

    int width_, height_, w_, k_;
    BeamMode mode_;
    int side_ = 5;
    GrayImage padded_;
    std::vector<Tile> tiles_;
    std::vector<std::vector<int>> by_level_;
    std::vector<CurveRef> table_;
    std::vector<CurveRecord> records_;
    std::vector<std::vector<double>> best_at_;
    BeamOps ops_;
};

inline BeamTree build_beam_tree(const GrayImage& img, const DetectorParams& params, BeamMode mode) {
    return BeamTree(img, params, mode);
}

inline std::vector<BeamLevelCount> curve_count_audit(const BeamTree& tree) { return tree.count_audit(); }

// Every created curve with R > T(L) of the beam-curve family and passing the consistent-contrast test on its two
// children. Curves touching the mirror padding are dropped.
// Consistent-contrast test on the weakest (or, for negative R, strongest) child response.
inline bool passes_consistent_contrast(const CurveRecord& rec, const DetectorParams& params) {
    const double R = rec.stats.signed_response();
    const double sigma_e = std::sqrt(rec.stats.side_variance());
    const double ell = R > 0 ? rec.min_sub_length : rec.max_sub_length;
    const double b = cct_threshold({std::abs(R), sigma_e, params.sigma, params.w, std::max(1.0, ell)});
    return R > 0 ? rec.min_sub > b : rec.max_sub < -b;
}

// True when no leaf piece of the record reaches into the mirror padding.
inline bool curve_inside_image(const BeamTree& tree, std::int32_t record) {
    for (const EdgePiece& p : tree.pieces(make_ref(record, false)))
        if (std::max(p.a.x, p.b.x) > tree.width() - 1 || std::max(p.a.y, p.b.y) > tree.height() - 1) return false;
    return true;
}

// Records passing the threshold and the consistent-contrast test whose curves stay inside the unpadded image,
// in record order.
inline std::vector<std::int32_t> curve_candidates(const BeamTree& tree, const DetectorParams& params) {
    params.validate();
    const ThresholdParams tp = params.thresholds();
    const double n_pixels = static_cast<double>(tree.side()) * tree.side();
    const auto& recs = tree.records();
    std::vector<std::int32_t> out;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const CurveRecord& rec = recs[i];
        if (!passes_beam_threshold(rec.stats, n_pixels, tp)) continue;
        if (params.consistent_contrast && !passes_consistent_contrast(rec, params)) continue;
        if (curve_inside_image(tree, static_cast<std::int32_t>(i))) out.push_back(static_cast<std::int32_t>(i));
    }
    return out;
}

inline Edge curve_edge(const BeamTree& tree, std::int32_t record) {
    const BeamCurve c = tree.curve(make_ref(record, false));
    Edge e;
    e.polyline = c.polyline;
    e.pieces = c.pieces;
    e.length = c.L();
    e.response = c.signed_response();
    e.min_sub = c.min_sub;
    e.max_sub = c.max_sub;
    e.level = tree.tiles()[static_cast<std::size_t>(tree.records()[static_cast<std::size_t>(record)].tile)].level;
    return e;
}

inline EdgeSet detect_curves(const BeamTree& tree, const DetectorParams& params) {
    EdgeSet out;
    out.source = EdgeSource::curves;
    out.width = tree.width();
    out.height = tree.height();
    out.family_pixels = static_cast<double>(tree.side()) * tree.side();
    for (std::int32_t i : curve_candidates(tree, params)) out.edges.push_back(curve_edge(tree, i));
    return out;
}

}  // namespace faintedge
