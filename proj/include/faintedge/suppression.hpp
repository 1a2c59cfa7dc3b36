#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "faintedge/beam_tree.hpp"
#include "faintedge/edges.hpp"
#include "faintedge/line_pyramid.hpp"
#include "faintedge/params.hpp"
#include "faintedge/thresholds.hpp"

namespace faintedge {

namespace detail {

inline double point_segment_distance(Point p, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double n = vx * vx + vy * vy;
    double t = n > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / n : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - a.x - t * vx, p.y - a.y - t * vy);
}

// Points along a -> b at (at most) unit arc-length spacing, both ends included.
inline std::vector<Point> unit_samples(Point a, Point b) {
    const int n = std::max(1, static_cast<int>(std::ceil(std::hypot(b.x - a.x, b.y - a.y) - 1e-9)));
    std::vector<Point> out(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / n;
        out[static_cast<std::size_t>(k)] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    return out;
}

inline double median_of(std::vector<double>& v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    if (v.size() % 2 == 1) return v[m];
    const double hi = v[m];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

inline double directed_median_distance(Point a1, Point b1, Point a2, Point b2) {
    std::vector<double> d;
    for (const Point& p : unit_samples(a1, b1)) d.push_back(point_segment_distance(p, a2, b2));
    return median_of(d);
}

// Uniform hash grid of segments for neighbourhood queries.
class SegmentGrid {
public:
    explicit SegmentGrid(double cell = 8.0) : cell_(cell) {}

    void insert(Point a, Point b, double pad, std::size_t id) {
        for_cells(a, b, pad, [&](std::int64_t key) { cells_[key].push_back(id); });
    }

    // Ids whose padded bounding box cells meet the padded box of a -> b, deduplicated and sorted.
    std::vector<std::size_t> query(Point a, Point b, double pad) const {
        std::vector<std::size_t> out;
        for_cells(a, b, pad, [&](std::int64_t key) {
            auto it = cells_.find(key);
            if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
        });
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool empty() const { return cells_.empty(); }

private:
    template <class F>
    void for_cells(Point a, Point b, double pad, F&& f) const {
        const auto lo = [&](double v) { return static_cast<std::int64_t>(std::floor(v / cell_)); };
        const std::int64_t x0 = lo(std::min(a.x, b.x) - pad), x1 = lo(std::max(a.x, b.x) + pad);
        const std::int64_t y0 = lo(std::min(a.y, b.y) - pad), y1 = lo(std::max(a.y, b.y) + pad);
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x) f((y << 32) ^ (x & 0xffffffff));
    }

    double cell_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

inline auto endpoint_key(const Edge& e) {
    const Point a = e.polyline.empty() ? Point{} : e.polyline.front();
    const Point b = e.polyline.empty() ? Point{} : e.polyline.back();
    return std::tuple{a.x, a.y, b.x, b.y};
}

// Strongest first; ties go to the longer edge, then to lexicographically smaller endpoints.
inline bool stronger(const Edge& a, const Edge& b) {
    if (a.magnitude() != b.magnitude()) return a.magnitude() > b.magnitude();
    if (a.length != b.length) return a.length > b.length;
    return endpoint_key(a) < endpoint_key(b);
}

}  // namespace detail

// Symmetric median Hausdorff distance between two straight segments sampled at unit spacing.
inline double median_hausdorff(Point a1, Point b1, Point a2, Point b2) {
    return std::max(detail::directed_median_distance(a1, b1, a2, b2), detail::directed_median_distance(a2, b2, a1, b1));
}

// Angular, spatial and inter-level suppression of straight-line detections.
inline EdgeSet line_nms(const EdgeSet& in, const ThresholdParams& tp, const SuppressionParams& sp) {
    tp.validate();
    sp.validate();
    EdgeSet out = in;
    out.edges.clear();
    if (in.empty()) return out;
    const double n_pixels = in.family_pixels > 0.0 ? in.family_pixels : static_cast<double>(in.width) * in.height;
    const double k_lines = line_family_size(n_pixels);
    const double across = tp.w / 2.0;

    std::map<int, std::vector<std::size_t>, std::greater<>> by_length;
    for (std::size_t i = 0; i < in.edges.size(); ++i) by_length[in.edges[i].grid_length].push_back(i);

    detail::SegmentGrid accepted_grid;
    std::vector<std::pair<Point, Point>> accepted_segments;

    for (auto& [L, ids] : by_length) {
        std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
            const Edge &ea = in.edges[a], &eb = in.edges[b];
            if (detail::stronger(ea, eb)) return true;
            if (detail::stronger(eb, ea)) return false;
            return a < b;
        });

        // Angular: one line per rounded centre. Partial pieces already survived an earlier pass and skip the
        // angular and spatial steps.
        std::set<std::pair<long, long>> centres;
        std::vector<std::size_t> angular;
        for (std::size_t i : ids) {
            const Edge& e = in.edges[i];
            if (e.partial) {
                angular.push_back(i);
                continue;
            }
            const long cx = std::lround(0.5 * (e.grid_from.x + e.grid_to.x));
            const long cy = std::lround(0.5 * (e.grid_from.y + e.grid_to.y));
            if (centres.insert({cx, cy}).second) angular.push_back(i);
        }

        // Spatial: greedy local maxima. A weaker line is a neighbour of a kept one when its centre lies within L/2
        // along it (half a pixel of slack for tilted pairs) and both its endpoints lie within w/2 of the kept
        // line's supporting line.
        const double along = L / 2.0 + 0.5;
        const double cell = along + across + 1.0;
        std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets;
        auto bucket_key = [](std::int64_t bx, std::int64_t by) { return (by << 32) ^ (bx & 0xffffffff); };
        auto centre = [](const Edge& e) {
            return Point{0.5 * (e.grid_from.x + e.grid_to.x), 0.5 * (e.grid_from.y + e.grid_to.y)};
        };
        auto neighbour = [&](const Edge& kept, const Edge& e) {
            const double dx = kept.grid_to.x - kept.grid_from.x, dy = kept.grid_to.y - kept.grid_from.y;
            const double len = std::hypot(dx, dy);
            if (!(len > 0.0)) return false;
            const double ux = dx / len, uy = dy / len;
            const Point kc = centre(kept), ec = centre(e);
            if (std::abs((ec.x - kc.x) * ux + (ec.y - kc.y) * uy) > along) return false;
            for (const Point& p : {e.grid_from, e.grid_to})
                if (std::abs((p.x - kc.x) * uy - (p.y - kc.y) * ux) > across) return false;
            return true;
        };
        std::vector<std::size_t> spatial;
        for (std::size_t i : angular) {
            const Edge& e = in.edges[i];
            if (e.partial) {
                spatial.push_back(i);
                continue;
            }
            const Point c = centre(e);
            const auto bx = static_cast<std::int64_t>(std::floor(c.x / cell));
            const auto by = static_cast<std::int64_t>(std::floor(c.y / cell));
            bool suppressed = false;
            for (std::int64_t j = by - 1; j <= by + 1 && !suppressed; ++j) {
                for (std::int64_t k = bx - 1; k <= bx + 1 && !suppressed; ++k) {
                    auto it = buckets.find(bucket_key(k, j));
                    if (it == buckets.end()) continue;
                    for (std::size_t o : it->second) {
                        if (neighbour(in.edges[o], e)) {
                            suppressed = true;
                            break;
                        }
                    }
                }
            }
            if (suppressed) continue;
            buckets[bucket_key(bx, by)].push_back(i);
            spatial.push_back(i);
        }

        // Inter-level: compare with every accepted longer line and with stronger lines already kept at this length.
        auto accept = [&](Edge e) {
            for (std::size_t k = 1; k < e.polyline.size(); ++k) {
                accepted_grid.insert(e.polyline[k - 1], e.polyline[k], across, accepted_segments.size());
                accepted_segments.emplace_back(e.polyline[k - 1], e.polyline[k]);
            }
            out.edges.push_back(std::move(e));
        };
        for (std::size_t i : spatial) {
            const Edge& e = in.edges[i];
            if (accepted_grid.empty() || e.sample_points.empty()) {
                accept(e);
                continue;
            }
            const std::size_t n = e.sample_points.size();
            std::vector<char> covered(n, 0);
            std::size_t n_covered = 0;
            for (std::size_t t = 0; t < n; ++t) {
                const Point p = e.sample_points[t];
                for (std::size_t id : accepted_grid.query(p, p, across)) {
                    const auto& [a, b] = accepted_segments[id];
                    if (detail::point_segment_distance(p, a, b) <= across) {
                        covered[t] = 1;
                        ++n_covered;
                        break;
                    }
                }
            }
            if (n_covered == 0) {
                accept(e);
                continue;
            }
            if (static_cast<double>(n_covered) / static_cast<double>(n) > sp.overlap_fraction) continue;
            for (std::size_t t = 0; t < n;) {
                if (covered[t]) {
                    ++t;
                    continue;
                }
                std::size_t u = t;
                while (u < n && !covered[u]) ++u;
                const std::size_t count = u - t;
                if (count >= 2) {
                    const std::span<const double> run(e.samples.data() + t, count);
                    double sum = 0.0;
                    for (double v : run) sum += v;
                    const double r = sum / static_cast<double>(count);
                    const double lt = static_cast<double>(count - 1);
                    if (std::abs(r) > detection_threshold(lt, k_lines, tp)) {
                        Edge part = e;
                        part.partial = true;
                        part.length = lt;
                        part.response = r;
                        part.samples.assign(run.begin(), run.end());
                        part.sample_points.assign(e.sample_points.begin() + static_cast<std::ptrdiff_t>(t),
                                                  e.sample_points.begin() + static_cast<std::ptrdiff_t>(u));
                        part.min_sub = *std::min_element(run.begin(), run.end());
                        part.max_sub = *std::max_element(run.begin(), run.end());
                        part.polyline = {part.sample_points.front(), part.sample_points.back()};
                        accept(std::move(part));
                    }
                }
                t = u;
            }
        }
    }
    return out;
}

inline EdgeSet line_nms(const EdgeSet& in, const DetectorParams& params) {
    return line_nms(in, params.thresholds(), params.suppression);
}

// Piece-level overlap suppression of curve candidates. Candidate i is described by its tile level, signed
// response, length, endpoints and a callback returning its leaf pieces. Returns, per accepted candidate, the
// index and the maximal runs [begin, end) of its pieces that were kept, in acceptance order.
struct CurveCandidate {
    int level = 0;
    double response = 0.0;
    double length = 0.0;
    Point p1;
    Point p2;
};

struct CurveSelection {
    std::size_t candidate = 0;
    std::vector<std::pair<std::size_t, std::size_t>> runs;  // empty means the whole curve
};

inline std::vector<CurveSelection> select_curves(std::span<const CurveCandidate> cands,
                                                 const std::function<std::vector<EdgePiece>(std::size_t)>& pieces_of,
                                                 double n_pixels, const ThresholdParams& tp,
                                                 const SuppressionParams& sp) {
    tp.validate();
    sp.validate();
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const CurveCandidate &x = cands[a], &y = cands[b];
        if (x.level != y.level) return x.level < y.level;
        if (std::abs(x.response) != std::abs(y.response)) return std::abs(x.response) > std::abs(y.response);
        if (x.length != y.length) return x.length > y.length;
        const auto kx = std::tuple{x.p1.x, x.p1.y, x.p2.x, x.p2.y}, ky = std::tuple{y.p1.x, y.p1.y, y.p2.x, y.p2.y};
        if (kx != ky) return kx < ky;
        return a < b;
    });

    const double tol = sp.hausdorff_tol;
    detail::SegmentGrid grid;
    std::vector<std::pair<Point, Point>> accepted;
    struct Coverage {
        bool covered = false;
        std::size_t checked = 0;
    };
    std::unordered_map<std::int32_t, Coverage> memo_of;
    std::vector<CurveSelection> out;
    for (std::size_t ci : order) {
        const std::vector<EdgePiece> pieces = pieces_of(ci);
        if (pieces.empty()) continue;
        std::vector<char> covered(pieces.size(), 0);
        std::size_t n_covered = 0;
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            const EdgePiece& p = pieces[k];
            // Coverage only grows, so a leaf is rechecked against pieces accepted since its last check.
            Coverage* memo = p.key >= 0 ? &memo_of[p.key] : nullptr;
            bool hit = memo && memo->covered;
            if (!hit) {
                const std::size_t from = memo ? memo->checked : 0;
                for (std::size_t id : grid.query(p.a, p.b, tol)) {
                    if (id < from) continue;
                    if (median_hausdorff(p.a, p.b, accepted[id].first, accepted[id].second) < tol) {
                        hit = true;
                        break;
                    }
                }
                if (memo) *memo = {hit, accepted.size()};
            }
            if (hit) {
                covered[k] = 1;
                ++n_covered;
            }
        }
        CurveSelection sel{ci, {}};
        if (n_covered == pieces.size()) continue;
        if (n_covered > 0) {
            for (std::size_t t = 0; t < pieces.size();) {
                if (covered[t]) {
                    ++t;
                    continue;
                }
                std::size_t u = t;
                CurveStats st;
                while (u < pieces.size() && !covered[u]) st += pieces[u++].stats;
                if (passes_beam_threshold(st, n_pixels, tp)) sel.runs.emplace_back(t, u);
                t = u;
            }
            if (sel.runs.empty()) continue;
        }
        auto add = [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                grid.insert(pieces[k].a, pieces[k].b, tol, accepted.size());
                accepted.emplace_back(pieces[k].a, pieces[k].b);
            }
        };
        if (sel.runs.empty()) {
            add(0, pieces.size());
        } else {
            for (auto [b, e] : sel.runs) add(b, e);
        }
        out.push_back(std::move(sel));
    }
    return out;
}

namespace detail {

inline Edge piece_run_edge(const Edge& base, std::span<const EdgePiece> run) {
    Edge e = base;
    e.partial = true;
    e.pieces.assign(run.begin(), run.end());
    e.polyline.clear();
    CurveStats st;
    e.min_sub = std::numeric_limits<double>::infinity();
    e.max_sub = -std::numeric_limits<double>::infinity();
    for (const EdgePiece& p : run) {
        if (e.polyline.empty()) e.polyline.push_back(p.a);
        e.polyline.push_back(p.b);
        st += p.stats;
        e.min_sub = std::min(e.min_sub, p.stats.signed_response());
        e.max_sub = std::max(e.max_sub, p.stats.signed_response());
    }
    e.length = st.length;
    e.response = st.signed_response();
    return e;
}

inline EdgeSet apply_selection(const EdgeSet& shape, const std::vector<CurveSelection>& sel,
                               const std::function<Edge(std::size_t)>& edge_of) {
    EdgeSet out = shape;
    out.edges.clear();
    for (const CurveSelection& s : sel) {
        Edge e = edge_of(s.candidate);
        if (s.runs.empty()) {
            out.edges.push_back(std::move(e));
            continue;
        }
        for (auto [b, en] : s.runs)
            out.edges.push_back(piece_run_edge(e, std::span<const EdgePiece>(e.pieces).subspan(b, en - b)));
    }
    return out;
}

}  // namespace detail

// Top tile first, strongest first within a level; a curve is cut where its leaf pieces lie within the median
// Hausdorff tolerance of already accepted pieces, and each remaining run is kept if it passes its threshold.
inline EdgeSet curve_nms(const EdgeSet& in, const ThresholdParams& tp, const SuppressionParams& sp) {
    std::vector<CurveCandidate> cands;
    cands.reserve(in.edges.size());
    for (const Edge& e : in.edges) {
        const Point a = e.polyline.empty() ? Point{} : e.polyline.front();
        const Point b = e.polyline.empty() ? Point{} : e.polyline.back();
        cands.push_back({e.level, e.response, e.length, a, b});
    }
    const double n_pixels = in.family_pixels > 0.0 ? in.family_pixels : static_cast<double>(in.width) * in.height;
    const auto sel = select_curves(
        cands, [&](std::size_t i) { return in.edges[i].pieces; }, n_pixels, tp, sp);
    return detail::apply_selection(in, sel, [&](std::size_t i) { return in.edges[i]; });
}

inline EdgeSet curve_nms(const EdgeSet& in, const DetectorParams& params) {
    return curve_nms(in, params.thresholds(), params.suppression);
}

// Thresholded, suppressed curve detections straight from the tree, materialising only accepted curves.
inline EdgeSet detect_curves_nms(const BeamTree& tree, const DetectorParams& params) {
    const std::vector<std::int32_t> ids = curve_candidates(tree, params);
    std::vector<CurveCandidate> cands;
    cands.reserve(ids.size());
    for (std::int32_t i : ids) {
        const CurveRecord& rec = tree.records()[static_cast<std::size_t>(i)];
        cands.push_back({tree.tiles()[static_cast<std::size_t>(rec.tile)].level, rec.stats.signed_response(),
                         rec.stats.length, Point{static_cast<double>(rec.x1), static_cast<double>(rec.y1)},
                         Point{static_cast<double>(rec.x2), static_cast<double>(rec.y2)}});
    }
    const double n_pixels = static_cast<double>(tree.side()) * tree.side();
    const auto sel = select_curves(
        cands, [&](std::size_t k) { return tree.pieces(make_ref(ids[k], false)); }, n_pixels, params.thresholds(),
        params.suppression);
    EdgeSet shape;
    shape.source = EdgeSource::curves;
    shape.width = tree.width();
    shape.height = tree.height();
    shape.family_pixels = n_pixels;
    return detail::apply_selection(shape, sel, [&](std::size_t k) { return curve_edge(tree, ids[k]); });
}

inline EdgeSet suppress(const EdgeSet& in, const DetectorParams& params) {
    return in.source == EdgeSource::lines ? line_nms(in, params) : curve_nms(in, params);
}

}  // namespace faintedge
