#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "faintedge/beam_tree.hpp"
#include "faintedge/edges.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"
#include "faintedge/line_pyramid.hpp"
#include "faintedge/parallel.hpp"
#include "faintedge/params.hpp"
#include "faintedge/pattern.hpp"
#include "faintedge/suppression.hpp"

namespace faintedge {

enum class Detector { lines, curves_stringent, curves_greedy };

inline std::string to_string(Detector d) {
    switch (d) {
        case Detector::lines: return "lines";
        case Detector::curves_stringent: return "curves-stringent";
        case Detector::curves_greedy: return "curves-greedy";
    }
    return "";
}

inline Detector parse_detector(const std::string& s) {
    if (s == "lines") return Detector::lines;
    if (s == "curves-stringent" || s == "curves") return Detector::curves_stringent;
    if (s == "curves-greedy") return Detector::curves_greedy;
    throw ParameterError("unknown detector '" + s + "'");
}

struct RunConfig {
    Detector detector = Detector::curves_stringent;
    DetectorParams params;
    bool nms = true;
    double match_tol = 2.0;
    int side = 129;  // benchmark pattern side
    std::uint64_t seed = 0;

    void validate() const {
        params.validate();
        if (!(match_tol >= 0.0)) throw ParameterError("match tolerance must be nonnegative");
        if (side < pattern_layout::min_side) throw ParameterError("benchmark pattern side must be at least 65");
    }
};

struct EvalResult {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    double snr = 0.0;
    Detector detector = Detector::lines;
};

// Detection (and, unless disabled, suppression) on one image.
inline EdgeSet run_detector(const GrayImage& img, const RunConfig& cfg) {
    cfg.validate();
    if (cfg.detector == Detector::lines) {
        const LinePyramid pyr(img, cfg.params, cfg.params.consistent_contrast);
        const EdgeSet raw = detect_lines(pyr, cfg.params);
        return cfg.nms ? line_nms(raw, cfg.params) : raw;
    }
    const BeamTree tree(img, cfg.params,
                        cfg.detector == Detector::curves_greedy ? BeamMode::greedy : BeamMode::stringent);
    return cfg.nms ? detect_curves_nms(tree, cfg.params) : detect_curves(tree, cfg.params);
}

namespace detail {

// Maximum bipartite matching (Hopcroft-Karp); adj[u] lists right vertices of left vertex u.
inline std::size_t max_matching(const std::vector<std::vector<int>>& adj, int n_right) {
    const int n_left = static_cast<int>(adj.size());
    constexpr int inf = std::numeric_limits<int>::max();
    std::vector<int> match_l(static_cast<std::size_t>(n_left), -1), match_r(static_cast<std::size_t>(n_right), -1);
    std::vector<int> dist(static_cast<std::size_t>(n_left));
    std::size_t matched = 0;

    auto bfs = [&] {
        std::queue<int> q;
        bool found = false;
        for (int u = 0; u < n_left; ++u) {
            if (match_l[static_cast<std::size_t>(u)] < 0) {
                dist[static_cast<std::size_t>(u)] = 0;
                q.push(u);
            } else {
                dist[static_cast<std::size_t>(u)] = inf;
            }
        }
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                const int m = match_r[static_cast<std::size_t>(v)];
                if (m < 0) {
                    found = true;
                } else if (dist[static_cast<std::size_t>(m)] == inf) {
                    dist[static_cast<std::size_t>(m)] = dist[static_cast<std::size_t>(u)] + 1;
                    q.push(m);
                }
            }
        }
        return found;
    };

    // Iterative layered DFS from a free left vertex.
    std::vector<std::size_t> it(static_cast<std::size_t>(n_left));
    auto dfs = [&](int root) {
        std::vector<int> stack{root};
        while (!stack.empty()) {
            const int u = stack.back();
            auto& k = it[static_cast<std::size_t>(u)];
            const auto& nb = adj[static_cast<std::size_t>(u)];
            bool advanced = false;
            for (; k < nb.size(); ++k) {
                const int v = nb[k];
                const int m = match_r[static_cast<std::size_t>(v)];
                if (m < 0) {
                    // Augment along the stack.
                    int right = v;
                    for (auto s = stack.rbegin(); s != stack.rend(); ++s) {
                        const int left = *s;
                        const int prev = match_l[static_cast<std::size_t>(left)];
                        match_l[static_cast<std::size_t>(left)] = right;
                        match_r[static_cast<std::size_t>(right)] = left;
                        right = prev;
                    }
                    return true;
                }
                if (dist[static_cast<std::size_t>(m)] == dist[static_cast<std::size_t>(u)] + 1) {
                    ++k;
                    stack.push_back(m);
                    advanced = true;
                    break;
                }
            }
            if (!advanced) {
                dist[static_cast<std::size_t>(u)] = inf;
                stack.pop_back();
            }
        }
        return false;
    };

    while (bfs()) {
        std::fill(it.begin(), it.end(), 0);
        for (int u = 0; u < n_left; ++u)
            if (match_l[static_cast<std::size_t>(u)] < 0 && dfs(u)) ++matched;
    }
    return matched;
}

}  // namespace detail

// One-to-one matching of predicted to ground-truth pixels within Euclidean distance match_tol.
inline EvalResult f_measure(const EdgeMap& pred, const EdgeMap& gt, double match_tol) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw ParameterError("prediction and ground truth must have the same dimensions");
    if (!(match_tol >= 0.0)) throw ParameterError("match tolerance must be nonnegative");
    std::vector<std::pair<int, int>> p, g;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (pred(x, y)) p.emplace_back(x, y);
            if (gt(x, y)) g.emplace_back(x, y);
        }
    EvalResult r;
    if (p.empty() && g.empty()) {
        r.precision = r.recall = r.f_measure = 1.0;
        return r;
    }
    if (p.empty() || g.empty()) return r;

    Grid<int> gt_index(gt.width(), gt.height(), -1);
    for (std::size_t i = 0; i < g.size(); ++i) gt_index(g[i].first, g[i].second) = static_cast<int>(i);
    const int reach = static_cast<int>(std::floor(match_tol));
    const double tol2 = match_tol * match_tol;
    std::vector<std::vector<int>> adj(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto [px, py] = p[i];
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dx = -reach; dx <= reach; ++dx) {
                if (dx * dx + dy * dy > tol2 || !gt.contains(px + dx, py + dy)) continue;
                const int j = gt_index(px + dx, py + dy);
                if (j >= 0) adj[i].push_back(j);
            }
    }
    const double m = static_cast<double>(detail::max_matching(adj, static_cast<int>(g.size())));
    r.precision = m / static_cast<double>(p.size());
    r.recall = m / static_cast<double>(g.size());
    r.f_measure = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

// Smallest beta at which no candidate of this tree survives the threshold (candidates failing the
// consistent-contrast test or reaching into the padding never count). Zero when nothing can pass.
inline double quiet_beta(const BeamTree& tree, const DetectorParams& params) {
    const double n_pixels = static_cast<double>(tree.side()) * tree.side();
    const double base = std::log(6.0 * n_pixels) - std::log(params.delta);
    double worst = 0.0;
    const auto& recs = tree.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const CurveRecord& rec = recs[i];
        const double le = rec.stats.effective_length(params.w);
        if (rec.stats.length <= 0.0 || !(le > 0.0)) continue;
        const double R = rec.stats.signed_response() / params.sigma;
        const double need = (params.w * le * R * R / 2.0 - base) / (rec.stats.length * std::numbers::ln2);
        if (need <= worst) continue;
        if (params.consistent_contrast && !passes_consistent_contrast(rec, params)) continue;
        if (!curve_inside_image(tree, static_cast<std::int32_t>(i))) continue;
        worst = need;
    }
    return worst;
}

struct BetaCalibration {
    double beta = 0.0;
    std::vector<double> per_trial;
};

// Beam-curve search-space constant tuned so that none of `trials` pure-noise images of the benchmark size
// yields a detection: the largest per-image quiet beta, rounded up to 0.01 and never below cfg's beta.
inline BetaCalibration calibrate_beta(const RunConfig& cfg, int trials, std::uint64_t seed) {
    cfg.validate();
    if (cfg.detector == Detector::lines) throw ParameterError("beta calibration applies to the curve detectors");
    if (trials < 1) throw ParameterError("calibration needs at least one trial");
    BetaCalibration out;
    out.per_trial.resize(static_cast<std::size_t>(trials));
    const BeamMode mode = cfg.detector == Detector::curves_greedy ? BeamMode::greedy : BeamMode::stringent;
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
        const GrayImage img = gaussian_noise_image(cfg.side, cfg.side, {cfg.params.sigma, seed + t});
        out.per_trial[t] = quiet_beta(BeamTree(img, cfg.params, mode), cfg.params);
    });
    const double worst = *std::max_element(out.per_trial.begin(), out.per_trial.end());
    out.beta = std::max(cfg.params.beta, std::ceil(worst * 100.0 - 1e-9) / 100.0);
    return out;
}

struct SweepRow {
    double snr = 0.0;
    EvalResult mean;
    double f_sd = 0.0;
    double mean_count = 0.0;
    double median_count = 0.0;
    std::vector<double> f_trials;
    std::vector<std::size_t> counts;
};

// Pattern at contrast snr * sigma plus N(0, sigma^2) noise; trial t at SNR index i uses seed cfg.seed + i * trials + t.
inline std::vector<SweepRow> snr_sweep(const RunConfig& cfg, const std::vector<double>& snrs, int trials) {
    cfg.validate();
    if (trials < 1) throw ParameterError("sweep needs at least one trial per SNR");
    const std::size_t T = static_cast<std::size_t>(trials);
    std::vector<EvalResult> evals(snrs.size() * T);
    std::vector<std::size_t> counts(snrs.size() * T);
    parallel_for(evals.size(), [&](std::size_t job) {
        const std::size_t i = job / T, t = job % T;
        const double snr = snrs[i];
        if (!(snr >= 0.0)) throw ParameterError("SNR must be nonnegative");
        const TestPattern pat = generate_test_pattern({cfg.side, snr * cfg.params.sigma});
        const GrayImage img = add_gaussian_noise(pat.image, {cfg.params.sigma, cfg.seed + i * T + t});
        const EdgeSet edges = run_detector(img, cfg);
        evals[job] = f_measure(rasterize(edges), pat.truth, cfg.match_tol);
        counts[job] = edges.size();
    });
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < snrs.size(); ++i) {
        SweepRow row;
        row.snr = snrs[i];
        row.mean.snr = snrs[i];
        row.mean.detector = cfg.detector;
        for (std::size_t t = 0; t < T; ++t) {
            const EvalResult& e = evals[i * T + t];
            row.mean.precision += e.precision / trials;
            row.mean.recall += e.recall / trials;
            row.mean.f_measure += e.f_measure / trials;
            row.f_trials.push_back(e.f_measure);
            row.counts.push_back(counts[i * T + t]);
            row.mean_count += static_cast<double>(counts[i * T + t]) / trials;
        }
        double ss = 0.0;
        for (double f : row.f_trials) ss += (f - row.mean.f_measure) * (f - row.mean.f_measure);
        row.f_sd = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
        std::vector<std::size_t> c = row.counts;
        std::sort(c.begin(), c.end());
        row.median_count = T % 2 ? static_cast<double>(c[T / 2]) : 0.5 * static_cast<double>(c[T / 2 - 1] + c[T / 2]);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Responses computed by the line pyramid: base responses plus every level's directions.
inline std::uint64_t line_operation_count(const LinePyramid& pyr) {
    std::uint64_t n = 0;
    for (OrientationClass c : {OrientationClass::vertical, OrientationClass::horizontal}) {
        const auto& cd = pyr.data(c);
        n += cd.base.r.values.size();
        for (const auto& lv : cd.levels) n += lv.r.size();
    }
    return n;
}

struct AuditRow {
    int side = 0;
    double pixels = 0.0;
    std::uint64_t ops = 0;
    double normalized = 0.0;  // ops / N^1.5 for curves-stringent, ops / (N log2 N) otherwise
    std::optional<double> seconds;
};

struct AuditResult {
    Detector detector = Detector::lines;
    std::vector<AuditRow> rows;
    double slope = 0.0;  // least-squares slope of log ops against log N
};

// Operation counts on pure-noise square images of the given sides; wall time only when timed is set.
inline AuditResult runtime_audit(Detector detector, const std::vector<int>& sides, const RunConfig& cfg,
                                 bool timed = false) {
    cfg.validate();
    AuditResult out;
    out.detector = detector;
    for (int side : sides) {
        if (side < 5) throw ParameterError("audit sizes must be at least 5");
        const GrayImage img = gaussian_noise_image(side, side, {cfg.params.sigma, cfg.seed});
        AuditRow row;
        row.side = side;
        const auto t0 = std::chrono::steady_clock::now();
        if (detector == Detector::lines) {
            const LinePyramid pyr(img, cfg.params, cfg.params.consistent_contrast);
            row.ops = line_operation_count(pyr);
            row.pixels = static_cast<double>(side) * side;
        } else {
            const BeamMode mode = detector == Detector::curves_greedy ? BeamMode::greedy : BeamMode::stringent;
            const BeamTree tree(img, cfg.params, mode);
            row.ops = mode == BeamMode::greedy ? tree.ops().total() : tree.ops().stitches;
            row.pixels = static_cast<double>(tree.side()) * tree.side();
        }
        if (timed) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double N = row.pixels;
        row.normalized = detector == Detector::curves_stringent ? static_cast<double>(row.ops) / std::pow(N, 1.5)
                                                                : static_cast<double>(row.ops) / (N * std::log2(N));
        out.rows.push_back(row);
    }
    if (out.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(out.rows.size());
        for (const AuditRow& r : out.rows) {
            const double x = std::log(r.pixels), y = std::log(static_cast<double>(std::max<std::uint64_t>(r.ops, 1)));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double den = n * sxx - sx * sx;
        out.slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    }
    return out;
}

}  // namespace faintedge
