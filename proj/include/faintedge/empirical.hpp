#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "faintedge/beam_tree.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"
#include "faintedge/line_pyramid.hpp"
#include "faintedge/parallel.hpp"
#include "faintedge/thresholds.hpp"

namespace faintedge {

enum class ResponseFamily { straight_lines, beam_curves };

inline std::string to_string(ResponseFamily f) { return f == ResponseFamily::straight_lines ? "lines" : "curves"; }

struct EmpiricalRow {
    double length = 0.0;
    double theoretical = 0.0;
    double empirical_median = 0.0;
    int trials_with_data = 0;
};

namespace detail {

inline double median_copy(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Max |R| per requested length over every straight line of that grid length; NaN where the level is absent.
inline std::vector<double> line_maxima(const GrayImage& img, const std::vector<int>& lengths, const ThresholdParams& tp) {
    DetectorParams dp;
    dp.w = tp.w;
    dp.sigma = tp.sigma;
    const LinePyramid pyr(img, dp, false);
    std::vector<double> out(lengths.size(), std::numeric_limits<double>::quiet_NaN());
    for (int l = 0; l < pyr.level_count(); ++l) {
        const auto it = std::find(lengths.begin(), lengths.end(), pyr.length(l));
        if (it == lengths.end()) continue;
        double m = 0.0;
        for (OrientationClass c : {OrientationClass::vertical, OrientationClass::horizontal})
            for (double v : pyr.data(c).levels[static_cast<std::size_t>(l)].r)
                if (is_valid(v)) m = std::max(m, std::abs(v));
        out[static_cast<std::size_t>(it - lengths.begin())] = m;
    }
    return out;
}

// Max |R| per length bin [L_i, L_{i+1}) over stored beam curves. Responses of curves whose offset lines are
// clipped by the image border are rescaled to the noise level of an unclipped curve of the same length.
inline std::vector<double> curve_maxima(const GrayImage& img, const std::vector<int>& lengths, const ThresholdParams& tp) {
    DetectorParams dp;
    dp.w = tp.w;
    dp.sigma = tp.sigma;
    const BeamTree tree(img, dp, BeamMode::stringent);
    std::vector<double> out(lengths.size(), std::numeric_limits<double>::quiet_NaN());
    for (const CurveRecord& rec : tree.records()) {
        const double L = rec.stats.length;
        const auto it = std::upper_bound(lengths.begin(), lengths.end(), L);
        if (it == lengths.begin()) continue;
        const std::size_t bin = static_cast<std::size_t>(it - lengths.begin()) - 1;
        const double le = rec.stats.effective_length(tp.w);
        if (!(le > 0.0)) continue;
        const double r = std::abs(rec.stats.signed_response()) * std::sqrt(le / L);
        out[bin] = std::isnan(out[bin]) ? r : std::max(out[bin], r);
    }
    return out;
}

}  // namespace detail

// Median over pure-noise trials of the maximal |R| among candidates of each length, next to the analytic
// threshold: T(L, 8N) for lines and T(L, 6N 2^(beta L)) for beam curves. Trial t uses seed noise.seed + t.
inline std::vector<EmpiricalRow> empirical_max_response(ResponseFamily family, int side, std::vector<int> lengths,
                                                        int trials, const NoiseSpec& noise, const ThresholdParams& tp) {
    tp.validate();
    if (trials < 3) throw ParameterError("at least 3 trials are required");
    if (side < 5) throw ParameterError("image side must be at least 5");
    if (!(noise.sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
    std::sort(lengths.begin(), lengths.end());
    lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
    for (int L : lengths)
        if (L < 1) throw ParameterError("lengths must be positive");

    std::vector<std::vector<double>> maxima(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
        const GrayImage img = gaussian_noise_image(side, side, {noise.sigma, noise.seed + t});
        maxima[t] = family == ResponseFamily::straight_lines ? detail::line_maxima(img, lengths, tp)
                                                             : detail::curve_maxima(img, lengths, tp);
    });

    double n_pixels = static_cast<double>(side) * side;
    if (family == ResponseFamily::beam_curves) {
        int padded = 5;
        while (padded < side) padded = 2 * padded - 1;
        n_pixels = static_cast<double>(padded) * padded;
    }
    std::vector<EmpiricalRow> rows;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        std::vector<double> v;
        for (const auto& m : maxima)
            if (!std::isnan(m[i])) v.push_back(m[i]);
        EmpiricalRow row;
        row.length = lengths[i];
        row.theoretical = family == ResponseFamily::straight_lines
                              ? detection_threshold(lengths[i], line_family_size(n_pixels), tp)
                              : beamcurve_threshold(lengths[i], n_pixels, tp);
        row.empirical_median = detail::median_copy(v);
        row.trials_with_data = static_cast<int>(v.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace faintedge
