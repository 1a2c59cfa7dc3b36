#pragma once

#include <cmath>
#include <numbers>

#include "faintedge/edges.hpp"
#include "faintedge/error.hpp"
#include "faintedge/image.hpp"

namespace faintedge {

struct ThresholdParams {
    double sigma = 1.0;
    int w = 4;
    double delta = 0.5;
    double beta = 0.65;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be positive");
        if (w < 2 || w % 2 != 0) throw ParameterError("filter width w must be an even integer >= 2");
        if (!(delta > 0.0 && delta <= 0.5)) throw ParameterError("delta must lie in (0, 0.5]");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be nonnegative");
    }
};

// sigma * sqrt(2 (ln K - ln delta) / (w L)), taking ln K directly so huge search spaces do not overflow.
inline double detection_threshold_log(double L, double log_k, const ThresholdParams& p) {
    p.validate();
    if (!(L > 0.0)) throw ParameterError("length must be positive");
    const double num = log_k - std::log(p.delta);
    if (num < 0.0) throw ParameterError("search-space size K_L must be at least delta");
    return p.sigma * std::sqrt(2.0 * num / (p.w * L));
}

inline double detection_threshold(double L, double k_l, const ThresholdParams& p) {
    if (!(k_l > 0.0)) throw ParameterError("search-space size K_L must be positive");
    return detection_threshold_log(L, std::log(k_l), p);
}

// Straight-line search space, independent of L.
inline double line_family_size(double n_pixels) { return 8.0 * n_pixels; }

// K_L = 6N 2^(beta L) for beam curves.
inline double beamcurve_threshold(double L, double n_pixels, const ThresholdParams& p) {
    if (!(n_pixels >= 1.0)) throw ParameterError("pixel count must be positive");
    return detection_threshold_log(L, std::log(6.0 * n_pixels) + p.beta * L * std::numbers::ln2, p);
}

// |R| > T at the noise-equivalent length, with the family size counted at the nominal length.
inline bool passes_beam_threshold(const CurveStats& st, double n_pixels, const ThresholdParams& tp) {
    const double le = st.effective_length(tp.w);
    if (st.length <= 0.0 || !(le > 0.0)) return false;
    const double log_k = std::log(6.0 * n_pixels) + tp.beta * st.length * std::log(2.0);
    return std::abs(st.signed_response()) > detection_threshold_log(le, log_k, tp);
}

inline double beamcurve_threshold_limit(const ThresholdParams& p) {
    p.validate();
    return p.sigma * std::sqrt(2.0 * p.beta * std::numbers::ln2 / p.w);
}

inline double threshold_decay_ratio(double L, double k_l, double k_al, double alpha) {
    if (!(L > 0.0)) throw ParameterError("length must be positive");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(k_l > 0.5) || !(k_al > 0.5)) throw ParameterError("search-space sizes must exceed 1/2");
    return std::sqrt(alpha * std::log(2.0 * k_l) / std::log(2.0 * k_al));
}

struct CctParams {
    double mu_e = 0.0;
    double sigma_e = 1.0;
    double sigma = 1.0;
    int w = 4;
    double ell = 1.0;
};

// Positive root b of (se^2 - s^2) b^2 + 2 s^2 mu b + (2/(w ell)) s^2 se^2 ln(s/se) - s^2 mu^2 = 0, se clamped to >= s.
inline double cct_threshold(const CctParams& c) {
    if (!(c.mu_e > 0.0) || !std::isfinite(c.mu_e)) throw ParameterError("mu_e must be positive and finite");
    if (!(c.sigma > 0.0)) throw ParameterError("sigma must be positive");
    if (c.w < 1) throw ParameterError("w must be positive");
    if (!(c.ell > 0.0)) throw ParameterError("ell must be positive");
    const double s2 = c.sigma * c.sigma;
    const double se = std::isfinite(c.sigma_e) ? std::max(c.sigma_e, c.sigma) : c.sigma;
    const double se2 = se * se;
    const double a = se2 - s2;
    const double b = 2.0 * s2 * c.mu_e;
    const double cc = (2.0 / (c.w * c.ell)) * s2 * se2 * std::log(c.sigma / se) - s2 * c.mu_e * c.mu_e;
    const double disc = b * b - 4.0 * a * cc;
    if (disc < 0.0) throw InternalError("consistent-contrast quadratic has no real root");
    const double root = 2.0 * cc / (-b - std::sqrt(disc));
    if (!(root > 0.0) || !std::isfinite(root)) throw InternalError("consistent-contrast quadratic has no positive root");
    return root;
}

// Mean response of the greedy east / north-east path from (x0, y0) using the 3x1 filter (1, 0, -1)/2.
inline double greedy_monotone_response(const GrayImage& img, int x0, int y0, int L) {
    if (L < 1) throw ParameterError("length must be positive");
    if (x0 < 0 || y0 < 1 || x0 + L > img.width() - 1 || y0 + L + 1 > img.height() - 1)
        throw ParameterError("start point too close to the image boundary for the requested length");
    double sum = 0.0;
    int y = y0;
    for (int x = x0 + 1; x <= x0 + L; ++x) {
        const double east = 0.5 * (img(x, y + 1) - img(x, y - 1));
        const double north_east = 0.5 * (img(x, y + 2) - img(x, y));
        if (north_east > east) {
            sum += north_east;
            ++y;
        } else {
            sum += east;
        }
    }
    return sum / L;
}

}  // namespace faintedge
