#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "faintedge/thresholds.hpp"

using namespace faintedge;

namespace {

// Crossing of the edge and noise likelihoods for a length-ell segment, found by bisection on the log-ratio.
double likelihood_crossing(double mu, double se, double s, int w, double ell) {
    const double ve = se * se / (w * ell), vn = s * s / (w * ell);
    auto diff = [&](double b) {
        const double le = -0.5 * std::log(ve) - (b - mu) * (b - mu) / (2 * ve);
        const double ln = -0.5 * std::log(vn) - b * b / (2 * vn);
        return le - ln;
    };
    double lo = 0.0, hi = mu;
    while (diff(hi) < 0) hi *= 2;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (diff(mid) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(DetectionThreshold, ZeroWhenKEqualsDelta) { EXPECT_EQ(detection_threshold(3.0, 0.5, {1.0, 4, 0.5, 0.65}), 0.0); }

TEST(DetectionThreshold, ClosedFormValue) {
    EXPECT_NEAR(detection_threshold(1.0, 2.0, {1.0, 2, 0.5, 0.65}), 1.17741002251547469, 1e-14);
    EXPECT_NEAR(detection_threshold(2.0, 8.0 * 257 * 257, {1.0, 4, 0.5, 0.65}), 1.86217217866865233, 1e-13);
}

TEST(DetectionThreshold, HalvesEveryTwoDoublings) {
    const ThresholdParams p{1.0, 4, 0.5, 0.65};
    const double K = line_family_size(257.0 * 257.0);
    for (int L = 2; L <= 128; L *= 2)
        EXPECT_NEAR(detection_threshold(L, K, p) / detection_threshold(2 * L, K, p), std::numbers::sqrt2, 1e-12);
    EXPECT_NEAR(detection_threshold(4, K, p) / detection_threshold(16, K, p), 2.0, 1e-12);
}

TEST(DetectionThreshold, MonotoneAndLinearInSigma) {
    const ThresholdParams p{1.0, 4, 0.5, 0.65};
    EXPECT_GT(detection_threshold(4, 100, p), detection_threshold(5, 100, p));
    EXPECT_LT(detection_threshold(4, 100, p), detection_threshold(4, 200, p));
    for (double c : {0.25, 3.0, 17.5}) {
        ThresholdParams q = p;
        q.sigma = c;
        EXPECT_NEAR(detection_threshold(7, 1e6, q), c * detection_threshold(7, 1e6, p), 1e-12 * c);
    }
}

TEST(DetectionThreshold, Errors) {
    const ThresholdParams p{1.0, 4, 0.5, 0.65};
    EXPECT_THROW(detection_threshold(1.0, 0.25, p), ParameterError);
    EXPECT_THROW(detection_threshold(0.0, 10.0, p), ParameterError);
    EXPECT_THROW(detection_threshold(1.0, 10.0, {1.0, 3, 0.5, 0.65}), ParameterError);
    EXPECT_THROW(detection_threshold(1.0, 10.0, {1.0, 4, 0.7, 0.65}), ParameterError);
    EXPECT_THROW(detection_threshold(1.0, 10.0, {0.0, 4, 0.5, 0.65}), ParameterError);
}

TEST(BeamThreshold, LimitNearHalf) {
    const ThresholdParams p{1.0, 4, 0.5, 0.65};
    const double lim = beamcurve_threshold_limit(p);
    EXPECT_NEAR(lim, 0.4747, 1e-3);
    EXPECT_NEAR(lim, 0.47462915384748778, 1e-14);
    EXPECT_NEAR(beamcurve_threshold(1e9, 129.0 * 129.0, p), lim, 1e-4);
}

TEST(BeamThreshold, ClosedFormAtSixteen) {
    EXPECT_NEAR(beamcurve_threshold(16.0, 129.0 * 129.0, {1.0, 4, 0.5, 0.65}), 0.77888666811061912, 1e-13);
}

TEST(BeamThreshold, BetaZeroIsSixN) {
    const ThresholdParams p{1.0, 4, 0.5, 0.0};
    EXPECT_DOUBLE_EQ(beamcurve_threshold(12.0, 1000.0, p), detection_threshold(12.0, 6000.0, p));
}

TEST(BeamThreshold, BoundedBelowByLimit) {
    const ThresholdParams p{1.0, 4, 0.5, 0.65};
    const double lim = beamcurve_threshold_limit(p);
    for (double L = 1; L < 1e6; L *= 1.7) EXPECT_GT(beamcurve_threshold(L, 65.0 * 65.0, p), lim);
}

TEST(DecayRatio, Examples) {
    EXPECT_DOUBLE_EQ(threshold_decay_ratio(8, 1e5, 1e5, 4.0), 2.0);
    EXPECT_DOUBLE_EQ(threshold_decay_ratio(8, 1e5, 1e5, 2.0), std::numbers::sqrt2);
    const double K = line_family_size(257.0 * 257.0);
    EXPECT_NEAR(threshold_decay_ratio(16, K, K, 2.0), std::numbers::sqrt2, 1e-15);
    EXPECT_THROW(threshold_decay_ratio(8, 0.5, 10, 2.0), ParameterError);
    EXPECT_THROW(threshold_decay_ratio(8, 10, 10, -1.0), ParameterError);
}

TEST(Cct, EqualSigmaIsHalfContrast) {
    EXPECT_DOUBLE_EQ(cct_threshold({1.0, 1.0, 1.0, 4, 1}), 0.5);
    EXPECT_DOUBLE_EQ(cct_threshold({0.8, 1.0, 1.0, 4, 1}), 0.4);
}

TEST(Cct, MatchesLikelihoodCrossing) {
    EXPECT_NEAR(cct_threshold({1.0, 2.0, 1.0, 4, 1}), 0.61879195507032067, 1e-12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double s = 0.2 + 2 * u(rng), se = s * (1 + 2 * u(rng)), mu = 0.05 + 3 * u(rng);
        const int w = 2 * (1 + static_cast<int>(4 * u(rng)));
        const double ell = 1 + std::floor(30 * u(rng));
        EXPECT_NEAR(cct_threshold({mu, se, s, w, ell}), likelihood_crossing(mu, se, s, w, ell), 1e-9);
    }
}

TEST(Cct, ContinuousAtEqualSigma) {
    const double half = cct_threshold({1.3, 1.0, 1.0, 4, 2});
    EXPECT_NEAR(cct_threshold({1.3, 1.0 + 1e-7, 1.0, 4, 2}), half, 1e-6);
}

TEST(Cct, ClampsSmallEdgeSigma) {
    EXPECT_DOUBLE_EQ(cct_threshold({1.0, 0.3, 1.0, 4, 1}), 0.5);
    EXPECT_THROW(cct_threshold({0.0, 1.0, 1.0, 4, 1}), ParameterError);
    EXPECT_THROW(cct_threshold({-1.0, 1.0, 1.0, 4, 1}), ParameterError);
}

TEST(GreedyMonotone, ZeroImage) { EXPECT_EQ(greedy_monotone_response(GrayImage(40, 40, 0.0), 2, 2, 16), 0.0); }

TEST(GreedyMonotone, FollowsLargerResponse) {
    // A bright row two below the path start makes the first step pick north-east.
    GrayImage img(8, 8, 0.0);
    img(1, 3) = 4.0;
    EXPECT_DOUBLE_EQ(greedy_monotone_response(img, 0, 1, 1), 2.0);
}

TEST(GreedyMonotone, BoundaryChecks) {
    GrayImage img(20, 20, 0.0);
    EXPECT_THROW(greedy_monotone_response(img, 0, 0, 4), ParameterError);
    EXPECT_THROW(greedy_monotone_response(img, 10, 1, 10), ParameterError);
    EXPECT_NO_THROW(greedy_monotone_response(img, 0, 1, 17));
    EXPECT_THROW(greedy_monotone_response(img, 0, 1, 18), ParameterError);
}

TEST(GreedyMonotone, MeanMatchesLowerBound) {
    const int L = 64, trials = 400;
    double sum = 0.0;
    for (int t = 0; t < trials; ++t)
        sum += greedy_monotone_response(gaussian_noise_image(L + 1, L + 3, {1.0, 100u + t}), 0, 1, L);
    const double se = std::sqrt((1.0 / (2 * L)) * (1 - 1 / std::numbers::pi) / trials);
    EXPECT_NEAR(sum / trials, 1.0 / std::sqrt(2 * std::numbers::pi), 4 * se);
}
