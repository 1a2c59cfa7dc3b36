#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "faintedge/line_pyramid.hpp"

using namespace faintedge;

namespace {

DetectorParams params(int w = 4, int s = 1) {
    DetectorParams p;
    p.w = w;
    p.s = s;
    return p;
}

GrayImage from_function(int w, int h, auto f) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(x, y) = f(x, y);
    return img;
}

}  // namespace

TEST(CrossSection, ConstantImageIsZero) {
    const ResponseGrid r = cross_section_responses(GrayImage(20, 10, 3.5), 4, 1, OrientationClass::vertical);
    int valid = 0;
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            if (r.valid(x, y)) {
                ++valid;
                EXPECT_EQ(r(x, y), 0.0);
            } else {
                continue;
            }
    EXPECT_EQ(valid, (20 - 4) * 10);
    EXPECT_FALSE(r.valid(1, 0));
    EXPECT_TRUE(r.valid(2, 0));
    EXPECT_FALSE(r.valid(18, 0));
}

TEST(CrossSection, TwoTapStepResponse) {
    const double a = 3.0;
    const GrayImage img = from_function(10, 4, [&](int x, int) { return x >= 5 ? a : 0.0; });
    const ResponseGrid r = cross_section_responses(img, 2, 0, OrientationClass::vertical);
    EXPECT_EQ(r.center_offset, 0.5);
    for (int x = 0; x < 9; ++x) EXPECT_EQ(r(x, 2), x == 4 ? a / 2 : 0.0) << x;
    EXPECT_FALSE(r.valid(9, 2));
}

TEST(CrossSection, HorizontalClassIsTransposedFilter) {
    const GrayImage img = gaussian_noise_image(12, 9, {1.0, 4});
    const ResponseGrid h = cross_section_responses(img, 4, 1, OrientationClass::horizontal);
    const ResponseGrid v = cross_section_responses(img.transposed(), 4, 1, OrientationClass::vertical);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 12; ++x) {
            ASSERT_EQ(h.valid(x, y), v.valid(y, x));
            if (h.valid(x, y)) {
                EXPECT_EQ(h(x, y), v(y, x));
            }
        }
}

TEST(CrossSection, NoiseVarianceIsSigmaSquaredOverW) {
    const ResponseGrid r = cross_section_responses(gaussian_noise_image(256, 256, {1.0, 8}), 4, 1,
                                                   OrientationClass::vertical);
    double s = 0, q = 0;
    int n = 0;
    for (double v : r.values)
        if (is_valid(v)) {
            s += v;
            q += v * v;
            ++n;
        }
    const double var = q / n - (s / n) * (s / n);
    EXPECT_NEAR(var, 0.25, 0.25 * 0.03);
}

TEST(LinePyramid, ConstantImageAllZero) {
    const LinePyramid pyr(GrayImage(33, 33, 2.0), params());
    EXPECT_EQ(pyr.level_count(), 6);
    for (auto c : {OrientationClass::vertical, OrientationClass::horizontal})
        for (const auto& lv : pyr.data(c).levels)
            for (double v : lv.r) {
                if (is_valid(v)) {
                    ASSERT_EQ(v, 0.0);
                }
            }
}

TEST(LinePyramid, AlignedStepIsHalfContrastAtEveryLength) {
    const double a = 1.75;
    const GrayImage img = from_function(33, 33, [&](int x, int) { return x >= 17 ? a : 0.0; });
    const LinePyramid pyr(img, params(4, 0));
    EXPECT_EQ(pyr.center_offset(), 0.5);
    for (int l = 0; l < pyr.level_count(); ++l) {
        const auto& lv = pyr.data(OrientationClass::vertical).levels[l];
        const LineResponse lr = pyr.at(OrientationClass::vertical, l, 0, 16, 0);
        ASSERT_TRUE(lr.valid()) << l;
        EXPECT_EQ(lr.response, a / 2) << "L=" << lv.length;
        EXPECT_EQ(lr.x0, 16.5);
        EXPECT_EQ(lr.y1, lv.length);
    }
}

TEST(LinePyramid, InterpolationConsistencyOnQuadraticImage) {
    // r is linear for I = x^2 + 3xy, so hierarchical averages and interpolated line integrals agree exactly.
    const GrayImage img = from_function(65, 65, [](int x, int y) { return double(x) * x + 3.0 * x * y; });
    const LinePyramid pyr(img, params());
    std::mt19937 rng(3);
    for (auto c : {OrientationClass::vertical, OrientationClass::horizontal}) {
        const auto& cd = pyr.data(c);
        for (int l = 1; l < pyr.level_count(); ++l) {
            const auto& lv = cd.levels[l];
            int checked = 0;
            for (int trial = 0; trial < 4000 && checked < 200; ++trial) {
                const int row = int(rng() % lv.rows), x = int(rng() % lv.width);
                const int dx = int(rng() % lv.directions()) - lv.length;
                const double R = lv.at(row, x, dx);
                if (!is_valid(R)) continue;
                const double direct = direct_line_response(cd.base.r, x, row * lv.row_step, dx, lv.length);
                ASSERT_TRUE(is_valid(direct));
                EXPECT_NEAR(R, direct, 1e-9 * (1 + std::abs(direct)));
                ++checked;
            }
            EXPECT_GT(checked, 50);
        }
    }
}

TEST(LinePyramid, SubResponsesMatchRecomputation) {
    const GrayImage img = gaussian_noise_image(65, 65, {1.0, 77});
    DetectorParams p = params();
    p.cct_depth = 1;
    const LinePyramid pyr(img, p);
    std::mt19937 rng(9);
    for (auto c : {OrientationClass::vertical, OrientationClass::horizontal}) {
        const auto& cd = pyr.data(c);
        for (int l = 1; l < pyr.level_count(); ++l) {
            const auto& lv = cd.levels[l];
            const auto& child = cd.levels[l - 1];
            for (int trial = 0; trial < 300; ++trial) {
                const int row = int(rng() % lv.rows), x = int(rng() % lv.width);
                const int dx = int(rng() % lv.directions()) - lv.length;
                const LineResponse lr = pyr.at(c, l, row, x, dx);
                if (!lr.valid()) continue;
                const int L = child.length, y0 = row * lv.row_step;
                auto R = [&](int y, int xx, int d) { return child.at(y / child.row_step, xx, d); };
                double h1, h2;
                if (dx % 2 == 0) {
                    h1 = R(y0, x, dx / 2);
                    h2 = R(y0 + L, x + dx / 2, dx / 2);
                } else {
                    const int d = int(std::floor(dx / 2.0));
                    h1 = 0.5 * (R(y0, x, d) + R(y0, x, d + 1));
                    h2 = 0.5 * (R(y0 + L, x + d, d + 1) + R(y0 + L, x + d + 1, d));
                }
                EXPECT_EQ(lr.min_sub, std::min(h1, h2));
                EXPECT_EQ(lr.max_sub, std::max(h1, h2));
                EXPECT_LE(lr.min_sub, lr.response);
                EXPECT_GE(lr.max_sub, lr.response);
            }
        }
    }
}

TEST(LinePyramid, QuarterExtremesOfStraightDirections) {
    const GrayImage img = gaussian_noise_image(65, 65, {1.0, 78});
    DetectorParams p = params();
    p.cct_depth = 2;
    const LinePyramid pyr(img, p);
    const auto& cd = pyr.data(OrientationClass::vertical);
    for (int l = 2; l < pyr.level_count(); ++l) {
        const auto& lv = cd.levels[l];
        const auto& q = cd.levels[l - 2];
        ASSERT_EQ(lv.sub_depth, 2);
        const int Q = q.length;
        for (int dx = -lv.length; dx <= lv.length; dx += 4) {
            for (int row = 0; row < lv.rows; row += 3) {
                for (int x = 0; x < lv.width; x += 5) {
                    const LineResponse lr = pyr.at(OrientationClass::vertical, l, row, x, dx);
                    if (!lr.valid()) continue;
                    double lo = 1e9, hi = -1e9;
                    for (int k = 0; k < 4; ++k) {
                        const double v = q.at((row * lv.row_step + k * Q) / q.row_step, x + k * dx / 4, dx / 4);
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                    EXPECT_DOUBLE_EQ(lr.min_sub, lo);
                    EXPECT_DOUBLE_EQ(lr.max_sub, hi);
                }
            }
        }
    }
}

TEST(LinePyramid, ExtremesBracketResponse) {
    const LinePyramid pyr(gaussian_noise_image(65, 65, {1.0, 79}), params());
    for (auto c : {OrientationClass::vertical, OrientationClass::horizontal}) {
        for (int l = 0; l < pyr.level_count(); ++l) {
            const auto& lv = pyr.data(c).levels[l];
            EXPECT_EQ(lv.sub_depth, std::min(l, 3));
            for (std::size_t i = 0; i < lv.r.size(); ++i) {
                if (!is_valid(lv.r[i])) continue;
                ASSERT_LE(lv.smin[i], lv.r[i] + 1e-12);
                ASSERT_GE(lv.smax[i], lv.r[i] - 1e-12);
            }
        }
    }
}

TEST(LinePyramid, SideStatisticsOnPureNoise) {
    const LinePyramid pyr(gaussian_noise_image(65, 65, {2.0, 5}), params());
    const LineResponse lr = pyr.at(OrientationClass::vertical, 5, 0, 30, 3);
    ASSERT_TRUE(lr.valid());
    EXPECT_NEAR(lr.side_sigma(), 2.0, 0.5);
    EXPECT_NEAR(lr.mean_right - lr.mean_left, 2 * lr.response, 1e-12);
}

TEST(LinePyramid, LinearInIntensity) {
    const GrayImage img = gaussian_noise_image(33, 33, {1.0, 6});
    const LinePyramid a(img, params()), b(scaled(img, 2.0), params());
    for (int l = 0; l < a.level_count(); ++l) {
        const auto& la = a.data(OrientationClass::horizontal).levels[l];
        const auto& lb = b.data(OrientationClass::horizontal).levels[l];
        for (std::size_t i = 0; i < la.r.size(); ++i) {
            if (is_valid(la.r[i])) {
                ASSERT_EQ(lb.r[i], 2.0 * la.r[i]);
            }
        }
    }
}

TEST(LinePyramid, CountAudit) {
    const int n = 65;
    const LinePyramid pyr(GrayImage(n, n, 0.0), params());
    const auto counts = pyr.count_audit();
    const double N = double(n) * n;
    ASSERT_EQ(counts.size(), 7u);
    EXPECT_NEAR(counts[0].slots / (4 * N), 1.0, 0.02);
    EXPECT_NEAR(counts[1].slots / (8 * N), 1.0, 0.02);
    for (std::size_t l = 1; l < counts.size(); ++l) {
        EXPECT_NEAR(counts[l].slots / (8 * N), 1.0, 0.10) << counts[l].length;
        EXPECT_LE(counts[l].valid, counts[l].slots);
        EXPECT_GT(counts[l].valid, 0u);
    }
}

TEST(LinePyramid, StopsAtLargestFeasibleLevel) {
    EXPECT_EQ(LinePyramid(GrayImage(40, 20, 0.0), params()).level_count(), 5);
    DetectorParams p = params();
    p.max_length = 8;
    EXPECT_EQ(LinePyramid(GrayImage(40, 40, 0.0), p).level_count(), 4);
}

TEST(DetectLines, ZeroContrastIsEmpty) {
    EXPECT_TRUE(detect_lines(LinePyramid(GrayImage(65, 65, 1.0), params()), params()).empty());
}

TEST(DetectLines, PureNoiseIsQuiet) {
    int total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        total += int(detect_lines(LinePyramid(gaussian_noise_image(65, 65, {1.0, seed}), params()), params()).size());
    EXPECT_LE(total, 5);
}

TEST(DetectLines, FullLengthStepSurvives) {
    const int n = 129;
    const GrayImage img = add_gaussian_noise(from_function(n, n, [](int x, int) { return x >= 65 ? 2.0 : 0.0; }),
                                             {1.0, 31});
    const LinePyramid pyr(img, params());
    const EdgeSet edges = detect_lines(pyr, params());
    bool found = false;
    for (const Edge& e : edges.edges)
        if (e.length == 128 && e.direction == 0 && e.orientation_class == OrientationClass::vertical &&
            std::abs(e.polyline[0].x - 64.5) <= 1.0) {
            found = true;
            EXPECT_GT(e.response, 0.0);
            EXPECT_EQ(e.samples.size(), 129u);
        }
    EXPECT_TRUE(found);
    EXPECT_GT(detection_threshold(128, line_family_size(n * n), params().thresholds()), 0.0);
}

TEST(DetectLines, EdgeOrientationPutsBrightSideOnPlus) {
    // Bright region below a horizontal step: the + normal (d.y, -d.x) must point down (+y).
    const GrayImage img = from_function(33, 33, [](int, int y) { return y >= 17 ? 4.0 : 0.0; });
    const EdgeSet edges = detect_lines(LinePyramid(img, params()), params());
    ASSERT_FALSE(edges.empty());
    for (const Edge& e : edges.edges) {
        const Point a = e.polyline.front(), b = e.polyline.back();
        const double ny = -(b.x - a.x);
        EXPECT_GT(ny * e.response, 0.0);
    }
}
