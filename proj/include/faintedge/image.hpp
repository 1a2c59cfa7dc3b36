#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "faintedge/error.hpp"

namespace faintedge {

// Row-major 2-D grid. Pixel (x, y) is column x, row y.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) throw ParameterError("grid dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
        if (width <= 0 || height <= 0) throw ParameterError("grid dimensions must be positive");
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw ParameterError("pixel count does not match width * height");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    T operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator()(int x, int y) { return data_[index(x, y)]; }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::span<const T> pixels() const noexcept { return data_; }
    std::span<T> pixels() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    Grid transposed() const {
        Grid out;
        out.width_ = height_;
        out.height_ = width_;
        out.data_.resize(data_.size());
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x) out.data_[out.index(y, x)] = data_[index(x, y)];
        return out;
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using GrayImage = Grid<double>;
using EdgeMap = Grid<std::uint8_t>;

inline bool all_finite(const GrayImage& img) {
    return std::all_of(img.pixels().begin(), img.pixels().end(), [](double v) { return std::isfinite(v); });
}

inline std::size_t count_set(const EdgeMap& m) {
    return static_cast<std::size_t>(std::count_if(m.pixels().begin(), m.pixels().end(), [](auto v) { return v != 0; }));
}

inline GrayImage scaled(const GrayImage& img, double c) {
    GrayImage out = img;
    for (double& v : out.pixels()) v *= c;
    return out;
}

struct NoiseSpec {
    double sigma = 1.0;
    std::uint64_t seed = 0;
};

// Adds i.i.d. N(0, sigma^2) per pixel, row-major draw order from mt19937_64(seed).
inline GrayImage add_gaussian_noise(const GrayImage& img, const NoiseSpec& noise) {
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) throw ParameterError("noise sigma must be finite and >= 0");
    GrayImage out = img;
    if (noise.sigma == 0.0) return out;
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : out.pixels()) v += noise.sigma * gauss(rng);
    return out;
}

inline GrayImage gaussian_noise_image(int width, int height, const NoiseSpec& noise) {
    return add_gaussian_noise(GrayImage(width, height, 0.0), noise);
}

// 1.4826 * MAD of horizontal first differences, divided by sqrt(2).
inline double estimate_sigma_mad(const GrayImage& img) {
    if (img.width() < 2 || img.height() < 2) throw ParameterError("sigma estimation needs at least a 2x2 image");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(img.width() - 1) * static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x + 1 < img.width(); ++x) d.push_back(img(x + 1, y) - img(x, y));
    auto median = [](std::vector<double>& v) {
        const std::size_t n = v.size();
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
        double hi = v[n / 2];
        if (n % 2 == 1) return hi;
        double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
        return 0.5 * (lo + hi);
    };
    const double med = median(d);
    for (double& v : d) v = std::abs(v - med);
    return 1.4826 * median(d) / std::sqrt(2.0);
}

}  // namespace faintedge
