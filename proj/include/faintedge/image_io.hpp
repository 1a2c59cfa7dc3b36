#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "faintedge/error.hpp"
#include "faintedge/image.hpp"

namespace faintedge {

enum class ImageFormat { pgm, png };

struct WriteOptions {
    int bit_depth = 16;  // 8 or 16
    bool binary = true;  // PGM only: P5 when true, P2 otherwise
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParameterError("write failed for " + path.string());
}

inline int max_value(int bit_depth) {
    if (bit_depth == 8) return 255;
    if (bit_depth == 16) return 65535;
    throw ParameterError("bit depth must be 8 or 16");
}

inline unsigned quantize(double v, int maxval) {
    if (!std::isfinite(v)) throw ParameterError("cannot encode non-finite intensity");
    return static_cast<unsigned>(std::clamp(std::lround(v), 0L, static_cast<long>(maxval)));
}

class PgmReader {
public:
    explicit PgmReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

    GrayImage read() {
        if (b_.empty()) throw FormatError("empty file", 0);
        if (b_.size() < 2 || b_[0] != 'P' || (b_[1] != '2' && b_[1] != '5'))
            throw FormatError("not a P2/P5 PGM file", 0);
        const bool binary = b_[1] == '5';
        pos_ = 2;
        const unsigned long width = header_number("width");
        const unsigned long height = header_number("height");
        const unsigned long maxval = header_number("maxval");
        if (width == 0 || height == 0) throw FormatError("zero image dimension", pos_);
        if (maxval == 0 || maxval > 65535) throw FormatError("maxval out of range", pos_);
        if (width * height > (1ul << 31)) throw FormatError("image too large", pos_);
        const std::size_t n = width * height;
        std::vector<double> px(n);
        if (binary) {
            if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("missing separator before raster", pos_);
            ++pos_;
            const std::size_t bps = maxval < 256 ? 1 : 2;
            if (b_.size() - pos_ < n * bps) throw FormatError("truncated raster", b_.size());
            for (std::size_t i = 0; i < n; ++i) {
                unsigned v = bps == 1 ? b_[pos_] : (static_cast<unsigned>(b_[pos_]) << 8) | b_[pos_ + 1];
                if (v > maxval) throw FormatError("sample exceeds maxval", pos_);
                px[i] = v;
                pos_ += bps;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t at = skip_space();
                if (at >= b_.size()) throw FormatError("truncated raster", b_.size());
                const unsigned long v = number();
                if (v > maxval) throw FormatError("sample exceeds maxval", at);
                px[i] = static_cast<double>(v);
            }
        }
        return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(px));
    }

private:
    std::size_t skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
        return pos_;
    }

    unsigned long number() {
        const std::size_t start = pos_;
        unsigned long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 0xFFFFFFFFul) throw FormatError("number too large", start);
            ++pos_;
        }
        if (pos_ == start) throw FormatError("expected a decimal number", start);
        return v;
    }

    unsigned long header_number(const char* what) {
        const std::size_t at = skip_space();
        if (at >= b_.size()) throw FormatError(std::string("truncated header, missing ") + what, at);
        return number();
    }

    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

struct PngContext {
    const std::vector<std::uint8_t>* in = nullptr;
    std::vector<std::uint8_t>* out = nullptr;
    std::size_t pos = 0;
    char message[256] = {};
};

extern "C" inline void png_fail(png_structp png, png_const_charp msg) {
    auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
    std::snprintf(ctx->message, sizeof ctx->message, "%s", msg ? msg : "libpng error");
    png_longjmp(png, 1);
}

extern "C" inline void png_quiet(png_structp, png_const_charp) {}

extern "C" inline void png_read_mem(png_structp png, png_bytep data, png_size_t len) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    if (ctx->in->size() - ctx->pos < len) {
        ctx->pos = ctx->in->size();
        png_error(png, "truncated PNG data");
    }
    std::memcpy(data, ctx->in->data() + ctx->pos, len);
    ctx->pos += len;
}

extern "C" inline void png_write_mem(png_structp png, png_bytep data, png_size_t len) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    ctx->out->insert(ctx->out->end(), data, data + len);
}

extern "C" inline void png_flush_mem(png_structp) {}

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.empty()) throw FormatError("empty file", 0);
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG file", 0);
    PngContext ctx;
    ctx.in = &bytes;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_fail, png_quiet);
    if (!png) throw InternalError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> raster;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int depth = 0, color = 0;
    bool bad_color = false;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(std::string("PNG decode failed: ") + ctx.message, ctx.pos);
    }
    png_set_read_fn(png, &ctx, png_read_mem);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
    if (color != PNG_COLOR_TYPE_GRAY) {
        bad_color = true;
    } else {
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        raster.resize(stride * height);
        rows.resize(height);
        for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * stride;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    const std::size_t at = ctx.pos;
    png_destroy_read_struct(&png, &info, nullptr);
    if (bad_color) throw FormatError("PNG is not single-channel grayscale", at);

    std::vector<double> px(static_cast<std::size_t>(width) * height);
    const bool wide = depth == 16;
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = wide ? static_cast<double>((raster[2 * i] << 8) | raster[2 * i + 1]) : static_cast<double>(raster[i]);
    return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(px));
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img, int bit_depth) {
    const int maxval = max_value(bit_depth);
    const std::size_t bps = bit_depth == 16 ? 2 : 1;
    const std::size_t stride = bps * static_cast<std::size_t>(img.width());
    std::vector<std::uint8_t> raster(stride * static_cast<std::size_t>(img.height()));
    for (std::size_t i = 0; i < img.size(); ++i) {
        const unsigned v = quantize(img.pixels()[i], maxval);
        if (bps == 2) {
            raster[2 * i] = static_cast<std::uint8_t>(v >> 8);
            raster[2 * i + 1] = static_cast<std::uint8_t>(v & 0xFF);
        } else {
            raster[i] = static_cast<std::uint8_t>(v);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = raster.data() + y * stride;

    std::vector<std::uint8_t> out;
    PngContext ctx;
    ctx.out = &out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_fail, png_quiet);
    if (!png) throw InternalError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InternalError(std::string("PNG encode failed: ") + ctx.message);
    }
    png_set_write_fn(png, &ctx, png_write_mem, png_flush_mem);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img, const WriteOptions& opt) {
    const int maxval = max_value(opt.bit_depth);
    std::string header = std::string(opt.binary ? "P5" : "P2") + "\n" + std::to_string(img.width()) + " " +
                         std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    if (opt.binary) {
        for (double v : img.pixels()) {
            const unsigned q = quantize(v, maxval);
            if (maxval > 255) out.push_back(static_cast<std::uint8_t>(q >> 8));
            out.push_back(static_cast<std::uint8_t>(q & 0xFF));
        }
    } else {
        for (int y = 0; y < img.height(); ++y) {
            std::string line;
            for (int x = 0; x < img.width(); ++x) {
                if (x) line += ' ';
                line += std::to_string(quantize(img(x, y), maxval));
            }
            line += '\n';
            out.insert(out.end(), line.begin(), line.end());
        }
    }
    return out;
}

}  // namespace detail

inline GrayImage decode_image(const std::vector<std::uint8_t>& bytes, std::optional<ImageFormat> format = std::nullopt) {
    if (!format) {
        if (bytes.empty()) throw FormatError("empty file", 0);
        format = (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) ? ImageFormat::png : ImageFormat::pgm;
    }
    GrayImage img = *format == ImageFormat::png ? detail::decode_png(bytes) : detail::PgmReader(bytes).read();
    return img;
}

inline GrayImage load_image(const std::filesystem::path& path, std::optional<ImageFormat> format = std::nullopt) {
    return decode_image(detail::read_file(path), format);
}

inline std::vector<std::uint8_t> encode_image(const GrayImage& img, ImageFormat format, const WriteOptions& opt = {}) {
    return format == ImageFormat::png ? detail::encode_png(img, opt.bit_depth) : detail::encode_pgm(img, opt);
}

inline void save_image(const std::filesystem::path& path, const GrayImage& img, ImageFormat format,
                       const WriteOptions& opt = {}) {
    detail::write_file(path, encode_image(img, format, opt));
}

inline ImageFormat format_from_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") return ImageFormat::png;
    if (ext == ".pgm" || ext == ".pnm") return ImageFormat::pgm;
    throw ParameterError("unknown image extension '" + ext + "' (use .pgm or .png)");
}

// Linear map of [min, max] onto the full range of the given bit depth.
inline GrayImage normalized_for_display(const GrayImage& img, int bit_depth = 8) {
    const double top = detail::max_value(bit_depth);
    auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    GrayImage out = img;
    const double span = *hi - *lo;
    for (double& v : out.pixels()) v = span > 0 ? (v - *lo) / span * top : 0.0;
    return out;
}

inline GrayImage edge_map_image(const EdgeMap& m, double on = 255.0) {
    GrayImage out(m.width(), m.height(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) out.pixels()[i] = m.pixels()[i] ? on : 0.0;
    return out;
}

}  // namespace faintedge
