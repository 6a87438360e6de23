// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace dualpix {

namespace {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) { throw FormatError(msg); }
void png_warning_handler(png_structp, png_const_charp) {}

} // namespace

void write_pfm(const std::filesystem::path &path, const Grid &grid) {
    if (!grid.all_finite()) {
        throw DomainError("refusing to write non-finite values to " + path.string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    out << "Pf\n" << grid.width() << ' ' << grid.height() << "\n-1.0\n";
    std::vector<float> row(grid.width());
    // PFM rows run bottom to top.
    for (std::size_t y = grid.height(); y-- > 0;) {
        for (std::size_t x = 0; x < grid.width(); ++x) {
            row[x] = static_cast<float>(grid(y, x));
        }
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw FormatError("short write to " + path.string());
    }
}

Grid read_pfm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot read " + path.string());
    }
    std::string magic;
    std::size_t width = 0;
    std::size_t height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    if (magic == "PF") {
        throw FormatError(path.string() + ": colour PFM is not supported");
    }
    if (!in || magic != "Pf" || width == 0 || height == 0) {
        throw FormatError(path.string() + ": not a grayscale PFM");
    }
    if (scale >= 0.0) {
        throw FormatError(path.string() + ": big-endian PFM is not supported");
    }
    in.get(); // single whitespace after the header
    Grid grid(height, width);
    std::vector<float> row(width);
    for (std::size_t y = height; y-- > 0;) {
        in.read(reinterpret_cast<char *>(row.data()),
                static_cast<std::streamsize>(width * sizeof(float)));
        if (!in) {
            throw DimensionError(path.string() + ": truncated PFM payload");
        }
        for (std::size_t x = 0; x < width; ++x) {
            grid(y, x) = row[x];
        }
    }
    return grid;
}

void write_png(const std::filesystem::path &path, const Image &image, int bits) {
    if (bits != 8 && bits != 16) {
        throw FormatError("PNG bit depth must be 8 or 16");
    }
    if (image.channels() != 1 && image.channels() != 3) {
        throw FormatError("PNG output supports 1 or 3 channels");
    }
    for (std::size_t c = 0; c < image.channels(); ++c) {
        if (!image.channel(c).all_finite()) {
            throw DomainError("refusing to write non-finite values to " + path.string());
        }
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                              png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp *png;
        png_infop *info;
        ~Guard() { png_destroy_write_struct(png, info); }
    } guard{&png, &info};

    const std::size_t h = image.height();
    const std::size_t w = image.width();
    const std::size_t ch = image.channels();
    const int color = ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bits, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double max_code = bits == 8 ? 255.0 : 65535.0;
    const std::size_t bytes = static_cast<std::size_t>(bits / 8);
    std::vector<png_byte> row(w * ch * bytes);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < ch; ++c) {
                const double v = std::clamp(image(c, y, x), 0.0, 1.0);
                const auto code = static_cast<std::uint32_t>(std::lround(v * max_code));
                const std::size_t o = (x * ch + c) * bytes;
                if (bits == 8) {
                    row[o] = static_cast<png_byte>(code);
                } else {
                    row[o] = static_cast<png_byte>(code >> 8); // PNG is big-endian
                    row[o + 1] = static_cast<png_byte>(code & 0xff);
                }
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
}

Image read_png(const std::filesystem::path &path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw FormatError("cannot read " + path.string());
    }
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + ": not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                             png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp *png;
        png_infop *info;
        ~Guard() { png_destroy_read_struct(png, info, nullptr); }
    } guard{&png, &info};

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bits = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
        throw FormatError(path.string() + ": unsupported PNG colour type (need gray or RGB)");
    }
    if (bits != 8 && bits != 16) {
        throw FormatError(path.string() + ": unsupported PNG bit depth");
    }
    const std::size_t ch = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    const std::size_t bytes = static_cast<std::size_t>(bits / 8);
    const double max_code = bits == 8 ? 255.0 : 65535.0;
    Image image(h, w, ch);
    std::vector<png_byte> row(static_cast<std::size_t>(w) * ch * bytes);
    for (std::size_t y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t o = (x * ch + c) * bytes;
                const std::uint32_t code =
                    bits == 8 ? row[o] : (static_cast<std::uint32_t>(row[o]) << 8) | row[o + 1];
                image(c, y, x) = code / max_code;
            }
        }
    }
    png_read_end(png, nullptr);
    return image;
}

} // namespace dualpix
