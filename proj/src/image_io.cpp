#include "surfcdm/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace surfcdm {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::filesystem::path temp_path_for(const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot rename to " + path.string() + ": " + ec.message());
}

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    const std::vector<png_bytep>& rows) {
    const auto tmp = temp_path_for(path);
    {
        FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            throw Error(ErrorKind::IoError, "libpng initialisation failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw Error(ErrorKind::IoError, "libpng failed writing " + path.string());
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_write_image(png, const_cast<png_bytepp>(rows.data()));
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    commit(tmp, path);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Gray8& image) {
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    auto& data = const_cast<Gray8&>(image).values();
    for (int y = 0; y < image.height(); ++y) rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * image.width();
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, rows);
}

void write_png(const std::filesystem::path& path, const Rgb8& image) {
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    auto* base = reinterpret_cast<png_bytep>(const_cast<std::array<std::uint8_t, 3>*>(image.pixels.data()));
    for (int y = 0; y < image.height; ++y) rows[static_cast<std::size_t>(y)] = base + static_cast<std::size_t>(y) * image.width * 3;
    write_png_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, rows);
}

Gray8 read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    unsigned char sig[8] = {};
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw Error(ErrorKind::FormatError, "not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::IoError, "libpng initialisation failed");
    }
    Gray8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::FormatError, "corrupt PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    out = Gray8(width, height, 0);
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = out.values().data() + static_cast<std::size_t>(y) * width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

Gray8 to_gray8(const CartesianImage& image) {
    Gray8 out(image.width(), image.height(), 0);
    for (std::size_t k = 0; k < image.size(); ++k) {
        const double v = std::clamp(static_cast<double>(image.values()[k]), 0.0, 1.0);
        out.values()[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

CartesianImage from_gray8(const Gray8& image) {
    CartesianImage out(image.width(), image.height(), 0.0f);
    for (std::size_t k = 0; k < image.size(); ++k) out.values()[k] = static_cast<float>(image.values()[k]) / 255.0f;
    return out;
}

Gray8 mask_to_gray8(const CartesianMask& mask) {
    Gray8 out(mask.width(), mask.height(), 0);
    for (std::size_t k = 0; k < mask.size(); ++k) out.values()[k] = mask.values()[k] ? 255 : 0;
    return out;
}

CartesianMask mask_from_gray8(const Gray8& image) {
    CartesianMask out(image.width(), image.height(), 0);
    for (std::size_t k = 0; k < image.size(); ++k) out.values()[k] = image.values()[k] ? 1 : 0;
    return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = temp_path_for(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
        out << contents;
        if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
    }
    commit(tmp, path);
}

}  // namespace surfcdm
