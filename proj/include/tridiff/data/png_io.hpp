#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "tridiff/core/tensor.hpp"

namespace tridiff {

struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;  // H*W*3, row-major
};

namespace detail {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

inline void write_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.rgb.size() != static_cast<size_t>(img.height) * img.width * 3)
        throw std::invalid_argument("write_png_rgb8: buffer does not match dimensions");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error while writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(img.rgb.data() + static_cast<size_t>(y) * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ImageU8 read_png_rgb8(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng error while reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize any input to 8-bit RGB
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    ImageU8 img;
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.rgb.resize(static_cast<size_t>(img.height) * img.width * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] = img.rgb.data() + static_cast<size_t>(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// (3,H,W) in [0,1] -> 8-bit RGB.
inline ImageU8 frame_to_u8(const Tensor& frame) {
    if (frame.rank() != 3 || frame.dim(0) != 3)
        throw std::invalid_argument("frame_to_u8 expects (3,H,W), got " + shape_str(frame.shape()));
    ImageU8 img;
    img.height = frame.dim(1);
    img.width = frame.dim(2);
    img.rgb.resize(static_cast<size_t>(img.height) * img.width * 3);
    const int hw = img.height * img.width;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw; ++i) {
            const double v = std::clamp(frame[static_cast<std::int64_t>(c) * hw + i], 0.0, 1.0);
            img.rgb[static_cast<size_t>(i) * 3 + c] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

/// 8-bit RGB -> (3,H,W) in [0,1].
inline Tensor frame_from_u8(const ImageU8& img) {
    Tensor frame(Shape{3, img.height, img.width});
    const int hw = img.height * img.width;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < hw; ++i)
            frame[static_cast<std::int64_t>(c) * hw + i] =
                static_cast<double>(img.rgb[static_cast<size_t>(i) * 3 + c]) / 255.0;
    return frame;
}

/// Frame f of a (K,3,H,W) video as a (3,H,W) view copy.
inline Tensor video_frame(const Tensor& video, int f) {
    const int h = video.dim(2), w = video.dim(3);
    Tensor frame(Shape{3, h, w});
    const std::int64_t fs = frame.size();
    for (std::int64_t i = 0; i < fs; ++i) frame[i] = video[f * fs + i];
    return frame;
}

}  // namespace tridiff
