#include "ssada/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "ssada/errors.hpp"

namespace ssada::pngio {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw io_error("cannot open " + path.string());
    return f;
}

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() { png_destroy_write_struct(&png, &info); }
};

void read_any(const std::filesystem::path& path, int want_channels, int& h, int& w,
              std::vector<uint8_t>& out) {
    FilePtr f = open_file(path, "rb");
    PngRead ctx;
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw io_error("png_create_read_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw io_error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("malformed PNG: " + path.string());

    png_init_io(ctx.png, f.get());
    png_read_info(ctx.png, ctx.info);

    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(ctx.png, ctx.info, &width, &height, &bit_depth, &color_type, nullptr, nullptr,
                 nullptr);

    if (bit_depth == 16) png_set_strip_16(ctx.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    png_set_strip_alpha(ctx.png);
    if (want_channels == 3 &&
        (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA))
        png_set_gray_to_rgb(ctx.png);
    if (want_channels == 1 &&
        (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
         color_type == PNG_COLOR_TYPE_PALETTE))
        png_set_rgb_to_gray_fixed(ctx.png, 1, -1, -1);
    png_read_update_info(ctx.png, ctx.info);

    h = int(height);
    w = int(width);
    out.assign(size_t(h) * w * want_channels, 0);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = out.data() + size_t(y) * w * want_channels;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);
}

void write_any(const std::filesystem::path& path, int color_type, int channels, int h, int w,
               const uint8_t* data) {
    FilePtr f = open_file(path, "wb");
    PngWrite ctx;
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw io_error("png_create_write_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw io_error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("PNG write failed: " + path.string());

    png_init_io(ctx.png, f.get());
    // Fixed filter/compression settings keep outputs byte-identical across runs.
    png_set_compression_level(ctx.png, 6);
    png_set_filter(ctx.png, 0, PNG_FILTER_NONE);
    png_set_IHDR(ctx.png, ctx.info, w, h, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<uint8_t*>(data) + size_t(y) * w * channels;
    png_write_image(ctx.png, rows.data());
    png_write_end(ctx.png, nullptr);
}

} // namespace

ImageU8 read_rgb8(const std::filesystem::path& path) {
    ImageU8 img;
    read_any(path, 3, img.height, img.width, img.rgb);
    return img;
}

void write_rgb8(const std::filesystem::path& path, const ImageU8& img) {
    write_any(path, PNG_COLOR_TYPE_RGB, 3, img.height, img.width, img.rgb.data());
}

LabelMap read_gray8(const std::filesystem::path& path) {
    LabelMap lm;
    read_any(path, 1, lm.height, lm.width, lm.ids);
    return lm;
}

void write_gray8(const std::filesystem::path& path, const LabelMap& labels) {
    write_any(path, PNG_COLOR_TYPE_GRAY, 1, labels.height, labels.width, labels.ids.data());
}

} // namespace ssada::pngio
