#include "ecgqa/image.hpp"

#include "ecgqa/stats.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace ecgqa {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
        throw EcgError(ErrorKind::InvalidGeometry, "image dimensions must be positive");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) set(x, y, fill);
}

std::vector<std::uint8_t> to_luminance(const Image& img) {
    std::vector<std::uint8_t> lum(static_cast<std::size_t>(img.width()) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        const std::uint8_t* p = img.row(y);
        std::uint8_t* out = lum.data() + static_cast<std::size_t>(y) * img.width();
        for (int x = 0; x < img.width(); ++x, p += 3)
            out[x] = static_cast<std::uint8_t>(
                static_cast<int>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] + 0.5));
    }
    return lum;
}

int estimate_background_level(const Image& img) {
    // Histogram-based P95; the background of a paper ECG dominates the
    // bright end of the luminance distribution.
    auto lum = to_luminance(img);
    std::array<std::size_t, 256> hist{};
    for (std::uint8_t v : lum) ++hist[v];
    const std::size_t target = static_cast<std::size_t>(0.95 * lum.size());
    std::size_t cum = 0;
    for (int v = 0; v < 256; ++v) {
        cum += hist[v];
        if (cum >= target) return v;
    }
    return 255;
}

Image rotate(const Image& img, double degrees, Rgb fill) {
    if (img.empty()) return img;
    const double rad = degrees * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
    Image out(img.width(), img.height(), fill);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            // Inverse map: rotate destination coordinates by -degrees.
            const double dx = x - cx, dy = y - cy;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            if (x0 < 0 || y0 < 0 || x0 + 1 >= img.width() || y0 + 1 >= img.height()) continue;
            const double fx = sx - x0, fy = sy - y0;
            double acc[3] = {0, 0, 0};
            const Rgb p00 = img.get(x0, y0), p10 = img.get(x0 + 1, y0);
            const Rgb p01 = img.get(x0, y0 + 1), p11 = img.get(x0 + 1, y0 + 1);
            const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
            const double w01 = (1 - fx) * fy, w11 = fx * fy;
            acc[0] = w00 * p00.r + w10 * p10.r + w01 * p01.r + w11 * p11.r;
            acc[1] = w00 * p00.g + w10 * p10.g + w01 * p01.g + w11 * p11.g;
            acc[2] = w00 * p00.b + w10 * p10.b + w01 * p01.b + w11 * p11.b;
            out.set(x, y,
                    Rgb{static_cast<std::uint8_t>(acc[0] + 0.5),
                        static_cast<std::uint8_t>(acc[1] + 0.5),
                        static_cast<std::uint8_t>(acc[2] + 0.5)});
        }
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw EcgError(ErrorKind::IoError, "cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw EcgError(ErrorKind::IoError, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw EcgError(ErrorKind::IoError, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw EcgError(ErrorKind::IoError, "png decode failed for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image img(static_cast<int>(width), static_cast<int>(height));
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.row(static_cast<int>(y));
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const Image& img, const std::string& path) {
    if (img.empty()) throw EcgError(ErrorKind::InvalidGeometry, "cannot write empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw EcgError(ErrorKind::IoError, "cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw EcgError(ErrorKind::IoError, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw EcgError(ErrorKind::IoError, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw EcgError(ErrorKind::IoError, "png encode failed for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height(); ++y)
        png_write_row(png, const_cast<png_bytep>(img.row(y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

EcgRaster read_raster_png(const std::string& path, double dpi) {
    EcgRaster raster;
    raster.pixels = read_png(path);
    raster.dpi = dpi;
    raster.provenance_kind = "external_scan";
    raster.validate();
    return raster;
}

void write_raster_png(const EcgRaster& raster, const std::string& path) {
    write_png(raster.pixels, path);
}

} // namespace ecgqa
