#pragma once

#include "ecgqa/error.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ecgqa {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Dense 8-bit RGB image, row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    const std::uint8_t* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_ * 3; }
    std::uint8_t* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_ * 3; }

    Rgb get(int x, int y) const {
        const std::uint8_t* p = row(y) + 3 * x;
        return Rgb{p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) {
        std::uint8_t* p = row(y) + 3 * x;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    bool contains(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    bool operator==(const Image& other) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Rec. 601 luma, rounded to nearest integer.
inline int luminance(Rgb c) {
    return static_cast<int>(0.299 * c.r + 0.587 * c.g + 0.114 * c.b + 0.5);
}

/// Grayscale plane with the same geometry as the source image.
std::vector<std::uint8_t> to_luminance(const Image& img);

/// Robust background level estimate: P95 of the luminance plane.
int estimate_background_level(const Image& img);

/// Rotate about the image center by `degrees` (counterclockwise positive),
/// bilinear sampling, out-of-frame pixels filled with `fill`.
Image rotate(const Image& img, double degrees, Rgb fill);

Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

/// Raster of a paper-style ECG. Provenance distinguishes synthetic renders
/// (which carry their generation parameters as JSON) from external scans.
struct EcgRaster {
    Image pixels;
    double dpi = 200.0;
    std::string provenance_kind = "external_scan"; // or "synthetic"
    std::string provenance_json = "{}";            // generation parameters when synthetic

    void validate() const {
        if (pixels.width() < 256 || pixels.height() < 256)
            throw EcgError(ErrorKind::InvalidGeometry, "raster must be at least 256x256");
        if (dpi <= 0) throw EcgError(ErrorKind::InvalidGeometry, "dpi must be positive");
    }
};

EcgRaster read_raster_png(const std::string& path, double dpi);
void write_raster_png(const EcgRaster& raster, const std::string& path);

} // namespace ecgqa
