#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace reasonbreak {

/// H x W x 3 raster of unit-interval intensities, interleaved RGB row-major.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    std::vector<double> data;  // size = height * width * 3

    ImageBuffer() = default;
    ImageBuffer(int h, int w);

    double& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    bool same_dims(const ImageBuffer& o) const {
        return height == o.height && width == o.width;
    }
};

/// Signed per-pixel delta with the same layout as ImageBuffer.
using PerturbationField = ImageBuffer;

ImageBuffer resample_bilinear(const ImageBuffer& src, int out_h, int out_w);
ImageBuffer resample_nearest(const ImageBuffer& src, int out_h, int out_w);

// Adjoint of resample_bilinear: scatters gradients w.r.t. the output back to
// the input grid. Linear map, so the adjoint uses the same weights.
ImageBuffer resample_bilinear_adjoint(const ImageBuffer& grad_out, int in_h, int in_w);

std::vector<uint8_t> quantize_u8(const ImageBuffer& img);
ImageBuffer dequantize_u8(const std::vector<uint8_t>& bytes, int h, int w);

double max_abs_deviation(const ImageBuffer& a, const ImageBuffer& b);

// File I/O (8-bit). PNG writes are lossless; JPEG quality in [1,100].
ImageBuffer load_image(const std::string& path);
void save_png(const ImageBuffer& img, const std::string& path);
void save_jpeg(const ImageBuffer& img, const std::string& path, int quality);

namespace serial {
ImageBuffer resample_bilinear(const ImageBuffer& src, int out_h, int out_w);
ImageBuffer resample_nearest(const ImageBuffer& src, int out_h, int out_w);
}  // namespace serial

}  // namespace reasonbreak
