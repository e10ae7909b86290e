#include "reasonbreak/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace reasonbreak {

ImageBuffer::ImageBuffer(int h, int w) : height(h), width(w) {
    if (h < 1 || w < 1) throw std::invalid_argument("image: dimensions must be >= 1");
    data.assign(static_cast<size_t>(h) * w * channels, 0.0);
}

namespace {

// Pixel-center mapping (align_corners=false), edge-clamped.
inline double src_coord(int out_idx, int out_len, int in_len) {
    return (out_idx + 0.5) * static_cast<double>(in_len) / out_len - 0.5;
}

struct BilinearTap {
    int lo, hi;
    double w_hi;  // weight of hi; lo gets 1 - w_hi
};

inline BilinearTap bilinear_tap(int out_idx, int out_len, int in_len) {
    double s = src_coord(out_idx, out_len, in_len);
    double fl = std::floor(s);
    int lo = static_cast<int>(fl);
    double frac = s - fl;
    int hi = lo + 1;
    lo = std::clamp(lo, 0, in_len - 1);
    hi = std::clamp(hi, 0, in_len - 1);
    return {lo, hi, frac};
}

inline void bilinear_row(const ImageBuffer& src, ImageBuffer& dst, int out_h, int out_w, int yo) {
    BilinearTap ty = bilinear_tap(yo, out_h, src.height);
    for (int xo = 0; xo < out_w; ++xo) {
        BilinearTap tx = bilinear_tap(xo, out_w, src.width);
        for (int c = 0; c < 3; ++c) {
            double top = (1.0 - tx.w_hi) * src.at(ty.lo, tx.lo, c) + tx.w_hi * src.at(ty.lo, tx.hi, c);
            double bot = (1.0 - tx.w_hi) * src.at(ty.hi, tx.lo, c) + tx.w_hi * src.at(ty.hi, tx.hi, c);
            dst.at(yo, xo, c) = (1.0 - ty.w_hi) * top + ty.w_hi * bot;
        }
    }
}

inline void nearest_row(const ImageBuffer& src, ImageBuffer& dst, int out_h, int out_w, int yo) {
    int yi = std::clamp(static_cast<int>(std::floor((yo + 0.5) * static_cast<double>(src.height) / out_h)),
                        0, src.height - 1);
    for (int xo = 0; xo < out_w; ++xo) {
        int xi = std::clamp(static_cast<int>(std::floor((xo + 0.5) * static_cast<double>(src.width) / out_w)),
                            0, src.width - 1);
        for (int c = 0; c < 3; ++c) dst.at(yo, xo, c) = src.at(yi, xi, c);
    }
}

}  // namespace

ImageBuffer resample_bilinear(const ImageBuffer& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resample: output dims must be >= 1");
    if (out_h == src.height && out_w == src.width) return src;
    ImageBuffer dst(out_h, out_w);
#pragma omp parallel for schedule(static)
    for (int yo = 0; yo < out_h; ++yo) bilinear_row(src, dst, out_h, out_w, yo);
    return dst;
}

ImageBuffer resample_nearest(const ImageBuffer& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resample: output dims must be >= 1");
    ImageBuffer dst(out_h, out_w);
#pragma omp parallel for schedule(static)
    for (int yo = 0; yo < out_h; ++yo) nearest_row(src, dst, out_h, out_w, yo);
    return dst;
}

namespace serial {

ImageBuffer resample_bilinear(const ImageBuffer& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resample: output dims must be >= 1");
    if (out_h == src.height && out_w == src.width) return src;
    ImageBuffer dst(out_h, out_w);
    for (int yo = 0; yo < out_h; ++yo) bilinear_row(src, dst, out_h, out_w, yo);
    return dst;
}

ImageBuffer resample_nearest(const ImageBuffer& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resample: output dims must be >= 1");
    ImageBuffer dst(out_h, out_w);
    for (int yo = 0; yo < out_h; ++yo) nearest_row(src, dst, out_h, out_w, yo);
    return dst;
}

}  // namespace serial

ImageBuffer resample_bilinear_adjoint(const ImageBuffer& grad_out, int in_h, int in_w) {
    if (grad_out.height == in_h && grad_out.width == in_w) return grad_out;
    ImageBuffer grad_in(in_h, in_w);
    for (int yo = 0; yo < grad_out.height; ++yo) {
        BilinearTap ty = bilinear_tap(yo, grad_out.height, in_h);
        for (int xo = 0; xo < grad_out.width; ++xo) {
            BilinearTap tx = bilinear_tap(xo, grad_out.width, in_w);
            for (int c = 0; c < 3; ++c) {
                double g = grad_out.at(yo, xo, c);
                grad_in.at(ty.lo, tx.lo, c) += (1.0 - ty.w_hi) * (1.0 - tx.w_hi) * g;
                grad_in.at(ty.lo, tx.hi, c) += (1.0 - ty.w_hi) * tx.w_hi * g;
                grad_in.at(ty.hi, tx.lo, c) += ty.w_hi * (1.0 - tx.w_hi) * g;
                grad_in.at(ty.hi, tx.hi, c) += ty.w_hi * tx.w_hi * g;
            }
        }
    }
    return grad_in;
}

std::vector<uint8_t> quantize_u8(const ImageBuffer& img) {
    std::vector<uint8_t> out(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        out[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

ImageBuffer dequantize_u8(const std::vector<uint8_t>& bytes, int h, int w) {
    ImageBuffer img(h, w);
    if (bytes.size() != img.data.size())
        throw std::invalid_argument("dequantize: byte count does not match dimensions");
    for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

double max_abs_deviation(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("max_abs_deviation: dimension mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

namespace {

cv::Mat to_mat_bgr(const ImageBuffer& img) {
    cv::Mat mat(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            auto* px = mat.ptr<uint8_t>(y) + 3 * x;
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                px[2 - c] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
        }
    return mat;
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
    if (mat.empty()) throw std::runtime_error("failed to read image: " + path);
    ImageBuffer img(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x) {
            const auto* px = mat.ptr<uint8_t>(y) + 3 * x;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = px[2 - c] / 255.0;
        }
    return img;
}

void save_png(const ImageBuffer& img, const std::string& path) {
    if (!cv::imwrite(path, to_mat_bgr(img)))
        throw std::runtime_error("failed to write image: " + path);
}

void save_jpeg(const ImageBuffer& img, const std::string& path, int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg quality must be in [1,100]");
    if (!cv::imwrite(path, to_mat_bgr(img), {cv::IMWRITE_JPEG_QUALITY, quality}))
        throw std::runtime_error("failed to write image: " + path);
}

}  // namespace reasonbreak
