#include "reasonbreak/decoder/kernels.hpp"

#include <stdexcept>

namespace reasonbreak::kernels {

namespace detail {

inline void conv_out_pixel(const Tensor& x, const std::vector<double>& weight,
                           const std::vector<double>& bias, int k, int pad, int in, int oc, int oy,
                           int ox, Tensor& y) {
    const int ic_count = x.c;
    double s = bias[oc];
    for (int ic = 0; ic < ic_count; ++ic) {
        const size_t wbase = ((static_cast<size_t>(oc) * ic_count + ic) * k) * k;
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < k; ++kx) {
                const int ix = ox + kx - pad;
                if (ix < 0 || ix >= x.w) continue;
                s += weight[wbase + static_cast<size_t>(ky) * k + kx] * x.at(in, ic, iy, ix);
            }
        }
    }
    y.at(in, oc, oy, ox) = s;
}

inline void conv_dx_pixel(const Tensor& gy, const std::vector<double>& weight, int k, int pad,
                          int in, int ic, int iy, int ix, Tensor& gx) {
    const int oc_count = gy.c;
    double s = 0.0;
    for (int oc = 0; oc < oc_count; ++oc) {
        const size_t wbase = ((static_cast<size_t>(oc) * gx.c + ic) * k) * k;
        for (int ky = 0; ky < k; ++ky) {
            const int oy = iy - ky + pad;
            if (oy < 0 || oy >= gy.h) continue;
            for (int kx = 0; kx < k; ++kx) {
                const int ox = ix - kx + pad;
                if (ox < 0 || ox >= gy.w) continue;
                s += weight[wbase + static_cast<size_t>(ky) * k + kx] * gy.at(in, oc, oy, ox);
            }
        }
    }
    gx.at(in, ic, iy, ix) += s;
}

inline void conv_dw_slice(const Tensor& x, const Tensor& gy, int k, int pad, int oc,
                          std::vector<double>& gw, std::vector<double>& gb) {
    const int ic_count = x.c;
    double db = 0.0;
    for (int in = 0; in < gy.n; ++in)
        for (int oy = 0; oy < gy.h; ++oy)
            for (int ox = 0; ox < gy.w; ++ox) db += gy.at(in, oc, oy, ox);
    gb[oc] += db;
    for (int ic = 0; ic < ic_count; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double s = 0.0;
                for (int in = 0; in < gy.n; ++in) {
                    for (int oy = 0; oy < gy.h; ++oy) {
                        const int iy = oy + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int ox = 0; ox < gy.w; ++ox) {
                            const int ix = ox + kx - pad;
                            if (ix < 0 || ix >= x.w) continue;
                            s += gy.at(in, oc, oy, ox) * x.at(in, ic, iy, ix);
                        }
                    }
                }
                gw[((static_cast<size_t>(oc) * ic_count + ic) * k + ky) * k + kx] += s;
            }
        }
    }
}

}  // namespace detail

void conv2d_forward(const Tensor& x, const std::vector<double>& weight,
                    const std::vector<double>& bias, int out_ch, int k, int pad, Tensor& y) {
    y = Tensor(x.n, out_ch, x.h, x.w);
    const int slices = x.n * out_ch;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) {
        const int in = s / out_ch, oc = s % out_ch;
        for (int oy = 0; oy < y.h; ++oy)
            for (int ox = 0; ox < y.w; ++ox)
                detail::conv_out_pixel(x, weight, bias, k, pad, in, oc, oy, ox, y);
    }
}

void conv2d_backward_input(const Tensor& gy, const std::vector<double>& weight, int in_ch, int k,
                           int pad, Tensor& gx) {
    gx = Tensor(gy.n, in_ch, gy.h, gy.w);
    const int slices = gy.n * in_ch;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) {
        const int in = s / in_ch, ic = s % in_ch;
        for (int iy = 0; iy < gx.h; ++iy)
            for (int ix = 0; ix < gx.w; ++ix)
                detail::conv_dx_pixel(gy, weight, k, pad, in, ic, iy, ix, gx);
    }
}

void conv2d_backward_params(const Tensor& x, const Tensor& gy, int k, int pad,
                            std::vector<double>& gw, std::vector<double>& gb) {
    gw.resize(static_cast<size_t>(gy.c) * x.c * k * k, 0.0);
    gb.resize(static_cast<size_t>(gy.c), 0.0);
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < gy.c; ++oc) detail::conv_dw_slice(x, gy, k, pad, oc, gw, gb);
}

void upsample2x_nearest(const Tensor& x, Tensor& y) {
    y = Tensor(x.n, x.c, x.h * 2, x.w * 2);
    const int slices = x.n * x.c;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) {
        const int in = s / x.c, ic = s % x.c;
        for (int oy = 0; oy < y.h; ++oy)
            for (int ox = 0; ox < y.w; ++ox)
                y.at(in, ic, oy, ox) = x.at(in, ic, oy / 2, ox / 2);
    }
}

void upsample2x_nearest_backward(const Tensor& gy, Tensor& gx) {
    gx = Tensor(gy.n, gy.c, gy.h / 2, gy.w / 2);
    const int slices = gy.n * gy.c;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) {
        const int in = s / gy.c, ic = s % gy.c;
        for (int iy = 0; iy < gx.h; ++iy)
            for (int ix = 0; ix < gx.w; ++ix) {
                double acc = 0.0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) acc += gy.at(in, ic, iy * 2 + dy, ix * 2 + dx);
                gx.at(in, ic, iy, ix) += acc;
            }
    }
}

namespace serial {

void conv2d_forward(const Tensor& x, const std::vector<double>& weight,
                    const std::vector<double>& bias, int out_ch, int k, int pad, Tensor& y) {
    y = Tensor(x.n, out_ch, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < out_ch; ++oc)
            for (int oy = 0; oy < y.h; ++oy)
                for (int ox = 0; ox < y.w; ++ox)
                    detail::conv_out_pixel(x, weight, bias, k, pad, in, oc, oy, ox, y);
}

void conv2d_backward_input(const Tensor& gy, const std::vector<double>& weight, int in_ch, int k,
                           int pad, Tensor& gx) {
    gx = Tensor(gy.n, in_ch, gy.h, gy.w);
    for (int in = 0; in < gy.n; ++in)
        for (int ic = 0; ic < in_ch; ++ic)
            for (int iy = 0; iy < gx.h; ++iy)
                for (int ix = 0; ix < gx.w; ++ix)
                    detail::conv_dx_pixel(gy, weight, k, pad, in, ic, iy, ix, gx);
}

void conv2d_backward_params(const Tensor& x, const Tensor& gy, int k, int pad,
                            std::vector<double>& gw, std::vector<double>& gb) {
    gw.resize(static_cast<size_t>(gy.c) * x.c * k * k, 0.0);
    gb.resize(static_cast<size_t>(gy.c), 0.0);
    for (int oc = 0; oc < gy.c; ++oc) detail::conv_dw_slice(x, gy, k, pad, oc, gw, gb);
}

void upsample2x_nearest(const Tensor& x, Tensor& y) {
    y = Tensor(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int oy = 0; oy < y.h; ++oy)
                for (int ox = 0; ox < y.w; ++ox)
                    y.at(in, ic, oy, ox) = x.at(in, ic, oy / 2, ox / 2);
}

void upsample2x_nearest_backward(const Tensor& gy, Tensor& gx) {
    gx = Tensor(gy.n, gy.c, gy.h / 2, gy.w / 2);
    for (int in = 0; in < gy.n; ++in)
        for (int ic = 0; ic < gy.c; ++ic)
            for (int iy = 0; iy < gx.h; ++iy)
                for (int ix = 0; ix < gx.w; ++ix)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            gx.at(in, ic, iy, ix) += gy.at(in, ic, iy * 2 + dy, ix * 2 + dx);
    }

}  // namespace serial

}  // namespace reasonbreak::kernels
