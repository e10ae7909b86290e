#pragma once

#include "reasonbreak/core/tensor.hpp"

namespace reasonbreak::kernels {

// Direct 2D convolution, stride 1. Parallel variants live here; the serial
// reference used by tests and the benchmark is in kernels::serial. Both
// accumulate in the same order, so outputs are bitwise identical.
void conv2d_forward(const Tensor& x, const std::vector<double>& weight,
                    const std::vector<double>& bias, int out_ch, int k, int pad, Tensor& y);
void conv2d_backward_input(const Tensor& grad_y, const std::vector<double>& weight, int in_ch,
                           int k, int pad, Tensor& grad_x);
void conv2d_backward_params(const Tensor& x, const Tensor& grad_y, int k, int pad,
                            std::vector<double>& grad_weight, std::vector<double>& grad_bias);

void upsample2x_nearest(const Tensor& x, Tensor& y);
void upsample2x_nearest_backward(const Tensor& grad_y, Tensor& grad_x);

namespace serial {
void conv2d_forward(const Tensor& x, const std::vector<double>& weight,
                    const std::vector<double>& bias, int out_ch, int k, int pad, Tensor& y);
void conv2d_backward_input(const Tensor& grad_y, const std::vector<double>& weight, int in_ch,
                           int k, int pad, Tensor& grad_x);
void conv2d_backward_params(const Tensor& x, const Tensor& grad_y, int k, int pad,
                            std::vector<double>& grad_weight, std::vector<double>& grad_bias);
void upsample2x_nearest(const Tensor& x, Tensor& y);
void upsample2x_nearest_backward(const Tensor& grad_y, Tensor& grad_x);
}  // namespace serial

}  // namespace reasonbreak::kernels
