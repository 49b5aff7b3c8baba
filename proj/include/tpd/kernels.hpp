#pragma once

#include <cstdint>
#include <vector>

#include "tpd/tensor.hpp"

namespace tpd {

// OpenMP-parallel layer kernels. Each output element is produced by exactly
// one accumulation chain owned by one thread, so results are bit-identical
// for any thread count. Reductions accumulate in 64-bit and round to float32
// on store.

void conv2d_forward(const Tensor& in, const std::vector<float>& weight,
                    const std::vector<float>& bias, int out_c, int kernel, int stride,
                    int pad, Tensor& out);

// Any of din/dweight/dbias may be null. `din` gathers over the kernel taps
// that map back onto each input element; `dweight` is parallel over output
// channels.
void conv2d_backward(const Tensor& in, const std::vector<float>& weight, int out_c,
                     int kernel, int stride, int pad, const Tensor& dout, Tensor* din,
                     std::vector<double>* dweight, std::vector<double>* dbias);

// argmax (flat input index per output element) is recorded for the backward
// pass; ties resolve to the first maximum in scan order.
void maxpool_forward(const Tensor& in, int kernel, int stride, Tensor& out,
                     std::vector<int32_t>* argmax);
void maxpool_backward(const Tensor& dout, const std::vector<int32_t>& argmax, Tensor& din);

void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& out, const Tensor& dout, Tensor& din);

void add_forward(const Tensor& a, const Tensor& b, Tensor& out);

void fc_forward(const Tensor& in, const std::vector<float>& weight,
                const std::vector<float>& bias, int out_n, std::vector<float>& out);
void fc_backward(const Tensor& in, const std::vector<float>& weight, int out_n,
                 const std::vector<float>& dout, Tensor* din, std::vector<double>* dweight,
                 std::vector<double>* dbias);

float sigmoid_scalar(float x);

}  // namespace tpd
