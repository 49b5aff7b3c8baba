#include "tpd/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpd {

static void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void conv2d_forward(const Tensor& in, const std::vector<float>& weight,
                    const std::vector<float>& bias, int out_c, int kernel, int stride,
                    int pad, Tensor& out) {
    const int oh = (in.h + 2 * pad - kernel) / stride + 1;
    const int ow = (in.w + 2 * pad - kernel) / stride + 1;
    check(oh >= 1 && ow >= 1, "conv2d: non-positive output dims");
    check(weight.size() == static_cast<size_t>(out_c) * in.c * kernel * kernel,
          "conv2d: weight size mismatch");
    check(bias.size() == static_cast<size_t>(out_c), "conv2d: bias size mismatch");
    out = Tensor(out_c, oh, ow);

    const int ic = in.c, ih = in.h, iw = in.w, k = kernel;
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < out_c; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            const float* wbase = weight.data() + static_cast<size_t>(co) * ic * k * k;
            float* orow = out.v.data() + (static_cast<size_t>(co) * oh + oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias[static_cast<size_t>(co)];
                const int y0 = oy * stride - pad;
                const int x0 = ox * stride - pad;
                for (int ci = 0; ci < ic; ++ci) {
                    const float* irow = in.v.data() + static_cast<size_t>(ci) * ih * iw;
                    const float* wk = wbase + static_cast<size_t>(ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= ih) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= iw) continue;
                            acc += static_cast<double>(irow[y * iw + x]) *
                                   static_cast<double>(wk[ky * k + kx]);
                        }
                    }
                }
                orow[ox] = static_cast<float>(acc);
            }
        }
    }
}

void conv2d_backward(const Tensor& in, const std::vector<float>& weight, int out_c,
                     int kernel, int stride, int pad, const Tensor& dout, Tensor* din,
                     std::vector<double>* dweight, std::vector<double>* dbias) {
    const int k = kernel, ic = in.c, ih = in.h, iw = in.w;
    const int oh = dout.h, ow = dout.w;
    check(dout.c == out_c, "conv2d_backward: dout channels mismatch");

    if (dbias) {
        dbias->assign(static_cast<size_t>(out_c), 0.0);
#pragma omp parallel for schedule(static)
        for (int co = 0; co < out_c; ++co) {
            double acc = 0;
            const float* p = dout.v.data() + static_cast<size_t>(co) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) acc += p[i];
            (*dbias)[static_cast<size_t>(co)] = acc;
        }
    }

    if (dweight) {
        dweight->assign(static_cast<size_t>(out_c) * ic * k * k, 0.0);
#pragma omp parallel for schedule(static)
        for (int co = 0; co < out_c; ++co) {
            const float* dop = dout.v.data() + static_cast<size_t>(co) * oh * ow;
            double* dwb = dweight->data() + static_cast<size_t>(co) * ic * k * k;
            for (int ci = 0; ci < ic; ++ci) {
                const float* irow = in.v.data() + static_cast<size_t>(ci) * ih * iw;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        double acc = 0;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int y = oy * stride - pad + ky;
                            if (y < 0 || y >= ih) continue;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int x = ox * stride - pad + kx;
                                if (x < 0 || x >= iw) continue;
                                acc += static_cast<double>(dop[oy * ow + ox]) *
                                       static_cast<double>(irow[y * iw + x]);
                            }
                        }
                        dwb[(static_cast<size_t>(ci) * k + ky) * k + kx] = acc;
                    }
                }
            }
        }
    }

    if (din) {
        *din = Tensor(ic, ih, iw);
        // gather form: each input element sums the taps that touched it
#pragma omp parallel for schedule(static)
        for (int ci = 0; ci < ic; ++ci) {
            float* dip = din->v.data() + static_cast<size_t>(ci) * ih * iw;
            for (int y = 0; y < ih; ++y) {
                for (int x = 0; x < iw; ++x) {
                    double acc = 0;
                    for (int co = 0; co < out_c; ++co) {
                        const float* dop = dout.v.data() + static_cast<size_t>(co) * oh * ow;
                        const float* wk = weight.data() +
                                          (static_cast<size_t>(co) * ic + ci) * k * k;
                        for (int ky = 0; ky < k; ++ky) {
                            const int ny = y + pad - ky;
                            if (ny < 0 || ny % stride != 0) continue;
                            const int oy = ny / stride;
                            if (oy >= oh) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int nx = x + pad - kx;
                                if (nx < 0 || nx % stride != 0) continue;
                                const int ox = nx / stride;
                                if (ox >= ow) continue;
                                acc += static_cast<double>(wk[ky * k + kx]) *
                                       static_cast<double>(dop[oy * ow + ox]);
                            }
                        }
                    }
                    dip[y * iw + x] = static_cast<float>(acc);
                }
            }
        }
    }
}

void maxpool_forward(const Tensor& in, int kernel, int stride, Tensor& out,
                     std::vector<int32_t>* argmax) {
    const int oh = (in.h - kernel) / stride + 1;
    const int ow = (in.w - kernel) / stride + 1;
    check(oh >= 1 && ow >= 1, "maxpool: non-positive output dims");
    out = Tensor(in.c, oh, ow);
    if (argmax) argmax->assign(out.size(), -1);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.c; ++c) {
        const float* ip = in.v.data() + static_cast<size_t>(c) * in.h * in.w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                int32_t best_idx = -1;
                for (int ky = 0; ky < kernel; ++ky) {
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int y = oy * stride + ky, x = ox * stride + kx;
                        const float v = ip[y * in.w + x];
                        if (v > best) {  // strict: first max wins ties
                            best = v;
                            best_idx = static_cast<int32_t>(c) * in.h * in.w + y * in.w + x;
                        }
                    }
                }
                const size_t o = (static_cast<size_t>(c) * oh + oy) * ow + ox;
                out.v[o] = best;
                if (argmax) (*argmax)[o] = best_idx;
            }
        }
    }
}

void maxpool_backward(const Tensor& dout, const std::vector<int32_t>& argmax, Tensor& din) {
    check(argmax.size() == dout.size(), "maxpool_backward: argmax size mismatch");
    std::fill(din.v.begin(), din.v.end(), 0.0f);
    const size_t per_chan_out = static_cast<size_t>(dout.h) * dout.w;
    const size_t per_chan_in = static_cast<size_t>(din.h) * din.w;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < dout.c; ++c) {
        // argmax indices stay within their own channel, so this is race-free
        const size_t base = static_cast<size_t>(c) * per_chan_out;
        for (size_t i = 0; i < per_chan_out; ++i) {
            const int32_t idx = argmax[base + i];
            din.v[static_cast<size_t>(idx)] += dout.v[base + i];
        }
    }
    (void)per_chan_in;
}

void relu_forward(const Tensor& in, Tensor& out) {
    out = Tensor(in.c, in.h, in.w);
    const size_t n = in.size();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out.v[static_cast<size_t>(i)] = in.v[static_cast<size_t>(i)] > 0.0f
                                            ? in.v[static_cast<size_t>(i)]
                                            : 0.0f;
}

void relu_backward(const Tensor& out, const Tensor& dout, Tensor& din) {
    din = Tensor(out.c, out.h, out.w);
    const size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        din.v[static_cast<size_t>(i)] =
            out.v[static_cast<size_t>(i)] > 0.0f ? dout.v[static_cast<size_t>(i)] : 0.0f;
}

void add_forward(const Tensor& a, const Tensor& b, Tensor& out) {
    check(a.c == b.c && a.h == b.h && a.w == b.w, "add: shape mismatch");
    out = Tensor(a.c, a.h, a.w);
    const size_t n = a.size();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out.v[static_cast<size_t>(i)] = a.v[static_cast<size_t>(i)] + b.v[static_cast<size_t>(i)];
}

void fc_forward(const Tensor& in, const std::vector<float>& weight,
                const std::vector<float>& bias, int out_n, std::vector<float>& out) {
    const size_t in_dim = in.size();
    check(weight.size() == in_dim * static_cast<size_t>(out_n), "fc: weight size mismatch");
    check(bias.size() == static_cast<size_t>(out_n), "fc: bias size mismatch");
    out.assign(static_cast<size_t>(out_n), 0.0f);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_n; ++o) {
        double acc = bias[static_cast<size_t>(o)];
        const float* w = weight.data() + static_cast<size_t>(o) * in_dim;
        for (size_t i = 0; i < in_dim; ++i)
            acc += static_cast<double>(w[i]) * static_cast<double>(in.v[i]);
        out[static_cast<size_t>(o)] = static_cast<float>(acc);
    }
}

void fc_backward(const Tensor& in, const std::vector<float>& weight, int out_n,
                 const std::vector<float>& dout, Tensor* din, std::vector<double>* dweight,
                 std::vector<double>* dbias) {
    const size_t in_dim = in.size();
    if (dbias) {
        dbias->assign(static_cast<size_t>(out_n), 0.0);
        for (int o = 0; o < out_n; ++o) (*dbias)[static_cast<size_t>(o)] = dout[static_cast<size_t>(o)];
    }
    if (dweight) {
        dweight->assign(in_dim * static_cast<size_t>(out_n), 0.0);
#pragma omp parallel for schedule(static)
        for (int o = 0; o < out_n; ++o) {
            double* dw = dweight->data() + static_cast<size_t>(o) * in_dim;
            const double g = dout[static_cast<size_t>(o)];
            for (size_t i = 0; i < in_dim; ++i) dw[i] = g * static_cast<double>(in.v[i]);
        }
    }
    if (din) {
        *din = Tensor(in.c, in.h, in.w);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(in_dim); ++i) {
            double acc = 0;
            for (int o = 0; o < out_n; ++o)
                acc += static_cast<double>(weight[static_cast<size_t>(o) * in_dim + i]) *
                       static_cast<double>(dout[static_cast<size_t>(o)]);
            din->v[static_cast<size_t>(i)] = static_cast<float>(acc);
        }
    }
}

float sigmoid_scalar(float x) {
    return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

}  // namespace tpd
