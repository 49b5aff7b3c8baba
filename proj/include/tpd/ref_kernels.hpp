#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace tpd::ref {

// Plain serial layer kernels on raw CHW arrays, templated on the scalar type.
// These are the reference implementations: the test suites compare the
// OpenMP kernels and the engine against them (instantiated with double), and
// the benchmark measures them (instantiated with float) against the parallel
// path. Deliberately naive loop nests; keep them that way.

template <typename T>
void conv2d(const T* in, int ic, int ih, int iw, const T* weight, const T* bias, int oc,
            int k, int stride, int pad, T* out, int oh, int ow) {
    for (int co = 0; co < oc; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T acc = bias ? bias[co] : T(0);
                for (int ci = 0; ci < ic; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int y = oy * stride - pad + ky;
                            const int x = ox * stride - pad + kx;
                            if (y < 0 || y >= ih || x < 0 || x >= iw) continue;
                            acc += in[(static_cast<size_t>(ci) * ih + y) * iw + x] *
                                   weight[((static_cast<size_t>(co) * ic + ci) * k + ky) * k + kx];
                        }
                out[(static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
            }
}

template <typename T>
void maxpool(const T* in, int c, int ih, int iw, int k, int stride, T* out, int oh, int ow) {
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        best = std::max(best,
                                        in[(static_cast<size_t>(ci) * ih + oy * stride + ky) * iw +
                                           ox * stride + kx]);
                out[(static_cast<size_t>(ci) * oh + oy) * ow + ox] = best;
            }
}

template <typename T>
void relu(const T* in, size_t n, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void add(const T* a, const T* b, size_t n, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void fully_connected(const T* in, size_t in_dim, const T* weight, const T* bias, int out_n,
                     T* out) {
    for (int o = 0; o < out_n; ++o) {
        T acc = bias ? bias[o] : T(0);
        for (size_t i = 0; i < in_dim; ++i) acc += weight[static_cast<size_t>(o) * in_dim + i] * in[i];
        out[o] = acc;
    }
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace tpd::ref
