#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdx::model::kernels {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
constexpr double kLnEps = 1e-5;
} // namespace

template <typename T>
[[gnu::noinline]] void affine_row(const T* x, const T* w, const T* b, int in, int out, T* y) {
    std::copy(b, b + out, y);
    for (int i = 0; i < in; ++i) axpy(out, x[i], w + static_cast<std::size_t>(i) * out, y);
}

template <typename T>
[[gnu::noinline]] void layernorm_row(const T* x, const T* g, const T* b, int d, T* y, T* hat, T* rstd) {
    T mean = 0;
    for (int i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<T>(d);
    T var = 0;
    for (int i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    for (int i = 0; i < d; ++i) {
        const T h = (x[i] - mean) * r;
        if (hat) hat[i] = h;
        y[i] = g[i] * h + b[i];
    }
    if (rstd) *rstd = r;
}

template <typename T>
[[gnu::noinline]] void gelu_row(const T* x, int n, T* y) {
    const T c = static_cast<T>(kGeluC);
    const T a = static_cast<T>(kGeluA);
    for (int i = 0; i < n; ++i) {
        const T v = x[i];
        y[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
    }
}

template <typename T>
T gelu_grad(T v) {
    const T c = static_cast<T>(kGeluC);
    const T a = static_cast<T>(kGeluA);
    const T th = std::tanh(c * (v + a * v * v * v));
    return T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * c * (T(1) + T(3) * a * v * v);
}

template <typename T>
[[gnu::noinline]] void add_row(const T* a, const T* b, int n, T* y) {
    for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
[[gnu::noinline]] void attend_row(const T* q, const T* keys, const T* values, int n_keys, int d, int n_heads,
                                  T* probs, std::size_t probs_stride, T* out) {
    const int dh = d / n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    std::fill(out, out + d, T(0));
    for (int h = 0; h < n_heads; ++h) {
        T* p = probs + static_cast<std::size_t>(h) * probs_stride;
        const T* qh = q + h * dh;
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < n_keys; ++j) {
            const T* kj = keys + static_cast<std::size_t>(j) * d + h * dh;
            T s = 0;
            for (int i = 0; i < dh; ++i) s += qh[i] * kj[i];
            s *= scale;
            p[j] = s;
            mx = std::max(mx, s);
        }
        T sum = 0;
        for (int j = 0; j < n_keys; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        const T inv = T(1) / sum;
        T* oh = out + h * dh;
        for (int j = 0; j < n_keys; ++j) {
            p[j] *= inv;
            axpy(dh, p[j], values + static_cast<std::size_t>(j) * d + h * dh, oh);
        }
    }
}

#define FDX_INSTANTIATE(T)                                                                                      \
    template void affine_row<T>(const T*, const T*, const T*, int, int, T*);                                     \
    template void layernorm_row<T>(const T*, const T*, const T*, int, T*, T*, T*);                               \
    template void gelu_row<T>(const T*, int, T*);                                                                \
    template T gelu_grad<T>(T);                                                                                  \
    template void add_row<T>(const T*, const T*, int, T*);                                                       \
    template void attend_row<T>(const T*, const T*, const T*, int, int, int, T*, std::size_t, T*);

FDX_INSTANTIATE(float)
FDX_INSTANTIATE(double)

#undef FDX_INSTANTIATE

} // namespace fdx::model::kernels
