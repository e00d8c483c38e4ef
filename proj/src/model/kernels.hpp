#pragma once

#include <cstddef>

// Row kernels shared by the batch forward pass and the incremental decoder.
// They are compiled once and never inlined, so both paths execute the same
// instruction sequence and agree bit for bit.
namespace fdx::model::kernels {

// y = b + x W with W stored [in][out].
template <typename T>
void affine_row(const T* x, const T* w, const T* b, int in, int out, T* y);

// y = g * xhat + b with xhat = (x - mean) * rstd. hat and rstd may be null.
template <typename T>
void layernorm_row(const T* x, const T* g, const T* b, int d, T* y, T* hat, T* rstd);

template <typename T>
void gelu_row(const T* x, int n, T* y);

template <typename T>
T gelu_grad(T x);

// y = a + b
template <typename T>
void add_row(const T* a, const T* b, int n, T* y);

// Causal multi-head attention for one query against n_keys cached rows.
// probs receives n_keys weights per head at probs + h * probs_stride.
template <typename T>
void attend_row(const T* q, const T* keys, const T* values, int n_keys, int d, int n_heads, T* probs,
                std::size_t probs_stride, T* out);

// y += a * x
template <typename T>
inline void axpy(int n, T a, const T* __restrict x, T* __restrict y) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

} // namespace fdx::model::kernels
