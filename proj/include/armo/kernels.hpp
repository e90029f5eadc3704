#pragma once

// Dense-layer kernels for the gating MLP.
//
// Every kernel exists twice: `serial` is the reference, `omp` splits the
// outer loop across OpenMP threads. Each output element is accumulated in the
// same order in both, so the two produce bitwise-identical results for any
// thread count. All matrices are row-major; weights are out×in.

#include <cstddef>
#include <span>

namespace armo::kernels {

enum class Exec { serial, parallel };

struct DenseShape {
    std::size_t batch = 0;
    std::size_t in = 0;
    std::size_t out = 0;
};

namespace serial {

/// y = x·Wᵀ + b
void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
/// dx = dy·W
void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
/// dW += dyᵀ·x, db += column sums of dy. Batch rows are accumulated in index order.
void dense_backward_params(DenseShape s, std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db);
void relu_inplace(std::span<double> z);
/// grad *= 1[pre > 0]
void relu_backward(std::span<const double> pre, std::span<double> grad);
/// Row-wise max-shifted softmax.
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs);

}  // namespace serial

namespace omp {

void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx);
void dense_backward_params(DenseShape s, std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db);
void relu_inplace(std::span<double> z);
void relu_backward(std::span<const double> pre, std::span<double> grad);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs);

}  // namespace omp

// Dispatch helpers.
void dense_forward(Exec e, DenseShape s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward_input(Exec e, DenseShape s, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx);
void dense_backward_params(Exec e, DenseShape s, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db);
void relu_inplace(Exec e, std::span<double> z);
void relu_backward(Exec e, std::span<const double> pre, std::span<double> grad);
void softmax_rows(Exec e, std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs);

/// Caps OpenMP worker threads from the ARMO_THREADS environment variable,
/// if set. Returns the effective maximum thread count.
int configure_threads_from_env();

}  // namespace armo::kernels
