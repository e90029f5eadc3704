#include "armo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "armo/errors.hpp"

namespace armo::kernels {

namespace {

// Per-row / per-unit bodies shared by both variants so the arithmetic is
// literally the same code.

inline void forward_row(DenseShape s, const double* x, const double* w, const double* b, double* y) {
    for (std::size_t o = 0; o < s.out; ++o) {
        const double* wo = w + o * s.in;
        double acc = b[o];
        for (std::size_t j = 0; j < s.in; ++j) acc += x[j] * wo[j];
        y[o] = acc;
    }
}

inline void backward_input_row(DenseShape s, const double* dy, const double* w, double* dx) {
    std::fill(dx, dx + s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
        const double a = dy[o];
        if (a == 0.0) continue;
        const double* wo = w + o * s.in;
        for (std::size_t j = 0; j < s.in; ++j) dx[j] += a * wo[j];
    }
}

inline void backward_params_unit(DenseShape s, std::size_t o, const double* dy, const double* x, double* dw,
                                 double* db) {
    double* dwo = dw + o * s.in;
    double bias = db[o];
    for (std::size_t i = 0; i < s.batch; ++i) {
        const double a = dy[i * s.out + o];
        if (a == 0.0) continue;
        bias += a;
        const double* xi = x + i * s.in;
        for (std::size_t j = 0; j < s.in; ++j) dwo[j] += a * xi[j];
    }
    db[o] = bias;
}

inline void softmax_row(std::size_t cols, const double* z, double* p) {
    const double m = *std::max_element(z, z + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
        p[c] = std::exp(z[c] - m);
        sum += p[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < cols; ++c) p[c] *= inv;
}

}  // namespace

namespace serial {

void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
    for (std::size_t i = 0; i < s.batch; ++i) forward_row(s, x.data() + i * s.in, w.data(), b.data(), y.data() + i * s.out);
}

void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
    for (std::size_t i = 0; i < s.batch; ++i) backward_input_row(s, dy.data() + i * s.out, w.data(), dx.data() + i * s.in);
}

void dense_backward_params(DenseShape s, std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db) {
    for (std::size_t o = 0; o < s.out; ++o) backward_params_unit(s, o, dy.data(), x.data(), dw.data(), db.data());
}

void relu_inplace(std::span<double> z) {
    for (double& v : z) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> pre, std::span<double> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
    }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs) {
    for (std::size_t r = 0; r < rows; ++r) softmax_row(cols, logits.data() + r * cols, probs.data() + r * cols);
}

}  // namespace serial

namespace omp {

void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
    const auto rows = static_cast<std::ptrdiff_t>(s.batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        forward_row(s, x.data() + i * s.in, w.data(), b.data(), y.data() + i * s.out);
    }
}

void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
    const auto rows = static_cast<std::ptrdiff_t>(s.batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        backward_input_row(s, dy.data() + i * s.out, w.data(), dx.data() + i * s.in);
    }
}

void dense_backward_params(DenseShape s, std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db) {
    const auto units = static_cast<std::ptrdiff_t>(s.out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < units; ++o) {
        backward_params_unit(s, static_cast<std::size_t>(o), dy.data(), x.data(), dw.data(), db.data());
    }
}

void relu_inplace(std::span<double> z) {
    const auto n = static_cast<std::ptrdiff_t>(z.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(std::span<const double> pre, std::span<double> grad) {
    const auto n = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
    }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs) {
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) softmax_row(cols, logits.data() + r * cols, probs.data() + r * cols);
}

}  // namespace omp

void dense_forward(Exec e, DenseShape s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
    e == Exec::parallel ? omp::dense_forward(s, x, w, b, y) : serial::dense_forward(s, x, w, b, y);
}

void dense_backward_input(Exec e, DenseShape s, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
    e == Exec::parallel ? omp::dense_backward_input(s, dy, w, dx) : serial::dense_backward_input(s, dy, w, dx);
}

void dense_backward_params(Exec e, DenseShape s, std::span<const double> dy, std::span<const double> x,
                           std::span<double> dw, std::span<double> db) {
    e == Exec::parallel ? omp::dense_backward_params(s, dy, x, dw, db) : serial::dense_backward_params(s, dy, x, dw, db);
}

void relu_inplace(Exec e, std::span<double> z) {
    e == Exec::parallel ? omp::relu_inplace(z) : serial::relu_inplace(z);
}

void relu_backward(Exec e, std::span<const double> pre, std::span<double> grad) {
    e == Exec::parallel ? omp::relu_backward(pre, grad) : serial::relu_backward(pre, grad);
}

void softmax_rows(Exec e, std::size_t rows, std::size_t cols, std::span<const double> logits, std::span<double> probs) {
    e == Exec::parallel ? omp::softmax_rows(rows, cols, logits, probs) : serial::softmax_rows(rows, cols, logits, probs);
}

int configure_threads_from_env() {
#ifdef _OPENMP
    if (const char* env = std::getenv("ARMO_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) {
            throw ValidationError(std::string("ARMO_THREADS must be a positive integer, got '") + env + "'");
        }
        omp_set_num_threads(static_cast<int>(std::min<long>(n, omp_get_max_threads())));
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace armo::kernels
