#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls into the library's numerical paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace armo::oracle {

/// Solve A x = b (n×n row-major) by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (a[pivot * n + col] == 0.0) throw std::runtime_error("singular system");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

/// (FᵀF + ridge·I) w = Fᵀr over the given rows.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows,
                                            const std::vector<double>& targets, double ridge) {
    const std::size_t d = rows.front().size();
    std::vector<double> gram(d * d, 0.0), rhs(d, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            rhs[a] += rows[i][a] * targets[i];
            for (std::size_t b = 0; b < d; ++b) gram[a * d + b] += rows[i][a] * rows[i][b];
        }
    }
    for (std::size_t a = 0; a < d; ++a) gram[a * d + a] += ridge;
    return gauss_solve(gram, rhs);
}

/// Average ranks by counting: 1 + #less + (#equal − 1)/2.
inline std::vector<double> count_ranks(const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double x : v) {
            less += x < v[i];
            equal += x == v[i];
        }
        ranks[i] = 1.0 + less + (equal - 1.0) / 2.0;
    }
    return ranks;
}

inline double pearson_two_pass(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0 || db == 0) return 0.0;
    return num / std::sqrt(da * db);
}

inline double spearman_by_counting(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson_two_pass(count_ranks(a), count_ranks(b));
}

/// Central differences of f at x for every coordinate.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// max_i |a_i − n_i| / max(|a_i|, |n_i|, floor)
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    return worst;
}

/// ρ(λ) = spearman(r − λv, v) sampled on a uniform grid; returns the first
/// grid λ where ρ ≤ 0.
inline double grid_zero_crossing(const std::vector<double>& r, const std::vector<double>& v, double hi, double step) {
    for (std::size_t s = 0;; ++s) {
        const double lambda = static_cast<double>(s) * step;
        if (lambda > hi) return hi;
        std::vector<double> adj(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) adj[i] = r[i] - lambda * v[i];
        const bool constant = std::all_of(adj.begin(), adj.end(), [&](double x) { return x == adj[0]; });
        const double rho = constant ? 0.0 : spearman_by_counting(adj, v);
        if (rho <= 0.0) return lambda;
    }
}

}  // namespace armo::oracle
