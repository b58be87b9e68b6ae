#include "dialcoord/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace dialcoord {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec matvec(const Matrix& m, std::span<const double> x) {
    assert(m.cols == x.size());
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) y[r] = dot(m.row(r), x);
    return y;
}

Vec matvec_transposed(const Matrix& m, std::span<const double> x) {
    assert(m.rows == x.size());
    Vec y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double scale) {
    assert(m.rows == a.size() && m.cols == b.size());
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double ar = a[r] * scale;
        if (ar == 0.0) continue;
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) row[c] += ar * b[c];
    }
}

void axpy(Vec& a, std::span<const double> b, double scale) {
    assert(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

Vec relu(std::span<const double> x) {
    Vec y(x.begin(), x.end());
    // NaN passes through so corrupt inputs surface instead of reading as zero
    for (auto& v : y) v = v < 0.0 ? 0.0 : v;
    return y;
}

Vec softmax(std::span<const double> x) {
    if (x.empty()) return {};
    const double mx = *std::max_element(x.begin(), x.end());
    Vec y(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    for (auto& v : y) v /= sum;
    return y;
}

Vec concat(std::span<const double> a, std::span<const double> b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace dialcoord
