#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dialcoord {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// y = M x
Vec matvec(const Matrix& m, std::span<const double> x);
// y = M^T x
Vec matvec_transposed(const Matrix& m, std::span<const double> x);
// M += scale * a b^T
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double scale = 1.0);
// a += scale * b
void axpy(Vec& a, std::span<const double> b, double scale = 1.0);

Vec relu(std::span<const double> x);
// Numerically stable softmax (max subtraction).
Vec softmax(std::span<const double> x);

Vec concat(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> x);

}  // namespace dialcoord
