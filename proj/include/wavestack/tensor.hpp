#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace wavestack {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void fill(double value);
    Matrix transposed() const;

    Matrix& operator+=(const Matrix& other);
    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);

/// w * x for w (m x n), x (n).
std::vector<double> matvec(const Matrix& w, std::span<const double> x);
/// out += w * x
void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> out);
/// out += w^T * v
void matvec_t_add(const Matrix& w, std::span<const double> v, std::span<double> out);
/// w += a b^T (outer product)
void outer_add(Matrix& w, std::span<const double> a, std::span<const double> b);

}  // namespace wavestack
