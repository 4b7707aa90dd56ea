#include "wavestack/tensor.hpp"

#include "wavestack/error.hpp"

#include <algorithm>
#include <string>

namespace wavestack {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("ragged matrix literal");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::column(std::span<const double> values)
{
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::transposed() const
{
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other)
{
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        throw ShapeError("matrix add of " + std::to_string(rows_) + "x" + std::to_string(cols_) + " and " +
                         std::to_string(other.rows_) + "x" + std::to_string(other.cols_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b)
{
    if (!ok) {
        throw ShapeError(std::string(op) + ": incompatible " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b)
{
    require(a.cols() == b.rows(), "matmul", a, b);
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const auto br = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                o[j] += aik * br[j];
            }
        }
    }
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b)
{
    require(a.cols() == b.cols(), "matmul_bt", a, b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row(j);
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                sum += ar[k] * br[k];
            }
            out(i, j) = sum;
        }
    }
    return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b)
{
    require(a.rows() == b.rows(), "matmul_at", a, b);
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto ar = a.row(k);
        const auto br = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ar[i];
            auto o = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                o[j] += aki * br[j];
            }
        }
    }
    return out;
}

std::vector<double> matvec(const Matrix& w, std::span<const double> x)
{
    std::vector<double> out(w.rows(), 0.0);
    matvec_add(w, x, out);
    return out;
}

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> out)
{
    if (w.cols() != x.size() || w.rows() != out.size()) {
        throw ShapeError("matvec: matrix " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         " against vector of " + std::to_string(x.size()));
    }
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto wr = w.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < wr.size(); ++c) {
            sum += wr[c] * x[c];
        }
        out[r] += sum;
    }
}

void matvec_t_add(const Matrix& w, std::span<const double> v, std::span<double> out)
{
    if (w.rows() != v.size() || w.cols() != out.size()) {
        throw ShapeError("matvec_t: matrix " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         " against vector of " + std::to_string(v.size()));
    }
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto wr = w.row(r);
        const double vr = v[r];
        for (std::size_t c = 0; c < wr.size(); ++c) {
            out[c] += wr[c] * vr;
        }
    }
}

void outer_add(Matrix& w, std::span<const double> a, std::span<const double> b)
{
    for (std::size_t r = 0; r < a.size(); ++r) {
        auto wr = w.row(r);
        const double ar = a[r];
        for (std::size_t c = 0; c < b.size(); ++c) {
            wr[c] += ar * b[c];
        }
    }
}

}  // namespace wavestack
