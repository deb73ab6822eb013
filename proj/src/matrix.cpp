#include "divi/matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace divi {

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values))
{
    if (data_.size() != rows * cols)
        throw std::invalid_argument("matrix: value count does not match shape");
}

std::vector<double> Matrix::column(std::size_t j) const
{
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        out[i] = (*this)(i, j);
    return out;
}

void Matrix::append_row(std::span<const double> values)
{
    if (rows_ == 0 && cols_ == 0)
        cols_ = values.size();
    if (values.size() != cols_)
        throw std::invalid_argument("matrix: row length mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

} // namespace divi
