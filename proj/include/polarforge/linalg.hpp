#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "polarforge/field.hpp"

namespace polarforge {

/// Dense row-major matrix of field element codes.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, Element fill = 0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Throws ValidationError on ragged input.
    static Matrix from_rows(const std::vector<std::vector<Element>>& rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Element& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    Element operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const Element> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<Element> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<Element> data_;
};

/// Rank over the field by Gaussian elimination.
std::size_t mat_rank(const Field& field, const Matrix& m);
std::size_t mat_rank(const Field& field, const std::vector<std::vector<Element>>& rows);

/// True iff v lies in the row span; the zero vector (and the empty vector) always does.
bool in_span(const Field& field, std::span<const Element> v, const Matrix& rows);
bool in_span(const Field& field, const std::vector<Element>& v, const std::vector<std::vector<Element>>& rows);

/// Kronecker product over the field.
Matrix kronecker(const Field& field, const Matrix& a, const Matrix& b);

/// Incremental reduced basis used by the erasure-pattern enumeration.
class SpanBasis {
public:
    SpanBasis(const Field& field, std::size_t cols) : field_(&field), cols_(cols) {}

    /// Reduces v in place against the basis; returns true if v was already in the span.
    /// Otherwise v (normalized) joins the basis.
    bool insert(std::vector<Element>& v);
    std::size_t size() const { return pivots_.size(); }
    void clear() {
        basis_.clear();
        pivots_.clear();
    }

private:
    const Field* field_;
    std::size_t cols_;
    std::vector<std::vector<Element>> basis_;
    std::vector<std::size_t> pivots_;
};

}  // namespace polarforge
