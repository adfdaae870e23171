#include "polarforge/linalg.hpp"

#include <algorithm>

#include "polarforge/errors.hpp"

namespace polarforge {

Matrix Matrix::from_rows(const std::vector<std::vector<Element>>& rows) {
    if (rows.empty()) return {};
    const std::size_t cols = rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw ValidationError("ragged matrix: row " + std::to_string(r) + " has " +
                                                          std::to_string(rows[r].size()) + " entries, expected " +
                                                          std::to_string(cols));
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
}

bool SpanBasis::insert(std::vector<Element>& v) {
    const Field& f = *field_;
    for (std::size_t b = 0; b < basis_.size(); ++b) {
        const Element c = v[pivots_[b]];
        if (c == 0) continue;
        const auto& row = basis_[b];
        for (std::size_t j = 0; j < cols_; ++j)
            if (row[j] != 0) v[j] = f.sub(v[j], f.mul(c, row[j]));
    }
    std::size_t pivot = cols_;
    for (std::size_t j = 0; j < cols_; ++j)
        if (v[j] != 0) {
            pivot = j;
            break;
        }
    if (pivot == cols_) return true;
    const Element inv = f.inv(v[pivot]);
    for (auto& x : v) x = f.mul(x, inv);
    // keep the basis fully reduced so later reductions need one pass
    for (std::size_t b = 0; b < basis_.size(); ++b) {
        const Element c = basis_[b][pivot];
        if (c == 0) continue;
        for (std::size_t j = 0; j < cols_; ++j)
            if (v[j] != 0) basis_[b][j] = f.sub(basis_[b][j], f.mul(c, v[j]));
    }
    basis_.push_back(v);
    pivots_.push_back(pivot);
    return false;
}

std::size_t mat_rank(const Field& field, const Matrix& m) {
    SpanBasis basis(field, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::vector<Element> v(m.row(r).begin(), m.row(r).end());
        for (auto x : v)
            if (!field.valid(x)) throw ValidationError("matrix entry " + std::to_string(x) + " outside " + field.name());
        basis.insert(v);
    }
    return basis.size();
}

std::size_t mat_rank(const Field& field, const std::vector<std::vector<Element>>& rows) {
    return mat_rank(field, Matrix::from_rows(rows));
}

bool in_span(const Field& field, std::span<const Element> v, const Matrix& rows) {
    if (rows.rows() > 0 && rows.cols() != v.size())
        throw ValidationError("dimension mismatch: vector has " + std::to_string(v.size()) + " entries, rows have " +
                              std::to_string(rows.cols()));
    if (std::all_of(v.begin(), v.end(), [](Element x) { return x == 0; })) return true;
    SpanBasis basis(field, v.size());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        std::vector<Element> row(rows.row(r).begin(), rows.row(r).end());
        basis.insert(row);
    }
    std::vector<Element> w(v.begin(), v.end());
    return basis.insert(w);
}

bool in_span(const Field& field, const std::vector<Element>& v, const std::vector<std::vector<Element>>& rows) {
    return in_span(field, std::span<const Element>(v), Matrix::from_rows(rows));
}

Matrix kronecker(const Field& field, const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = field.mul(a(i, j), b(k, l));
    return out;
}

}  // namespace polarforge
