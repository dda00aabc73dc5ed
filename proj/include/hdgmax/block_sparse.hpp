#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <vector>

#include "hdgmax/types.hpp"

namespace hdgmax {

/// Block compressed-row matrix with dense row-major blocks of variable size.
/// Block row/column b covers scalar indices [offsets[b], offsets[b+1]).
class BlockSparseMatrix {
public:
  BlockSparseMatrix() = default;

  /// `pattern[b]` lists the block columns coupled with block row b.
  BlockSparseMatrix(std::vector<std::size_t> offsets, const std::vector<std::vector<std::size_t>>& pattern)
    : offsets_(std::move(offsets)) {
    const std::size_t nb = offsets_.size() - 1;
    row_ptr_.assign(nb + 1, 0);
    std::size_t nnz = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      auto cols = pattern[b];
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      for (std::size_t c : cols) {
        col_block_.push_back(c);
        value_offset_.push_back(nnz);
        nnz += block_size(b) * block_size(c);
      }
      row_ptr_[b + 1] = col_block_.size();
    }
    values_.assign(nnz, complex(0.0));
  }

  std::size_t rows() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t num_block_rows() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t block_size(std::size_t b) const { return offsets_[b + 1] - offsets_[b]; }
  std::size_t num_blocks() const { return col_block_.size(); }
  std::size_t nonzeros() const { return values_.size(); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  /// Block columns stored in block row b.
  std::vector<std::size_t> block_columns(std::size_t b) const {
    return {col_block_.begin() + static_cast<long>(row_ptr_[b]), col_block_.begin() + static_cast<long>(row_ptr_[b + 1])};
  }

  /// Adds the leading block_size(r) x block_size(c) part of `sub` to block (r, c).
  template <class Derived>
  void add_block(std::size_t r, std::size_t c, const Eigen::MatrixBase<Derived>& sub) {
    complex* dst = block_data(r, c);
    const std::size_t nr = block_size(r), nc = block_size(c);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) dst[i * nc + j] += sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  complex* block_data(std::size_t r, std::size_t c) {
    return values_.data() + value_offset_[locate(r, c)];
  }
  const complex* block_data(std::size_t r, std::size_t c) const {
    return values_.data() + value_offset_[locate(r, c)];
  }

  bool has_block(std::size_t r, std::size_t c) const {
    const auto first = col_block_.begin() + static_cast<long>(row_ptr_[r]);
    const auto last = col_block_.begin() + static_cast<long>(row_ptr_[r + 1]);
    return std::binary_search(first, last, c);
  }

  CVector multiply(const CVector& x) const {
    CVector y = CVector::Zero(static_cast<Eigen::Index>(rows()));
    for (std::size_t r = 0; r < num_block_rows(); ++r) {
      const std::size_t nr = block_size(r);
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const std::size_t c = col_block_[k], nc = block_size(c);
        const complex* v = values_.data() + value_offset_[k];
        for (std::size_t i = 0; i < nr; ++i) {
          complex acc = 0.0;
          for (std::size_t j = 0; j < nc; ++j) acc += v[i * nc + j] * x(static_cast<Eigen::Index>(offsets_[c] + j));
          y(static_cast<Eigen::Index>(offsets_[r] + i)) += acc;
        }
      }
    }
    return y;
  }

  /// Scalar CSR copy, explicit zeros inside blocks kept so the pattern is the block pattern.
  Eigen::SparseMatrix<complex, Eigen::RowMajor, long> to_csr() const {
    using Sp = Eigen::SparseMatrix<complex, Eigen::RowMajor, long>;
    const auto n = static_cast<long>(rows());
    Sp m(n, n);
    Eigen::Matrix<long, Eigen::Dynamic, 1> per_row(n);
    for (std::size_t r = 0; r < num_block_rows(); ++r) {
      std::size_t width = 0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) width += block_size(col_block_[k]);
      for (std::size_t i = 0; i < block_size(r); ++i) per_row(static_cast<long>(offsets_[r] + i)) = static_cast<long>(width);
    }
    m.reserve(per_row);
    for (std::size_t r = 0; r < num_block_rows(); ++r) {
      const std::size_t nr = block_size(r);
      for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
          const std::size_t c = col_block_[k], nc = block_size(c);
          const complex* v = values_.data() + value_offset_[k];
          for (std::size_t j = 0; j < nc; ++j)
            m.insert(static_cast<long>(offsets_[r] + i), static_cast<long>(offsets_[c] + j)) = v[i * nc + j];
        }
    }
    m.makeCompressed();
    return m;
  }

  CMatrix to_dense() const {
    CMatrix d = CMatrix::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(rows()));
    for (std::size_t r = 0; r < num_block_rows(); ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const std::size_t c = col_block_[k], nr = block_size(r), nc = block_size(c);
        const complex* v = values_.data() + value_offset_[k];
        for (std::size_t i = 0; i < nr; ++i)
          for (std::size_t j = 0; j < nc; ++j)
            d(static_cast<Eigen::Index>(offsets_[r] + i), static_cast<Eigen::Index>(offsets_[c] + j)) = v[i * nc + j];
      }
    return d;
  }

  const std::vector<complex>& values() const { return values_; }

private:
  std::size_t locate(std::size_t r, std::size_t c) const {
    const auto first = col_block_.begin() + static_cast<long>(row_ptr_[r]);
    const auto last = col_block_.begin() + static_cast<long>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) throw invalid_argument("block outside the sparsity pattern");
    return static_cast<std::size_t>(it - col_block_.begin());
  }

  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_block_;
  std::vector<std::size_t> value_offset_;
  std::vector<complex> values_;
};

} // namespace hdgmax
