#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "selconv/tensor.hpp"

namespace selconv {

struct Triplet {
  std::int64_t row = 0;
  std::int64_t col = 0;
  float value = 0.0f;
};

// Sparse float32 matrix in CSR form. Columns are strictly ascending within
// each row, which fixes the summation order of every consumer.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::int64_t rows, std::int64_t cols)
      : rows_(rows), cols_(cols), row_ptr_(static_cast<std::size_t>(rows) + 1, 0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative sparse dims");
  }

  static SparseMatrix from_triplets(std::int64_t rows, std::int64_t cols,
                                    std::vector<Triplet> entries) {
    SparseMatrix s(rows, cols);
    for (const Triplet& t : entries) {
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw std::invalid_argument("triplet out of range");
    }
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) {
                return std::tie(a.row, a.col) < std::tie(b.row, b.col);
              });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].row == entries[i - 1].row &&
          entries[i].col == entries[i - 1].col)
        throw std::invalid_argument("duplicate (row,col) entry");
    }
    s.col_.reserve(entries.size());
    s.val_.reserve(entries.size());
    for (const Triplet& t : entries) {
      s.col_.push_back(t.col);
      s.val_.push_back(t.value);
      ++s.row_ptr_[static_cast<std::size_t>(t.row) + 1];
    }
    for (std::int64_t r = 0; r < rows; ++r)
      s.row_ptr_[static_cast<std::size_t>(r) + 1] +=
          s.row_ptr_[static_cast<std::size_t>(r)];
    return s;
  }

  static SparseMatrix identity(std::int64_t n) {
    SparseMatrix s(n, n);
    s.col_.resize(static_cast<std::size_t>(n));
    s.val_.assign(static_cast<std::size_t>(n), 1.0f);
    for (std::int64_t i = 0; i < n; ++i) {
      s.col_[static_cast<std::size_t>(i)] = i;
      s.row_ptr_[static_cast<std::size_t>(i) + 1] = i + 1;
    }
    return s;
  }

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(col_.size()); }

  std::int64_t row_begin(std::int64_t r) const {
    return row_ptr_[static_cast<std::size_t>(r)];
  }
  std::int64_t row_end(std::int64_t r) const {
    return row_ptr_[static_cast<std::size_t>(r) + 1];
  }
  std::int64_t entry_col(std::int64_t e) const {
    return col_[static_cast<std::size_t>(e)];
  }
  float entry_val(std::int64_t e) const {
    return val_[static_cast<std::size_t>(e)];
  }
  float& entry_val(std::int64_t e) { return val_[static_cast<std::size_t>(e)]; }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(col_.size());
    for (std::int64_t r = 0; r < rows_; ++r)
      for (std::int64_t e = row_begin(r); e < row_end(r); ++e)
        out.push_back({r, entry_col(e), entry_val(e)});
    return out;
  }

  std::vector<float> row_sums() const {
    std::vector<float> out(static_cast<std::size_t>(rows_), 0.0f);
    for (std::int64_t r = 0; r < rows_; ++r)
      for (std::int64_t e = row_begin(r); e < row_end(r); ++e)
        out[static_cast<std::size_t>(r)] += entry_val(e);
    return out;
  }

  bool operator==(const SparseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && row_ptr_ == o.row_ptr_ &&
           col_ == o.col_ && val_ == o.val_;
  }

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<std::int64_t> col_;
  std::vector<float> val_;

  friend SparseMatrix sparse_compose(const SparseMatrix&, const SparseMatrix&);
};

// out[i][:] = sum_j s[i][j] * x[j][:], accumulated in ascending j per row.
inline Tensor spmm(const SparseMatrix& s, const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != s.cols())
    throw std::invalid_argument("spmm shape mismatch");
  const std::int64_t f = x.dim(1);
  Tensor out({s.rows(), f});
  const float* xp = x.data();
  float* op = out.data();
  parallel_rows(s.rows(), [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      float* orow = op + r * f;
      for (std::int64_t e = s.row_begin(r); e < s.row_end(r); ++e) {
        const float v = s.entry_val(e);
        const float* xrow = xp + s.entry_col(e) * f;
        for (std::int64_t c = 0; c < f; ++c) orow[c] += v * xrow[c];
      }
    }
  });
  return out;
}

// Entrywise a + b; shared (row, col) slots are summed.
inline SparseMatrix sparse_add(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("sparse_add shape mismatch");
  std::vector<Triplet> merged;
  merged.reserve(static_cast<std::size_t>(a.nnz() + b.nnz()));
  for (std::int64_t r = 0; r < a.rows(); ++r) {
    std::int64_t ea = a.row_begin(r), eb = b.row_begin(r);
    while (ea < a.row_end(r) || eb < b.row_end(r)) {
      const std::int64_t ca =
          ea < a.row_end(r) ? a.entry_col(ea) : std::numeric_limits<std::int64_t>::max();
      const std::int64_t cb =
          eb < b.row_end(r) ? b.entry_col(eb) : std::numeric_limits<std::int64_t>::max();
      if (ca < cb) {
        merged.push_back({r, ca, a.entry_val(ea++)});
      } else if (cb < ca) {
        merged.push_back({r, cb, b.entry_val(eb++)});
      } else {
        merged.push_back({r, ca, a.entry_val(ea++) + b.entry_val(eb++)});
      }
    }
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(merged));
}

// (a*b)[i][j] = sum_k a[i][k] * b[k][j]; duplicates merged by summation in
// ascending k. Output columns are sorted per row.
inline SparseMatrix sparse_compose(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("sparse_compose shape mismatch");
  SparseMatrix out(a.rows(), b.cols());
  std::vector<float> acc(static_cast<std::size_t>(b.cols()), 0.0f);
  std::vector<char> seen(static_cast<std::size_t>(b.cols()), 0);
  std::vector<std::int64_t> touched;
  for (std::int64_t r = 0; r < a.rows(); ++r) {
    touched.clear();
    for (std::int64_t ea = a.row_begin(r); ea < a.row_end(r); ++ea) {
      const std::int64_t k = a.entry_col(ea);
      const float av = a.entry_val(ea);
      for (std::int64_t eb = b.row_begin(k); eb < b.row_end(k); ++eb) {
        const std::int64_t j = b.entry_col(eb);
        if (!seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          touched.push_back(j);
        }
        acc[static_cast<std::size_t>(j)] += av * b.entry_val(eb);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::int64_t j : touched) {
      out.col_.push_back(j);
      out.val_.push_back(acc[static_cast<std::size_t>(j)]);
      acc[static_cast<std::size_t>(j)] = 0.0f;
      seen[static_cast<std::size_t>(j)] = 0;
    }
    out.row_ptr_[static_cast<std::size_t>(r) + 1] =
        static_cast<std::int64_t>(out.col_.size());
  }
  return out;
}

}  // namespace selconv
