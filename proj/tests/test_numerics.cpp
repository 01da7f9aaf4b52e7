#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "selconv/sparse.hpp"
#include "selconv/tensor.hpp"

using selconv::SparseMatrix;
using selconv::Tensor;
using selconv::Triplet;

namespace {

// Straight i-j-k triple loop, written independently of the library kernel.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::int64_t i = 0; i < a.dim(0); ++i)
    for (std::int64_t j = 0; j < b.dim(1); ++j) {
      float s = 0.0f;
      for (std::int64_t k = 0; k < a.dim(1); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Tensor densify(const SparseMatrix& s) {
  Tensor d({s.rows(), s.cols()});
  for (const Triplet& t : s.triplets()) d(t.row, t.col) = t.value;
  return d;
}

Tensor random_tensor(std::vector<std::int64_t> shape, std::mt19937& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (float& v : t.storage()) v = dist(rng);
  return t;
}

SparseMatrix random_sparse(std::int64_t rows, std::int64_t cols, double density,
                           std::mt19937& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<Triplet> tr;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      if (coin(rng) < density) tr.push_back({r, c, dist(rng)});
  return SparseMatrix::from_triplets(rows, cols, tr);
}

void expect_close(const Tensor& got, const Tensor& want, float tol) {
  ASSERT_TRUE(got.same_shape(want));
  for (std::int64_t i = 0; i < got.numel(); ++i) {
    float g = got.data()[i], w = want.data()[i];
    EXPECT_NEAR(g, w, tol * (1.0f + std::abs(w))) << "at flat index " << i;
  }
}

TEST(Matmul, IdentityIsNoop) {
  std::mt19937 rng(7);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor eye({4, 4});
  for (int i = 0; i < 4; ++i) eye(i, i) = 1.0f;
  Tensor out = selconv::matmul(a, eye);
  for (std::int64_t i = 0; i < a.numel(); ++i)
    EXPECT_EQ(out.data()[i], a.data()[i]);
}

TEST(Matmul, HandComputed2x2) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {5, 6});
  Tensor c = selconv::matmul(a, b);
  EXPECT_EQ(c(0, 0), 17.0f);
  EXPECT_EQ(c(1, 0), 39.0f);
}

TEST(Matmul, MatchesNaiveTripleLoop) {
  std::mt19937 rng(11);
  Tensor a = random_tensor({7, 5}, rng);
  Tensor b = random_tensor({5, 3}, rng);
  expect_close(selconv::matmul(a, b), naive_matmul(a, b), 1e-6f);
}

TEST(Matmul, ShapeMismatchThrows) {
  Tensor a({2, 3});
  Tensor b({2, 3});
  EXPECT_THROW(selconv::matmul(a, b), std::invalid_argument);
}

TEST(Spmm, EmptyMatrixGivesZeros) {
  SparseMatrix s(3, 4);
  std::mt19937 rng(3);
  Tensor x = random_tensor({4, 2}, rng);
  Tensor out = selconv::spmm(s, x);
  for (std::int64_t i = 0; i < out.numel(); ++i) EXPECT_EQ(out.data()[i], 0.0f);
}

TEST(Spmm, IdentityIsNoop) {
  std::mt19937 rng(5);
  Tensor x = random_tensor({6, 3}, rng);
  Tensor out = selconv::spmm(SparseMatrix::identity(6), x);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    EXPECT_EQ(out.data()[i], x.data()[i]);
}

TEST(Spmm, HandComputedRows) {
  SparseMatrix s = SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0f}, {1, 2, 2.0f}});
  Tensor x({3, 2}, {10, 11, 20, 21, 30, 31});
  Tensor out = selconv::spmm(s, x);
  EXPECT_EQ(out(0, 0), 20.0f);
  EXPECT_EQ(out(0, 1), 21.0f);
  EXPECT_EQ(out(1, 0), 60.0f);
  EXPECT_EQ(out(1, 1), 62.0f);
  EXPECT_EQ(out(2, 0), 0.0f);
  EXPECT_EQ(out(2, 1), 0.0f);
}

TEST(Spmm, MatchesDensifiedMatmul) {
  std::mt19937 rng(13);
  SparseMatrix s = random_sparse(40, 30, 0.2, rng);
  Tensor x = random_tensor({30, 5}, rng);
  expect_close(selconv::spmm(s, x), naive_matmul(densify(s), x), 1e-6f);
}

TEST(SparseCompose, IdentitySquared) {
  SparseMatrix eye = SparseMatrix::identity(5);
  EXPECT_TRUE(sparse_compose(eye, eye) == eye);
}

TEST(SparseCompose, SingleEntryProduct) {
  SparseMatrix a = SparseMatrix::from_triplets(3, 3, {{1, 2, 2.0f}});
  SparseMatrix b = SparseMatrix::from_triplets(3, 3, {{2, 0, 3.0f}});
  SparseMatrix c = sparse_compose(a, b);
  auto tr = c.triplets();
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr[0].row, 1);
  EXPECT_EQ(tr[0].col, 0);
  EXPECT_EQ(tr[0].value, 6.0f);
}

TEST(SparseCompose, MatchesDenseProduct) {
  std::mt19937 rng(17);
  SparseMatrix a = random_sparse(25, 30, 0.15, rng);
  SparseMatrix b = random_sparse(30, 20, 0.15, rng);
  expect_close(densify(sparse_compose(a, b)),
               naive_matmul(densify(a), densify(b)), 1e-6f);
}

TEST(SparseCompose, AssociativeWithinTolerance) {
  std::mt19937 rng(19);
  SparseMatrix a = random_sparse(15, 15, 0.3, rng);
  SparseMatrix b = random_sparse(15, 15, 0.3, rng);
  SparseMatrix c = random_sparse(15, 15, 0.3, rng);
  expect_close(densify(sparse_compose(sparse_compose(a, b), c)),
               densify(sparse_compose(a, sparse_compose(b, c))), 1e-4f);
}

TEST(SparseCompose, SortedColumnsNoDuplicates) {
  std::mt19937 rng(23);
  SparseMatrix c =
      sparse_compose(random_sparse(20, 20, 0.3, rng), random_sparse(20, 20, 0.3, rng));
  for (std::int64_t r = 0; r < c.rows(); ++r)
    for (std::int64_t e = c.row_begin(r) + 1; e < c.row_end(r); ++e)
      EXPECT_LT(c.entry_col(e - 1), c.entry_col(e));
}

TEST(SparseMatrixCtor, DuplicateEntriesRejected) {
  EXPECT_THROW(
      SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0f}, {0, 1, 2.0f}}),
      std::invalid_argument);
}

TEST(SparseMatrixCtor, OutOfRangeRejected) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 2, 1.0f}}),
               std::invalid_argument);
}

TEST(Determinism, RepeatRunsBitIdentical) {
  std::mt19937 rng(29);
  Tensor a = random_tensor({33, 47}, rng);
  Tensor b = random_tensor({47, 21}, rng);
  SparseMatrix s = random_sparse(64, 33, 0.1, rng);
  Tensor m1 = selconv::matmul(a, b);
  Tensor m2 = selconv::matmul(a, b);
  ASSERT_EQ(0, std::memcmp(m1.data(), m2.data(),
                           sizeof(float) * static_cast<std::size_t>(m1.numel())));
  Tensor s1 = selconv::spmm(s, a);
  Tensor s2 = selconv::spmm(s, a);
  ASSERT_EQ(0, std::memcmp(s1.data(), s2.data(),
                           sizeof(float) * static_cast<std::size_t>(s1.numel())));
}

TEST(Determinism, IndependentOfWorkerCount) {
  std::mt19937 rng(31);
  Tensor a = random_tensor({128, 70}, rng);
  Tensor b = random_tensor({70, 40}, rng);
  selconv::set_thread_cap(1);
  Tensor one = selconv::matmul(a, b);
  selconv::set_thread_cap(4);
  Tensor four = selconv::matmul(a, b);
  selconv::set_thread_cap(1);
  ASSERT_EQ(0, std::memcmp(one.data(), four.data(),
                           sizeof(float) * static_cast<std::size_t>(one.numel())));
}

}  // namespace
