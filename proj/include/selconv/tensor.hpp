#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

namespace selconv {

namespace detail {
inline std::atomic<int>& thread_cap_cell() {
  static std::atomic<int> cell{0};
  return cell;
}
}  // namespace detail

// Worker cap for row-partitioned kernels. SELCONV_THREADS overrides the
// hardware default; results are bit-identical for any cap because each row
// is summed in a fixed order by exactly one worker.
inline int thread_cap() {
  auto& cell = detail::thread_cap_cell();
  int v = cell.load(std::memory_order_relaxed);
  if (v > 0) return v;
  int n = 0;
  if (const char* env = std::getenv("SELCONV_THREADS")) n = std::atoi(env);
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  cell.store(n, std::memory_order_relaxed);
  return n;
}

inline void set_thread_cap(int n) {
  if (n <= 0) throw std::invalid_argument("thread cap must be positive");
  detail::thread_cap_cell().store(n, std::memory_order_relaxed);
}

// Runs fn(begin, end) over a contiguous partition of [0, n). Row order inside
// each block is preserved, so results do not depend on the worker count.
template <typename Fn>
void parallel_rows(std::int64_t n, Fn&& fn) {
  int workers = thread_cap();
  if (workers <= 1 || n < 64) {
    fn(static_cast<std::int64_t>(0), n);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

// Dense row-major float32 tensor.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(checked_numel(shape_)), 0.0f);
  }

  Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != static_cast<std::int64_t>(data_.size()))
      throw std::invalid_argument("tensor data does not match shape");
  }

  static Tensor zeros(std::vector<std::int64_t> shape) {
    return Tensor(std::move(shape));
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }

  std::int64_t dim(int i) const {
    if (i < 0 || i >= rank()) throw std::invalid_argument("bad dim index");
    return shape_[static_cast<std::size_t>(i)];
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  float& operator()(std::int64_t i) { return data_[idx1(i)]; }
  float operator()(std::int64_t i) const { return data_[idx1(i)]; }
  float& operator()(std::int64_t i, std::int64_t j) { return data_[idx2(i, j)]; }
  float operator()(std::int64_t i, std::int64_t j) const {
    return data_[idx2(i, j)];
  }
  float& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data_[idx3(i, j, k)];
  }
  float operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data_[idx3(i, j, k)];
  }
  float& operator()(std::int64_t i, std::int64_t j, std::int64_t k,
                    std::int64_t l) {
    return data_[idx4(i, j, k, l)];
  }
  float operator()(std::int64_t i, std::int64_t j, std::int64_t k,
                   std::int64_t l) const {
    return data_[idx4(i, j, k, l)];
  }

  Tensor reshaped(std::vector<std::int64_t> shape) const {
    return Tensor(std::move(shape), data_);
  }

  void fill(float v) { data_.assign(data_.size(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  static std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("negative tensor dim");
      n *= d;
    }
    return n;
  }

  std::size_t idx1(std::int64_t i) const {
    bounds(rank() == 1 && i >= 0 && i < shape_[0]);
    return static_cast<std::size_t>(i);
  }
  std::size_t idx2(std::int64_t i, std::int64_t j) const {
    bounds(rank() == 2 && i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1]);
    return static_cast<std::size_t>(i * shape_[1] + j);
  }
  std::size_t idx3(std::int64_t i, std::int64_t j, std::int64_t k) const {
    bounds(rank() == 3 && i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1] &&
           k >= 0 && k < shape_[2]);
    return static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k);
  }
  std::size_t idx4(std::int64_t i, std::int64_t j, std::int64_t k,
                   std::int64_t l) const {
    bounds(rank() == 4 && i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1] &&
           k >= 0 && k < shape_[2] && l >= 0 && l < shape_[3]);
    return static_cast<std::size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l);
  }

  static void bounds(bool ok) {
    if (!ok) throw std::invalid_argument("tensor index out of range");
  }

  std::vector<std::int64_t> shape_;
  std::vector<float> data_;
};

// c[i][j] = sum_k a[i][k] * b[k][j], accumulated in ascending k.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul shape mismatch");
  const std::int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor c({n, m});
  const float* ap = a.data();
  const float* bp = b.data();
  float* cp = c.data();
  parallel_rows(n, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i = r0; i < r1; ++i) {
      float* crow = cp + i * m;
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const float av = ap[i * k + kk];
        if (av == 0.0f) continue;
        const float* brow = bp + kk * m;
        for (std::int64_t j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
    }
  });
  return c;
}

}  // namespace selconv
