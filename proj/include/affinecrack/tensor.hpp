#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "affinecrack/errors.hpp"

namespace affinecrack {

namespace threading {

inline std::atomic<int>& thread_count() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_num_threads(int n) { thread_count().store(n < 1 ? 1 : n); }
inline int num_threads() { return thread_count().load(); }

// Runs fn over [0, n) in contiguous blocks, one per worker. Each index is
// processed exactly once with thread-independent arithmetic, so results are
// identical to the single-threaded order.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const int workers = std::min<int>(num_threads(), static_cast<int>(n > 0 ? n : 1));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace threading

// Dense row-major matrix of 64-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool operator==(const Matrix&) const = default;
};

inline void require_shape(bool ok, const char* what) {
  if (!ok) {
    throw ShapeError(what);
  }
}

// C = A * B. ikj loop order: the inner loop runs contiguously over B and C
// rows and vectorizes.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(a.cols == b.rows, "matmul: A.cols != B.rows");
  require_shape(c.rows == a.rows && c.cols == b.cols, "matmul: bad output shape");
  c.fill(0.0);
  threading::parallel_for(a.rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* ci = c.row(i);
      const double* ai = a.row(i);
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = ai[k];
        const double* bk = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) {
          ci[j] += aik * bk[j];
        }
      }
    }
  });
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  matmul_into(a, b, c);
  return c;
}

// C = A^T * B, with A (n x r), B (n x c) sharing the leading dimension.
inline void matmul_transA_into(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(a.rows == b.rows, "matmul_transA: A.rows != B.rows");
  require_shape(c.rows == a.cols && c.cols == b.cols, "matmul_transA: bad output shape");
  c.fill(0.0);
  threading::parallel_for(a.cols, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double* ak = a.row(k);
      const double* bk = b.row(k);
      for (std::size_t i = begin; i < end; ++i) {
        const double aki = ak[i];
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.cols; ++j) {
          ci[j] += aki * bk[j];
        }
      }
    }
  });
}

inline Matrix matmul_transA(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols, b.cols);
  matmul_transA_into(a, b, c);
  return c;
}

// C = A * B^T. Transposes B once and reuses the ikj kernel; per-element
// accumulation order (ascending k) matches the direct dot-product form.
inline void matmul_transB_into(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(a.cols == b.cols, "matmul_transB: A.cols != B.cols");
  require_shape(c.rows == a.rows && c.cols == b.rows, "matmul_transB: bad output shape");
  Matrix bt(b.cols, b.rows);
  for (std::size_t i = 0; i < b.rows; ++i) {
    const double* bi = b.row(i);
    for (std::size_t j = 0; j < b.cols; ++j) {
      bt.at(j, i) = bi[j];
    }
  }
  matmul_into(a, bt, c);
}

inline Matrix matmul_transB(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.rows);
  matmul_transB_into(a, b, c);
  return c;
}

// Adds a 1 x n bias row to every row of m.
inline void add_row_vector(Matrix& m, const Matrix& bias) {
  require_shape(bias.rows == 1 && bias.cols == m.cols, "add_row_vector: bias shape");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* mi = m.row(i);
    const double* b = bias.row(0);
    for (std::size_t j = 0; j < m.cols; ++j) {
      mi[j] += b[j];
    }
  }
}

// 1 x n column sums; the bias gradient of a dense layer.
inline Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* mi = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      out.data[j] += mi[j];
    }
  }
  return out;
}

inline Matrix relu(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  }
  return y;
}

// dX = dY where x > 0 else 0; x is the pre-activation.
inline Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  require_shape(x.same_shape(dy), "relu_backward: shape mismatch");
  Matrix dx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
  }
  return dx;
}

// Row-wise softmax with max subtraction.
inline Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* in = logits.row(i);
    double* p = out.row(i);
    double max = in[0];
    for (std::size_t j = 1; j < logits.cols; ++j) {
      max = std::max(max, in[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p[j] = std::exp(in[j] - max);
      sum += p[j];
    }
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p[j] /= sum;
    }
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  Matrix dlogits;
};

// Mean cross-entropy over the batch and its logit gradient
// (softmax - onehot) / batch. Loss per row is the exact log-sum-exp form
// log(sum exp(x - max)) - (x[label] - max).
inline LossAndGrad softmax_cross_entropy(const Matrix& logits,
                                         std::span<const std::uint16_t> labels) {
  require_shape(labels.size() == logits.rows, "softmax_cross_entropy: label count != batch");
  for (std::uint16_t label : labels) {
    if (label >= logits.cols) {
      throw LabelError("label " + std::to_string(label) + " >= " + std::to_string(logits.cols));
    }
  }
  LossAndGrad out;
  out.dlogits = Matrix(logits.rows, logits.cols);
  const double inv_batch = 1.0 / static_cast<double>(logits.rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* in = logits.row(i);
    double* row = out.dlogits.row(i);
    double max = in[0];
    for (std::size_t j = 1; j < logits.cols; ++j) {
      max = std::max(max, in[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      row[j] = std::exp(in[j] - max);
      sum += row[j];
    }
    loss += std::log(sum) - (in[labels[i]] - max);
    const double scale = inv_batch / sum;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      row[j] *= scale;
    }
    row[labels[i]] -= inv_batch;
  }
  out.loss = loss * inv_batch;
  return out;
}

// Central-difference check of a claimed gradient. Returns the max relative
// error with denominator max(|analytic|, |numeric|, 1e-12).
inline double grad_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> theta, std::span<const double> grad,
                         double eps) {
  std::vector<double> point(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f(point);
    point[i] = saved - eps;
    const double down = f(point);
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::fabs(grad[i]), std::fabs(numeric), 1e-12});
    worst = std::max(worst, std::fabs(grad[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace affinecrack
