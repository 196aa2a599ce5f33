#pragma once

// Straight-line reference computations in double, written without the tensor
// library so they can be checked against it.

#include <cmath>
#include <cstddef>
#include <vector>

namespace neuroflag::oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matrix(std::size_t rows, std::size_t cols, const std::vector<double>& flat) {
  Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = flat[i * cols + j];
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
  auto y = matmul(x, w);
  for (auto& row : y)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  return y;
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> e(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (e[i] = std::exp(x[i] - mx));
  for (auto& v : e) v /= s;
  return e;
}

inline double gelu(double x) {
  const double c = std::sqrt(2.0 / 3.14159265358979323846);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline Matrix layer_norm(const Matrix& x, const std::vector<double>& gamma, const std::vector<double>& beta,
                         double eps) {
  Matrix y = x;
  for (auto& row : y) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + eps) * gamma[j] + beta[j];
  }
  return y;
}

struct AttentionWeights {
  Matrix wq, wk, wv, wo;
  std::vector<double> bq, bk, bv, bo;
};

/// Multi-head self-attention of one sequence x[N][d], no dropout.
inline Matrix attention(const Matrix& x, const AttentionWeights& p, std::size_t heads) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  const std::size_t dk = d / heads;
  const auto q = affine(x, p.wq, p.bq);
  const auto k = affine(x, p.wk, p.bk);
  const auto v = affine(x, p.wv, p.bv);
  Matrix concat(n, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dk; ++c) s += q[i][h * dk + c] * k[j][h * dk + c];
        scores[j] = s / std::sqrt(static_cast<double>(dk));
      }
      const auto a = softmax(scores);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < dk; ++c) concat[i][h * dk + c] += a[j] * v[j][h * dk + c];
    }
  }
  return affine(concat, p.wo, p.bo);
}

inline double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

/// Trainable scalars of the trajectory transformer, summed layer by layer.
inline std::size_t parameter_count(std::size_t tokens, std::size_t history, std::size_t coords, std::size_t d,
                                   std::size_t layers, std::size_t mlp) {
  const std::size_t embed = history * coords * d + d;
  const std::size_t positions = tokens * d;
  const std::size_t norm = 2 * d;
  const std::size_t attn = 4 * (d * d + d);
  const std::size_t ffn = (d * mlp + mlp) + (mlp * d + d);
  const std::size_t head = d * tokens * coords + tokens * coords;
  return embed + positions + layers * (norm + attn + norm + ffn) + norm + head;
}

}  // namespace neuroflag::oracle
