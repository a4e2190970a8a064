#include "reason_iad/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "reason_iad/error.hpp"

namespace reason_iad {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error("embedding must have positive dimension");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error("embedding entries must be finite");
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::span<const EmbeddingVector> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].dim() != m.cols()) throw Error("dimension mismatch across rows");
    auto dst = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = rows[r][c];
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double root_mean_square(std::span<const EmbeddingVector> vectors) {
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (const auto& v : vectors) {
    for (double x : v.values()) sum_sq += x * x;
    count += v.dim();
  }
  return count == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(count));
}

std::vector<double> multiply(const Matrix& w, std::span<const double> x) {
  if (w.cols() != x.size()) throw Error("dimension mismatch in matrix-vector product");
  std::vector<double> y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x);
  return y;
}

}  // namespace reason_iad
