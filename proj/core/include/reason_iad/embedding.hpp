#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reason_iad {

// Fixed-dimension real vector shared by retrieval, latent tokens and patch
// features. Non-empty, every entry finite.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

// Dense row-major matrix. No finiteness invariant: it carries noise,
// gradients, attention maps and projection weights.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::span<const EmbeddingVector> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Root-mean-square over every entry of every vector. Zero for an empty span.
double root_mean_square(std::span<const EmbeddingVector> vectors);

// y = W x for W of shape (out, in).
std::vector<double> multiply(const Matrix& w, std::span<const double> x);

}  // namespace reason_iad
