#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace radseq::num {

using Real = double;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Up to three dimensions. Storage is always viewed as a row-major matrix of
/// rows() x cols(), where cols() is the last dimension.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 3;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::string str() const;

  static Shape matrix(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.rank_ == b.rank_ && a.dims_ == b.dims_;
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Matrix values);

  static Tensor from_matrix(Matrix values);
  static Tensor scalar(Real v);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return shape_.numel(); }

  Matrix& mat() { return m_; }
  const Matrix& mat() const { return m_; }
  Real* data() { return m_.data(); }
  const Real* data() const { return m_.data(); }

  Real item() const;
  Tensor reshaped(Shape shape) const;
  bool all_finite() const { return m_.allFinite(); }
  void set_zero() { m_.setZero(); }

 private:
  Shape shape_;
  Matrix m_;
};

}  // namespace radseq::num
