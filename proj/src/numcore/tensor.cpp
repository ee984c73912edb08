#include "radseq/numcore/tensor.hpp"

namespace radseq::num {

Shape::Shape(std::initializer_list<std::size_t> dims) {
  if (dims.size() == 0 || dims.size() > kMaxRank) {
    throw ShapeError("tensor rank must be between 1 and 3");
  }
  for (auto d : dims) dims_[rank_++] = d;
}

std::size_t Shape::numel() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

std::size_t Shape::rows() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < rank_; ++i) n *= dims_[i];
  return n;
}

std::size_t Shape::cols() const { return rank_ == 0 ? 0 : dims_[rank_ - 1]; }

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(shape), m_(Matrix::Zero(shape.rows(), shape.cols())) {}

Tensor::Tensor(Shape shape, Matrix values) : shape_(shape), m_(std::move(values)) {
  if (static_cast<std::size_t>(m_.rows()) != shape_.rows() ||
      static_cast<std::size_t>(m_.cols()) != shape_.cols()) {
    throw ShapeError("tensor values do not match shape " + shape_.str());
  }
}

Tensor Tensor::from_matrix(Matrix values) {
  Shape s = Shape::matrix(static_cast<std::size_t>(values.rows()),
                          static_cast<std::size_t>(values.cols()));
  return Tensor(s, std::move(values));
}

Tensor Tensor::scalar(Real v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return from_matrix(std::move(m));
}

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return m_(0, 0);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  Matrix m = m_;
  m.resize(static_cast<Eigen::Index>(shape.rows()), static_cast<Eigen::Index>(shape.cols()));
  return Tensor(shape, std::move(m));
}

}  // namespace radseq::num
