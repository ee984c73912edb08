#include "radseq/numcore/ops.hpp"

#include <cmath>
#include <limits>

namespace radseq::num {

namespace {

using Index = Eigen::Index;

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

void same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("operands live on different graphs");
}

Index rows(Var v) { return v.mat().rows(); }
Index cols(Var v) { return v.mat().cols(); }

Shape mat_shape(Index r, Index c) {
  return Shape::matrix(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

void check_same(const char* op, Var a, Var b) {
  same_graph(a, b);
  if (rows(a) != rows(b) || cols(a) != cols(b)) mismatch(op, a.shape(), b.shape());
}

Var record(Var first, Tensor value, std::initializer_list<Var> parents, Graph::BackwardFn fn) {
  return first.graph().record(std::move(value), parents, std::move(fn));
}

}  // namespace

Var matmul(Var a, Var b) {
  same_graph(a, b);
  if (cols(a) != rows(b)) mismatch("matmul", a.shape(), b.shape());
  Matrix out = a.mat() * b.mat();
  const auto ia = a.id(), ib = b.id();
  return record(a, Tensor::from_matrix(std::move(out)), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    if (g.needs_grad(ia)) g.grad(ia).noalias() += gy * g.value(ib).mat().transpose();
    if (g.needs_grad(ib)) g.grad(ib).noalias() += g.value(ia).mat().transpose() * gy;
  });
}

Var add(Var a, Var b) {
  check_same("add", a, b);
  const auto ia = a.id(), ib = b.id();
  return record(a, Tensor(a.shape(), a.mat() + b.mat()), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy;
    if (g.needs_grad(ib)) g.grad(ib) += gy;
  });
}

Var sub(Var a, Var b) {
  check_same("sub", a, b);
  const auto ia = a.id(), ib = b.id();
  return record(a, Tensor(a.shape(), a.mat() - b.mat()), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy;
    if (g.needs_grad(ib)) g.grad(ib) -= gy;
  });
}

Var mul(Var a, Var b) {
  check_same("mul", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix out = a.mat().cwiseProduct(b.mat());
  return record(a, Tensor(a.shape(), std::move(out)), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy.cwiseProduct(g.value(ib).mat());
    if (g.needs_grad(ib)) g.grad(ib) += gy.cwiseProduct(g.value(ia).mat());
  });
}

Var add_row(Var a, Var bias) {
  same_graph(a, bias);
  if (bias.value().size() != static_cast<std::size_t>(cols(a))) {
    mismatch("add_row", a.shape(), bias.shape());
  }
  const auto ia = a.id(), ib = bias.id();
  Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> b(bias.value().data(), cols(a));
  Matrix out = a.mat().rowwise() + b;
  return record(a, Tensor(a.shape(), std::move(out)), {a, bias}, [ia, ib](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy;
    if (g.needs_grad(ib)) {
      Matrix& gb = g.grad(ib);
      Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> flat(gb.data(), gy.cols());
      flat += gy.colwise().sum();
    }
  });
}

Var scale(Var a, Real s) {
  const auto ia = a.id();
  return record(a, Tensor(a.shape(), a.mat() * s), {a}, [ia, s](Graph& g, std::size_t self) {
    g.grad(ia) += g.out_grad(self) * s;
  });
}

Var mul_const(Var a, const Matrix& c) {
  if (c.rows() != rows(a) || c.cols() != cols(a)) {
    mismatch("mul_const", a.shape(), mat_shape(c.rows(), c.cols()));
  }
  const auto ia = a.id();
  return record(a, Tensor(a.shape(), a.mat().cwiseProduct(c)), {a}, [ia, c](Graph& g, std::size_t self) {
    g.grad(ia) += g.out_grad(self).cwiseProduct(c);
  });
}

Var sigmoid(Var a) {
  const auto ia = a.id();
  Matrix out = a.mat().unaryExpr([](Real x) { return Real(1) / (Real(1) + std::exp(-x)); });
  return record(a, Tensor(a.shape(), std::move(out)), {a}, [ia](Graph& g, std::size_t self) {
    const Matrix& y = g.value(self).mat();
    g.grad(ia).array() += g.out_grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Var a) {
  const auto ia = a.id();
  Matrix out = a.mat().array().tanh().matrix();
  return record(a, Tensor(a.shape(), std::move(out)), {a}, [ia](Graph& g, std::size_t self) {
    const Matrix& y = g.value(self).mat();
    g.grad(ia).array() += g.out_grad(self).array() * (1.0 - y.array().square());
  });
}

namespace {

void softmax_rows_inplace(Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Real mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

}  // namespace

Var softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax axis must be 0 or 1");
  const auto ia = a.id();
  Matrix out;
  if (axis == 1) {
    out = a.mat();
    softmax_rows_inplace(out);
  } else {
    Matrix t = a.mat().transpose();
    softmax_rows_inplace(t);
    out = t.transpose();
  }
  return record(a, Tensor(a.shape(), std::move(out)), {a}, [ia, axis](Graph& g, std::size_t self) {
    const Matrix& y = g.value(self).mat();
    const Matrix& gy = g.out_grad(self);
    Matrix prod = gy.cwiseProduct(y);
    if (axis == 1) {
      Eigen::VectorXd dot = prod.rowwise().sum();
      g.grad(ia) += (gy.colwise() - dot).cwiseProduct(y);
    } else {
      Eigen::RowVectorXd dot = prod.colwise().sum();
      g.grad(ia) += (gy.rowwise() - dot).cwiseProduct(y);
    }
  });
}

Var masked_softmax(Var a, const Matrix& mask) {
  if (mask.rows() != rows(a) || mask.cols() != cols(a)) {
    mismatch("masked_softmax", a.shape(), mat_shape(mask.rows(), mask.cols()));
  }
  const auto ia = a.id();
  Matrix out = Matrix::Zero(rows(a), cols(a));
  const Matrix& x = a.mat();
  for (Index r = 0; r < x.rows(); ++r) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c) != 0.0) mx = std::max(mx, x(r, c));
    }
    if (!std::isfinite(mx)) {
      throw ShapeError("masked_softmax: every position of row " + std::to_string(r) + " is masked");
    }
    Real total = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c) != 0.0) {
        out(r, c) = std::exp(x(r, c) - mx);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  return record(a, Tensor(a.shape(), std::move(out)), {a}, [ia](Graph& g, std::size_t self) {
    const Matrix& y = g.value(self).mat();
    const Matrix& gy = g.out_grad(self);
    Eigen::VectorXd dot = gy.cwiseProduct(y).rowwise().sum();
    g.grad(ia) += (gy.colwise() - dot).cwiseProduct(y);
  });
}

Var log_softmax(Var a) {
  const auto ia = a.id();
  Matrix out = a.mat();
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const Real mx = row.maxCoeff();
    const Real lse = mx + std::log((row.array() - mx).exp().sum());
    row.array() -= lse;
  }
  return record(a, Tensor(a.shape(), std::move(out)), {a}, [ia](Graph& g, std::size_t self) {
    const Matrix& y = g.value(self).mat();
    const Matrix& gy = g.out_grad(self);
    Eigen::VectorXd total = gy.rowwise().sum();
    Matrix p = y.array().exp().matrix();
    g.grad(ia) += gy - (p.array().colwise() * total.array()).matrix();
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ShapeError("concat axis must be 0 or 1");
  Index r = 0, c = 0;
  for (const auto& p : parts) {
    same_graph(parts[0], p);
    if (axis == 0) {
      if (cols(p) != cols(parts[0])) mismatch("concat", parts[0].shape(), p.shape());
      r += rows(p);
    } else {
      if (rows(p) != rows(parts[0])) mismatch("concat", parts[0].shape(), p.shape());
      c += cols(p);
    }
  }
  if (axis == 0) c = cols(parts[0]);
  else r = rows(parts[0]);
  Matrix out(r, c);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  Index off = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      out.middleRows(off, rows(p)) = p.mat();
      off += rows(p);
    } else {
      out.middleCols(off, cols(p)) = p.mat();
      off += cols(p);
    }
    ids.push_back(p.id());
  }
  return parts[0].graph().record(
      Tensor::from_matrix(std::move(out)), parts, [ids = std::move(ids), axis](Graph& g, std::size_t self) {
        const Matrix& gy = g.out_grad(self);
        Index o = 0;
        for (auto id : ids) {
          const Matrix& v = g.value(id).mat();
          if (g.needs_grad(id)) {
            if (axis == 0) g.grad(id) += gy.middleRows(o, v.rows());
            else g.grad(id) += gy.middleCols(o, v.cols());
          }
          o += axis == 0 ? v.rows() : v.cols();
        }
      });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t count) {
  if (axis != 0 && axis != 1) throw ShapeError("slice axis must be 0 or 1");
  const Index extent = axis == 0 ? rows(a) : cols(a);
  if (begin + count > static_cast<std::size_t>(extent)) {
    throw ShapeError("slice [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of range for " + a.shape().str());
  }
  const auto ia = a.id();
  const auto b = static_cast<Index>(begin), n = static_cast<Index>(count);
  Matrix out = axis == 0 ? Matrix(a.mat().middleRows(b, n)) : Matrix(a.mat().middleCols(b, n));
  return record(a, Tensor::from_matrix(std::move(out)), {a}, [ia, axis, b, n](Graph& g, std::size_t self) {
    if (axis == 0) g.grad(ia).middleRows(b, n) += g.out_grad(self);
    else g.grad(ia).middleCols(b, n) += g.out_grad(self);
  });
}

Var reshape(Var a, Shape shape) {
  const auto ia = a.id();
  Shape from = a.shape();
  return record(a, a.value().reshaped(shape), {a}, [ia, from](Graph& g, std::size_t self) {
    Matrix gy = g.out_grad(self);
    gy.resize(static_cast<Index>(from.rows()), static_cast<Index>(from.cols()));
    g.grad(ia) += gy;
  });
}

Var gather_rows(Var a, std::span<const int> indices) {
  const Index n = rows(a);
  Matrix out(static_cast<Index>(indices.size()), cols(a));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                       a.shape().str());
    }
    out.row(static_cast<Index>(i)) = a.mat().row(indices[i]);
  }
  const auto ia = a.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return record(a, Tensor::from_matrix(std::move(out)), {a}, [ia, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    Matrix& ga = g.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += gy.row(static_cast<Index>(i));
  });
}

Var embed(Var table, std::span<const int> indices) {
  for (int i : indices) {
    if (i < 0 || i >= rows(table)) {
      throw std::out_of_range("embedding index " + std::to_string(i) + " outside table " +
                              table.shape().str());
    }
  }
  return gather_rows(table, indices);
}

Var repeat_rows(Var a, std::size_t times) {
  const Index r = rows(a), c = cols(a), t = static_cast<Index>(times);
  Matrix out(r * t, c);
  for (Index b = 0; b < r; ++b) out.middleRows(b * t, t).rowwise() = a.mat().row(b);
  const auto ia = a.id();
  return record(a, Tensor::from_matrix(std::move(out)), {a}, [ia, r, t](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    Matrix& ga = g.grad(ia);
    for (Index b = 0; b < r; ++b) ga.row(b) += gy.middleRows(b * t, t).colwise().sum();
  });
}

Var weighted_sum(Var weights, Var values) {
  same_graph(weights, values);
  const Index B = rows(weights), L = cols(weights), D = cols(values);
  if (rows(values) != B * L) mismatch("weighted_sum", weights.shape(), values.shape());
  Matrix out(B, D);
  const Matrix& w = weights.mat();
  const Matrix& v = values.mat();
  for (Index b = 0; b < B; ++b) out.row(b).noalias() = w.row(b) * v.middleRows(b * L, L);
  const auto iw = weights.id(), iv = values.id();
  return record(weights, Tensor::from_matrix(std::move(out)), {weights, values},
                [iw, iv, B, L](Graph& g, std::size_t self) {
                  const Matrix& gy = g.out_grad(self);
                  const Matrix& w = g.value(iw).mat();
                  const Matrix& v = g.value(iv).mat();
                  if (g.needs_grad(iw)) {
                    Matrix& gw = g.grad(iw);
                    for (Index b = 0; b < B; ++b) {
                      gw.row(b).noalias() += gy.row(b) * v.middleRows(b * L, L).transpose();
                    }
                  }
                  if (g.needs_grad(iv)) {
                    Matrix& gv = g.grad(iv);
                    for (Index b = 0; b < B; ++b) {
                      gv.middleRows(b * L, L).noalias() += w.row(b).transpose() * gy.row(b);
                    }
                  }
                });
}

Var pick(Var a, std::span<const int> indices) {
  if (static_cast<Index>(indices.size()) != rows(a)) {
    throw ShapeError("pick: " + std::to_string(indices.size()) + " indices for " + a.shape().str());
  }
  Matrix out(rows(a), 1);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= cols(a)) {
      throw std::out_of_range("pick: index " + std::to_string(indices[i]) + " outside " +
                              a.shape().str());
    }
    out(static_cast<Index>(i), 0) = a.mat()(static_cast<Index>(i), indices[i]);
  }
  const auto ia = a.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return record(a, Tensor::from_matrix(std::move(out)), {a}, [ia, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    Matrix& ga = g.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga(static_cast<Index>(i), idx[i]) += gy(static_cast<Index>(i), 0);
  });
}

Var sum(Var a) {
  const auto ia = a.id();
  return record(a, Tensor::scalar(a.mat().sum()), {a}, [ia](Graph& g, std::size_t self) {
    g.grad(ia).array() += g.out_grad(self)(0, 0);
  });
}

Var conv1d(Var x, Var kernel) {
  same_graph(x, kernel);
  const Index B = rows(x), L = cols(x), k = rows(kernel), F = cols(kernel);
  if (k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd, got " + kernel.shape().str());
  const Index half = k / 2;
  Matrix patches = Matrix::Zero(B * L, k);
  const Matrix& xv = x.mat();
  for (Index b = 0; b < B; ++b) {
    for (Index i = 0; i < L; ++i) {
      for (Index j = 0; j < k; ++j) {
        const Index src = i + j - half;
        if (src >= 0 && src < L) patches(b * L + i, j) = xv(b, src);
      }
    }
  }
  Matrix out = patches * kernel.mat();
  const auto ix = x.id(), ik = kernel.id();
  return record(x, Tensor::from_matrix(std::move(out)), {x, kernel},
                [ix, ik, B, L, k, half, patches = std::move(patches)](Graph& g, std::size_t self) {
                  const Matrix& gy = g.out_grad(self);
                  if (g.needs_grad(ik)) g.grad(ik).noalias() += patches.transpose() * gy;
                  if (g.needs_grad(ix)) {
                    Matrix gp = gy * g.value(ik).mat().transpose();
                    Matrix& gx = g.grad(ix);
                    for (Index b = 0; b < B; ++b) {
                      for (Index i = 0; i < L; ++i) {
                        for (Index j = 0; j < k; ++j) {
                          const Index src = i + j - half;
                          if (src >= 0 && src < L) gx(b, src) += gp(b * L + i, j);
                        }
                      }
                    }
                  }
                });
}

Var maxout(Var a, std::size_t pool) {
  const Index r = rows(a), c = cols(a), p = static_cast<Index>(pool);
  if (p == 0 || c % p != 0) {
    throw ShapeError("maxout: width " + std::to_string(c) + " not divisible by pool " +
                     std::to_string(pool));
  }
  const Index oc = c / p;
  Matrix out(r, oc);
  std::vector<Index> arg(static_cast<std::size_t>(r * oc));
  const Matrix& x = a.mat();
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < oc; ++j) {
      Index best = j * p;
      for (Index q = 1; q < p; ++q) {
        if (x(i, j * p + q) > x(i, best)) best = j * p + q;
      }
      out(i, j) = x(i, best);
      arg[static_cast<std::size_t>(i * oc + j)] = best;
    }
  }
  const auto ia = a.id();
  return record(a, Tensor::from_matrix(std::move(out)), {a}, [ia, oc, arg = std::move(arg)](Graph& g, std::size_t self) {
    const Matrix& gy = g.out_grad(self);
    Matrix& ga = g.grad(ia);
    for (Index i = 0; i < gy.rows(); ++i) {
      for (Index j = 0; j < oc; ++j) ga(i, arg[static_cast<std::size_t>(i * oc + j)]) += gy(i, j);
    }
  });
}

}  // namespace radseq::num
