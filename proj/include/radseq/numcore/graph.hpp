#pragma once

#include "radseq/numcore/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace radseq::num {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Named parameters in registration order. Addresses are stable.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Shape shape);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

/// uniform(-scale, scale) fill.
void init_uniform(Tensor& t, Real scale, std::mt19937_64& rng);

class Graph;

/// Handle to a node recorded on a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Matrix& mat() const { return value().mat(); }
  const Shape& shape() const { return value().shape(); }
  /// Gradient after Graph::backward; zero if the node was never reached.
  Tensor grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only tape. Nodes are recorded in topological order, so backward is a
/// single reverse sweep.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  /// With `track_gradients` false nothing is recorded for backward.
  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var constant(Matrix m) { return constant(Tensor::from_matrix(std::move(m))); }
  /// Leaf bound to a parameter. Binding the same parameter twice yields the same node.
  Var param(Parameter& p);

  /// Reverse sweep from a single-element node; parameter leaves add their
  /// gradient into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool tracking() const { return track_; }

  // Op-author interface.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);
  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of `id`, zero-initialized on first access.
  Matrix& grad(std::size_t id);
  const Matrix& out_grad(std::size_t id) const { return nodes_[id].grad.mat(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;  // unused for parameter leaves, which read Parameter::value
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool track_;
};

}  // namespace radseq::num
