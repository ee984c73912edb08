#include "radseq/numcore/graph.hpp"

namespace radseq::num {

// ============================================================================
// Parameters
// ============================================================================

Parameter& ParameterSet::add(std::string name, Shape shape) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(shape);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  by_name_.emplace(std::move(name), raw);
  return *raw;
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return *it->second;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return *it->second;
}

bool ParameterSet::contains(std::string_view name) const {
  return by_name_.count(std::string(name)) > 0;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.set_zero();
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw ShapeError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i].shape() == params_[i]->value.shape())) {
      throw ShapeError("snapshot shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

void init_uniform(Tensor& t, Real scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> dist(-scale, scale);
  Real* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = dist(rng);
}

// ============================================================================
// Graph
// ============================================================================

const Tensor& Var::value() const { return graph_->value(id_); }

Tensor Var::grad() const {
  const auto& node = graph_->nodes_[id_];
  if (node.has_grad) return node.grad;
  return Tensor(value().shape());
}

Var Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Node n;
  n.requires_grad = track_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  bound_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (track_) {
    for (const auto& p : parents) {
      if (&p.graph() != this) throw std::logic_error("mixing nodes from different graphs");
      n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Matrix& Graph::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape());
    n.has_grad = true;
  }
  return n.grad.mat();
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::logic_error("loss belongs to another graph");
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + loss.shape().str());
  }
  if (!track_) throw std::logic_error("backward on a graph that does not track gradients");
  grad(loss.id()).setConstant(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) n.param->grad.mat() += nodes_[i].grad.mat();
  }
}

}  // namespace radseq::num
