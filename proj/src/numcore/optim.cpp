#include "radseq/numcore/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace radseq::num {

AdadeltaState::AdadeltaState(const ParameterSet& params, AdadeltaConfig cfg) : config(cfg) {
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) throw std::invalid_argument("adadelta rho must be in (0, 1)");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("adadelta epsilon must be positive");
  for (const auto& p : params) {
    mean_sq_grad.push_back(Matrix::Zero(p->value.mat().rows(), p->value.mat().cols()));
    mean_sq_update.push_back(Matrix::Zero(p->value.mat().rows(), p->value.mat().cols()));
  }
}

void adadelta_update(std::span<Real> x, std::span<const Real> g, std::span<Real> mean_sq_grad,
                     std::span<Real> mean_sq_update, const AdadeltaConfig& cfg) {
  if (g.size() != x.size() || mean_sq_grad.size() != x.size() || mean_sq_update.size() != x.size()) {
    throw ShapeError("adadelta buffers differ in size");
  }
  const Real rho = cfg.rho, eps = cfg.epsilon;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_sq_grad[i] = rho * mean_sq_grad[i] + (1.0 - rho) * g[i] * g[i];
    const Real dx = -std::sqrt(mean_sq_update[i] + eps) / std::sqrt(mean_sq_grad[i] + eps) * g[i];
    mean_sq_update[i] = rho * mean_sq_update[i] + (1.0 - rho) * dx * dx;
    x[i] += dx;
  }
}

void adadelta_step(ParameterSet& params, AdadeltaState& state) {
  if (state.mean_sq_grad.size() != params.size()) throw ShapeError("adadelta state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const std::size_t n = p.value.size();
    if (static_cast<std::size_t>(state.mean_sq_grad[i].size()) != n) {
      throw ShapeError("adadelta state shape mismatch for " + p.name);
    }
    adadelta_update({p.value.data(), n}, {p.grad.data(), n}, {state.mean_sq_grad[i].data(), n},
                    {state.mean_sq_update[i].data(), n}, state.config);
  }
}

Real global_grad_norm(const ParameterSet& params) {
  Real sq = 0.0;
  for (const auto& p : params) sq += p->grad.mat().squaredNorm();
  return std::sqrt(sq);
}

Real clip_gradients(ParameterSet& params, Real max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip norm must be positive");
  const Real norm = global_grad_norm(params);
  if (norm > max_norm) {
    const Real factor = max_norm / norm;
    for (auto& p : params) p->grad.mat() *= factor;
  }
  return norm;
}

}  // namespace radseq::num
