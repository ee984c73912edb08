#pragma once

#include "radseq/numcore/graph.hpp"

#include <span>
#include <vector>

namespace radseq::num {

struct AdadeltaConfig {
  Real rho = 0.95;
  Real epsilon = 1e-8;
};

/// Running averages E[g^2] and E[dx^2], one buffer per parameter.
struct AdadeltaState {
  AdadeltaConfig config;
  std::vector<Matrix> mean_sq_grad;
  std::vector<Matrix> mean_sq_update;

  AdadeltaState() = default;
  AdadeltaState(const ParameterSet& params, AdadeltaConfig cfg);
};

/// One adadelta recurrence over flat buffers:
///   E[g^2] <- rho E[g^2] + (1 - rho) g^2
///   dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x      <- x + dx
void adadelta_update(std::span<Real> x, std::span<const Real> g, std::span<Real> mean_sq_grad,
                     std::span<Real> mean_sq_update, const AdadeltaConfig& cfg);

/// Applies adadelta_update to every parameter using its accumulated grad.
void adadelta_step(ParameterSet& params, AdadeltaState& state);

Real global_grad_norm(const ParameterSet& params);

/// Rescales all gradients by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
Real clip_gradients(ParameterSet& params, Real max_norm);

}  // namespace radseq::num
