#pragma once

#include "radseq/numcore/graph.hpp"
#include "radseq/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

namespace radseq::testing {

using num::Matrix;
using num::Var;
using num::Real;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss` w.r.t. every entry of every parameter.
/// Returns the worst relative error against the accumulated Parameter::grad.
inline double worst_gradient_error(num::ParameterSet& params, const std::function<double()>& loss,
                                   double h = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (auto& p : params) {
    Real* x = p->value.data();
    const Real* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = loss();
      x[i] = keep - h;
      const double down = loss();
      x[i] = keep;
      worst = std::max(worst, relative_error(g[i], (up - down) / (2.0 * h), floor));
    }
  }
  return worst;
}

/// Gradient check for a single op: the inputs become parameters and the op
/// output is contracted with a fixed random weight so every output entry
/// carries a distinct upstream gradient.
inline double op_gradient_error(const std::vector<Matrix>& inputs,
                                const std::function<Var(num::Graph&, const std::vector<Var>&)>& op,
                                std::uint64_t seed = 7) {
  num::ParameterSet params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& p = params.add("x" + std::to_string(i),
                         {static_cast<std::size_t>(inputs[i].rows()), static_cast<std::size_t>(inputs[i].cols())});
    p.value.mat() = inputs[i];
  }
  std::mt19937_64 rng(seed);
  Matrix weight;
  auto forward = [&](num::Graph& g) {
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(g.param(*p));
    Var out = op(g, vars);
    if (weight.size() == 0) weight = random_matrix(out.mat().rows(), out.mat().cols(), rng);
    return num::sum(num::mul_const(out, weight));
  };
  {
    num::Graph g;
    Var loss = forward(g);
    params.zero_grad();
    g.backward(loss);
  }
  return worst_gradient_error(params, [&] {
    num::Graph g(false);
    return forward(g).value().item();
  });
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("radseq-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace radseq::testing
