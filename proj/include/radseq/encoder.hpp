#pragma once

#include "radseq/numcore/graph.hpp"
#include "radseq/numcore/ops.hpp"
#include "radseq/trajectory.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace radseq {

struct EncoderConfig {
  std::size_t input_dim = 6;
  std::size_t layers = 4;
  std::size_t units = 250;  // per direction

  std::size_t annotation_dim() const { return 2 * units; }
};

/// Gate weights use the row convention x * W. Biases: z, r, candidate.
struct GruParams {
  num::Parameter* w_xz = nullptr;
  num::Parameter* w_xr = nullptr;
  num::Parameter* w_xh = nullptr;
  num::Parameter* u_hz = nullptr;
  num::Parameter* u_hr = nullptr;
  num::Parameter* u_rh = nullptr;
  num::Parameter* b_z = nullptr;
  num::Parameter* b_r = nullptr;
  num::Parameter* b_h = nullptr;

  static GruParams create(num::ParameterSet& set, const std::string& prefix, std::size_t input,
                          std::size_t hidden);
  std::size_t input_dim() const;
  std::size_t hidden_dim() const;
};

/// Graph-bound GRU weights with gate matrices fused for fewer products.
struct BoundGru {
  num::Var w_all;   // input x 3H
  num::Var b_all;   // 1 x 3H
  num::Var u_zr;    // H x 2H
  num::Var u_h;     // H x H
  std::size_t hidden = 0;

  static BoundGru bind(num::Graph& g, const GruParams& p);
  /// x * W + b for every row of `x` at once.
  num::Var project(num::Var x) const;
};

/// One step from a pre-projected input (B x 3H).
num::Var gru_step_projected(num::Var x_proj, num::Var h_prev, const BoundGru& gru);
/// One step: z, r gates, candidate, then h = (1 - z) * h_prev + z * candidate.
num::Var gru_step(num::Var x, num::Var h_prev, const BoundGru& gru);

struct BidirParams {
  GruParams forward;
  GruParams backward;
};

struct EncoderParams {
  EncoderConfig config;
  std::vector<BidirParams> layers;

  static EncoderParams create(num::ParameterSet& set, const EncoderConfig& cfg);
};

/// Padded, time-major batch: row t*B + b holds frame t of sequence b.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> lengths;
  num::Matrix rows;

  static SequenceBatch from_features(std::span<const FeatureSequence* const> seqs);
};

/// Permutation reversing each sequence inside its valid length; padding rows map to themselves.
std::vector<int> reverse_within_lengths(std::size_t batch, std::size_t steps,
                                        std::span<const std::size_t> lengths);

/// Concatenated forward/backward states, time-major, same length as the input.
num::Var bidir_layer(num::Graph& g, num::Var seq, std::size_t batch, std::size_t steps,
                     std::span<const std::size_t> lengths, const BidirParams& p);

/// Keeps 1-based odd frames of a time-major sequence; output has ceil(steps / 2) frames.
num::Var pool_drop_even(num::Var seq, std::size_t batch, std::size_t steps);

struct Annotations {
  num::Var values;  // (B*L) x D, batch-major
  num::Matrix mask; // B x L, 1 on valid frames
  std::vector<std::size_t> lengths;
  std::size_t batch = 0;
  std::size_t frames = 0;
};

inline std::size_t pooled_length(std::size_t n) { return (n + 1) / 2; }

Annotations encode(num::Graph& g, const EncoderParams& params, const SequenceBatch& input);

}  // namespace radseq
