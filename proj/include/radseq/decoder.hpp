#pragma once

#include "radseq/encoder.hpp"

#include <span>
#include <vector>

namespace radseq {

struct DecoderConfig {
  std::size_t embed_dim = 256;       // m, must be even for maxout
  std::size_t state_dim = 256;       // n
  std::size_t attention_dim = 256;   // n'
  std::size_t coverage_filters = 256;
  std::size_t coverage_kernel = 5;
};

struct AttentionParams {
  num::Parameter* nu = nullptr;        // n' x 1
  num::Parameter* w_att = nullptr;     // n x n'
  num::Parameter* u_att = nullptr;     // D x n'
  num::Parameter* u_f = nullptr;       // F x n'
  num::Parameter* q = nullptr;         // k x F coverage kernel
};

struct DecoderParams {
  DecoderConfig config;
  std::size_t vocab_size = 0;
  std::size_t annotation_dim = 0;

  num::Parameter* embedding = nullptr;  // K x m, shared by both uses of E y
  GruParams predict;                    // m -> n, gives s_hat
  GruParams update;                     // D -> n, gives s
  AttentionParams attention;
  num::Parameter* w_init = nullptr;     // D x n
  num::Parameter* b_init = nullptr;
  num::Parameter* w_s = nullptr;        // n x m
  num::Parameter* w_c = nullptr;        // D x m
  num::Parameter* b_out = nullptr;      // m
  num::Parameter* w_o = nullptr;        // m/2 x K
  num::Parameter* b_o = nullptr;        // K

  static DecoderParams create(num::ParameterSet& set, const DecoderConfig& cfg,
                              std::size_t annotation_dim, std::size_t vocab_size);
};

/// Per-input attention operands, shared across decode steps.
struct AttentionContext {
  num::Var annotations;  // (B*L) x D
  num::Var projected;    // (B*L) x n', annotations * U_att
  num::Matrix mask;      // B x L
  std::size_t batch = 0;
  std::size_t frames = 0;
};

/// Decoder weights bound to one graph.
struct BoundDecoder {
  const DecoderParams* params = nullptr;
  num::Var embedding;
  BoundGru predict;
  BoundGru update;
  num::Var nu, w_att, u_att, u_f, q;
  num::Var w_s, w_c, b_out, w_o, b_o;

  static BoundDecoder bind(num::Graph& g, const DecoderParams& p);
};

AttentionContext prepare_attention(const BoundDecoder& dec, const Annotations& a);

/// Rebuilds a context from plain matrices, repeating one input `copies` times
/// (used to give every beam hypothesis its own row).
AttentionContext replicate_context(num::Graph& g, const num::Matrix& annotations,
                                   const num::Matrix& projected, std::size_t valid_frames,
                                   std::size_t copies);

struct AttentionResult {
  num::Var alpha;    // B x L, zero on masked frames
  num::Var context;  // B x D
};

/// F = conv(Q, coverage); e_i = nu^T tanh(W_att s_hat + U_att a_i + U_f f_i);
/// alpha = masked softmax(e); c = sum_i alpha_i a_i.
AttentionResult attend(const BoundDecoder& dec, const AttentionContext& ctx, num::Var s_hat,
                       num::Var coverage);

/// s0 = tanh(W_init * mean of valid annotations + b_init).
num::Var init_state(const BoundDecoder& dec, const AttentionContext& ctx);

struct DecoderStep {
  num::Var s_hat;
  num::Var state;
  num::Var alpha;
  num::Var context;
  num::Var log_probs;  // B x K
  num::Var coverage;   // previous coverage + alpha
};

DecoderStep decode_step(const BoundDecoder& dec, const AttentionContext& ctx,
                        std::span<const int> prev_tokens, num::Var prev_state, num::Var coverage);

/// Zero coverage for a fresh decode.
num::Var zero_coverage(num::Graph& g, const AttentionContext& ctx);

}  // namespace radseq
