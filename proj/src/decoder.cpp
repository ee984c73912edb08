#include "radseq/decoder.hpp"

namespace radseq {

using num::Var;

DecoderParams DecoderParams::create(num::ParameterSet& set, const DecoderConfig& cfg,
                                    std::size_t annotation_dim, std::size_t vocab_size) {
  if (cfg.embed_dim == 0 || cfg.embed_dim % 2 != 0) {
    throw std::invalid_argument("decoder embedding dimension must be even and positive");
  }
  if (cfg.coverage_kernel % 2 == 0) throw std::invalid_argument("coverage kernel size must be odd");
  if (vocab_size < 3) throw std::invalid_argument("vocabulary too small");
  const std::size_t m = cfg.embed_dim, n = cfg.state_dim, na = cfg.attention_dim;
  const std::size_t D = annotation_dim, K = vocab_size, F = cfg.coverage_filters;
  DecoderParams p;
  p.config = cfg;
  p.vocab_size = K;
  p.annotation_dim = D;
  p.embedding = &set.add("decoder.E", {K, m});
  p.predict = GruParams::create(set, "decoder.gru_predict", m, n);
  p.update = GruParams::create(set, "decoder.gru_update", D, n);
  p.attention.nu = &set.add("decoder.att.nu", {na, 1});
  p.attention.w_att = &set.add("decoder.att.W_att", {n, na});
  p.attention.u_att = &set.add("decoder.att.U_att", {D, na});
  p.attention.u_f = &set.add("decoder.att.U_f", {F, na});
  p.attention.q = &set.add("decoder.att.Q", {cfg.coverage_kernel, F});
  p.w_init = &set.add("decoder.W_init", {D, n});
  p.b_init = &set.add("decoder.b_init", {n});
  p.w_s = &set.add("decoder.W_s", {n, m});
  p.w_c = &set.add("decoder.W_c", {D, m});
  p.b_out = &set.add("decoder.b_out", {m});
  p.w_o = &set.add("decoder.W_o", {m / 2, K});
  p.b_o = &set.add("decoder.b_o", {K});
  return p;
}

BoundDecoder BoundDecoder::bind(num::Graph& g, const DecoderParams& p) {
  BoundDecoder d;
  d.params = &p;
  d.embedding = g.param(*p.embedding);
  d.predict = BoundGru::bind(g, p.predict);
  d.update = BoundGru::bind(g, p.update);
  d.nu = g.param(*p.attention.nu);
  d.w_att = g.param(*p.attention.w_att);
  d.u_att = g.param(*p.attention.u_att);
  d.u_f = g.param(*p.attention.u_f);
  d.q = g.param(*p.attention.q);
  d.w_s = g.param(*p.w_s);
  d.w_c = g.param(*p.w_c);
  d.b_out = g.param(*p.b_out);
  d.w_o = g.param(*p.w_o);
  d.b_o = g.param(*p.b_o);
  return d;
}

AttentionContext prepare_attention(const BoundDecoder& dec, const Annotations& a) {
  AttentionContext ctx;
  ctx.annotations = a.values;
  ctx.projected = num::matmul(a.values, dec.u_att);
  ctx.mask = a.mask;
  ctx.batch = a.batch;
  ctx.frames = a.frames;
  return ctx;
}

AttentionContext replicate_context(num::Graph& g, const num::Matrix& annotations,
                                   const num::Matrix& projected, std::size_t valid_frames,
                                   std::size_t copies) {
  const auto L = annotations.rows();
  AttentionContext ctx;
  ctx.batch = copies;
  ctx.frames = static_cast<std::size_t>(L);
  num::Matrix a(L * static_cast<Eigen::Index>(copies), annotations.cols());
  num::Matrix p(L * static_cast<Eigen::Index>(copies), projected.cols());
  for (std::size_t c = 0; c < copies; ++c) {
    a.middleRows(static_cast<Eigen::Index>(c) * L, L) = annotations;
    p.middleRows(static_cast<Eigen::Index>(c) * L, L) = projected;
  }
  ctx.annotations = g.constant(std::move(a));
  ctx.projected = g.constant(std::move(p));
  ctx.mask = num::Matrix::Zero(static_cast<Eigen::Index>(copies), L);
  ctx.mask.leftCols(static_cast<Eigen::Index>(valid_frames)).setOnes();
  return ctx;
}

AttentionResult attend(const BoundDecoder& dec, const AttentionContext& ctx, Var s_hat, Var coverage) {
  const std::size_t B = ctx.batch, L = ctx.frames;
  if (coverage.shape().rows() != B || coverage.shape().cols() != L) {
    throw num::ShapeError("attend: coverage " + coverage.shape().str() + " does not match " +
                          std::to_string(B) + "x" + std::to_string(L) + " frames");
  }
  Var features = num::conv1d(coverage, dec.q);
  Var hidden = num::add(num::add(num::repeat_rows(num::matmul(s_hat, dec.w_att), L), ctx.projected),
                        num::matmul(features, dec.u_f));
  Var energy = num::reshape(num::matmul(num::tanh(hidden), dec.nu), {B, L});
  AttentionResult r;
  r.alpha = num::masked_softmax(energy, ctx.mask);
  r.context = num::weighted_sum(r.alpha, ctx.annotations);
  return r;
}

Var init_state(const BoundDecoder& dec, const AttentionContext& ctx) {
  num::Graph& g = ctx.annotations.graph();
  num::Matrix weights = ctx.mask;
  for (Eigen::Index b = 0; b < weights.rows(); ++b) {
    const double valid = weights.row(b).sum();
    if (valid <= 0.0) throw std::invalid_argument("init_state: sequence without valid frames");
    weights.row(b) /= valid;
  }
  Var mean = num::weighted_sum(g.constant(std::move(weights)), ctx.annotations);
  return num::tanh(num::add_row(num::matmul(mean, g.param(*dec.params->w_init)),
                                g.param(*dec.params->b_init)));
}

Var zero_coverage(num::Graph& g, const AttentionContext& ctx) {
  return g.constant(num::Matrix::Zero(static_cast<Eigen::Index>(ctx.batch),
                                      static_cast<Eigen::Index>(ctx.frames)));
}

DecoderStep decode_step(const BoundDecoder& dec, const AttentionContext& ctx,
                        std::span<const int> prev_tokens, Var prev_state, Var coverage) {
  if (prev_tokens.size() != ctx.batch) {
    throw num::ShapeError("decode_step: " + std::to_string(prev_tokens.size()) +
                          " tokens for batch of " + std::to_string(ctx.batch));
  }
  DecoderStep step;
  Var emb = num::embed(dec.embedding, prev_tokens);
  step.s_hat = gru_step(emb, prev_state, dec.predict);
  AttentionResult att = attend(dec, ctx, step.s_hat, coverage);
  step.alpha = att.alpha;
  step.context = att.context;
  step.state = gru_step(att.context, step.s_hat, dec.update);
  Var pre = num::add_row(num::add(num::add(emb, num::matmul(step.state, dec.w_s)),
                                  num::matmul(att.context, dec.w_c)),
                         dec.b_out);
  Var logits = num::add_row(num::matmul(num::maxout(pre, 2), dec.w_o), dec.b_o);
  step.log_probs = num::log_softmax(logits);
  step.coverage = num::add(coverage, att.alpha);
  return step;
}

}  // namespace radseq
