#include "radseq/encoder.hpp"

#include <algorithm>

namespace radseq {

using num::Var;

GruParams GruParams::create(num::ParameterSet& set, const std::string& prefix, std::size_t input,
                            std::size_t hidden) {
  GruParams p;
  p.w_xz = &set.add(prefix + ".W_xz", {input, hidden});
  p.w_xr = &set.add(prefix + ".W_xr", {input, hidden});
  p.w_xh = &set.add(prefix + ".W_xh", {input, hidden});
  p.u_hz = &set.add(prefix + ".U_hz", {hidden, hidden});
  p.u_hr = &set.add(prefix + ".U_hr", {hidden, hidden});
  p.u_rh = &set.add(prefix + ".U_rh", {hidden, hidden});
  p.b_z = &set.add(prefix + ".b_z", {hidden});
  p.b_r = &set.add(prefix + ".b_r", {hidden});
  p.b_h = &set.add(prefix + ".b_h", {hidden});
  return p;
}

std::size_t GruParams::input_dim() const { return w_xz->value.shape()[0]; }
std::size_t GruParams::hidden_dim() const { return u_hz->value.shape()[0]; }

BoundGru BoundGru::bind(num::Graph& g, const GruParams& p) {
  BoundGru b;
  const Var w[] = {g.param(*p.w_xz), g.param(*p.w_xr), g.param(*p.w_xh)};
  const Var bias[] = {g.param(*p.b_z), g.param(*p.b_r), g.param(*p.b_h)};
  const Var u[] = {g.param(*p.u_hz), g.param(*p.u_hr)};
  b.hidden = p.hidden_dim();
  b.w_all = num::concat(w, 1);
  b.b_all = num::concat(std::vector<Var>{num::reshape(bias[0], {1, b.hidden}),
                                         num::reshape(bias[1], {1, b.hidden}),
                                         num::reshape(bias[2], {1, b.hidden})},
                        1);
  b.u_zr = num::concat(u, 1);
  b.u_h = g.param(*p.u_rh);
  return b;
}

Var BoundGru::project(Var x) const { return num::add_row(num::matmul(x, w_all), b_all); }

Var gru_step_projected(Var x_proj, Var h_prev, const BoundGru& gru) {
  const std::size_t H = gru.hidden;
  Var hu = num::matmul(h_prev, gru.u_zr);
  Var z = num::sigmoid(num::add(num::slice(x_proj, 1, 0, H), num::slice(hu, 1, 0, H)));
  Var r = num::sigmoid(num::add(num::slice(x_proj, 1, H, H), num::slice(hu, 1, H, H)));
  Var cand = num::tanh(num::add(num::slice(x_proj, 1, 2 * H, H), num::matmul(num::mul(r, h_prev), gru.u_h)));
  return num::add(h_prev, num::mul(z, num::sub(cand, h_prev)));
}

Var gru_step(Var x, Var h_prev, const BoundGru& gru) {
  return gru_step_projected(gru.project(x), h_prev, gru);
}

EncoderParams EncoderParams::create(num::ParameterSet& set, const EncoderConfig& cfg) {
  if (cfg.layers == 0 || cfg.units == 0) throw std::invalid_argument("encoder needs layers and units");
  EncoderParams p;
  p.config = cfg;
  std::size_t input = cfg.input_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    p.layers.push_back({GruParams::create(set, prefix + ".fwd", input, cfg.units),
                        GruParams::create(set, prefix + ".bwd", input, cfg.units)});
    input = 2 * cfg.units;
  }
  return p;
}

SequenceBatch SequenceBatch::from_features(std::span<const FeatureSequence* const> seqs) {
  SequenceBatch b;
  b.batch = seqs.size();
  if (b.batch == 0) throw std::invalid_argument("empty batch");
  for (const auto* s : seqs) {
    if (s->size() == 0) throw std::invalid_argument("empty feature sequence in batch");
    b.lengths.push_back(s->size());
    b.steps = std::max(b.steps, s->size());
  }
  b.rows = num::Matrix::Zero(static_cast<Eigen::Index>(b.steps * b.batch), 6);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto& rows = seqs[i]->rows;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      for (std::size_t c = 0; c < 6; ++c) {
        b.rows(static_cast<Eigen::Index>(t * b.batch + i), static_cast<Eigen::Index>(c)) = rows[t][c];
      }
    }
  }
  return b;
}

std::vector<int> reverse_within_lengths(std::size_t batch, std::size_t steps,
                                        std::span<const std::size_t> lengths) {
  std::vector<int> perm(batch * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = lengths[b];
      const std::size_t src = t < len ? len - 1 - t : t;
      perm[t * batch + b] = static_cast<int>(src * batch + b);
    }
  }
  return perm;
}

namespace {

Var run_direction(num::Graph& g, Var seq, std::size_t batch, std::size_t steps, const GruParams& p) {
  BoundGru gru = BoundGru::bind(g, p);
  Var proj = gru.project(seq);
  Var h = g.constant(num::Matrix::Zero(static_cast<Eigen::Index>(batch),
                                       static_cast<Eigen::Index>(gru.hidden)));
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    h = gru_step_projected(num::slice(proj, 0, t * batch, batch), h, gru);
    states.push_back(h);
  }
  return num::concat(states, 0);
}

}  // namespace

Var bidir_layer(num::Graph& g, Var seq, std::size_t batch, std::size_t steps,
                std::span<const std::size_t> lengths, const BidirParams& p) {
  if (steps == 0) throw std::invalid_argument("bidirectional layer on an empty sequence");
  Var fwd = run_direction(g, seq, batch, steps, p.forward);
  const auto perm = reverse_within_lengths(batch, steps, lengths);
  Var bwd = run_direction(g, num::gather_rows(seq, perm), batch, steps, p.backward);
  bwd = num::gather_rows(bwd, perm);
  const Var halves[] = {fwd, bwd};
  return num::concat(halves, 1);
}

Var pool_drop_even(Var seq, std::size_t batch, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("pooling an empty sequence");
  std::vector<int> keep;
  for (std::size_t t = 0; t < steps; t += 2) {
    for (std::size_t b = 0; b < batch; ++b) keep.push_back(static_cast<int>(t * batch + b));
  }
  return num::gather_rows(seq, keep);
}

Annotations encode(num::Graph& g, const EncoderParams& params, const SequenceBatch& input) {
  if (input.batch == 0 || input.steps == 0) throw std::invalid_argument("encode: empty input");
  Var seq = g.constant(input.rows);
  for (const auto& layer : params.layers) {
    seq = bidir_layer(g, seq, input.batch, input.steps, input.lengths, layer);
  }
  const std::size_t frames = pooled_length(input.steps);
  Var pooled = pool_drop_even(seq, input.batch, input.steps);

  // time-major -> batch-major
  std::vector<int> order;
  order.reserve(frames * input.batch);
  for (std::size_t b = 0; b < input.batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) order.push_back(static_cast<int>(t * input.batch + b));
  }
  Annotations a;
  a.values = num::gather_rows(pooled, order);
  a.batch = input.batch;
  a.frames = frames;
  a.mask = num::Matrix::Zero(static_cast<Eigen::Index>(input.batch), static_cast<Eigen::Index>(frames));
  for (std::size_t b = 0; b < input.batch; ++b) {
    const std::size_t len = pooled_length(input.lengths[b]);
    a.lengths.push_back(len);
    a.mask.row(static_cast<Eigen::Index>(b)).head(static_cast<Eigen::Index>(len)).setOnes();
  }
  return a;
}

}  // namespace radseq
