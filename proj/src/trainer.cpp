#include "radseq/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace radseq {

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples,
                                            const Vocabulary& vocab, double spacing) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PreparedSample p;
    p.source = &s;
    try {
      p.features = preprocess(s.trajectory, spacing);
      p.targets = encode(s.caption, vocab);
    } catch (const std::exception& e) {
      throw TrainError("sample " + s.id + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

Batch make_batch(std::span<const PreparedSample* const> samples) {
  if (samples.empty()) throw TrainError("empty batch");
  std::vector<const FeatureSequence*> feats;
  std::size_t T = 0;
  for (const auto* s : samples) {
    feats.push_back(&s->features);
    T = std::max(T, s->targets.size());
  }
  Batch b;
  b.inputs = SequenceBatch::from_features(feats);
  const std::size_t B = samples.size();
  b.target_steps = T;
  b.targets.assign(T * B, Vocabulary::kEosIndex);
  b.mask = num::Matrix::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(B));
  for (std::size_t i = 0; i < B; ++i) {
    const auto& tg = samples[i]->targets;
    for (std::size_t t = 0; t < tg.size(); ++t) {
      b.targets[t * B + i] = tg[t];
      b.mask(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  return b;
}

num::Var ce_loss(num::Var log_probs, std::span<const int> targets, const num::Matrix& mask) {
  const auto K = static_cast<int>(log_probs.shape().cols());
  if (static_cast<std::size_t>(mask.size()) != targets.size() ||
      log_probs.shape().rows() != targets.size()) {
    throw num::ShapeError("ce_loss: " + std::to_string(targets.size()) + " targets for " +
                          log_probs.shape().str() + " distributions");
  }
  for (int t : targets) {
    if (t < 0 || t >= K) throw std::out_of_range("target index " + std::to_string(t) + " outside vocabulary");
  }
  num::Matrix flat = mask;
  flat.resize(mask.size(), 1);
  num::Var picked = num::mul_const(num::pick(log_probs, targets), flat);
  return num::scale(num::sum(picked), -1.0 / static_cast<double>(mask.cols()));
}

num::Var sequence_loss(num::Graph& g, const Model& model, const Batch& batch,
                       const DecoderInputHook& hook) {
  const std::size_t B = batch.batch();
  Annotations a = encode(g, model.encoder(), batch.inputs);
  BoundDecoder dec = BoundDecoder::bind(g, model.decoder());
  AttentionContext ctx = prepare_attention(dec, a);
  num::Var state = init_state(dec, ctx);
  num::Var coverage = zero_coverage(g, ctx);
  std::vector<num::Var> steps;
  steps.reserve(batch.target_steps);
  std::vector<int> prev(B, Vocabulary::kSosIndex);
  for (std::size_t t = 0; t < batch.target_steps; ++t) {
    if (t > 0) {
      std::copy_n(batch.targets.begin() + static_cast<std::ptrdiff_t>((t - 1) * B), B, prev.begin());
    }
    if (hook) hook(t, prev);
    DecoderStep step = decode_step(dec, ctx, prev, state, coverage);
    steps.push_back(step.log_probs);
    state = step.state;
    coverage = step.coverage;
  }
  return ce_loss(num::concat(steps, 0), batch.targets, batch.mask);
}

std::size_t edit_distance(const CaptionTokens& a, const CaptionTokens& b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

EvalMetrics evaluate(const Model& model, const std::vector<Sample>& samples, const BeamConfig& beam,
                     std::vector<RecognitionResult>* results) {
  EvalMetrics m;
  m.samples = samples.size();
  if (samples.empty()) return m;
  std::size_t edits = 0, ref_tokens = 0;
  for (const auto& s : samples) {
    for (const auto& tok : s.caption) {
      if (!model.vocab().contains(tok)) {
        throw VocabularyError("sample " + s.id + " uses token '" + tok + "' unknown to the model");
      }
    }
    RecognitionResult r = recognize(model, s.trajectory, beam);
    if (r.caption == s.caption) ++m.correct;
    edits += edit_distance(r.caption, s.caption);
    ref_tokens += s.caption.size();
    if (results) results->push_back(std::move(r));
  }
  m.exact_match = static_cast<double>(m.correct) / static_cast<double>(m.samples);
  m.token_err = ref_tokens ? static_cast<double>(edits) / static_cast<double>(ref_tokens) : 0.0;
  return m;
}

nlohmann::json MetricsRecord::to_json() const {
  return {{"epoch", epoch}, {"update", update}, {"loss", loss}, {"token_err", token_err},
          {"exact_match", exact_match}};
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},   {"max_epochs", max_epochs},
          {"max_updates", max_updates}, {"clip_norm", clip_norm},
          {"rho", adadelta.rho},        {"epsilon", adadelta.epsilon},
          {"seed", seed},               {"eval_every", eval_every},
          {"patience", patience},       {"eval_beam", eval_beam.beam},
          {"max_len", eval_beam.max_len}, {"max_points", max_points},
          {"bucket_span", bucket_span}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("trainer settings must be an object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "max_epochs") c.max_epochs = v.get<std::size_t>();
    else if (key == "max_updates") c.max_updates = v.get<std::size_t>();
    else if (key == "clip_norm") c.clip_norm = v.get<double>();
    else if (key == "rho") c.adadelta.rho = v.get<double>();
    else if (key == "epsilon") c.adadelta.epsilon = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "eval_every") c.eval_every = v.get<std::size_t>();
    else if (key == "patience") c.patience = v.get<std::size_t>();
    else if (key == "eval_beam") c.eval_beam.beam = v.get<std::size_t>();
    else if (key == "max_len") c.eval_beam.max_len = v.get<std::size_t>();
    else if (key == "max_points") c.max_points = v.get<std::size_t>();
    else if (key == "bucket_span") c.bucket_span = v.get<std::size_t>();
    else throw std::invalid_argument("unknown trainer setting '" + key + "'");
  }
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(c.clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  return c;
}

namespace {

std::vector<std::vector<const PreparedSample*>> epoch_batches(const std::vector<const PreparedSample*>& pool,
                                                              const TrainConfig& cfg,
                                                              std::mt19937_64& rng) {
  std::vector<const PreparedSample*> order = pool;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t span = cfg.batch_size * std::max<std::size_t>(cfg.bucket_span, 1);
  std::vector<std::vector<const PreparedSample*>> batches;
  for (std::size_t start = 0; start < order.size(); start += span) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(start + span, order.size()));
    std::stable_sort(first, last, [](const PreparedSample* a, const PreparedSample* b) {
      return a->features.size() < b->features.size();
    });
    for (auto it = first; it < last; it += std::min<std::ptrdiff_t>(cfg.batch_size, last - it)) {
      batches.emplace_back(it, it + std::min<std::ptrdiff_t>(cfg.batch_size, last - it));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

}  // namespace

TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& heldout, const TrainConfig& cfg,
                  const EvalCallback& on_eval, const DecoderInputHook& hook) {
  if (train_set.empty()) throw TrainError("empty training set");
  if (cfg.batch_size == 0) throw TrainError("batch size must be positive");
  const auto& vocab = model.vocab();
  try {
    check_captions(train_set, vocab);
    check_captions(heldout, vocab);
  } catch (const DataError& e) {
    throw TrainError(e.what());
  }
  const auto prepared = prepare_samples(train_set, vocab, model.config().resample_spacing);
  std::vector<const PreparedSample*> pool;
  for (const auto& p : prepared) {
    if (cfg.max_points == 0 || p.features.size() <= cfg.max_points) pool.push_back(&p);
  }
  if (pool.empty()) throw TrainError("every training sample exceeds max_points");
  const std::vector<Sample>& eval_set = heldout.empty() ? train_set : heldout;

  std::ofstream log;
  if (cfg.metrics_log) {
    log.open(*cfg.metrics_log, std::ios::trunc);
    if (!log) throw TrainError("cannot write metrics log " + cfg.metrics_log->string());
  }

  num::ParameterSet& params = model.params();
  num::AdadeltaState opt(params, cfg.adadelta);
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  std::vector<num::Tensor> best;
  double best_terr = 0.0;
  std::size_t stale = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  bool stop = false;

  auto run_eval = [&](std::size_t epoch) {
    const EvalMetrics m = evaluate(model, eval_set, cfg.eval_beam);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.update = result.updates;
    rec.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.token_err = m.token_err;
    rec.exact_match = m.exact_match;
    loss_sum = 0.0;
    loss_count = 0;
    result.records.push_back(rec);
    if (log) log << rec.to_json().dump() << '\n' << std::flush;
    const bool improved = rec.exact_match > result.best_exact_match ||
                          (rec.exact_match == result.best_exact_match && rec.token_err < best_terr);
    if (improved) {
      result.best_exact_match = rec.exact_match;
      result.best_update = rec.update;
      best_terr = rec.token_err;
      best = params.snapshot();
      stale = 0;
      if (cfg.checkpoint) {
        model.save(*cfg.checkpoint, {{"update", rec.update}, {"exact_match", rec.exact_match}});
      }
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      result.early_stopped = true;
      stop = true;
    }
    if (on_eval && on_eval(rec)) stop = true;
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    for (const auto& members : epoch_batches(pool, cfg, rng)) {
      const Batch batch = make_batch(members);
      params.zero_grad();
      num::Graph g;
      num::Var loss = sequence_loss(g, model, batch, hook);
      g.backward(loss);
      num::clip_gradients(params, cfg.clip_norm);
      num::adadelta_step(params, opt);
      loss_sum += loss.value().item();
      ++loss_count;
      ++result.updates;
      if (cfg.eval_every > 0 && result.updates % cfg.eval_every == 0) run_eval(epoch);
      if (stop || (cfg.max_updates > 0 && result.updates >= cfg.max_updates)) {
        stop = true;
        break;
      }
    }
    result.epochs = epoch;
    if (loss_count > 0 && (cfg.eval_every == 0 || stop || epoch == cfg.max_epochs)) run_eval(epoch);
  }
  if (!best.empty()) params.restore(best);
  return result;
}

std::pair<std::vector<Sample>, std::vector<Sample>> stratified_split(const std::vector<Sample>& samples,
                                                                     double fraction,
                                                                     std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("split fraction must be in [0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].class_name].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<bool> held(samples.size(), false);
  for (auto& [name, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    n = std::min(n, idx.size() - 1);
    for (std::size_t k = 0; k < n; ++k) held[idx[k]] = true;
  }
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) (held[i] ? out.second : out.first).push_back(samples[i]);
  return out;
}

}  // namespace radseq
