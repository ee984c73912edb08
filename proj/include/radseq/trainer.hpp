#pragma once

#include "radseq/dataset.hpp"
#include "radseq/inference.hpp"
#include "radseq/model.hpp"
#include "radseq/numcore/optim.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace radseq {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sample after preprocessing, with its caption as vocabulary indices ending in <eos>.
struct PreparedSample {
  const Sample* source = nullptr;
  FeatureSequence features;
  std::vector<int> targets;
};

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples,
                                            const Vocabulary& vocab, double spacing);

struct Batch {
  SequenceBatch inputs;
  std::size_t target_steps = 0;
  std::vector<int> targets;  // target_steps x B, time-major, padded with <eos>
  num::Matrix mask;          // target_steps x B
  std::size_t batch() const { return inputs.batch; }
};

Batch make_batch(std::span<const PreparedSample* const> samples);

/// -sum of log p(target) over unmasked positions, divided by the batch size.
/// `log_probs` is (T*B) x K time-major, `targets` and `mask` are T x B.
num::Var ce_loss(num::Var log_probs, std::span<const int> targets, const num::Matrix& mask);

/// Called with the previous-token column fed to the decoder at each step.
using DecoderInputHook = std::function<void(std::size_t step, std::span<const int> tokens)>;

/// Teacher-forced loss for one batch on `g`.
num::Var sequence_loss(num::Graph& g, const Model& model, const Batch& batch,
                       const DecoderInputHook& hook = {});

struct EvalMetrics {
  std::size_t samples = 0;
  double exact_match = 0.0;  // fraction in [0, 1]
  double token_err = 0.0;    // edit distance / reference tokens
  std::size_t correct = 0;
};

std::size_t edit_distance(const CaptionTokens& a, const CaptionTokens& b);

/// Beam-decodes every sample and compares full captions.
EvalMetrics evaluate(const Model& model, const std::vector<Sample>& samples, const BeamConfig& beam,
                     std::vector<RecognitionResult>* results = nullptr);

struct MetricsRecord {
  std::size_t epoch = 0;
  std::size_t update = 0;
  double loss = 0.0;         // mean training loss since the previous record
  double token_err = 0.0;
  double exact_match = 0.0;

  nlohmann::json to_json() const;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t max_updates = 0;  // 0 means no limit
  double clip_norm = 100.0;
  num::AdadeltaConfig adadelta;
  std::uint64_t seed = 1;
  std::size_t eval_every = 0;   // updates between evaluations; 0 means once per epoch
  std::size_t patience = 10;    // evaluations without improvement before stopping; 0 disables
  BeamConfig eval_beam{1, 40, false};
  std::size_t max_points = 0;   // drop longer sequences; 0 keeps all
  std::size_t bucket_span = 32; // batches per length-sorted bucket
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> metrics_log;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  std::vector<MetricsRecord> records;
  std::size_t updates = 0;
  std::size_t epochs = 0;
  double best_exact_match = -1.0;
  std::size_t best_update = 0;
  bool early_stopped = false;
};

/// Return true to stop training after this record.
using EvalCallback = std::function<bool(const MetricsRecord&)>;

/// Adadelta with global-norm clipping. Evaluates on `heldout` (or on the
/// training samples when it is empty), keeps the parameters with the best
/// exact match, and restores them at the end.
TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& heldout, const TrainConfig& cfg,
                  const EvalCallback& on_eval = {}, const DecoderInputHook& hook = {});

/// Class-stratified split: about `fraction` of each class's samples go to the
/// second set, with at least one sample kept for training.
std::pair<std::vector<Sample>, std::vector<Sample>> stratified_split(const std::vector<Sample>& samples,
                                                                     double fraction,
                                                                     std::uint64_t seed);

}  // namespace radseq
