#pragma once

#include "radseq/model.hpp"
#include "radseq/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace radseq {

struct BeamConfig {
  std::size_t beam = 10;
  std::size_t max_len = 40;
  /// Rank finished hypotheses by mean instead of total log-prob. Off by default.
  bool length_normalize = false;
};

/// Annotations of a single input, restricted to its valid frames.
struct EncodedInput {
  num::Matrix annotations;  // L x D
  num::Matrix projected;    // L x n', annotations * U_att
  std::size_t points = 0;
};

EncodedInput encode_features(const Model& model, const FeatureSequence& features);

struct Hypothesis {
  std::vector<int> tokens;  // excludes <sos>; ends with <eos> when finished
  double log_prob = 0.0;
  bool finished = false;
  std::vector<std::vector<double>> attention;  // one row per emitted token
};

/// Next-token distribution source driven by beam_search.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  /// Log-probabilities (H x K) of the next token after each live prefix.
  /// Prefixes exclude <sos>.
  virtual num::Matrix scores(const std::vector<std::vector<int>>& prefixes) = 0;
  /// The new live set: hypothesis i extends row parents[i] of the last scores() call.
  virtual void reorder(std::span<const std::size_t> parents) { (void)parents; }
  /// Attention row recorded for `row` of the last scores() call.
  virtual std::vector<double> attention(std::size_t row) const {
    (void)row;
    return {};
  }
};

/// Left-to-right beam search from <sos>. Each step expands every live
/// hypothesis over the full vocabulary and keeps the best `beam` expansions;
/// kept expansions ending in <eos> retire to the result pool, the others stay
/// live. beam = 1 is greedy argmax decoding. Search ends when nothing is live,
/// when no live hypothesis can still beat the best finished one, or at max_len.
/// Results are sorted best first; unfinished ones (truncated at max_len) are
/// only returned when nothing finished.
std::vector<Hypothesis> beam_search(StepScorer& scorer, const BeamConfig& cfg);
std::vector<Hypothesis> beam_search(const Model& model, const EncodedInput& input,
                                    const BeamConfig& cfg);

/// Teacher-forced log P(tokens | input); `tokens` should end with <eos>.
double score_sequence(const Model& model, const EncodedInput& input, const std::vector<int>& tokens);

struct RecognitionResult {
  CaptionTokens caption;                   // without <eos>
  std::vector<std::string> steps;          // token emitted at each decode step
  std::optional<CaptionTree> tree;
  bool grammatical = false;
  bool truncated = false;
  double score = 0.0;
  std::vector<std::vector<double>> attention;  // steps x frames
  std::size_t frames = 0;
  std::size_t points = 0;
};

RecognitionResult to_result(const Model& model, const Hypothesis& h, const EncodedInput& input);

/// normalize -> resample -> featurize -> encode -> beam search.
RecognitionResult recognize(const Model& model, const RawTrajectory& raw, const BeamConfig& cfg = {});

nlohmann::json to_json(const RecognitionResult& r);

/// Encoder frame (1-based) that resampled point j (1-based) pools into.
inline std::size_t frame_of_point(std::size_t j) { return (j + 1) / 2; }

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 0 = black

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct AttentionRender {
  std::string svg;
  GrayImage raster;
  std::vector<double> point_intensity;  // per resampled point, in [0, 1]
  std::string symbol;
};

/// Draws the resampled trajectory with each point shaded by the attention mass
/// of its pooled frame at `step` (lighter = more attention).
AttentionRender render_attention(const RawTrajectory& raw, const RecognitionResult& result,
                                 std::size_t step, double spacing = kDefaultSpacing,
                                 std::size_t size = 256);

/// Minimal 8-bit grayscale PNG encoder.
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace radseq
