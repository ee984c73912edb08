#pragma once

#include "radseq/caption.hpp"
#include "radseq/decoder.hpp"
#include "radseq/encoder.hpp"
#include "radseq/numcore/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace radseq {

struct ModelConfig {
  std::string preset = "full";
  EncoderConfig encoder;
  DecoderConfig decoder;
  double init_scale = 0.08;
  std::uint64_t seed = 1;
  double resample_spacing = kDefaultSpacing;

  /// "full": 4 x 250 encoder, 256-wide decoder, 256 coverage filters.
  /// "desk": sized for CPU experiments on the synthetic corpus.
  /// "tiny": 2 x 16 encoder, 16-wide decoder, for gradient checks and memorization.
  static ModelConfig from_preset(std::string_view name);

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Encoder + decoder parameters for one vocabulary.
class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// uniform(-init_scale, init_scale) for weight matrices, zeros for biases.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  num::ParameterSet& params() { return params_; }
  const num::ParameterSet& params() const { return params_; }
  const EncoderParams& encoder() const { return encoder_; }
  const DecoderParams& decoder() const { return decoder_; }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static std::unique_ptr<Model> load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  num::ParameterSet params_;
  EncoderParams encoder_;
  DecoderParams decoder_;
};

}  // namespace radseq
