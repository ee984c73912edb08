#include "radseq/model.hpp"

#include <random>

namespace radseq {

ModelConfig ModelConfig::from_preset(std::string_view name) {
  ModelConfig c;
  c.preset = std::string(name);
  if (name == "full") {
    return c;
  }
  if (name == "desk") {
    c.encoder.layers = 2;
    c.encoder.units = 64;
    c.decoder = {96, 96, 96, 32, 5};
    return c;
  }
  if (name == "tiny") {
    c.encoder.layers = 2;
    c.encoder.units = 16;
    c.decoder = {16, 16, 16, 8, 5};
    return c;
  }
  throw ModelError("unknown model preset '" + std::string(name) + "'");
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"preset", preset},
      {"encoder", {{"input_dim", encoder.input_dim}, {"layers", encoder.layers}, {"units", encoder.units}}},
      {"decoder",
       {{"embed_dim", decoder.embed_dim},
        {"state_dim", decoder.state_dim},
        {"attention_dim", decoder.attention_dim},
        {"coverage_filters", decoder.coverage_filters},
        {"coverage_kernel", decoder.coverage_kernel}}},
      {"init_scale", init_scale},
      {"seed", seed},
      {"resample_spacing", resample_spacing},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c = from_preset(j.value("preset", std::string("full")));
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    c.encoder.input_dim = e.value("input_dim", c.encoder.input_dim);
    c.encoder.layers = e.value("layers", c.encoder.layers);
    c.encoder.units = e.value("units", c.encoder.units);
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    c.decoder.embed_dim = d.value("embed_dim", c.decoder.embed_dim);
    c.decoder.state_dim = d.value("state_dim", c.decoder.state_dim);
    c.decoder.attention_dim = d.value("attention_dim", c.decoder.attention_dim);
    c.decoder.coverage_filters = d.value("coverage_filters", c.decoder.coverage_filters);
    c.decoder.coverage_kernel = d.value("coverage_kernel", c.decoder.coverage_kernel);
  }
  c.init_scale = j.value("init_scale", c.init_scale);
  c.seed = j.value("seed", c.seed);
  c.resample_spacing = j.value("resample_spacing", c.resample_spacing);
  return c;
}

Model::Model(ModelConfig config, Vocabulary vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  if (config_.encoder.input_dim != 6) throw ModelError("encoder input must be the 6-D pen feature");
  encoder_ = EncoderParams::create(params_, config_.encoder);
  decoder_ = DecoderParams::create(params_, config_.decoder, config_.encoder.annotation_dim(),
                                   vocab_.size());
  initialize(config_.seed);
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    if (p->value.shape().rank() == 1) {
      p->value.set_zero();
    } else {
      num::init_uniform(p->value, config_.init_scale, rng);
    }
    p->grad.set_zero();
  }
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["model"] = config_.to_json();
  meta["seed"] = config_.seed;
  meta["vocab"] = vocab_.tokens();
  meta["vocab_hash"] = vocab_.hash();
  num::save_checkpoint(path, params_, meta);
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& path) {
  const auto header = num::read_checkpoint_header(path);
  if (!header.contains("model") || !header.contains("vocab")) {
    throw ModelError("checkpoint lacks model config or vocabulary: " + path.string());
  }
  Vocabulary vocab(header.at("vocab").get<std::vector<std::string>>());
  if (header.contains("vocab_hash") && header.at("vocab_hash").get<std::uint64_t>() != vocab.hash()) {
    throw ModelError("checkpoint vocabulary hash does not match its token list");
  }
  auto model = std::make_unique<Model>(ModelConfig::from_json(header.at("model")), std::move(vocab));
  num::load_checkpoint(path, model->params_);
  return model;
}

}  // namespace radseq
