#pragma once

#include "radseq/inference.hpp"
#include "radseq/model.hpp"
#include "radseq/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace radseq {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// JSON run configuration. Unknown keys are rejected and relative paths are
/// resolved against the directory holding the file.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> heldout_data;
  std::optional<std::filesystem::path> test_data;
  std::optional<std::filesystem::path> vocab;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> metrics_log;
  double heldout_fraction = 0.1;
  TrainConfig trainer;
  BeamConfig beam;
  std::string host = "127.0.0.1";
  int port = 8080;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
};

/// Checkpoint path: explicit value, else RADSEQ_CHECKPOINT, else the config's.
std::optional<std::filesystem::path> resolve_checkpoint(const std::optional<std::filesystem::path>& explicit_path,
                                                        const std::optional<std::filesystem::path>& configured);

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// Request handlers, independent of the HTTP transport. Safe for concurrent use.
class RecognitionService {
 public:
  RecognitionService() = default;

  void set_model(std::shared_ptr<const Model> model, std::string checkpoint_hash = {});
  std::shared_ptr<const Model> model() const;

  HttpResponse health() const;
  HttpResponse model_info() const;
  HttpResponse recognize(const std::string& body) const;

  BeamConfig default_beam;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Model> model_;
  std::string checkpoint_hash_;
};

/// HTTP front end over a RecognitionService.
class HttpServer {
 public:
  explicit HttpServer(RecognitionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string hex64(std::uint64_t v);

}  // namespace radseq
