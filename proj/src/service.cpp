#include "radseq/service.hpp"

#include "radseq/dataset.hpp"

#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace radseq {

namespace fs = std::filesystem;

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  auto path_of = [&](const nlohmann::json& v) {
    const fs::path p(v.get<std::string>());
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "preset") c.preset = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "train_data") c.train_data = path_of(v);
      else if (key == "heldout_data") c.heldout_data = path_of(v);
      else if (key == "test_data") c.test_data = path_of(v);
      else if (key == "vocab") c.vocab = path_of(v);
      else if (key == "checkpoint") c.checkpoint = path_of(v);
      else if (key == "metrics_log") c.metrics_log = path_of(v);
      else if (key == "heldout_fraction") c.heldout_fraction = v.get<double>();
      else if (key == "trainer") c.trainer = TrainConfig::from_json(v);
      else if (key == "beam") c.beam.beam = v.get<std::size_t>();
      else if (key == "max_len") c.beam.max_len = v.get<std::size_t>();
      else if (key == "host") c.host = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.heldout_fraction < 0.0 || c.heldout_fraction >= 1.0) {
    throw ConfigError("heldout_fraction must be in [0, 1)");
  }
  if (c.beam.beam == 0) throw ConfigError("beam must be positive");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

std::optional<fs::path> resolve_checkpoint(const std::optional<fs::path>& explicit_path,
                                           const std::optional<fs::path>& configured) {
  if (explicit_path) return explicit_path;
  if (const char* env = std::getenv("RADSEQ_CHECKPOINT"); env && *env) return fs::path(env);
  return configured;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ----------------------------------------------------------------------------

void RecognitionService::set_model(std::shared_ptr<const Model> model, std::string checkpoint_hash) {
  std::lock_guard lock(mutex_);
  model_ = std::move(model);
  checkpoint_hash_ = std::move(checkpoint_hash);
}

std::shared_ptr<const Model> RecognitionService::model() const {
  std::lock_guard lock(mutex_);
  return model_;
}

HttpResponse RecognitionService::health() const { return {200, {{"status", "ok"}}}; }

namespace {

HttpResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

}  // namespace

HttpResponse RecognitionService::model_info() const {
  std::string hash;
  std::shared_ptr<const Model> m;
  {
    std::lock_guard lock(mutex_);
    m = model_;
    hash = checkpoint_hash_;
  }
  if (!m) return error(503, "model not loaded");
  return {200,
          {{"vocab_size", m->vocab().size()},
           {"vocab", m->vocab().tokens()},
           {"preset", m->config().preset},
           {"checkpoint_hash", hash},
           {"resample_spacing", m->config().resample_spacing},
           {"frame_map", "resampled point j (1-based) belongs to encoder frame ceil(j/2)"}}};
}

HttpResponse RecognitionService::recognize(const std::string& body) const {
  const auto m = model();
  if (!m) return error(503, "model not loaded");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error(400, "body is not valid JSON");
  }
  if (!req.is_object() || !req.contains("points") || !req["points"].is_array()) {
    return error(400, "body must be an object with a \"points\" array");
  }
  BeamConfig beam = default_beam;
  if (req.contains("beam")) {
    if (!req["beam"].is_number_integer() || req["beam"].get<long long>() < 1) {
      return error(400, "\"beam\" must be a positive integer");
    }
    beam.beam = req["beam"].get<std::size_t>();
  }
  const auto& pts = req["points"];
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
        !p[2].is_number_integer()) {
      return error(400, "each point must be [x, y, stroke]");
    }
  }
  if (pts.empty()) return error(422, "empty trajectory");
  try {
    const RawTrajectory raw = points_from_json(pts);
    return {200, to_json(radseq::recognize(*m, raw, beam))};
  } catch (const DataError& e) {
    return error(422, e.what());
  } catch (const TrajectoryError& e) {
    return error(422, e.what());
  }
}

// ----------------------------------------------------------------------------

struct HttpServer::Impl {
  RecognitionService& service;
  httplib::Server server;

  explicit Impl(RecognitionService& s) : service(s) {}
};

namespace {

void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(RecognitionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  auto& svc = impl_->service;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.health()); });
  svr.Get("/model", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.model_info()); });
  svr.Post("/recognize", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.recognize(req.body));
  });
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace radseq
