#include "radseq/cli.hpp"

#include "radseq/dataset.hpp"
#include "radseq/inference.hpp"
#include "radseq/service.hpp"
#include "radseq/synthcorpus.hpp"
#include "radseq/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace radseq {

namespace fs = std::filesystem;

namespace {

struct GenArgs {
  std::string out;
  std::size_t radicals = 20;
  std::string structures = "a,d";
  std::size_t classes = 150;
  std::size_t samples = 20;
  std::size_t test_samples = 5;
  double strength = 0.5;
  std::uint64_t seed = 1;
  std::size_t depth = 1;
  std::size_t holdout = 0;
};

struct CommonArgs {
  std::string config;
  std::string checkpoint;
  std::size_t beam = 0;
  std::size_t max_len = 0;
};

struct TrainArgs {
  std::string train, heldout, vocab, preset, metrics;
  std::size_t epochs = 0, updates = 0, batch = 0, eval_every = 0, patience = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct PathArgs {
  std::string data, points, out;
  std::string host;
  int port = -1;
  bool png = false;
};

RunConfig base_config(const CommonArgs& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  if (c.beam > 0) rc.beam.beam = c.beam;
  if (c.max_len > 0) rc.beam.max_len = c.max_len;
  return rc;
}

fs::path require_checkpoint(const CommonArgs& c, const RunConfig& rc) {
  std::optional<fs::path> flag;
  if (!c.checkpoint.empty()) flag = fs::path(c.checkpoint);
  auto path = resolve_checkpoint(flag, rc.checkpoint);
  if (!path) throw ConfigError("no checkpoint given (flag, RADSEQ_CHECKPOINT or config)");
  return *path;
}

std::vector<StructureKind> parse_structures(const std::string& text) {
  std::vector<StructureKind> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto k = structure_from_token(tok);
    if (!k) throw ConfigError("unknown structure '" + tok + "'");
    out.push_back(*k);
  }
  if (out.empty()) throw ConfigError("no structures given");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

int gen_data(const GenArgs& a, std::ostream& out) {
  synth::CorpusConfig cc;
  cc.radicals = a.radicals;
  cc.structures = parse_structures(a.structures);
  cc.classes = a.classes + a.holdout;
  cc.seed = a.seed;
  cc.depth = a.depth;
  const Vocabulary vocab = synth::corpus_vocabulary(a.radicals);
  auto classes = synth::sample_classes(cc, vocab);
  std::vector<synth::ClassSpec> unseen;
  if (a.holdout > 0) std::tie(classes, unseen) = synth::split_zero_shot(classes, a.holdout, a.seed);
  const auto templates = synth::index_templates(synth::builtin_templates());

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  vocab.save(dir / "vocab.txt");
  write_text(dir / "classes.json", synth::classes_to_json(classes).dump(1) + "\n");
  synth::SampleConfig train_cfg{a.samples, a.strength, 0, "train"};
  write_jsonl(dir / "train.jsonl", synth::generate_samples(classes, train_cfg, a.seed, templates));
  synth::SampleConfig test_cfg{a.test_samples, a.strength, synth::kTestWriterBase, "test"};
  if (a.test_samples > 0) {
    write_jsonl(dir / "test.jsonl", synth::generate_samples(classes, test_cfg, a.seed, templates));
  }
  if (!unseen.empty()) {
    write_text(dir / "unseen_classes.json", synth::classes_to_json(unseen).dump(1) + "\n");
    test_cfg.prefix = "unseen";
    write_jsonl(dir / "unseen.jsonl", synth::generate_samples(unseen, test_cfg, a.seed, templates));
  }
  out << nlohmann::json{{"classes", classes.size()},
                        {"unseen_classes", unseen.size()},
                        {"train_samples", classes.size() * a.samples},
                        {"test_samples", classes.size() * a.test_samples},
                        {"vocab_size", vocab.size()},
                        {"out", dir.string()}}
             .dump()
      << "\n";
  return kExitOk;
}

Vocabulary vocab_for(const std::vector<Sample>& samples, const std::optional<fs::path>& path) {
  if (path) {
    try {
      return Vocabulary::load(*path);
    } catch (const VocabularyError& e) {
      throw DataError(e.what());
    }
  }
  std::set<std::string> radicals;
  for (const auto& s : samples) {
    for (const auto& t : s.caption) {
      if (t != kOpenBrace && t != kCloseBrace && !structure_from_token(t)) radicals.insert(t);
    }
  }
  return Vocabulary::with_radicals({radicals.begin(), radicals.end()});
}

int train_cmd(const CommonArgs& c, const TrainArgs& a, std::ostream& out) {
  RunConfig rc = base_config(c);
  if (!a.train.empty()) rc.train_data = fs::path(a.train);
  if (!a.heldout.empty()) rc.heldout_data = fs::path(a.heldout);
  if (!a.vocab.empty()) rc.vocab = fs::path(a.vocab);
  if (!a.preset.empty()) rc.preset = a.preset;
  if (!a.metrics.empty()) rc.metrics_log = fs::path(a.metrics);
  if (a.epochs) rc.trainer.max_epochs = a.epochs;
  if (a.updates) rc.trainer.max_updates = a.updates;
  if (a.batch) rc.trainer.batch_size = a.batch;
  if (a.eval_every) rc.trainer.eval_every = a.eval_every;
  if (a.patience) rc.trainer.patience = a.patience;
  if (a.seed_set) rc.seed = a.seed;
  if (!rc.train_data) throw ConfigError("no training data given");
  const fs::path ckpt = require_checkpoint(c, rc);

  std::vector<Sample> train_set = read_jsonl(*rc.train_data);
  std::vector<Sample> heldout;
  if (rc.heldout_data) {
    heldout = read_jsonl(*rc.heldout_data);
  } else if (rc.heldout_fraction > 0.0) {
    std::tie(train_set, heldout) = stratified_split(train_set, rc.heldout_fraction, rc.seed);
  }
  const Vocabulary vocab = vocab_for(train_set, rc.vocab);
  check_captions(train_set, vocab);
  check_captions(heldout, vocab);

  ModelConfig mc = ModelConfig::from_preset(rc.preset);
  mc.seed = rc.seed;
  Model model(mc, vocab);
  TrainConfig tc = rc.trainer;
  tc.seed = rc.seed;
  tc.checkpoint = ckpt;
  if (rc.metrics_log) tc.metrics_log = *rc.metrics_log;
  if (!ckpt.parent_path().empty()) fs::create_directories(ckpt.parent_path());
  const TrainResult r = train(model, train_set, heldout, tc);
  if (r.records.empty()) model.save(ckpt);
  out << nlohmann::json{{"updates", r.updates},
                        {"epochs", r.epochs},
                        {"best_exact_match", r.best_exact_match},
                        {"best_update", r.best_update},
                        {"early_stopped", r.early_stopped},
                        {"checkpoint", ckpt.string()}}
             .dump()
      << "\n";
  return kExitOk;
}

std::unique_ptr<Model> load_model(const fs::path& path) {
  if (!fs::exists(path)) throw num::CheckpointError("checkpoint not found: " + path.string());
  return Model::load(path);
}

int eval_cmd(const CommonArgs& c, const PathArgs& p, const std::string& vocab_path, std::ostream& out) {
  RunConfig rc = base_config(c);
  const auto model = load_model(require_checkpoint(c, rc));
  std::optional<fs::path> data = rc.test_data;
  if (!p.data.empty()) data = fs::path(p.data);
  if (!data) throw ConfigError("no evaluation data given");
  if (!vocab_path.empty()) {
    const Vocabulary v = Vocabulary::load(vocab_path);
    if (!(v == model->vocab())) throw VocabularyError("dataset vocabulary differs from the checkpoint's");
  }
  const auto samples = read_jsonl(*data);
  const EvalMetrics m = evaluate(*model, samples, rc.beam);
  out << nlohmann::json{{"samples", m.samples},
                        {"correct", m.correct},
                        {"exact_match", m.exact_match},
                        {"token_err", m.token_err}}
             .dump()
      << "\n";
  return kExitOk;
}

RawTrajectory read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open points file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    // A dataset file contributes its first record.
    const auto nl = text.find('\n');
    if (path.extension() == ".jsonl" && nl != std::string::npos) text.resize(nl);
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.is_object()) {
    if (!j.contains("points")) throw DataError(path.string() + ": no \"points\" field");
    return points_from_json(j["points"]);
  }
  return points_from_json(j);
}

int recognize_cmd(const CommonArgs& c, const PathArgs& p, std::ostream& out) {
  RunConfig rc = base_config(c);
  const auto model = load_model(require_checkpoint(c, rc));
  const RawTrajectory raw = read_points(p.points);
  out << to_json(recognize(*model, raw, rc.beam)).dump() << "\n";
  return kExitOk;
}

int visualize_cmd(const CommonArgs& c, const PathArgs& p, std::ostream& out) {
  RunConfig rc = base_config(c);
  const auto model = load_model(require_checkpoint(c, rc));
  const RawTrajectory raw = read_points(p.points);
  const RecognitionResult r = recognize(*model, raw, rc.beam);
  const fs::path dir(p.out);
  fs::create_directories(dir);
  for (std::size_t t = 0; t < r.attention.size(); ++t) {
    const AttentionRender img = render_attention(raw, r, t, model->config().resample_spacing);
    char name[32];
    std::snprintf(name, sizeof name, "step_%02zu", t);
    write_text(dir / (std::string(name) + ".svg"), img.svg);
    if (p.png) write_png(dir / (std::string(name) + ".png"), img.raster);
  }
  write_text(dir / "result.json", to_json(r).dump() + "\n");
  out << nlohmann::json{{"steps", r.attention.size()}, {"out", dir.string()}}.dump() << "\n";
  return kExitOk;
}

int serve_cmd(const CommonArgs& c, const PathArgs& p, std::ostream& out, std::ostream& err) {
  RunConfig rc = base_config(c);
  if (!p.host.empty()) rc.host = p.host;
  if (p.port >= 0) rc.port = p.port;
  RecognitionService service;
  service.default_beam = rc.beam;
  std::optional<fs::path> flag;
  if (!c.checkpoint.empty()) flag = fs::path(c.checkpoint);
  if (auto path = resolve_checkpoint(flag, rc.checkpoint)) {
    service.set_model(load_model(*path), hex64(num::file_hash(*path)));
  } else {
    err << "no checkpoint configured; /recognize will answer 503\n";
  }
  HttpServer server(service);
  const int port = server.bind(rc.host, rc.port);
  out << "listening on " << rc.host << ":" << port << std::endl;
  server.listen();
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& c, bool beam) {
  cmd->add_option("--config", c.config, "run config JSON");
  cmd->add_option("--checkpoint", c.checkpoint, "model checkpoint");
  if (beam) {
    cmd->add_option("--beam", c.beam, "beam width")->check(CLI::PositiveNumber);
    cmd->add_option("--max-len", c.max_len, "maximum decoded length")->check(CLI::PositiveNumber);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"radical sequence recognizer for pen trajectories", "radseq"};
  app.require_subcommand(1);
  GenArgs gen;
  CommonArgs common;
  TrainArgs tr;
  PathArgs paths;
  std::string vocab_path;

  auto* g = app.add_subcommand("gen-data", "generate a synthetic corpus");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--radicals", gen.radicals, "number of radical templates");
  g->add_option("--structures", gen.structures, "comma-separated structure tokens");
  g->add_option("--classes", gen.classes, "training classes");
  g->add_option("--samples", gen.samples, "training samples per class");
  g->add_option("--test-samples", gen.test_samples, "test samples per class");
  g->add_option("--strength", gen.strength, "jitter strength")->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", gen.seed, "corpus seed");
  g->add_option("--depth", gen.depth, "maximum tree depth")->check(CLI::PositiveNumber);
  g->add_option("--holdout", gen.holdout, "extra classes held out for zero-shot testing");

  auto* t = app.add_subcommand("train", "train a model");
  add_common(t, common, false);
  t->add_option("--train", tr.train, "training JSONL");
  t->add_option("--heldout", tr.heldout, "held-out JSONL for model selection");
  t->add_option("--vocab", tr.vocab, "vocabulary file");
  t->add_option("--preset", tr.preset, "model preset: full, desk or tiny");
  t->add_option("--metrics", tr.metrics, "metrics JSONL output");
  t->add_option("--epochs", tr.epochs, "maximum epochs");
  t->add_option("--updates", tr.updates, "maximum updates");
  t->add_option("--batch", tr.batch, "batch size")->check(CLI::PositiveNumber);
  t->add_option("--eval-every", tr.eval_every, "updates between evaluations");
  t->add_option("--patience", tr.patience, "evaluations without improvement before stopping");
  auto* seed_opt = t->add_option("--seed", tr.seed, "model and shuffling seed");

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(e, common, true);
  e->add_option("--data", paths.data, "dataset JSONL");
  e->add_option("--vocab", vocab_path, "vocabulary the dataset was built with");

  auto* r = app.add_subcommand("recognize", "decode one trajectory");
  add_common(r, common, true);
  r->add_option("--points", paths.points, "points JSON file")->required();

  auto* v = app.add_subcommand("visualize", "render attention per decode step");
  add_common(v, common, true);
  v->add_option("--points", paths.points, "points JSON file")->required();
  v->add_option("--out", paths.out, "output directory")->required();
  v->add_flag("--png", paths.png, "also write grayscale PNGs");

  auto* s = app.add_subcommand("serve", "run the HTTP service");
  add_common(s, common, true);
  s->add_option("--host", paths.host, "bind address");
  s->add_option("--port", paths.port, "port (0 picks a free one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << ex.what() << "\n";
    return kExitBadArguments;
  }
  tr.seed_set = seed_opt->count() > 0;

  try {
    if (*g) return gen_data(gen, out);
    if (*t) return train_cmd(common, tr, out);
    if (*e) return eval_cmd(common, paths, vocab_path, out);
    if (*r) return recognize_cmd(common, paths, out);
    if (*v) return visualize_cmd(common, paths, out);
    if (*s) return serve_cmd(common, paths, out, err);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitBadArguments;
  } catch (const VocabularyError& ex) {
    err << "model/vocabulary mismatch: " << ex.what() << "\n";
    return kExitModelMismatch;
  } catch (const ModelError& ex) {
    err << "model error: " << ex.what() << "\n";
    return kExitModelMismatch;
  } catch (const num::CheckpointError& ex) {
    err << "checkpoint error: " << ex.what() << "\n";
    return kExitModelMismatch;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitDataError;
  } catch (const TrainError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitDataError;
  } catch (const TrajectoryError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitDataError;
  } catch (const CaptionError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitDataError;
  } catch (const synth::SynthError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitDataError;
  }
  return kExitBadArguments;
}

}  // namespace radseq
