#include "radseq/synthcorpus.hpp"
#include "radseq/trainer.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

using namespace radseq;
using num::Matrix;

namespace {

struct Corpus {
  Vocabulary vocab = synth::corpus_vocabulary(6);
  std::vector<synth::ClassSpec> classes;
  std::vector<Sample> samples;
};

Corpus small_corpus(std::size_t classes, std::size_t per_class, std::uint64_t seed = 3) {
  Corpus c;
  synth::CorpusConfig cfg;
  cfg.radicals = 6;
  cfg.classes = classes;
  cfg.seed = seed;
  c.classes = synth::sample_classes(cfg, c.vocab);
  synth::SampleConfig sc;
  sc.per_class = per_class;
  c.samples = synth::generate_samples(c.classes, sc, seed, synth::index_templates(synth::builtin_templates()));
  return c;
}

std::unique_ptr<Model> tiny_model(const Vocabulary& v, std::uint64_t seed = 1) {
  auto m = std::make_unique<Model>(ModelConfig::from_preset("tiny"), v);
  m->initialize(seed);
  return m;
}

}  // namespace

TEST_CASE("cross entropy examples") {
  num::Graph g(false);
  SUBCASE("uniform over 4 tokens, two steps") {
    const Matrix lp = Matrix::Constant(2, 4, -std::log(4.0));
    const int targets[] = {1, 3};
    const Matrix mask = Matrix::Ones(2, 1);
    CHECK(ce_loss(g.constant(lp), targets, mask).value().item() == doctest::Approx(2.0 * std::log(4.0)));
  }
  SUBCASE("masked positions contribute nothing; loss is averaged over the batch") {
    Matrix lp(4, 3);  // T = 2, B = 2, time-major
    lp << std::log(0.5), std::log(0.25), std::log(0.25),   // t0 b0
        std::log(0.1), std::log(0.8), std::log(0.1),        // t0 b1
        std::log(0.2), std::log(0.2), std::log(0.6),        // t1 b0
        std::log(0.3), std::log(0.3), std::log(0.4);        // t1 b1 (padding)
    const int targets[] = {0, 1, 2, 0};
    Matrix mask(2, 2);
    mask << 1, 1, 1, 0;
    const double want = -(std::log(0.5) + std::log(0.8) + std::log(0.6)) / 2.0;
    CHECK(ce_loss(g.constant(lp), targets, mask).value().item() == doctest::Approx(want));
  }
  SUBCASE("targets are range checked") {
    const int bad[] = {7};
    CHECK_THROWS_AS(ce_loss(g.constant(Matrix::Zero(1, 3)), bad, Matrix::Ones(1, 1)), std::out_of_range);
  }
}

TEST_CASE("batches pad targets with <eos> and mask the padding") {
  const auto c = small_corpus(4, 1);
  CaptionTokens single{"r01"};
  std::vector<Sample> samples{c.samples[0], c.samples[1]};
  samples[1].caption = single;
  const auto prepared = prepare_samples(samples, c.vocab, kDefaultSpacing);
  CHECK(prepared[1].targets == std::vector<int>{c.vocab.index_of("r01"), Vocabulary::kEosIndex});
  const PreparedSample* ptrs[] = {&prepared[0], &prepared[1]};
  const Batch b = make_batch(ptrs);
  CHECK(b.target_steps == 6);
  CHECK(b.batch() == 2);
  CHECK(b.mask.col(0).sum() == 6.0);
  CHECK(b.mask.col(1).sum() == 2.0);
  for (std::size_t t = 2; t < 6; ++t) CHECK(b.targets[t * 2 + 1] == Vocabulary::kEosIndex);
  CHECK(b.inputs.lengths[0] == prepared[0].features.size());
}

TEST_CASE("teacher forcing feeds <sos> then the previous target") {
  const auto c = small_corpus(3, 1);
  auto model = tiny_model(c.vocab);
  const auto prepared = prepare_samples(c.samples, c.vocab, kDefaultSpacing);
  std::vector<const PreparedSample*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  const Batch b = make_batch(ptrs);
  std::vector<std::vector<int>> seen;
  num::Graph g(false);
  sequence_loss(g, *model, b, [&](std::size_t step, std::span<const int> tokens) {
    CHECK(step == seen.size());
    seen.emplace_back(tokens.begin(), tokens.end());
  });
  REQUIRE(seen.size() == b.target_steps);
  for (std::size_t i = 0; i < b.batch(); ++i) {
    CHECK(seen[0][i] == Vocabulary::kSosIndex);
    for (std::size_t t = 1; t < b.target_steps; ++t) CHECK(seen[t][i] == b.targets[(t - 1) * b.batch() + i]);
  }
}

TEST_CASE("edit distance") {
  CHECK(edit_distance({}, {}) == 0);
  CHECK(edit_distance({"a", "b"}, {}) == 2);
  CHECK(edit_distance({"a", "{", "r1", "r2", "}"}, {"a", "{", "r2", "r1", "}"}) == 2);
  CHECK(edit_distance({"a", "{", "r1", "r2", "}"}, {"d", "{", "r1", "r2", "}"}) == 1);
  CHECK(edit_distance({"r1"}, {"r1", "r2", "r3"}) == 2);
}

TEST_CASE("evaluation metrics") {
  auto c = small_corpus(5, 2);
  auto model = tiny_model(c.vocab);
  model->params().at("decoder.b_o").value.mat()(0, Vocabulary::kEosIndex) = 1e3;
  std::vector<RecognitionResult> results;
  const auto m = evaluate(*model, c.samples, {1, 10, false}, &results);
  CHECK(m.samples == 10);
  CHECK(results.size() == 10);
  CHECK(m.correct == 0);  // empty predictions never match
  CHECK(m.exact_match == 0.0);
  CHECK(m.token_err == doctest::Approx(1.0));  // every reference token deleted

  auto shuffled = c.samples;
  std::reverse(shuffled.begin(), shuffled.end());
  auto model2 = tiny_model(c.vocab, 4);
  const auto a = evaluate(*model2, c.samples, {2, 10, false});
  const auto b = evaluate(*model2, shuffled, {2, 10, false});
  CHECK(a.exact_match == b.exact_match);
  CHECK(a.token_err == doctest::Approx(b.token_err));

  c.samples[0].caption = {"a", "{", "zz", "r01", "}"};
  CHECK_THROWS_AS(evaluate(*model2, c.samples, {1, 10, false}), VocabularyError);
}

TEST_CASE("train config json") {
  TrainConfig cfg;
  cfg.batch_size = 7;
  cfg.eval_beam.beam = 3;
  cfg.checkpoint = "x.bin";
  const auto back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.batch_size == 7);
  CHECK_THROWS(TrainConfig::from_json({{"batch", 3}}));
}

TEST_CASE("short training run: loss falls, logs, checkpoints, determinism") {
  testing::TempDir dir("train");
  const auto c = small_corpus(4, 3);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 6;
  cfg.patience = 0;
  cfg.seed = 11;
  cfg.metrics_log = dir / "m.jsonl";
  cfg.checkpoint = dir / "best.bin";

  auto model = tiny_model(c.vocab, 2);
  const auto r1 = train(*model, c.samples, {}, cfg);
  CHECK(r1.epochs == 6);
  CHECK(r1.updates == 18);
  REQUIRE(r1.records.size() == 6);
  CHECK(r1.records.back().loss < r1.records.front().loss);

  std::ifstream log(dir / "m.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("update"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("token_err"));
    CHECK(j.contains("exact_match"));
    ++lines;
  }
  CHECK(lines == 6);

  // The restored best parameters and the saved checkpoint agree.
  const auto loaded = Model::load(dir / "best.bin");
  const auto here = evaluate(*model, c.samples, cfg.eval_beam);
  const auto there = evaluate(*loaded, c.samples, cfg.eval_beam);
  CHECK(here.exact_match == there.exact_match);
  CHECK(here.token_err == there.token_err);
  CHECK(here.exact_match == r1.best_exact_match);

  cfg.metrics_log.reset();
  cfg.checkpoint.reset();
  auto again = tiny_model(c.vocab, 2);
  const auto r2 = train(*again, c.samples, {}, cfg);
  REQUIRE(r2.records.size() == r1.records.size());
  for (std::size_t i = 0; i < r1.records.size(); ++i) {
    CHECK(r1.records[i].to_json().dump() == r2.records[i].to_json().dump());
  }
}

TEST_CASE("training stops on request, on max_updates and on patience") {
  const auto c = small_corpus(3, 2);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 50;
  cfg.eval_every = 2;
  auto model = tiny_model(c.vocab);
  std::size_t calls = 0;
  auto r = train(*model, c.samples, {}, cfg, [&](const MetricsRecord&) { return ++calls == 3; });
  CHECK(calls == 3);
  CHECK(r.updates == 6);

  cfg.max_updates = 5;
  cfg.eval_every = 0;
  r = train(*model, c.samples, {}, cfg);
  CHECK(r.updates == 5);

  cfg.max_updates = 0;
  cfg.patience = 2;
  cfg.adadelta.epsilon = 1e-30;  // effectively frozen parameters
  r = train(*model, c.samples, {}, cfg);
  CHECK(r.early_stopped);
  CHECK(r.records.size() == 3);

  CHECK_THROWS_AS(train(*model, {}, {}, cfg), TrainError);
  auto bad = c.samples;
  bad[0].caption = {"a", "{", "r01", "}"};
  CHECK_THROWS_AS(train(*model, bad, {}, cfg), TrainError);
}

TEST_CASE("stratified split") {
  const auto c = small_corpus(5, 10);
  const auto [train_part, held] = stratified_split(c.samples, 0.2, 9);
  CHECK(train_part.size() + held.size() == c.samples.size());
  CHECK(held.size() == 10);
  std::map<std::string, int> per_class;
  for (const auto& s : held) ++per_class[s.class_name];
  for (const auto& [name, n] : per_class) CHECK(n == 2);
  std::set<std::string> ids;
  for (const auto& s : train_part) ids.insert(s.id);
  for (const auto& s : held) CHECK(!ids.count(s.id));

  std::vector<Sample> lonely{c.samples[0]};
  CHECK(stratified_split(lonely, 0.9, 1).first.size() == 1);
  CHECK_THROWS(stratified_split(c.samples, 1.0, 1));
}
