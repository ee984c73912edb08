#include "radseq/model.hpp"
#include "radseq/trainer.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace radseq;
using num::Matrix;
using num::Var;

namespace {

Vocabulary small_vocab() { return Vocabulary::with_radicals({"r1", "r2", "r3"}); }

FeatureSequence random_features(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<PenPoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), i < n / 2 ? 1 : 2});
  return featurize(normalize(RawTrajectory(pts)));
}

Sample random_sample(std::mt19937_64& rng, std::size_t n, CaptionTokens caption) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PenPoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), i < n / 2 ? 1 : 2});
  return Sample{"id", "cls", RawTrajectory(pts), std::move(caption)};
}

std::unique_ptr<Model> tiny_model(std::uint64_t seed = 5) {
  auto m = std::make_unique<Model>(ModelConfig::from_preset("tiny"), small_vocab());
  m->initialize(seed);
  return m;
}

}  // namespace

TEST_CASE("presets") {
  const auto tiny = ModelConfig::from_preset("tiny");
  CHECK(tiny.encoder.layers == 2);
  CHECK(tiny.encoder.units == 16);
  CHECK(tiny.decoder.state_dim == 16);
  const auto full = ModelConfig::from_preset("full");
  CHECK(full.encoder.layers == 4);
  CHECK(full.encoder.units == 250);
  CHECK(full.decoder.coverage_filters == 256);
  CHECK_THROWS_AS(ModelConfig::from_preset("huge"), ModelError);
  const auto back = ModelConfig::from_json(tiny.to_json());
  CHECK(back.to_json() == tiny.to_json());
}

TEST_CASE("gru step with zero weights halves the state") {
  num::ParameterSet ps;
  const auto p = GruParams::create(ps, "g", 3, 4);
  num::Graph g(false);
  const auto gru = BoundGru::bind(g, p);
  std::mt19937_64 rng(2);
  const Matrix h = testing::random_matrix(2, 4, rng);
  const Var out = gru_step(g.constant(testing::random_matrix(2, 3, rng)), g.constant(h), gru);
  // z = sigmoid(0) = 1/2, candidate = tanh(0) = 0
  CHECK(out.mat().isApprox(0.5 * h));
}

TEST_CASE("pooling and reversal") {
  num::Graph g(false);
  Matrix seq(10, 1);
  for (int i = 0; i < 10; ++i) seq(i, 0) = i;  // 5 steps, batch 2
  const Matrix pooled = pool_drop_even(g.constant(seq), 2, 5).mat();
  REQUIRE(pooled.rows() == 6);
  const double want[] = {0, 1, 4, 5, 8, 9};
  for (int i = 0; i < 6; ++i) CHECK(pooled(i, 0) == want[i]);
  CHECK(pooled_length(1) == 1);
  CHECK(pooled_length(4) == 2);
  CHECK(pooled_length(7) == 4);

  const std::size_t lengths[] = {3, 1};
  const auto perm = reverse_within_lengths(2, 3, lengths);
  CHECK(perm == std::vector<int>{4, 1, 2, 3, 0, 5});
}

TEST_CASE("annotations of a sequence do not depend on its batch mates") {
  const auto model = tiny_model();
  std::mt19937_64 rng(8);
  const auto shortseq = random_features(rng, 7);
  const auto longseq = random_features(rng, 12);

  num::Graph g1(false);
  const FeatureSequence* alone[] = {&shortseq};
  const auto a1 = encode(g1, model->encoder(), SequenceBatch::from_features(alone));
  num::Graph g2(false);
  const FeatureSequence* both[] = {&longseq, &shortseq};
  const auto a2 = encode(g2, model->encoder(), SequenceBatch::from_features(both));

  CHECK(a1.frames == 4);
  CHECK(a2.frames == 6);
  CHECK(a2.lengths == std::vector<std::size_t>{6, 4});
  CHECK(a2.mask.row(1).sum() == 4.0);
  CHECK(a1.values.mat().cols() == 32);
  for (Eigen::Index t = 0; t < 4; ++t) {
    CHECK((a1.values.mat().row(t) - a2.values.mat().row(6 + t)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("decoder normalization and coverage") {
  const auto model = tiny_model();
  std::mt19937_64 rng(13);
  const auto s1 = random_features(rng, 9);
  const auto s2 = random_features(rng, 20);
  num::Graph g(false);
  const FeatureSequence* seqs[] = {&s1, &s2};
  const auto ann = encode(g, model->encoder(), SequenceBatch::from_features(seqs));
  const auto dec = BoundDecoder::bind(g, model->decoder());
  const auto ctx = prepare_attention(dec, ann);
  Var state = init_state(dec, ctx);
  Var coverage = zero_coverage(g, ctx);
  std::vector<int> prev{Vocabulary::kSosIndex, Vocabulary::kSosIndex};
  const std::size_t steps = 7;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto step = decode_step(dec, ctx, prev, state, coverage);
    const Matrix& alpha = step.alpha.mat();
    for (Eigen::Index b = 0; b < 2; ++b) {
      CHECK(std::abs(alpha.row(b).sum() - 1.0) < 1e-12);
      CHECK(std::abs(step.log_probs.mat().row(b).array().exp().sum() - 1.0) < 1e-12);
    }
    for (Eigen::Index i = 5; i < alpha.cols(); ++i) CHECK(alpha(0, i) == 0.0);
    state = step.state;
    coverage = step.coverage;
    for (auto& p : prev) p = 2 + static_cast<int>(t % 3);
  }
  CHECK(std::abs(coverage.mat().row(0).sum() - steps) < 1e-12);
  CHECK(std::abs(coverage.mat().row(1).sum() - steps) < 1e-12);
}

TEST_CASE("full model gradient matches central differences") {
  auto model = tiny_model(21);
  std::mt19937_64 rng(3);
  const std::vector<Sample> samples{random_sample(rng, 10, {"a", "{", "r1", "r2", "}"}),
                                    random_sample(rng, 7, {"r3"})};
  const auto prepared = prepare_samples(samples, model->vocab(), model->config().resample_spacing);
  std::vector<const PreparedSample*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  const Batch batch = make_batch(ptrs);
  {
    num::Graph g;
    const Var loss = sequence_loss(g, *model, batch);
    model->params().zero_grad();
    g.backward(loss);
  }
  const double err = testing::worst_gradient_error(model->params(), [&] {
    num::Graph g(false);
    return sequence_loss(g, *model, batch).value().item();
  }, 1e-4);
  MESSAGE("worst relative error " << err);
  CHECK(err < 1e-4);
}

TEST_CASE("model save and load") {
  testing::TempDir dir("model");
  const auto model = tiny_model(4);
  model->save(dir / "m.bin", {{"note", "x"}});
  const auto back = Model::load(dir / "m.bin");
  CHECK(back->vocab() == model->vocab());
  CHECK(back->config().to_json() == model->config().to_json());
  REQUIRE(back->params().size() == model->params().size());
  for (std::size_t i = 0; i < model->params().size(); ++i) {
    CHECK(back->params()[i].value.mat() == model->params()[i].value.mat());
  }
  CHECK_THROWS(Model::load(dir / "absent.bin"));
}

TEST_CASE("initialization is seeded") {
  const auto a = tiny_model(9), b = tiny_model(9), c = tiny_model(10);
  CHECK(a->params()[0].value.mat() == b->params()[0].value.mat());
  CHECK(a->params()[0].value.mat() != c->params()[0].value.mat());
  for (const auto& p : a->params()) CHECK(p->value.mat().cwiseAbs().maxCoeff() <= 0.08);
}
