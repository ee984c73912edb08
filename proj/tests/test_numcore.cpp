#include "radseq/numcore/checkpoint.hpp"
#include "radseq/numcore/ops.hpp"
#include "radseq/numcore/optim.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace radseq;
using namespace radseq::num;
using radseq::testing::op_gradient_error;
using radseq::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("tensor shapes") {
  Shape s{2, 3, 4};
  CHECK(s.rank() == 3);
  CHECK(s.rows() == 6);
  CHECK(s.cols() == 4);
  CHECK(s.numel() == 24);
  CHECK(s.str() == "[2x3x4]");
  Tensor t(s);
  CHECK(t.mat().rows() == 6);
  CHECK_THROWS_AS(Shape({1, 2, 3, 4}), ShapeError);
  Tensor r = t.reshaped({4, 6});
  CHECK(r.shape().rows() == 4);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("forward op examples") {
  Graph g(false);
  CHECK(softmax(g.constant(mat({{0, 0}}))).mat().isApprox(mat({{0.5, 0.5}})));
  CHECK(maxout(g.constant(mat({{1, -2, 3, 0}})), 2).mat() == mat({{1, 3}}));
  Var zero = g.constant(Matrix::Zero(2, 7));
  std::mt19937_64 rng(1);
  Var kernel = g.constant(random_matrix(5, 3, rng));
  CHECK(conv1d(zero, kernel).mat().isZero(0.0));
  CHECK(conv1d(zero, kernel).shape().rows() == 14);

  const Matrix sm = softmax(g.constant(mat({{1, 2, 3}, {-5, 0, 40}})), 1).mat();
  for (Eigen::Index r = 0; r < 2; ++r) CHECK(std::abs(sm.row(r).sum() - 1.0) < 1e-12);
  const Matrix sc = softmax(g.constant(mat({{1, 2}, {3, 4}, {5, 6}})), 0).mat();
  for (Eigen::Index c = 0; c < 2; ++c) CHECK(std::abs(sc.col(c).sum() - 1.0) < 1e-12);
  CHECK((sm.array() >= 0.0).all());

  const Matrix ms = masked_softmax(g.constant(mat({{3, 1, 2}})), mat({{1, 0, 1}})).mat();
  CHECK(ms(0, 1) == 0.0);
  CHECK(ms(0, 0) + ms(0, 2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(masked_softmax(g.constant(mat({{1, 2}})), mat({{0, 0}})), ShapeError);
}

TEST_CASE("conv1d matches a direct cross-correlation") {
  std::mt19937_64 rng(4);
  const Matrix x = random_matrix(2, 6, rng), q = random_matrix(3, 2, rng);
  Graph g(false);
  const Matrix y = conv1d(g.constant(x), g.constant(q)).mat();
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 6; ++i) {
      for (int f = 0; f < 2; ++f) {
        double want = 0.0;
        for (int j = -1; j <= 1; ++j) {
          if (i + j >= 0 && i + j < 6) want += q(j + 1, f) * x(b, i + j);
        }
        CHECK(y(b * 6 + i, f) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("shape errors name both operands") {
  Graph g(false);
  Var a = g.constant(Matrix::Zero(2, 3));
  Var b = g.constant(Matrix::Zero(2, 4));
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x4]"), ShapeError);
  CHECK_THROWS_AS(embed(g.constant(Matrix::Zero(3, 2)), std::vector<int>{3}), std::out_of_range);
}

TEST_CASE("backward examples") {
  ParameterSet ps;
  auto& x = ps.add("x", {1, 1});
  x.value.mat()(0, 0) = 3.0;
  {
    Graph g;
    Var v = g.param(x);
    g.backward(sum(mul(v, v)));
  }
  CHECK(x.grad.mat()(0, 0) == doctest::Approx(6.0));

  auto& logits = ps.add("logits", {1, 4});
  auto& unused = ps.add("unused", {2, 2});
  ps.zero_grad();
  {
    Graph g;
    const int target[] = {3};
    Var loss = scale(sum(pick(log_softmax(g.param(logits)), target)), -1.0);
    g.param(unused);
    g.backward(loss);
  }
  const Matrix want = mat({{0.25, 0.25, 0.25, -0.75}});
  CHECK(logits.grad.mat().isApprox(want, 1e-12));
  CHECK(unused.grad.mat().isZero(0.0));

  Graph g;
  CHECK_THROWS_AS(g.backward(g.param(unused)), ShapeError);
  Graph frozen(false);
  CHECK_THROWS(frozen.backward(sum(frozen.param(x))));
}

TEST_CASE("every op passes a finite-difference check") {
  std::mt19937_64 rng(17);
  auto R = [&](Eigen::Index r, Eigen::Index c) { return random_matrix(r, c, rng); };
  const double tol = 1e-6;
  CHECK(op_gradient_error({R(3, 4), R(4, 2)}, [](Graph&, const std::vector<Var>& v) { return matmul(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 4), R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return add(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 4), R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return sub(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 4), R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return mul(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 4), R(1, 4)}, [](Graph&, const std::vector<Var>& v) { return add_row(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return scale(v[0], -2.5); }) < tol);
  const Matrix c = R(3, 4);
  CHECK(op_gradient_error({R(3, 4)}, [&](Graph&, const std::vector<Var>& v) { return mul_const(v[0], c); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return sigmoid(v[0]); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return num::tanh(v[0]); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return softmax(v[0], 1); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return softmax(v[0], 0); }) < tol);
  const Matrix mask = mat({{1, 1, 0, 1}, {0, 1, 1, 1}, {1, 0, 0, 0}});
  CHECK(op_gradient_error({R(3, 4)}, [&](Graph&, const std::vector<Var>& v) { return masked_softmax(v[0], mask); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return log_softmax(v[0]); }) < tol);
  CHECK(op_gradient_error({R(2, 3), R(1, 3), R(4, 3)}, [](Graph&, const std::vector<Var>& v) { return concat(v, 0); }) < tol);
  CHECK(op_gradient_error({R(3, 2), R(3, 1)}, [](Graph&, const std::vector<Var>& v) { return concat(v, 1); }) < tol);
  CHECK(op_gradient_error({R(5, 4)}, [](Graph&, const std::vector<Var>& v) { return slice(v[0], 0, 1, 3); }) < tol);
  CHECK(op_gradient_error({R(5, 4)}, [](Graph&, const std::vector<Var>& v) { return slice(v[0], 1, 2, 2); }) < tol);
  CHECK(op_gradient_error({R(4, 3)}, [](Graph&, const std::vector<Var>& v) { return reshape(v[0], {2, 6}); }) < tol);
  const std::vector<int> idx{2, 0, 2, 1};
  CHECK(op_gradient_error({R(3, 4)}, [&](Graph&, const std::vector<Var>& v) { return gather_rows(v[0], idx); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [&](Graph&, const std::vector<Var>& v) { return embed(v[0], idx); }) < tol);
  CHECK(op_gradient_error({R(2, 3)}, [](Graph&, const std::vector<Var>& v) { return repeat_rows(v[0], 3); }) < tol);
  CHECK(op_gradient_error({R(2, 3), R(6, 4)}, [](Graph&, const std::vector<Var>& v) { return weighted_sum(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(4, 3)}, [&](Graph&, const std::vector<Var>& v) { return pick(v[0], std::vector<int>{0, 2, 1, 2}); }) < tol);
  CHECK(op_gradient_error({R(3, 4)}, [](Graph&, const std::vector<Var>& v) { return sum(v[0]); }) < tol);
  CHECK(op_gradient_error({R(2, 7), R(5, 3)}, [](Graph&, const std::vector<Var>& v) { return conv1d(v[0], v[1]); }) < tol);
  CHECK(op_gradient_error({R(3, 6)}, [](Graph&, const std::vector<Var>& v) { return maxout(v[0], 2); }) < tol);
}

TEST_CASE("adadelta") {
  AdadeltaConfig cfg;
  SUBCASE("first step with g = 1") {
    std::vector<double> x{0.0}, g{1.0}, msg{0.0}, msu{0.0};
    adadelta_update(x, g, msg, msu, cfg);
    // Hand evaluation: E[g^2] = 0.05, dx = -sqrt(1e-8) / sqrt(0.05 + 1e-8).
    const double eg = 0.05;
    const double dx = -std::sqrt(1e-8) / std::sqrt(eg + 1e-8);
    CHECK(x[0] == doctest::Approx(dx).epsilon(1e-12));
    CHECK(x[0] == doctest::Approx(-4.4721e-4).epsilon(1e-4));
    CHECK(msg[0] == doctest::Approx(eg));
    CHECK(msu[0] == doctest::Approx(0.05 * dx * dx));
  }
  SUBCASE("scale-free first step") {
    std::vector<double> x1{0.0}, g1{1.0}, a1{0.0}, b1{0.0};
    std::vector<double> x2{0.0}, g2{10.0}, a2{0.0}, b2{0.0};
    adadelta_update(x1, g1, a1, b1, cfg);
    adadelta_update(x2, g2, a2, b2, cfg);
    CHECK(std::abs(x1[0]) == doctest::Approx(std::abs(x2[0])).epsilon(1e-5));
  }
  SUBCASE("zero gradient leaves parameters alone and state nonnegative") {
    ParameterSet ps;
    std::mt19937_64 rng(1);
    auto& p = ps.add("w", {3, 3});
    init_uniform(p.value, 0.08, rng);
    const Matrix before = p.value.mat();
    AdadeltaState st(ps, cfg);
    for (int i = 0; i < 3; ++i) adadelta_step(ps, st);
    CHECK(p.value.mat() == before);
    CHECK((st.mean_sq_grad[0].array() >= 0.0).all());
    CHECK((st.mean_sq_update[0].array() >= 0.0).all());
  }
  SUBCASE("bad hyperparameters") {
    ParameterSet ps;
    CHECK_THROWS(AdadeltaState(ps, {1.5, 1e-8}));
    CHECK_THROWS(AdadeltaState(ps, {0.95, 0.0}));
  }
}

TEST_CASE("gradient clipping") {
  ParameterSet ps;
  auto& a = ps.add("a", {1, 2});
  auto& b = ps.add("b", {2});
  auto set = [&](double s) {
    a.grad.mat() = mat({{3 * s, 0}});
    b.grad.mat() = mat({{0, 4 * s}});
  };
  set(1.0);
  CHECK(clip_gradients(ps, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad.mat()(0, 0) == 3.0);
  set(4.0);
  CHECK(clip_gradients(ps, 10.0) == doctest::Approx(20.0));
  CHECK(a.grad.mat()(0, 0) == doctest::Approx(6.0));
  CHECK(b.grad.mat()(0, 1) == doctest::Approx(8.0));
  CHECK(global_grad_norm(ps) <= 10.0 + 1e-12);
  const Matrix once = a.grad.mat();
  clip_gradients(ps, 10.0);
  CHECK(a.grad.mat().isApprox(once));
  ps.zero_grad();
  CHECK(clip_gradients(ps, 1.0) == 0.0);
  CHECK(a.grad.mat().isZero(0.0));
  CHECK_THROWS(clip_gradients(ps, 0.0));
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  ParameterSet ps;
  std::mt19937_64 rng(3);
  auto& w = ps.add("layer.w", {3, 4});
  auto& b = ps.add("layer.b", {4});
  init_uniform(w.value, 1.0, rng);
  init_uniform(b.value, 1.0, rng);
  save_checkpoint(dir / "c.bin", ps, {{"seed", 3}, {"note", "x"}});

  std::ifstream in(dir / "c.bin", std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::equal(magic, magic + 8, kCheckpointMagic));

  const auto header = read_checkpoint_header(dir / "c.bin");
  CHECK(header.at("dtype") == "float64");
  CHECK(header.at("seed") == 3);
  CHECK(header.at("tensors").size() == 2);

  ParameterSet other;
  other.add("layer.w", {3, 4});
  other.add("layer.b", {4});
  load_checkpoint(dir / "c.bin", other);
  CHECK(other.at("layer.w").value.mat() == w.value.mat());
  CHECK(other.at("layer.b").value.mat() == b.value.mat());

  ParameterSet wrong;
  wrong.add("layer.w", {4, 3});
  wrong.add("layer.b", {4});
  CHECK_THROWS_AS(load_checkpoint(dir / "c.bin", wrong), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint_header(dir / "missing.bin"), CheckpointError);
  {
    std::ofstream junk(dir / "junk.bin", std::ios::binary);
    junk << "not a checkpoint";
  }
  CHECK_THROWS_AS(read_checkpoint_header(dir / "junk.bin"), CheckpointError);
  CHECK(file_hash(dir / "c.bin") == file_hash(dir / "c.bin"));
}
