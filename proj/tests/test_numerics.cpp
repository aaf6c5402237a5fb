#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "hagen/autodiff.hpp"
#include "hagen/errors.hpp"
#include "hagen/gradcheck.hpp"
#include "test_support.hpp"

namespace hagen {
namespace {

using test::naive_matmul;

TEST(Matmul, IdentityAndHandExample) {
  Tape t;
  Tensor b = Tensor::from_rows({{1, 2}, {3, 4}});
  EXPECT_TRUE(identical(matmul(t.constant(Tensor::identity(2)), t.constant(b)).value(), b));
  Var c = matmul(t.constant(b), t.constant(Tensor::from_rows({{1}, {1}})));
  EXPECT_EQ(c.value().at(0, 0), 3.0);
  EXPECT_EQ(c.value().at(1, 0), 7.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(7);
  for (int s = 0; s < 10; ++s) {
    Tensor a = normal_tensor({3, 4}, 1.0, rng), b = normal_tensor({4, 2}, 1.0, rng);
    Tape t;
    EXPECT_LT(max_abs_diff(matmul(t.constant(a), t.constant(b)).value(), naive_matmul(a, b)), 1e-12);
  }
  // Large enough to take the blocked/threaded path.
  Tensor a = normal_tensor({130, 70}, 1.0, rng), b = normal_tensor({70, 90}, 1.0, rng);
  EXPECT_LT(max_abs_diff(kernels::matmul(a, b), naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape t;
  try {
    matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({2, 3})));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, Associative) {
  Rng rng(11);
  for (int s = 0; s < 20; ++s) {
    Tensor a = normal_tensor({4, 5}, 1.0, rng), b = normal_tensor({5, 3}, 1.0, rng), c = normal_tensor({3, 6}, 1.0, rng);
    EXPECT_LT(max_abs_diff(kernels::matmul(kernels::matmul(a, b), c), kernels::matmul(a, kernels::matmul(b, c))), 1e-9);
  }
}

TEST(Elementwise, AnalyticValues) {
  Tape t;
  EXPECT_EQ(tanh(t.constant(Tensor::scalar(0.0))).value()[0], 0.0);
  EXPECT_EQ(relu(t.constant(Tensor::scalar(-1.0))).value()[0], 0.0);
  EXPECT_EQ(sigmoid(t.constant(Tensor::scalar(0.0))).value()[0], 0.5);
  Var h = hadamard(t.constant(Tensor::vector({1, 2})), t.constant(Tensor::vector({3, 4})));
  EXPECT_EQ(h.value()[0], 3.0);
  EXPECT_EQ(h.value()[1], 8.0);
}

TEST(Elementwise, TanhAgainstExponentialForm) {
  const double x = 0.58002;
  const double e2x = std::exp(2 * x);
  Tape t;
  const double v = tanh(t.constant(Tensor::scalar(x))).value()[0];
  EXPECT_NEAR(v, 0.52267, 1e-5);
  EXPECT_NEAR(v, (e2x - 1) / (e2x + 1), 1e-15);
}

TEST(Elementwise, BinaryShapeMismatchThrows) {
  Tape t;
  EXPECT_THROW(add(t.constant(Tensor({2})), t.constant(Tensor({3}))), DimensionError);
  EXPECT_THROW(hadamard(t.constant(Tensor({2, 2})), t.constant(Tensor({4}))), DimensionError);
  EXPECT_THROW(sub(t.constant(Tensor({1, 2})), t.constant(Tensor({2, 1}))), DimensionError);
}

TEST(Elementwise, ReluGradientAtZeroIsZero) {
  Tape t;
  Tensor x = Tensor::vector({-1.0, 0.0, 2.0});
  x.set_grad_enabled(true);
  Var v = t.input(x);
  t.backward(sum(relu(v)));
  Tensor g = t.grad(v);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 1.0);
}

TEST(Softmax, Examples) {
  Tape t;
  Var u = softmax_rows(t.constant(Tensor::from_rows({{0, 0, 0}})));
  for (double v : u.value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Var q = softmax_rows(t.constant(Tensor::from_rows({{0, std::log(3.0)}})));
  EXPECT_NEAR(q.value()[0], 0.25, 1e-15);
  EXPECT_NEAR(q.value()[1], 0.75, 1e-15);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Rng rng(3);
  for (int s = 0; s < 20; ++s) {
    Tensor x = normal_tensor({4, 6}, 5.0, rng);
    Tensor shifted = x;
    for (double& v : shifted.values()) v += 1000.0;
    Tape t;
    Tensor a = softmax_rows(t.constant(x)).value();
    Tensor b = softmax_rows(t.constant(shifted)).value();
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        EXPECT_GE(a.at(i, j), 0.0);
        EXPECT_LE(a.at(i, j), 1.0);
        row += a.at(i, j);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(Backward, LinearAndQuadratic) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor::vector({1.0, 2.0}));
  {
    Tape t;
    t.backward(sum(t.parameter(w)));
  }
  EXPECT_EQ(w.grad[0], 1.0);
  EXPECT_EQ(w.grad[1], 1.0);
  w.zero_grad();
  for (double g : w.grad.values()) EXPECT_EQ(g, 0.0);
  {
    Tape t;
    Var v = t.parameter(w);
    t.backward(sum(hadamard(v, v)));
  }
  EXPECT_EQ(w.grad[0], 2.0);
  EXPECT_EQ(w.grad[1], 4.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor::vector({1.0, 2.0}));
  Tape t;
  EXPECT_THROW(t.backward(t.parameter(w)), ContractError);
}

TEST(Backward, TwiceWithoutZeroGradDoubles) {
  Rng rng(5);
  ParameterSet ps;
  auto& a = ps.add("a", normal_tensor({3, 4}, 1.0, rng));
  auto& b = ps.add("b", normal_tensor({4, 2}, 1.0, rng));
  auto loss = [&](Tape& t) { return sum(tanh(matmul(t.parameter(a), t.parameter(b)))); };
  {
    Tape t;
    t.backward(loss(t));
  }
  const Tensor once_a = a.grad, once_b = b.grad;
  {
    Tape t;
    t.backward(loss(t));
  }
  for (std::size_t i = 0; i < a.grad.size(); ++i) EXPECT_EQ(a.grad[i], 2.0 * once_a[i]);
  for (std::size_t i = 0; i < b.grad.size(); ++i) EXPECT_EQ(b.grad[i], 2.0 * once_b[i]);
}

TEST(Parameter, GradShapeMatches) {
  Parameter p("p", Tensor({2, 3}, 1.5));
  EXPECT_EQ(p.grad.shape(), p.value.shape());
  ParameterSet ps;
  ps.add("x", Tensor({2}));
  EXPECT_THROW(ps.add("x", Tensor({2})), ContractError);
}

TEST(FiniteDiff, Examples) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor::scalar(3.0));
  auto all = ps.all();
  auto g = finite_diff_grad([&] { return w.value[0] * w.value[0]; }, all, 1e-5);
  EXPECT_NEAR(g[0][0], 6.0, 1e-5);
  auto z = finite_diff_grad([] { return 4.0; }, all, 1e-6);
  EXPECT_EQ(z[0][0], 0.0);
  EXPECT_EQ(w.value[0], 3.0);
}

TEST(FiniteDiff, RejectsBadEpsAndNondeterminism) {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  auto all = ps.all();
  EXPECT_THROW(finite_diff_grad([] { return 0.0; }, all, 1e-3), ContractError);
  EXPECT_THROW(finite_diff_grad([] { return 0.0; }, all, 1e-9), ContractError);
  int calls = 0;
  EXPECT_THROW(finite_diff_grad([&] { return static_cast<double>(++calls); }, all, 1e-6), ContractError);
}

// Every differentiable op against central differences on random small shapes.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> ext(1, 8);
  const std::size_t m = ext(rng), k = ext(rng), n = ext(rng);
  ParameterSet ps;
  auto& a = ps.add("a", normal_tensor({m, k}, 1.0, rng));
  auto& b = ps.add("b", normal_tensor({k, n}, 1.0, rng));
  auto& c = ps.add("c", normal_tensor({m, k}, 1.0, rng));
  auto& bias = ps.add("bias", normal_tensor({k}, 1.0, rng));
  auto& v = ps.add("v", normal_tensor({m}, 1.0, rng));
  auto& pos = ps.add("pos", uniform_tensor({m, k}, 0.1, 1.0, rng));
  const Tensor w_mk = normal_tensor({m, k}, 1.0, rng);
  const Tensor w_mn = normal_tensor({m, n}, 1.0, rng);
  const Tensor targets = test::binary_tensor({m, k}, rng);
  auto all = ps.all();

  auto probe = [](Var x, const Tensor& w) { return sum(hadamard(x, x.tape().constant(w))); };
  const std::vector<std::pair<std::string, std::function<Var(Tape&)>>> cases = {
      {"matmul", [&](Tape& t) { return probe(matmul(t.parameter(a), t.parameter(b)), w_mn); }},
      {"transpose", [&](Tape& t) { return probe(transpose(transpose(t.parameter(a))), w_mk); }},
      {"add", [&](Tape& t) { return probe(add(t.parameter(a), t.parameter(c)), w_mk); }},
      {"sub", [&](Tape& t) { return probe(sub(t.parameter(a), t.parameter(c)), w_mk); }},
      {"hadamard", [&](Tape& t) { return probe(hadamard(t.parameter(a), t.parameter(c)), w_mk); }},
      {"scale", [&](Tape& t) { return probe(scale(t.parameter(a), -1.7), w_mk); }},
      {"add_scalar", [&](Tape& t) { return probe(add_scalar(t.parameter(a), 0.3), w_mk); }},
      {"rsub_scalar", [&](Tape& t) { return probe(rsub_scalar(2.0, t.parameter(a)), w_mk); }},
      {"tanh", [&](Tape& t) { return probe(tanh(t.parameter(a)), w_mk); }},
      {"relu", [&](Tape& t) { return probe(relu(t.parameter(a)), w_mk); }},
      {"sigmoid", [&](Tape& t) { return probe(sigmoid(t.parameter(a)), w_mk); }},
      {"softmax_rows", [&](Tape& t) { return probe(softmax_rows(t.parameter(a)), w_mk); }},
      {"reshape", [&](Tape& t) { return probe(reshape(reshape(t.parameter(a), {m * k}), {m, k}), w_mk); }},
      {"concat_slice",
       [&](Tape& t) {
         Var cat = concat_cols(std::vector<Var>{t.parameter(a), t.parameter(c)});
         return probe(add(slice_cols(cat, 0, k), scale(slice_cols(cat, k, 2 * k), 2.0)), w_mk);
       }},
      {"gather",
       [&](Tape& t) {
         std::vector<std::size_t> idx(m * k);
         for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = (i * 7 + 3) % (m * k);
         return probe(gather(t.parameter(a), idx, {m, k}), w_mk);
       }},
      {"add_row_vector", [&](Tape& t) { return probe(add_row_vector(t.parameter(a), t.parameter(bias)), w_mk); }},
      {"scale_rows", [&](Tape& t) { return probe(scale_rows(t.parameter(a), t.parameter(v)), w_mk); }},
      {"row_normalize", [&](Tape& t) { return probe(row_normalize(t.parameter(pos)), w_mk); }},
      {"bce_sum", [&](Tape& t) { return bce_sum(sigmoid(t.parameter(a)), targets); }},
  };
  for (const auto& [name, fn] : cases) {
    auto r = check_gradients(fn, all);
    EXPECT_LT(r.max_rel_error, 1e-4) << name << " seed " << seed << " worst " << r.worst_param;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 20));

TEST(RowNormalize, ZeroRowsStayZero) {
  Tape t;
  Var r = row_normalize(t.constant(Tensor::from_rows({{0, 0}, {1, 3}})));
  EXPECT_EQ(r.value().at(0, 0), 0.0);
  EXPECT_EQ(r.value().at(0, 1), 0.0);
  EXPECT_EQ(r.value().at(1, 0), 0.25);
}

TEST(Tensor, ShapeInvariant) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), DimensionError);
  Tensor t({2, 3}, 1.0);
  EXPECT_EQ(t.size(), shape_numel(t.shape()));
  EXPECT_THROW(t.reshaped({4}), DimensionError);
}

TEST(Kernels, ThreadCapDoesNotChangeResults) {
  Rng rng(9);
  Tensor a = normal_tensor({200, 64}, 1.0, rng), b = normal_tensor({64, 150}, 1.0, rng);
  const unsigned before = kernels::max_threads();
  kernels::set_max_threads(1);
  Tensor one = kernels::matmul(a, b);
  kernels::set_max_threads(4);
  Tensor four = kernels::matmul(a, b);
  kernels::set_max_threads(before);
  EXPECT_LT(max_abs_diff(one, four), 1e-12);
}

}  // namespace
}  // namespace hagen
