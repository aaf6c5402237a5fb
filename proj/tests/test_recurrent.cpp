#include <cmath>

#include <gtest/gtest.h>

#include "hagen/errors.hpp"
#include "hagen/gradcheck.hpp"
#include "hagen/recurrent.hpp"
#include "test_support.hpp"

namespace hagen {
namespace {

struct Fixture {
  std::size_t n, f, h, m;
  Rng rng;
  ParameterSet ps;
  DcgruParams layer;
  Tensor adj;
  Tensor dw;

  Fixture(std::size_t n_, std::size_t f_, std::size_t h_, std::uint64_t seed, std::size_t m_ = 2)
      : n(n_), f(f_), h(h_), m(m_), rng(seed) {
    layer = init_dcgru(ps, "cell", f, h, m, rng);
    adj = uniform_tensor({n, n}, 0.0, 1.0, rng);
    dw = uniform_tensor({n}, 0.1, 0.9, rng);
  }

  void zero_all() {
    for (Parameter* p : ps.all()) p->value.fill(0.0);
  }
};

// Separate diffusion convolutions per gate, as in the update block.
Tensor cell_oracle(const Tensor& x, const Tensor& hp, const DcgruParams& p, const Tensor& adj, const Tensor& dw,
                   std::size_t m) {
  Tape t;
  auto ts = transition_matrices(t.constant(adj), m);
  Var d = t.constant(dw);
  Var xv = t.constant(x), hv = t.constant(hp);
  auto conv = [&](Var in, const Parameter* theta, const Parameter* bias) {
    return add_row_vector(diffusion_conv(in, ts, t.constant(theta->value), d), t.constant(bias->value));
  };
  const Var xh[] = {xv, hv};
  Var r = sigmoid(conv(concat_cols(xh), p.theta_r, p.b_r));
  Var u = sigmoid(conv(concat_cols(xh), p.theta_u, p.b_u));
  const Var xrh[] = {xv, hadamard(r, hv)};
  Var c = tanh(conv(concat_cols(xrh), p.theta_c, p.b_c));
  Tensor out = hp;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double uu = u.value()[i];
    out[i] = uu * hp[i] + (1.0 - uu) * c.value()[i];
  }
  return out;
}

Tensor run_cell(Fixture& fx, const Tensor& x, const Tensor& hp) {
  Tape t;
  auto ts = transition_matrices(t.constant(fx.adj), fx.m);
  return dcgru_cell(t.constant(x), t.constant(hp), bind(t, fx.layer), ts, t.constant(fx.dw)).value();
}

TEST(DcgruCell, ZeroWeightsHalveHidden) {
  Fixture fx(3, 2, 2, 1);
  fx.zero_all();
  Tensor x = normal_tensor({3, 2}, 1.0, fx.rng), hp = normal_tensor({3, 2}, 1.0, fx.rng);
  Tensor out = run_cell(fx, x, hp);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.5 * hp[i]);
  Tensor zero = run_cell(fx, x, Tensor({3, 2}, 0.0));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(DcgruCell, MatchesStepOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture fx(3, 2, 2, seed);
    for (Parameter* p : fx.ps.all())
      if (p->name.find("bias") != std::string::npos) p->value = normal_tensor(p->value.shape(), 1.0, fx.rng);
    Tensor x = normal_tensor({3, 2}, 1.0, fx.rng), hp = uniform_tensor({3, 2}, -1.0, 1.0, fx.rng);
    EXPECT_LT(max_abs_diff(run_cell(fx, x, hp), cell_oracle(x, hp, fx.layer, fx.adj, fx.dw, fx.m)), 1e-10);
  }
}

TEST(DcgruCell, InitialBiases) {
  Fixture fx(3, 2, 4, 2);
  for (double v : fx.layer.b_r->value.values()) EXPECT_EQ(v, 1.0);
  for (double v : fx.layer.b_u->value.values()) EXPECT_EQ(v, 1.0);
  for (double v : fx.layer.b_c->value.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(fx.layer.theta_r->value.shape(), (Shape{6, 4, 3, 2}));
}

TEST(DcgruCell, ShapeMismatch) {
  Fixture fx(3, 2, 2, 3);
  EXPECT_THROW(run_cell(fx, Tensor({3, 3}), Tensor({3, 2})), DimensionError);
  EXPECT_THROW(run_cell(fx, Tensor({3, 2}), Tensor({3, 3})), DimensionError);
}

TEST(EncodeSequence, SingleStepIsOneCellPerLayer) {
  Fixture fx(4, 3, 2, 4);
  auto second = init_dcgru(fx.ps, "second", 2, 2, fx.m, fx.rng);
  Tensor x = test::binary_tensor({4, 3}, fx.rng);
  Tape t;
  auto ts = transition_matrices(t.constant(fx.adj), fx.m);
  Var d = t.constant(fx.dw);
  std::vector<DcgruVars> layers{bind(t, fx.layer), bind(t, second)};
  std::vector<Var> in{t.constant(x)};
  Tensor enc = encode_sequence(in, layers, ts, d).value();
  Var zero = t.constant(Tensor({4, 2}, 0.0));
  Var h1 = dcgru_cell(t.constant(x), zero, layers[0], ts, d);
  Var h2 = dcgru_cell(h1, zero, layers[1], ts, d);
  EXPECT_TRUE(identical(enc, h2.value()));
}

TEST(EncodeSequence, MatchesUnrolledComposition) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture fx(4, 3, 3, 10 + seed);
    auto second = init_dcgru(fx.ps, "second", 3, 3, fx.m, fx.rng);
    std::vector<Tensor> xs;
    for (int k = 0; k < 3; ++k) xs.push_back(test::binary_tensor({4, 3}, fx.rng));
    Tape t;
    auto ts = transition_matrices(t.constant(fx.adj), fx.m);
    Var d = t.constant(fx.dw);
    std::vector<DcgruVars> layers{bind(t, fx.layer), bind(t, second)};
    std::vector<Var> in;
    for (const auto& x : xs) in.push_back(t.constant(x));
    Tensor enc = encode_sequence(in, layers, ts, d).value();

    Tensor a = Tensor({4, 3}, 0.0), b = Tensor({4, 3}, 0.0);
    for (const auto& x : xs) {
      a = cell_oracle(x, a, fx.layer, fx.adj, fx.dw, fx.m);
      b = cell_oracle(a, b, second, fx.adj, fx.dw, fx.m);
    }
    EXPECT_LT(max_abs_diff(enc, b), 1e-10);
  }
}

TEST(EncodeSequence, ZeroInputsAndWeightsGiveZero) {
  Fixture fx(3, 2, 2, 5);
  fx.zero_all();
  Tape t;
  auto ts = transition_matrices(t.constant(fx.adj), fx.m);
  std::vector<DcgruVars> layers{bind(t, fx.layer)};
  std::vector<Var> in(3, t.constant(Tensor({3, 2}, 0.0)));
  for (double v : encode_sequence(in, layers, ts, t.constant(fx.dw)).value().values()) EXPECT_EQ(v, 0.0);
}

TEST(EncodeSequence, EmptyWindowIsContractError) {
  Fixture fx(3, 2, 2, 6);
  Tape t;
  auto ts = transition_matrices(t.constant(fx.adj), fx.m);
  std::vector<DcgruVars> layers{bind(t, fx.layer)};
  EXPECT_THROW(encode_sequence({}, layers, ts, t.constant(fx.dw)), ContractError);
}

TEST(EncodeSequence, HiddenStaysInUnitBox) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Fixture fx(5, 3, 4, 100 + seed);
    for (Parameter* p : fx.ps.all()) p->value = normal_tensor(p->value.shape(), 3.0, fx.rng);
    Tape t;
    auto ts = transition_matrices(t.constant(fx.adj), fx.m);
    std::vector<DcgruVars> layers{bind(t, fx.layer)};
    Var h = t.constant(Tensor({5, 4}, 0.0));
    for (int k = 0; k < 6; ++k) {
      h = dcgru_cell(t.constant(normal_tensor({5, 3}, 5.0, fx.rng)), h, layers[0], ts, t.constant(fx.dw));
      for (double v : h.value().values()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(EncodeSequence, Deterministic) {
  Fixture a(4, 3, 3, 77), b(4, 3, 3, 77);
  Tensor x = test::binary_tensor({4, 3}, a.rng);
  EXPECT_TRUE(identical(run_cell(a, x, Tensor({4, 3}, 0.0)), run_cell(b, x, Tensor({4, 3}, 0.0))));
}

TEST(EncodeSequence, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture fx(4, 2, 3, 200 + seed);
    auto dir = init_direction_weights(fx.ps, 4);
    fx.ps.get("direction.raw").value = normal_tensor({4}, 1.0, fx.rng);
    auto& a = fx.ps.add("adjacency", uniform_tensor({4, 4}, 0.05, 1.0, fx.rng));
    std::vector<Tensor> xs;
    for (int k = 0; k < 3; ++k) xs.push_back(test::binary_tensor({4, 2}, fx.rng));
    Tensor w = normal_tensor({4, 3}, 1.0, fx.rng);
    auto all = fx.ps.all();
    auto r = check_gradients(
        [&](Tape& t) {
          auto ts = transition_matrices(t.parameter(a), fx.m);
          std::vector<DcgruVars> layers{bind(t, fx.layer)};
          std::vector<Var> in;
          for (const auto& x : xs) in.push_back(t.constant(x));
          return sum(hadamard(encode_sequence(in, layers, ts, dir.effective(t)), t.constant(w)));
        },
        all);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
  }
}

}  // namespace
}  // namespace hagen
