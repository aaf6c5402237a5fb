#include <cmath>

#include <gtest/gtest.h>

#include "hagen/diffusion.hpp"
#include "hagen/errors.hpp"
#include "hagen/gradcheck.hpp"
#include "test_support.hpp"

namespace hagen {
namespace {

using test::naive_matmul;

// D^-1 A with zero-degree rows left at zero.
Tensor normalize_oracle(const Tensor& a) {
  Tensor s = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) deg += a.at(i, j);
    for (std::size_t j = 0; j < a.cols(); ++j) s.at(i, j) = deg > 0.0 ? a.at(i, j) / deg : 0.0;
  }
  return s;
}

Tensor power_oracle(const Tensor& s, std::size_t m) {
  Tensor p = Tensor::identity(s.rows());
  for (std::size_t k = 0; k < m; ++k) p = naive_matmul(p, s);
  return p;
}

double filter_at(const Tensor& theta, std::size_t h, std::size_t o, std::size_t m, std::size_t dir) {
  const auto& s = theta.shape();
  return theta[((h * s[1] + o) * s[2] + m) * 2 + dir];
}

// Explicit summation over steps, nodes and channels.
Tensor conv_oracle(const Tensor& x, const Tensor& a, const Tensor& theta, const Tensor& dw, std::size_t max_step) {
  const std::size_t n = x.rows(), in = x.cols(), out = theta.shape()[1];
  const Tensor so = normalize_oracle(a);
  Tensor at({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) at.at(i, j) = a.at(j, i);
  const Tensor sin = normalize_oracle(at);
  Tensor y({n, out}, 0.0);
  for (std::size_t m = 0; m <= max_step; ++m) {
    const Tensor fo = power_oracle(so, m), fi = power_oracle(sin, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t h = 0; h < in; ++h) {
            acc += fo.at(i, j) * x.at(j, h) * filter_at(theta, h, o, m, 0);
            acc += dw[i] * fi.at(i, j) * x.at(j, h) * filter_at(theta, h, o, m, 1);
          }
        y.at(i, o) += acc;
      }
  }
  return y;
}

TEST(Transitions, SingleEdgeExample) {
  Tape t;
  auto ts = transition_matrices(t.constant(Tensor::from_rows({{0, 2}, {0, 0}})), 1);
  EXPECT_TRUE(identical(ts.forward[1].value(), Tensor::from_rows({{0, 1}, {0, 0}})));
  EXPECT_TRUE(identical(ts.backward[1].value(), Tensor::from_rows({{0, 0}, {1, 0}})));
  EXPECT_TRUE(identical(ts.forward[0].value(), Tensor::identity(2)));
  EXPECT_TRUE(identical(ts.backward[0].value(), Tensor::identity(2)));
}

TEST(Transitions, PowersMatchRepeatedMultiplication) {
  Rng rng(31);
  for (int s = 0; s < 10; ++s) {
    Tensor a = uniform_tensor({5, 5}, 0.0, 1.0, rng);
    Tape t;
    auto ts = transition_matrices(t.constant(a), 3);
    const Tensor f1 = normalize_oracle(a);
    EXPECT_LT(max_abs_diff(ts.forward[1].value(), f1), 1e-12);
    EXPECT_LT(max_abs_diff(ts.forward[3].value(), naive_matmul(naive_matmul(f1, f1), f1)), 1e-10);
  }
}

TEST(Transitions, RowStochasticOnNonzeroRows) {
  Rng rng(32);
  for (int s = 0; s < 50; ++s) {
    const std::size_t n = 2 + s % 9;
    Tensor a = test::random_graph(n, rng, 0.3);
    Tape t;
    auto ts = transition_matrices(t.constant(a), 2);
    for (const Tensor* m : {&ts.forward[1].value(), &ts.backward[1].value()}) {
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, abs_row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          row += m->at(i, j);
          abs_row += std::abs(m->at(i, j));
        }
        if (abs_row > 0.0) EXPECT_NEAR(row, 1.0, 1e-10);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < n; ++j) out += a.at(i, j);
      if (out == 0.0)
        for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(ts.forward[1].value().at(i, j), 0.0);
    }
  }
}

TEST(Transitions, SparsityFollowsPaths) {
  Rng rng(33);
  for (int s = 0; s < 30; ++s) {
    const std::size_t n = 2 + s % 7;
    Tensor a = test::random_graph(n, rng, 0.25);
    Tape t;
    auto ts = transition_matrices(t.constant(a), 3);
    // cur[i * n + j]: a directed walk of the current length runs from i to j.
    std::vector<char> cur(n * n, 0), adj(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) cur[i * n + i] = 1;
    for (std::size_t i = 0; i < n * n; ++i) adj[i] = a[i] > 0.0;
    for (std::size_t m = 1; m <= 3; ++m) {
      std::vector<char> next(n * n, 0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
          if (cur[i * n + k])
            for (std::size_t j = 0; j < n; ++j)
              if (adj[k * n + j]) next[i * n + j] = 1;
      cur = next;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (ts.forward[m].value().at(i, j) != 0.0) EXPECT_TRUE(cur[i * n + j]);
          // The in-degree branch walks edges backwards.
          if (ts.backward[m].value().at(i, j) != 0.0) EXPECT_TRUE(cur[j * n + i]);
        }
    }
  }
}

TEST(Transitions, RejectsBadInput) {
  Tape t;
  EXPECT_THROW(transition_matrices(t.constant(Tensor({2, 3})), 1), DimensionError);
  EXPECT_THROW(transition_matrices(t.constant(Tensor({2, 2})), 0), ConfigError);
  EXPECT_THROW(transition_matrices(t.constant(Tensor::from_rows({{0, -1}, {0, 0}})), 1), DataError);
}

TEST(DirectionWeights, StartNeutral) {
  ParameterSet ps;
  auto dw = init_direction_weights(ps, 4);
  Tape t;
  for (double v : dw.effective(t).value().values()) EXPECT_EQ(v, 0.5);
}

TEST(DiffusionConv, ZeroStepIdentityFilterDoublesInput) {
  Rng rng(34);
  const std::size_t n = 4, h = 3;
  Tensor x = normal_tensor({n, h}, 1.0, rng);
  Tensor theta({h, h, 1, 2}, 0.0);
  for (std::size_t i = 0; i < h; ++i) theta[((i * h + i) * 1 + 0) * 2 + 0] = theta[((i * h + i) * 1 + 0) * 2 + 1] = 1.0;
  Tape t;
  TransitionSet ts;
  ts.forward.push_back(t.constant(Tensor::identity(n)));
  ts.backward.push_back(t.constant(Tensor::identity(n)));
  ts.max_step = 0;
  Tensor y = diffusion_conv(t.constant(x), ts, t.constant(theta), t.constant(Tensor({n}, 1.0))).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], 2.0 * x[i]);
}

TEST(DiffusionConv, ZeroFilterGivesZero) {
  Rng rng(35);
  Tape t;
  auto ts = transition_matrices(t.constant(uniform_tensor({4, 4}, 0.0, 1.0, rng)), 2);
  Tensor y = diffusion_conv(t.constant(normal_tensor({4, 3}, 1.0, rng)), ts, t.constant(Tensor({3, 2, 3, 2}, 0.0)),
                            t.constant(Tensor({4}, 0.5)))
                 .value();
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(DiffusionConv, MatchesSummationOracle) {
  Rng rng(36);
  for (int s = 0; s < 20; ++s) {
    const std::size_t n = 3, h = 2, out = 2, m = 1 + s % 2;
    Tensor a = test::random_graph(n, rng, 0.7);
    Tensor x = normal_tensor({n, h}, 1.0, rng);
    Tensor theta = normal_tensor({h, out, m + 1, 2}, 1.0, rng);
    Tensor dw = uniform_tensor({n}, 0.05, 0.95, rng);
    Tape t;
    auto ts = transition_matrices(t.constant(a), m);
    Tensor y = diffusion_conv(t.constant(x), ts, t.constant(theta), t.constant(dw)).value();
    EXPECT_LT(max_abs_diff(y, conv_oracle(x, a, theta, dw, m)), 1e-10);
  }
}

TEST(DiffusionConv, LinearInInput) {
  Rng rng(37);
  for (int s = 0; s < 20; ++s) {
    Tensor a = uniform_tensor({5, 5}, 0.0, 1.0, rng);
    Tensor x1 = normal_tensor({5, 3}, 1.0, rng), x2 = normal_tensor({5, 3}, 1.0, rng);
    Tensor theta = normal_tensor({3, 4, 3, 2}, 1.0, rng);
    Tensor dw = uniform_tensor({5}, 0.0, 1.0, rng);
    const double ca = 1.7, cb = -0.4;
    Tensor mix = x1;
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = ca * x1[i] + cb * x2[i];
    Tape t;
    auto ts = transition_matrices(t.constant(a), 2);
    auto f = [&](const Tensor& x) {
      return diffusion_conv(t.constant(x), ts, t.constant(theta), t.constant(dw)).value();
    };
    Tensor y1 = f(x1), y2 = f(x2), ym = f(mix);
    for (std::size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym[i], ca * y1[i] + cb * y2[i], 1e-9);
  }
}

TEST(DiffusionConv, BatchedLayoutMatchesPerSample) {
  Rng rng(38);
  const std::size_t n = 4, h = 3, b = 3;
  Tensor a = uniform_tensor({n, n}, 0.0, 1.0, rng);
  Tensor theta = normal_tensor({h, 2, 3, 2}, 1.0, rng);
  Tensor dw = uniform_tensor({n}, 0.0, 1.0, rng);
  Tensor xb = normal_tensor({n * b, h}, 1.0, rng);
  Tape t;
  auto ts = transition_matrices(t.constant(a), 2);
  Tensor yb = diffusion_conv(t.constant(xb), ts, t.constant(theta), t.constant(dw), b).value();
  for (std::size_t s = 0; s < b; ++s) {
    Tensor xs({n, h});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < h; ++f) xs.at(i, f) = xb.at(i * b + s, f);
    Tensor ys = diffusion_conv(t.constant(xs), ts, t.constant(theta), t.constant(dw)).value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(yb.at(i * b + s, o), ys.at(i, o), 1e-12);
  }
}

TEST(DiffusionConv, ShapeMismatch) {
  Tape t;
  auto ts = transition_matrices(t.constant(Tensor({3, 3}, 0.5)), 1);
  Var dw = t.constant(Tensor({3}, 0.5));
  EXPECT_THROW(diffusion_conv(t.constant(Tensor({3, 2})), ts, t.constant(Tensor({3, 2, 2, 2})), dw), DimensionError);
  EXPECT_THROW(diffusion_conv(t.constant(Tensor({4, 2})), ts, t.constant(Tensor({2, 2, 2, 2})), dw), DimensionError);
  EXPECT_THROW(diffusion_conv(t.constant(Tensor({3, 2})), ts, t.constant(Tensor({2, 2, 3, 2})), dw), DimensionError);
}

TEST(DiffusionConv, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::size_t n = 5, h = 3, m = 2;
    ParameterSet ps;
    auto& a = ps.add("a", uniform_tensor({n, n}, 0.05, 1.0, rng));
    auto& x = ps.add("x", normal_tensor({n, h}, 1.0, rng));
    auto& theta = add_diffusion_filter(ps, "theta", h, 2, m, rng);
    auto& raw = ps.add("raw", normal_tensor({n}, 1.0, rng));
    Tensor w = normal_tensor({n, 2}, 1.0, rng);
    auto all = ps.all();
    auto r = check_gradients(
        [&](Tape& t) {
          auto ts = transition_matrices(t.parameter(a), m);
          Var y = diffusion_conv(t.parameter(x), ts, t.parameter(theta), sigmoid(t.parameter(raw)));
          return sum(hadamard(y, t.constant(w)));
        },
        all);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
  }
}

}  // namespace
}  // namespace hagen
