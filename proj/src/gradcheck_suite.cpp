#include <functional>

#include "hagen/gradcheck.hpp"
#include "hagen/homophily.hpp"
#include "hagen/model.hpp"
#include "hagen/random.hpp"

namespace hagen {

namespace {

Tensor binary_tensor(Shape shape, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  Tensor t(std::move(shape), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = coin(rng) ? 1.0 : 0.0;
  return t;
}

/// Contracts an output with a fixed random probe so every entry contributes.
Var probe(Var out, const Tensor& weights) { return sum(hadamard(out, out.tape().constant(weights))); }

GradCheckCase run_case(const std::string& name, std::uint64_t seed, ParameterSet& params,
                       const std::function<Var(Tape&)>& loss) {
  auto all = params.all();
  return {name, seed, check_gradients(loss, all)};
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradCheckCase> cases;
  Rng rng(seed);
  const std::size_t n = 5, c = 3, k = 3, h = 4, m = 2, d = 3;

  {
    ParameterSet ps;
    auto& a = ps.add("a", normal_tensor({n, h}, 1.0, rng));
    auto& b = ps.add("b", normal_tensor({h, c}, 1.0, rng));
    auto& bias = ps.add("bias", normal_tensor({c}, 1.0, rng));
    auto& v = ps.add("v", uniform_tensor({n}, 0.5, 1.5, rng));
    Tensor w = normal_tensor({n, c}, 1.0, rng);
    cases.push_back(run_case("numerics.ops", seed, ps, [&](Tape& t) {
      Var x = add_row_vector(matmul(tanh(t.parameter(a)), t.parameter(b)), t.parameter(bias));
      Var y = scale_rows(softmax_rows(x), t.parameter(v));
      Var z = add(hadamard(sigmoid(x), y), rsub_scalar(1.0, relu(x)));
      Var cat = concat_cols(std::vector<Var>{z, transpose(transpose(y))});
      return add(probe(z, w), scale(sum(cat), 0.3));
    }));
  }

  {
    ParameterSet ps;
    auto p = init_region_embeddings(ps, n, d, 3.0, std::nullopt, rng);
    Tensor w = normal_tensor({n, n}, 1.0, rng);
    cases.push_back(run_case("graph_learning", seed, ps, [&](Tape& t) {
      return probe(sparsify_topk(compute_adjacency(embed_regions(t, p)), 2), w);
    }));
  }

  {
    ParameterSet ps;
    auto p = init_region_embeddings(ps, n, d, 3.0, normal_tensor({n, 4}, 1.0, rng), rng);
    Tensor w = normal_tensor({n, n}, 1.0, rng);
    cases.push_back(run_case("graph_learning.pretrained", seed, ps, [&](Tape& t) {
      return probe(compute_adjacency(embed_regions(t, p)), w);
    }));
  }

  {
    ParameterSet ps;
    Tensor a0 = uniform_tensor({n, n}, 0.05, 1.0, rng);
    for (std::size_t i = 0; i < n; ++i) a0.at(i, i) = 0.0;
    a0.at(0, 1) = 0.0;
    auto& a = ps.add("adjacency", a0);
    std::vector<std::vector<double>> labels;
    for (int s = 0; s < 4; ++s) {
      auto v = binary_tensor({n}, rng).values();
      labels.emplace_back(v.begin(), v.end());
    }
    cases.push_back(run_case("homophily", seed, ps, [&](Tape& t) {
      Var r = add_scalar(homophily_ratios(t.parameter(a), labels), -1.0);
      return sum(hadamard(r, r));
    }));
  }

  {
    ParameterSet ps;
    auto& a = ps.add("adjacency", uniform_tensor({n, n}, 0.05, 1.0, rng));
    auto& x = ps.add("x", normal_tensor({n * 2, h}, 1.0, rng));
    auto& theta = add_diffusion_filter(ps, "filter", h, c, m, rng);
    auto& raw = ps.add("direction", normal_tensor({n}, 1.0, rng));
    Tensor w = normal_tensor({n * 2, c}, 1.0, rng);
    cases.push_back(run_case("diffusion", seed, ps, [&](Tape& t) {
      auto trans = transition_matrices(t.parameter(a), m);
      Var dw = sigmoid(t.parameter(raw));
      return probe(diffusion_conv(t.parameter(x), trans, t.parameter(theta), dw, 2), w);
    }));
  }

  {
    ParameterSet ps;
    const std::size_t batch = 2;
    Tensor adj = uniform_tensor({n, n}, 0.0, 1.0, rng);
    std::vector<DcgruParams> layers{init_dcgru(ps, "l0", c, h, m, rng), init_dcgru(ps, "l1", h, h, m, rng)};
    auto dir = init_direction_weights(ps, n);
    std::vector<Tensor> xs;
    for (std::size_t s = 0; s < k; ++s) xs.push_back(binary_tensor({n * batch, c}, rng));
    Tensor w = normal_tensor({n * batch, h}, 1.0, rng);
    cases.push_back(run_case("recurrent_encoder", seed, ps, [&](Tape& t) {
      auto trans = transition_matrices(t.constant(adj), m);
      std::vector<Var> in;
      for (const auto& x : xs) in.push_back(t.constant(x));
      std::vector<DcgruVars> bound{bind(t, layers[0]), bind(t, layers[1])};
      return probe(encode_sequence(in, bound, trans, dir.effective(t), batch), w);
    }));
  }

  {
    ParameterSet ps;
    auto& base = ps.add("base", normal_tensor({n, d}, 1.0, rng));
    auto ce = init_crime_embedding(ps, normal_tensor({c, d}, 1.0, rng), rng);
    Tensor x = binary_tensor({n * 2, c}, rng);
    Tensor w = normal_tensor({n * 2, c}, 1.0, rng);
    cases.push_back(run_case("dependency_encoder", seed, ps, [&](Tape& t) {
      Var dep = inter_dependency(t.parameter(base), t.parameter(*ce.embedding), t.parameter(*ce.transition));
      return probe(weight_input(repeat_rows(dep, 2), t.constant(x)), w);
    }));
  }

  {
    ParameterSet ps;
    Tensor adj = uniform_tensor({n, n}, 0.0, 1.0, rng);
    auto dec = init_decoder(ps, h, c, 2, m, rng);
    auto dir = init_direction_weights(ps, n);
    auto& hid = ps.add("hidden", normal_tensor({n, h}, 1.0, rng));
    Tensor y = binary_tensor({n, c}, rng);
    cases.push_back(run_case("decoder_loss", seed, ps, [&](Tape& t) {
      auto trans = transition_matrices(t.constant(adj), m);
      return bce_loss(decode(t.parameter(hid), bind(t, dec), trans, dir.effective(t)), y);
    }));
  }

  {
    ModelConfig cfg;
    cfg.num_regions = n;
    cfg.num_categories = c;
    cfg.embed_dim = d;
    cfg.hidden_dim = h;
    cfg.rnn_layers = 2;
    cfg.diffusion_steps = m;
    cfg.top_k = 3;
    cfg.decoder_layers = 2;
    HagenModel model(cfg, seed);
    std::vector<Window> windows;
    for (int s = 0; s < 2; ++s) {
      windows.push_back({static_cast<std::size_t>(s), binary_tensor({n, c, k}, rng), binary_tensor({n, c}, rng)});
    }
    Batch batch = make_batch(windows);
    auto all = model.params().all();
    cases.push_back({"model.objective", seed, check_gradients([&](Tape& t) {
                       return compute_objective(model, t, batch, 0.5).total;
                     }, all)});
  }
  return cases;
}

}  // namespace hagen
