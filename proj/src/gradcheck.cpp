#include "hagen/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hagen/errors.hpp"

namespace hagen {

std::vector<Tensor> finite_diff_grad(const std::function<double()>& f, std::span<Parameter* const> params,
                                     double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw ContractError("finite_diff_grad: eps must lie in [1e-7, 1e-4], got " + std::to_string(eps));
  }
  const double base1 = f();
  const double base2 = f();
  if (std::memcmp(&base1, &base2, sizeof(double)) != 0) {
    throw ContractError("finite_diff_grad: function is not deterministic (repeated evaluation differs)");
  }
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Tensor g(p->value.shape(), 0.0);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double up = f();
      p->value[i] = orig - eps;
      const double down = f();
      p->value[i] = orig;
      g[i] = (up - down) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

GradientComparison compare_gradients(std::span<Parameter* const> params, std::span<const Tensor> numeric) {
  if (params.size() != numeric.size()) throw ContractError("compare_gradients: count mismatch");
  GradientComparison out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& a = params[k]->grad;
    const Tensor& n = numeric[k];
    if (a.shape() != n.shape()) throw DimensionError("compare_gradients: shape mismatch for " + params[k]->name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = gradient_relative_error(a[i], n[i]);
      if (e > out.max_rel_error || out.worst_param.empty()) {
        out.max_rel_error = std::max(out.max_rel_error, e);
        out.worst_param = params[k]->name;
        out.worst_index = i;
        out.analytic = a[i];
        out.numeric = n[i];
      }
    }
  }
  return out;
}

GradientComparison check_gradients(const std::function<Var(Tape&)>& loss_fn, std::span<Parameter* const> params,
                                   double eps) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape tape;
    return loss_fn(tape).value()[0];
  };
  const auto numeric = finite_diff_grad(eval, params, eps);
  return compare_gradients(params, numeric);
}

}  // namespace hagen
