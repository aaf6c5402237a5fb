#include <algorithm>
#include <cmath>
#include <limits>

#include "hagen/autodiff.hpp"
#include "hagen/errors.hpp"

namespace hagen {
namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) kernels::gemm_acc(g, false, t.value(ib), true, *ga);
    if (Tensor* gb = t.grad_slot(ib)) kernels::gemm_acc(t.value(ia), true, g, false, *gb);
  });
}

Var transpose(Var a) {
  const auto ia = a.id();
  return a.tape().record(kernels::transpose(a.value()), {a}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    const std::size_t r = g.rows(), c = g.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga->at(j, i) += g.at(i, j);
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  add_into(out, b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) add_into(*ga, g);
    if (Tensor* gb = t.grad_slot(ib)) add_into(*gb, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) add_into(*ga, g);
    if (Tensor* gb = t.grad_slot(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("hadamard", a, b);
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) {
      const Tensor& y = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
    }
    if (Tensor* gb = t.grad_slot(ib)) {
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    add_into(*t.grad_slot(ia), g);
  });
}

Var rsub_scalar(double s, Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s - out[i];
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] -= g[i];
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (y[i] > 0.0) (*ga)[i] += g[i];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  x.require_matrix("softmax_rows");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, x.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(x.at(i, j) - m);
      z += out.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r, c](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < c; ++j) ga->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
  });
}

Var reshape(Var a, Shape shape) {
  const auto ia = a.id();
  return a.tape().record(a.value().reshaped(std::move(shape)), {a},
                         [ia](Tape& t, const Tensor&, const Tensor& g) { add_into(*t.grad_slot(ia), g); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t r = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.value().rank() != 2 || p.value().rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_to_string(parts[0].shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(x.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(
      std::move(out), parts, [ids, widths, r, total](Tape& t, const Tensor&, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (Tensor* gx = t.grad_slot(ids[k])) {
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j) (*gx)[i * widths[k] + j] += g[i * total + off + j];
          }
          off += widths[k];
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  x.require_matrix("slice_cols");
  if (begin >= end || end > x.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of " + shape_to_string(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c + begin, w, out.data() + i * w);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r, c, w, begin](Tape& t, const Tensor&, const Tensor& g) {
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) (*ga)[i * c + begin + j] += g[i * w + j];
  });
}

Var gather(Var a, std::vector<std::size_t> index, Shape shape) {
  const Tensor& x = a.value();
  if (shape_numel(shape) != index.size()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for shape " + shape_to_string(shape));
  }
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.size()) throw DimensionError("gather: index out of range");
    out[i] = x[index[i]];
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, index = std::move(index)](Tape& t, const Tensor&, const Tensor& g) {
                           Tensor* ga = t.grad_slot(ia);
                           for (std::size_t i = 0; i < index.size(); ++i) (*ga)[index[i]] += g[i];
                         });
}

Var add_row_vector(Var a, Var bias) {
  require_same_tape(a, bias);
  const Tensor& x = a.value();
  x.require_matrix("add_row_vector");
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.value().size() != c) {
    throw DimensionError("add_row_vector: bias " + shape_to_string(bias.shape()) + " for matrix " +
                         shape_to_string(x.shape()));
  }
  Tensor out = x;
  const Tensor& b = bias.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += b[j];
  const auto ia = a.id(), ib = bias.id();
  return a.tape().record(std::move(out), {a, bias}, [ia, ib, r, c](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) add_into(*ga, g);
    if (Tensor* gb = t.grad_slot(ib))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gb)[j] += g.at(i, j);
  });
}

Var scale_rows(Var a, Var v) {
  require_same_tape(a, v);
  const Tensor& x = a.value();
  x.require_matrix("scale_rows");
  const std::size_t r = x.rows(), c = x.cols();
  if (v.value().size() != r) {
    throw DimensionError("scale_rows: vector " + shape_to_string(v.shape()) + " for matrix " +
                         shape_to_string(x.shape()));
  }
  Tensor out = x;
  const Tensor& d = v.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= d[i];
  const auto ia = a.id(), iv = v.id();
  return a.tape().record(std::move(out), {a, v}, [ia, iv, r, c](Tape& t, const Tensor&, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(ia)) {
      const Tensor& d = t.value(iv);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga->at(i, j) += g.at(i, j) * d[i];
    }
    if (Tensor* gv = t.grad_slot(iv)) {
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += g.at(i, j) * x.at(i, j);
        (*gv)[i] += acc;
      }
    }
  });
}

Var row_normalize(Var a) {
  const Tensor& x = a.value();
  x.require_matrix("row_normalize");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  std::vector<double> inv(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < c; ++j) deg += x.at(i, j);
    inv[i] = deg != 0.0 ? 1.0 / deg : 0.0;
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * inv[i];
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r, c, inv = std::move(inv)](Tape& t, const Tensor& y,
                                                                              const Tensor& g) {
    // d y_ij / d x_ik = (delta_jk - y_ij) / deg_i
    Tensor* ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < r; ++i) {
      if (inv[i] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::size_t k = 0; k < c; ++k) ga->at(i, k) += (g.at(i, k) - dot) * inv[i];
    }
  });
}

Var bce_sum(Var probs, const Tensor& targets, double eps) {
  const Tensor& p = probs.value();
  if (p.shape() != targets.shape()) {
    throw DimensionError("bce: predictions " + shape_to_string(p.shape()) + " vs targets " +
                         shape_to_string(targets.shape()));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) throw DataError("bce: target values must be 0 or 1");
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    loss -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  const auto ip = probs.id();
  return probs.tape().record(Tensor::scalar(loss), {probs}, [ip, targets, eps](Tape& t, const Tensor&,
                                                                                const Tensor& g) {
    Tensor* gp = t.grad_slot(ip);
    const Tensor& p = t.value(ip);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < eps || p[i] > 1.0 - eps) continue;
      const double y = targets[i];
      (*gp)[i] += g[0] * (-(y / p[i]) + (1.0 - y) / (1.0 - p[i]));
    }
  });
}

}  // namespace hagen
