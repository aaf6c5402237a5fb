#include "hagen/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "hagen/errors.hpp"

namespace hagen {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  const bool rg = value.grad_enabled();
  nodes_.push_back(Node{std::move(value), Tensor{}, rg, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, Tensor{}, true, &p, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool rg = false;
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw ContractError("operands recorded on different tapes");
    rg = rg || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, rg, nullptr, rg ? std::move(fn) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a single-element loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor{};
  Tensor* seed = grad_slot(loss.id());
  if (!seed) return;
  (*seed)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param) {
      auto& acc = n.param->grad;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += n.grad[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Matrix kernels (Eigen-backed)
// ---------------------------------------------------------------------------

namespace kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<unsigned> g_max_threads{1};

// c (+)= op(a) * op(b), where op transposes when requested. `a` is stored as
// ar x ac, `b` as br x bc. Large products are split over output rows.
void gemm(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c, bool accumulate) {
  const auto ar = a.shape()[0], ac = a.shape()[1];
  const auto br = b.shape()[0], bc = b.shape()[1];
  ConstMap A(a.data(), ar, ac);
  ConstMap B(b.data(), br, bc);
  const std::size_t m = ta ? ac : ar;
  const std::size_t k = ta ? ar : ac;
  const std::size_t n = tb ? br : bc;
  MutMap C(c.data(), m, n);

  auto run = [&](std::size_t r0, std::size_t r1) {
    const auto rows = static_cast<Eigen::Index>(r1 - r0);
    const auto off = static_cast<Eigen::Index>(r0);
    auto dst = C.middleRows(off, rows);
    if (!ta && !tb) {
      if (accumulate) dst.noalias() += A.middleRows(off, rows) * B;
      else dst.noalias() = A.middleRows(off, rows) * B;
    } else if (!ta && tb) {
      if (accumulate) dst.noalias() += A.middleRows(off, rows) * B.transpose();
      else dst.noalias() = A.middleRows(off, rows) * B.transpose();
    } else if (ta && !tb) {
      if (accumulate) dst.noalias() += A.middleCols(off, rows).transpose() * B;
      else dst.noalias() = A.middleCols(off, rows).transpose() * B;
    } else {
      if (accumulate) dst.noalias() += A.middleCols(off, rows).transpose() * B.transpose();
      else dst.noalias() = A.middleCols(off, rows).transpose() * B.transpose();
    }
  };

  const unsigned threads = g_max_threads.load();
  const double work = static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
  if (threads <= 1 || m < 2 * threads || work < 2.0e6) {
    run(0, m);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (m + threads - 1) / threads;
  for (std::size_t r0 = 0; r0 < m; r0 += chunk) {
    pool.emplace_back(run, r0, std::min(m, r0 + chunk));
  }
  for (auto& t : pool) t.join();
}

}  // namespace

void set_max_threads(unsigned n) { g_max_threads.store(std::max(1u, n)); }
unsigned max_threads() { return g_max_threads.load(); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  a.require_matrix("matmul");
  b.require_matrix("matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  gemm(a, false, b, false, c, false);
  return c;
}

Tensor transpose(const Tensor& a) {
  a.require_matrix("transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

void gemm_acc(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c) { gemm(a, ta, b, tb, c, true); }

}  // namespace kernels


}  // namespace hagen
