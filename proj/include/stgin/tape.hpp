/*
 * Copyright 2026 The stgin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgin/params.hpp"
#include "stgin/tensor.hpp"

namespace stgin {

// Reverse-mode autodiff over an append-only op tape. Creation order is the
// topological order, so backward is a single reverse sweep that visits each
// node exactly once. Values and gradients live in two flat arenas that are
// recycled across steps; one tape serves one training step (or one online
// query encode) at a time.
template <typename Real>
class Tape {
 public:
  using Id = std::int32_t;

  Tape() = default;
  explicit Tape(const ParamStore<Real>* store) { reset(store); }

  void reset(const ParamStore<Real>* store) {
    store_ = store;
    reset();
  }
  void reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    plist_.clear();
    param_cache_.clear();
    lookup_cache_.clear();
    param_grads_.assign(store_ ? store_->count() : 0, Tensor<Real>());
    ran_backward_ = false;
  }

  std::size_t node_count() const { return nodes_.size(); }
  const ParamStore<Real>* store() const { return store_; }

  // When set, every op verifies its outputs are finite. Slows things down;
  // meant for tests and debugging.
  bool check_finite = false;

  // --- leaves -------------------------------------------------------------

  Id constant(std::span<const Real> v) {
    Id id = make(Op::Const, static_cast<std::uint32_t>(v.size()), 0);
    std::copy(v.begin(), v.end(), val_begin(id));
    return id;
  }
  Id constant(const Tensor<Real>& t) {
    Id id = make(Op::Const, t.rows, t.cols);
    std::copy(t.data.begin(), t.data.end(), val_begin(id));
    return id;
  }
  Id zeros(std::uint32_t n) { return make(Op::Const, n, 0); }
  Id scalar(Real v) {
    Id id = make(Op::Const, 1, 0);
    *val_begin(id) = v;
    return id;
  }

  int param_index(const std::string& name) const { return bound_store().at(name); }

  // Whole named parameter as a node. Repeated requests return the same node.
  Id param(const std::string& name) { return param(bound_store().at(name)); }
  Id param(int pidx) {
    if (auto it = param_cache_.find(pidx); it != param_cache_.end()) return it->second;
    const Tensor<Real>& t = bound_store().value(pidx);
    Id id = make(Op::Param, t.rows, t.cols);
    std::copy(t.data.begin(), t.data.end(), val_begin(id));
    nodes_[std::size_t(id)].aux = static_cast<std::uint32_t>(pidx);
    param_cache_.emplace(pidx, id);
    return id;
  }

  // One row of a named embedding table. Gradients scatter back to that row.
  Id lookup(const std::string& table, std::uint32_t row) {
    return lookup(bound_store().at(table), row);
  }
  Id lookup(int pidx, std::uint32_t row) {
    const std::uint64_t key = (std::uint64_t(std::uint32_t(pidx)) << 32) | row;
    if (auto it = lookup_cache_.find(key); it != lookup_cache_.end()) return it->second;
    const Tensor<Real>& t = bound_store().value(pidx);
    if (t.cols == 0 || row >= t.rows)
      throw ShapeError("lookup row " + std::to_string(row) + " out of range for " +
                       bound_store().name(pidx) + " " + t.shape_str());
    auto r = t.row(row);
    Id id = make(Op::Lookup, t.cols, 0);
    std::copy(r.begin(), r.end(), val_begin(id));
    nodes_[std::size_t(id)].aux = static_cast<std::uint32_t>(pidx);
    nodes_[std::size_t(id)].aux2 = row;
    lookup_cache_.emplace(key, id);
    return id;
  }

  // --- ops ------------------------------------------------------------------

  Id add(Id a, Id b) { return eltwise2(Op::Add, a, b); }
  Id sub(Id a, Id b) { return eltwise2(Op::Sub, a, b); }

  Id add_scalar(Id a, Real c) {
    Id id = make_like(Op::AddScalar, a);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].arg = c;
    auto x = value(a);
    auto o = val_begin(id);
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] + c;
    return finish(id);
  }

  Id scale(Id a, Real c) {
    Id id = make_like(Op::Scale, a);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].arg = c;
    auto x = value(a);
    auto o = val_begin(id);
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] * c;
    return finish(id);
  }

  Id leaky_relu(Id a, Real slope) {
    Id id = make_like(Op::LeakyRelu, a);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].arg = slope;
    auto x = value(a);
    auto o = val_begin(id);
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > Real(0) ? x[i] : slope * x[i];
    return finish(id);
  }
  Id relu(Id a) { return leaky_relu(a, Real(0)); }

  // A [m x n] times x [n] -> [m]
  Id matvec(Id a, Id x) {
    const std::uint32_t m = nodes_[std::size_t(a)].rows;
    const std::uint32_t n = nodes_[std::size_t(a)].cols;
    if (n == 0 || nodes_[std::size_t(x)].cols != 0 || n != nodes_[std::size_t(x)].rows)
      throw ShapeError("matvec: incompatible shapes " + shape_str(a) + " and " + shape_str(x));
    Id id = make(Op::Matvec, m, 0);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].b = x;
    auto A = value(a);
    auto v = value(x);
    auto o = val_begin(id);
    for (std::uint32_t i = 0; i < m; ++i) {
      Real acc = 0;
      const Real* row = A.data() + std::size_t(i) * n;
      for (std::uint32_t j = 0; j < n; ++j) acc += row[j] * v[j];
      o[i] = acc;
    }
    return finish(id);
  }

  Id dot(Id a, Id b) {
    const Node& na = nodes_[std::size_t(a)];
    const Node& nb = nodes_[std::size_t(b)];
    if (na.cols != 0 || nb.cols != 0 || na.rows != nb.rows)
      throw ShapeError("dot: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    Id id = make(Op::Dot, 1, 0);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].b = b;
    auto x = value(a);
    auto y = value(b);
    Real acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    *val_begin(id) = acc;
    return finish(id);
  }

  Id concat(std::span<const Id> parts) {
    std::uint32_t total = 0;
    for (Id p : parts) {
      if (nodes_[std::size_t(p)].cols != 0)
        throw ShapeError("concat: rank-1 inputs required, got " + shape_str(p));
      total += nodes_[std::size_t(p)].rows;
    }
    Id id = make(Op::Concat, total, 0);
    nodes_[std::size_t(id)].aux = static_cast<std::uint32_t>(plist_.size());
    nodes_[std::size_t(id)].aux2 = static_cast<std::uint32_t>(parts.size());
    plist_.insert(plist_.end(), parts.begin(), parts.end());
    auto o = val_begin(id);
    for (Id p : parts) {
      auto x = value(p);
      o = std::copy(x.begin(), x.end(), o);
    }
    return finish(id);
  }
  Id concat(std::initializer_list<Id> parts) { return concat(std::span<const Id>(parts.begin(), parts.size())); }

  Id softmax(Id a) {
    const Node& na = nodes_[std::size_t(a)];
    if (na.cols != 0) throw ShapeError("softmax: rank-1 input required, got " + shape_str(a));
    Id id = make(Op::Softmax, na.rows, 0);
    nodes_[std::size_t(id)].a = a;
    auto x = value(a);
    auto o = val_begin(id);
    Real mx = x[0];
    for (Real v : x) mx = v > mx ? v : mx;
    Real denom = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      o[i] = std::exp(x[i] - mx);
      denom += o[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) o[i] /= denom;
    return finish(id);
  }

  Id sum(Id a) { return reduce(Op::Sum, a); }
  Id mean(Id a) { return reduce(Op::Mean, a); }

  // Weighted sum of k same-length vectors: out = sum_i w[i] * vecs[i].
  Id combine(Id w, std::span<const Id> vecs) {
    const Node& nw = nodes_[std::size_t(w)];
    if (nw.cols != 0 || nw.rows != vecs.size())
      throw ShapeError("combine: weight shape " + shape_str(w) + " vs " +
                       std::to_string(vecs.size()) + " vectors");
    if (vecs.empty()) throw ShapeError("combine: no vectors");
    const std::uint32_t d = nodes_[std::size_t(vecs[0])].rows;
    for (Id v : vecs)
      if (nodes_[std::size_t(v)].cols != 0 || nodes_[std::size_t(v)].rows != d)
        throw ShapeError("combine: vector shape mismatch " + shape_str(vecs[0]) + " vs " +
                         shape_str(v));
    Id id = make(Op::Combine, d, 0);
    nodes_[std::size_t(id)].a = w;
    nodes_[std::size_t(id)].aux = static_cast<std::uint32_t>(plist_.size());
    nodes_[std::size_t(id)].aux2 = static_cast<std::uint32_t>(vecs.size());
    plist_.insert(plist_.end(), vecs.begin(), vecs.end());
    auto wv = value(w);
    auto o = val_begin(id);
    std::fill(o, o + d, Real(0));
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      auto x = value(vecs[i]);
      for (std::uint32_t j = 0; j < d; ++j) o[j] += wv[i] * x[j];
    }
    return finish(id);
  }
  Id combine(Id w, std::initializer_list<Id> vecs) {
    return combine(w, std::span<const Id>(vecs.begin(), vecs.size()));
  }

  // x / ||x||; the zero vector maps to itself (and passes no gradient).
  Id l2_normalize(Id a) {
    const Node& na = nodes_[std::size_t(a)];
    if (na.cols != 0) throw ShapeError("l2_normalize: rank-1 input required, got " + shape_str(a));
    Id id = make(Op::L2Norm, na.rows, 0);
    nodes_[std::size_t(id)].a = a;
    auto x = value(a);
    Real nrm = 0;
    for (Real v : x) nrm += v * v;
    nrm = std::sqrt(nrm);
    nodes_[std::size_t(id)].arg = nrm;
    auto o = val_begin(id);
    if (nrm == Real(0)) {
      std::fill(o, o + x.size(), Real(0));
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] / nrm;
    }
    return finish(id);
  }

  // --- access ---------------------------------------------------------------

  std::span<const Real> value(Id id) const {
    const Node& n = nodes_[std::size_t(id)];
    return {vals_.data() + n.off, elem_count(n)};
  }
  Real scalar_value(Id id) const {
    const Node& n = nodes_[std::size_t(id)];
    if (n.rows != 1 || n.cols != 0) throw ShapeError("scalar_value: node is " + shape_str(id));
    return vals_[n.off];
  }
  std::span<const Real> gradient(Id id) const {
    const Node& n = nodes_[std::size_t(id)];
    return {grads_.data() + n.off, elem_count(n)};
  }
  std::uint32_t rows(Id id) const { return nodes_[std::size_t(id)].rows; }

  // --- backward ---------------------------------------------------------------

  void backward(Id loss) {
    const Node& ln = nodes_[std::size_t(loss)];
    if (ln.rows != 1 || ln.cols != 0)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss));
    if (ran_backward_) throw Error("backward already ran on this tape");
    ran_backward_ = true;
    grads_[ln.off] = Real(1);
    for (Id id = loss; id >= 0; --id) backprop_node(id);
  }

  // Gradient of one parameter; nullptr when the parameter never appeared on
  // the tape (its gradient is identically zero).
  const Tensor<Real>* param_grad(int pidx) const {
    const auto& t = param_grads_[std::size_t(pidx)];
    return t.data.empty() ? nullptr : &t;
  }

  // All parameter gradients by name; unreachable parameters come back as
  // zero tensors of the right shape.
  std::map<std::string, Tensor<Real>> grad_map() const {
    std::map<std::string, Tensor<Real>> out;
    const ParamStore<Real>& s = bound_store();
    for (std::size_t i = 0; i < s.count(); ++i) {
      const auto& t = param_grads_[i];
      if (t.data.empty()) {
        const auto& v = s.value(static_cast<int>(i));
        out[s.name(static_cast<int>(i))] =
            v.cols == 0 ? Tensor<Real>::vec(v.rows) : Tensor<Real>::mat(v.rows, v.cols);
      } else {
        out[s.name(static_cast<int>(i))] = t;
      }
    }
    return out;
  }

 private:
  enum class Op : std::uint8_t {
    Const, Param, Lookup, Add, Sub, AddScalar, Scale, LeakyRelu, Matvec, Dot,
    Concat, Softmax, Sum, Mean, Combine, L2Norm,
  };

  struct Node {
    Op op = Op::Const;
    std::uint32_t rows = 0, cols = 0;  // cols == 0 marks rank 1
    std::uint32_t off = 0;             // offset into both arenas
    Id a = -1, b = -1;
    std::uint32_t aux = 0, aux2 = 0;   // plist offset/count, param idx, row
    Real arg = 0;                      // slope, scalar constant, cached norm
  };

  static std::size_t elem_count(const Node& n) {
    return n.cols == 0 ? n.rows : std::size_t(n.rows) * n.cols;
  }

  const ParamStore<Real>& bound_store() const {
    if (!store_) throw Error("tape is not bound to a ParamStore");
    return *store_;
  }

  Id make(Op op, std::uint32_t rows, std::uint32_t cols) {
    Node n;
    n.op = op;
    n.rows = rows;
    n.cols = cols;
    n.off = static_cast<std::uint32_t>(vals_.size());
    const std::size_t count = elem_count(n);
    vals_.resize(vals_.size() + count, Real(0));
    grads_.resize(grads_.size() + count, Real(0));
    nodes_.push_back(n);
    return static_cast<Id>(nodes_.size() - 1);
  }
  Id make_like(Op op, Id src) {
    const Node& s = nodes_[std::size_t(src)];
    return make(op, s.rows, s.cols);
  }

  Real* val_begin(Id id) { return vals_.data() + nodes_[std::size_t(id)].off; }

  Id finish(Id id) {
    if (check_finite && !all_finite(value(id)))
      throw NumericError("non-finite value produced by op node " + std::to_string(id));
    return id;
  }

  std::string shape_str(Id id) const {
    const Node& n = nodes_[std::size_t(id)];
    return n.cols == 0 ? "[" + std::to_string(n.rows) + "]"
                       : "[" + std::to_string(n.rows) + "x" + std::to_string(n.cols) + "]";
  }

  Id eltwise2(Op op, Id a, Id b) {
    const Node& na = nodes_[std::size_t(a)];
    const Node& nb = nodes_[std::size_t(b)];
    if (na.rows != nb.rows || na.cols != nb.cols)
      throw ShapeError(std::string(op == Op::Add ? "add" : "sub") + ": shape mismatch " +
                       shape_str(a) + " vs " + shape_str(b));
    Id id = make_like(op, a);
    nodes_[std::size_t(id)].a = a;
    nodes_[std::size_t(id)].b = b;
    auto x = value(a);
    auto y = value(b);
    auto o = val_begin(id);
    if (op == Op::Add)
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] + y[i];
    else
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] - y[i];
    return finish(id);
  }

  Id reduce(Op op, Id a) {
    const Node& na = nodes_[std::size_t(a)];
    if (na.cols != 0) throw ShapeError("sum/mean: rank-1 input required, got " + shape_str(a));
    Id id = make(op, 1, 0);
    nodes_[std::size_t(id)].a = a;
    auto x = value(a);
    Real acc = 0;
    for (Real v : x) acc += v;
    *val_begin(id) = op == Op::Mean ? acc / Real(x.size()) : acc;
    return finish(id);
  }

  void backprop_node(Id id) {
    const Node& n = nodes_[std::size_t(id)];
    const Real* g = grads_.data() + n.off;
    const std::size_t count = elem_count(n);
    switch (n.op) {
      case Op::Const:
        break;
      case Op::Param: {
        auto& t = param_grads_[n.aux];
        if (t.data.empty()) {
          t.rows = n.rows;
          t.cols = n.cols;
          t.data.assign(count, Real(0));
        }
        for (std::size_t i = 0; i < count; ++i) t.data[i] += g[i];
        break;
      }
      case Op::Lookup: {
        auto& t = param_grads_[n.aux];
        const Tensor<Real>& v = bound_store().value(static_cast<int>(n.aux));
        if (t.data.empty()) {
          t.rows = v.rows;
          t.cols = v.cols;
          t.data.assign(v.size(), Real(0));
        }
        Real* row = t.data.data() + std::size_t(n.aux2) * v.cols;
        for (std::size_t i = 0; i < count; ++i) row[i] += g[i];
        break;
      }
      case Op::Add: {
        Real* ga = grads_.data() + nodes_[std::size_t(n.a)].off;
        Real* gb = grads_.data() + nodes_[std::size_t(n.b)].off;
        for (std::size_t i = 0; i < count; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        Real* ga = grads_.data() + nodes_[std::size_t(n.a)].off;
        Real* gb = grads_.data() + nodes_[std::size_t(n.b)].off;
        for (std::size_t i = 0; i < count; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::AddScalar: {
        Real* ga = grads_.data() + nodes_[std::size_t(n.a)].off;
        for (std::size_t i = 0; i < count; ++i) ga[i] += g[i];
        break;
      }
      case Op::Scale: {
        Real* ga = grads_.data() + nodes_[std::size_t(n.a)].off;
        for (std::size_t i = 0; i < count; ++i) ga[i] += n.arg * g[i];
        break;
      }
      case Op::LeakyRelu: {
        const Node& pa = nodes_[std::size_t(n.a)];
        const Real* x = vals_.data() + pa.off;
        Real* ga = grads_.data() + pa.off;
        for (std::size_t i = 0; i < count; ++i)
          ga[i] += g[i] * (x[i] > Real(0) ? Real(1) : n.arg);
        break;
      }
      case Op::Matvec: {
        const Node& pa = nodes_[std::size_t(n.a)];
        const Node& pb = nodes_[std::size_t(n.b)];
        const Real* A = vals_.data() + pa.off;
        const Real* x = vals_.data() + pb.off;
        Real* gA = grads_.data() + pa.off;
        Real* gx = grads_.data() + pb.off;
        const std::uint32_t m = pa.rows, k = pa.cols;
        for (std::uint32_t i = 0; i < m; ++i) {
          const Real gi = g[i];
          const Real* Arow = A + std::size_t(i) * k;
          Real* gArow = gA + std::size_t(i) * k;
          for (std::uint32_t j = 0; j < k; ++j) {
            gArow[j] += gi * x[j];
            gx[j] += Arow[j] * gi;
          }
        }
        break;
      }
      case Op::Dot: {
        const Node& pa = nodes_[std::size_t(n.a)];
        const Node& pb = nodes_[std::size_t(n.b)];
        const Real* x = vals_.data() + pa.off;
        const Real* y = vals_.data() + pb.off;
        Real* gx = grads_.data() + pa.off;
        Real* gy = grads_.data() + pb.off;
        const Real gs = g[0];
        for (std::uint32_t i = 0; i < pa.rows; ++i) {
          gx[i] += gs * y[i];
          gy[i] += gs * x[i];
        }
        break;
      }
      case Op::Concat: {
        std::size_t at = 0;
        for (std::uint32_t p = 0; p < n.aux2; ++p) {
          const Node& part = nodes_[std::size_t(plist_[n.aux + p])];
          Real* gp = grads_.data() + part.off;
          for (std::uint32_t i = 0; i < part.rows; ++i) gp[i] += g[at + i];
          at += part.rows;
        }
        break;
      }
      case Op::Softmax: {
        const Real* y = vals_.data() + n.off;
        Real* ga = grads_.data() + nodes_[std::size_t(n.a)].off;
        Real dotgy = 0;
        for (std::size_t i = 0; i < count; ++i) dotgy += g[i] * y[i];
        for (std::size_t i = 0; i < count; ++i) ga[i] += y[i] * (g[i] - dotgy);
        break;
      }
      case Op::Sum: {
        const Node& pa = nodes_[std::size_t(n.a)];
        Real* ga = grads_.data() + pa.off;
        for (std::uint32_t i = 0; i < pa.rows; ++i) ga[i] += g[0];
        break;
      }
      case Op::Mean: {
        const Node& pa = nodes_[std::size_t(n.a)];
        Real* ga = grads_.data() + pa.off;
        const Real s = g[0] / Real(pa.rows);
        for (std::uint32_t i = 0; i < pa.rows; ++i) ga[i] += s;
        break;
      }
      case Op::Combine: {
        const Node& pw = nodes_[std::size_t(n.a)];
        const Real* w = vals_.data() + pw.off;
        Real* gw = grads_.data() + pw.off;
        for (std::uint32_t i = 0; i < n.aux2; ++i) {
          const Node& pv = nodes_[std::size_t(plist_[n.aux + i])];
          const Real* x = vals_.data() + pv.off;
          Real* gx = grads_.data() + pv.off;
          Real acc = 0;
          for (std::size_t j = 0; j < count; ++j) {
            acc += g[j] * x[j];
            gx[j] += w[i] * g[j];
          }
          gw[i] += acc;
        }
        break;
      }
      case Op::L2Norm: {
        const Real nrm = n.arg;
        if (nrm == Real(0)) break;
        const Node& pa = nodes_[std::size_t(n.a)];
        const Real* x = vals_.data() + pa.off;
        Real* ga = grads_.data() + pa.off;
        Real xg = 0;
        for (std::size_t i = 0; i < count; ++i) xg += x[i] * g[i];
        const Real inv = Real(1) / nrm;
        const Real inv3 = inv * inv * inv;
        for (std::size_t i = 0; i < count; ++i) ga[i] += g[i] * inv - x[i] * xg * inv3;
        break;
      }
    }
  }

  const ParamStore<Real>* store_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<Real> vals_;
  std::vector<Real> grads_;
  std::vector<Id> plist_;
  std::unordered_map<int, Id> param_cache_;
  std::unordered_map<std::uint64_t, Id> lookup_cache_;
  std::vector<Tensor<Real>> param_grads_;
  bool ran_backward_ = false;
};

}  // namespace stgin
