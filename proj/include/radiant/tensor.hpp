#pragma once

// Reverse-mode autodiff over flat Eigen-backed tensors. Scalar type is a
// template parameter: float for training, double for gradient verification.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace radiant {

template <class S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index shape_numel(const Shape& s) {
  Eigen::Index n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void op_error(const std::string& op, const std::string& msg) {
  throw std::invalid_argument(op + ": " + msg);
}

// Thread-local switch: when false, ops compute values but record no graph.
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
};

template <class S>
class Tensor {
 public:
  struct Node {
    Shape shape;
    ArrayX<S> value;
    ArrayX<S> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::string name;  // set for named parameters
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    ArrayX<S>& ensure_grad() {
      if (grad.size() == 0) grad = ArrayX<S>::Zero(value.size());
      return grad;
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor leaf(Shape shape, ArrayX<S> values, bool requires_grad = false) {
    if (values.size() != shape_numel(shape))
      op_error("tensor", "value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return leaf(shape, ArrayX<S>::Zero(shape_numel(shape)), requires_grad);
  }

  static Tensor full(Shape shape, S v, bool requires_grad = false) {
    return leaf(shape, ArrayX<S>::Constant(shape_numel(shape), v), requires_grad);
  }

  static Tensor scalar(S v, bool requires_grad = false) {
    return leaf({1}, ArrayX<S>::Constant(1, v), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Eigen::Index numel() const { return node_->value.size(); }
  Eigen::Index dim(int i) const { return node_->shape[i]; }
  int rank() const { return int(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  void set_name(std::string n) { node_->name = std::move(n); }

  ArrayX<S>& value() { return node_->value; }
  const ArrayX<S>& value() const { return node_->value; }
  ArrayX<S>& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() != 0; }
  void clear_grad() { node_->grad.resize(0); }

  S item() const {
    if (numel() != 1) op_error("item", "tensor is not scalar, shape " + shape_str(shape()));
    return node_->value[0];
  }

  // 2-D views
  Eigen::Index rows() const { return rank() >= 1 ? node_->shape[0] : 1; }
  Eigen::Index cols() const {
    Eigen::Index c = 1;
    for (int i = 1; i < rank(); ++i) c *= node_->shape[i];
    return c;
  }
  Eigen::Map<MatX<S>> mat() { return {node_->value.data(), rows(), cols()}; }
  Eigen::Map<const MatX<S>> mat() const { return {node_->value.data(), rows(), cols()}; }
  Eigen::Map<MatX<S>> grad_mat() { return {grad().data(), rows(), cols()}; }

  // Detached copy: same values, no history, no grad requirement.
  Tensor detach() const { return leaf(node_->shape, node_->value, false); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

// Builds a result node wired to its parents when grad recording is active.
template <class S>
Tensor<S> make_result(Shape shape, ArrayX<S> value, std::vector<Tensor<S>> inputs,
                      std::function<void(typename Tensor<S>::Node&)> backward_fn) {
  auto out = Tensor<S>::leaf(std::move(shape), std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (auto& t : inputs)
    if (t.node()->requires_grad || t.node()->backward_fn) any = true;
  if (!any) return out;
  auto n = out.node();
  n->requires_grad = true;
  for (auto& t : inputs) n->parents.push_back(t.node());
  n->backward_fn = std::move(backward_fn);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Backward pass

template <class S>
void backward(Tensor<S> loss) {
  using Node = typename Tensor<S>::Node;
  if (loss.numel() != 1)
    op_error("backward", "loss must be scalar, got shape " + shape_str(loss.shape()));

  // Topological order by iterative post-order DFS over parents.
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] = S(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  // Detached inputs may have been written to as parents; drop those grads.
  for (Node* n : topo)
    if (!n->requires_grad) n->grad.resize(0);
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic (limited broadcasting: equal shapes, [N,C]x[N,1],
// [N,C]x[1,C], or scalar).

namespace detail {

enum class Bcast { same, row, col, scalar };

template <class S>
Bcast bcast_kind(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (b.numel() == 1) return Bcast::scalar;
  if (a.rank() == 2 && b.rank() == 2) {
    if (b.dim(0) == a.dim(0) && b.dim(1) == 1) return Bcast::col;
    if (b.dim(0) == 1 && b.dim(1) == a.dim(1)) return Bcast::row;
  }
  op_error(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class S>
ArrayX<S> bcast_expand(const Tensor<S>& a, const Tensor<S>& b, Bcast k) {
  switch (k) {
    case Bcast::same:
      return b.value();
    case Bcast::scalar:
      return ArrayX<S>::Constant(a.numel(), b.value()[0]);
    case Bcast::col: {
      MatX<S> m = b.mat().col(0).replicate(1, a.dim(1));
      return Eigen::Map<ArrayX<S>>(m.data(), m.size());
    }
    case Bcast::row: {
      MatX<S> m = b.mat().row(0).replicate(a.dim(0), 1);
      return Eigen::Map<ArrayX<S>>(m.data(), m.size());
    }
  }
  return {};
}

// Reduce a full-size gradient back to b's broadcast shape and accumulate.
template <class S>
void bcast_accumulate(typename Tensor<S>::Node& b, const ArrayX<S>& g, Eigen::Index rows,
                      Eigen::Index cols, Bcast k) {
  auto& bg = b.ensure_grad();
  switch (k) {
    case Bcast::same:
      bg += g;
      break;
    case Bcast::scalar:
      bg[0] += g.sum();
      break;
    case Bcast::col: {
      Eigen::Map<const MatX<S>> gm(g.data(), rows, cols);
      Eigen::Map<MatX<S>> bm(bg.data(), rows, 1);
      bm.col(0) += gm.rowwise().sum();
      break;
    }
    case Bcast::row: {
      Eigen::Map<const MatX<S>> gm(g.data(), rows, cols);
      Eigen::Map<MatX<S>> bm(bg.data(), 1, cols);
      bm.row(0) += gm.colwise().sum();
      break;
    }
  }
}

}  // namespace detail

template <class S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
  auto k = detail::bcast_kind("add", a, b);
  ArrayX<S> v = a.value() + detail::bcast_expand(a, b, k);
  Eigen::Index rows = a.rows(), cols = a.cols();
  return detail::make_result<S>(
      a.shape(), std::move(v), {a, b}, [k, rows, cols](typename Tensor<S>::Node& self) {
        self.parents[0]->ensure_grad() += self.grad;
        detail::bcast_accumulate<S>(*self.parents[1], self.grad, rows, cols, k);
      });
}

template <class S>
Tensor<S> sub(Tensor<S> a, Tensor<S> b) {
  auto k = detail::bcast_kind("sub", a, b);
  ArrayX<S> v = a.value() - detail::bcast_expand(a, b, k);
  Eigen::Index rows = a.rows(), cols = a.cols();
  return detail::make_result<S>(
      a.shape(), std::move(v), {a, b}, [k, rows, cols](typename Tensor<S>::Node& self) {
        self.parents[0]->ensure_grad() += self.grad;
        ArrayX<S> ng = -self.grad;
        detail::bcast_accumulate<S>(*self.parents[1], ng, rows, cols, k);
      });
}

template <class S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
  auto k = detail::bcast_kind("mul", a, b);
  ArrayX<S> bexp = detail::bcast_expand(a, b, k);
  ArrayX<S> v = a.value() * bexp;
  Eigen::Index rows = a.rows(), cols = a.cols();
  ArrayX<S> av = a.value();
  return detail::make_result<S>(
      a.shape(), std::move(v), {a, b},
      [k, rows, cols, bexp = std::move(bexp), av = std::move(av)](typename Tensor<S>::Node& self) {
        self.parents[0]->ensure_grad() += self.grad * bexp;
        ArrayX<S> gb = self.grad * av;
        detail::bcast_accumulate<S>(*self.parents[1], gb, rows, cols, k);
      });
}

template <class S>
Tensor<S> scale(Tensor<S> a, S c) {
  ArrayX<S> v = a.value() * c;
  return detail::make_result<S>(a.shape(), std::move(v), {a},
                                [c](typename Tensor<S>::Node& self) {
                                  self.parents[0]->ensure_grad() += self.grad * c;
                                });
}

template <class S>
Tensor<S> add_scalar(Tensor<S> a, S c) {
  ArrayX<S> v = a.value() + c;
  return detail::make_result<S>(a.shape(), std::move(v), {a},
                                [](typename Tensor<S>::Node& self) {
                                  self.parents[0]->ensure_grad() += self.grad;
                                });
}

// ---------------------------------------------------------------------------
// Unary activations

namespace detail {

template <class S, class F, class DF>
Tensor<S> unary(const char* /*op*/, Tensor<S> a, F f, DF df) {
  ArrayX<S> v = a.value().unaryExpr(f);
  ArrayX<S> av = a.value();
  return detail::make_result<S>(
      a.shape(), std::move(v), {a},
      [df, av = std::move(av)](typename Tensor<S>::Node& self) {
        self.parents[0]->ensure_grad() += self.grad * av.unaryExpr(df);
      });
}

}  // namespace detail

template <class S>
Tensor<S> relu(Tensor<S> a) {
  return detail::unary(
      "relu", a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x) { return x > S(0) ? S(1) : S(0); });
}

template <class S>
Tensor<S> sigmoid(Tensor<S> a) {
  return detail::unary(
      "sigmoid", a,
      [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S x) {
        S s = S(1) / (S(1) + std::exp(-x));
        return s * (S(1) - s);
      });
}

template <class S>
Tensor<S> softplus(Tensor<S> a) {
  return detail::unary(
      "softplus", a,
      [](S x) { return x > S(20) ? x : std::log1p(std::exp(x)); },
      [](S x) { return S(1) / (S(1) + std::exp(-x)); });
}

template <class S>
Tensor<S> exp(Tensor<S> a) {
  return detail::unary(
      "exp", a, [](S x) { return std::exp(x); }, [](S x) { return std::exp(x); });
}

template <class S>
Tensor<S> log(Tensor<S> a) {
  return detail::unary(
      "log", a, [](S x) { return std::log(x); }, [](S x) { return S(1) / x; });
}

// ---------------------------------------------------------------------------
// Matmul: [m,k] x [k,n] -> [m,n]

template <class S>
Tensor<S> matmul(Tensor<S> a, Tensor<S> b) {
  if (a.rank() != 2 || b.rank() != 2)
    op_error("matmul", "expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    op_error("matmul", "inner dimensions differ: " + shape_str(a.shape()) + " x " +
                           shape_str(b.shape()));
  Eigen::Index m = a.dim(0), n = b.dim(1);
  ArrayX<S> v(m * n);
  Eigen::Map<MatX<S>>(v.data(), m, n).noalias() = a.mat() * b.mat();
  MatX<S> av = a.mat(), bv = b.mat();
  return detail::make_result<S>(
      {m, n}, std::move(v), {a, b},
      [av = std::move(av), bv = std::move(bv)](typename Tensor<S>::Node& self) {
        Eigen::Index m = av.rows(), n = bv.cols();
        Eigen::Map<const MatX<S>> g(self.grad.data(), m, n);
        {
          auto& ga = self.parents[0]->ensure_grad();
          Eigen::Map<MatX<S>>(ga.data(), av.rows(), av.cols()).noalias() += g * bv.transpose();
        }
        {
          auto& gb = self.parents[1]->ensure_grad();
          Eigen::Map<MatX<S>>(gb.data(), bv.rows(), bv.cols()).noalias() += av.transpose() * g;
        }
      });
}

// ---------------------------------------------------------------------------
// Softmax over an axis of a rank-2 tensor.

template <class S>
Tensor<S> softmax(Tensor<S> a, int axis) {
  if (a.rank() != 2) op_error("softmax", "expects rank-2 tensor, got " + shape_str(a.shape()));
  if (axis != 0 && axis != 1) op_error("softmax", "axis must be 0 or 1");
  MatX<S> m = a.mat();
  if (axis == 0) m.transposeInPlace();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r).array();
    S mx = row.maxCoeff();
    m.row(r) = (row - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
  if (axis == 0) m.transposeInPlace();
  ArrayX<S> v = Eigen::Map<ArrayX<S>>(m.data(), m.size());
  MatX<S> sm = std::move(m);
  return detail::make_result<S>(
      a.shape(), std::move(v), {a}, [axis, sm = std::move(sm)](typename Tensor<S>::Node& self) {
        MatX<S> s = sm;
        Eigen::Map<const MatX<S>> g(self.grad.data(), s.rows(), s.cols());
        MatX<S> gm = g;
        if (axis == 0) {
          s.transposeInPlace();
          gm.transposeInPlace();
        }
        MatX<S> out(s.rows(), s.cols());
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
          S dot = (gm.row(r).array() * s.row(r).array()).sum();
          out.row(r) = s.row(r).array() * (gm.row(r).array() - dot);
        }
        if (axis == 0) out.transposeInPlace();
        auto& ga = self.parents[0]->ensure_grad();
        Eigen::Map<MatX<S>>(ga.data(), out.rows(), out.cols()) += out;
      });
}

// ---------------------------------------------------------------------------
// Concat along axis of rank-2 tensors.

template <class S>
Tensor<S> concat(std::vector<Tensor<S>> parts, int axis) {
  if (parts.empty()) op_error("concat", "no inputs");
  if (axis != 0 && axis != 1) op_error("concat", "axis must be 0 or 1");
  for (auto& p : parts)
    if (p.rank() != 2) op_error("concat", "expects rank-2 tensors, got " + shape_str(p.shape()));
  Eigen::Index fixed = axis == 1 ? parts[0].dim(0) : parts[0].dim(1);
  Eigen::Index total = 0;
  for (auto& p : parts) {
    Eigen::Index f = axis == 1 ? p.dim(0) : p.dim(1);
    if (f != fixed)
      op_error("concat", "non-concat dimension differs: " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
    total += p.dim(axis);
  }
  Shape out_shape = axis == 1 ? Shape{fixed, total} : Shape{total, fixed};
  ArrayX<S> v(shape_numel(out_shape));
  Eigen::Map<MatX<S>> vm(v.data(), out_shape[0], out_shape[1]);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (auto& p : parts) {
    offsets.push_back(off);
    if (axis == 1)
      vm.middleCols(off, p.dim(1)) = p.mat();
    else
      vm.middleRows(off, p.dim(0)) = p.mat();
    off += p.dim(axis);
  }
  std::vector<Eigen::Index> sizes;
  for (auto& p : parts) sizes.push_back(p.dim(axis));
  return detail::make_result<S>(
      out_shape, std::move(v), parts,
      [axis, offsets, sizes, out_shape](typename Tensor<S>::Node& self) {
        Eigen::Map<const MatX<S>> g(self.grad.data(), out_shape[0], out_shape[1]);
        for (size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = *self.parents[i];
          auto& pg = p.ensure_grad();
          Eigen::Map<MatX<S>> pm(pg.data(), p.shape[0], p.shape[1]);
          if (axis == 1)
            pm += g.middleCols(offsets[i], sizes[i]);
          else
            pm += g.middleRows(offsets[i], sizes[i]);
        }
      });
}

// ---------------------------------------------------------------------------
// Slices and row gather.

template <class S>
Tensor<S> slice_cols(Tensor<S> a, Eigen::Index c0, Eigen::Index c1) {
  if (a.rank() != 2) op_error("slice", "expects rank-2 tensor");
  if (c0 < 0 || c1 > a.dim(1) || c0 >= c1)
    op_error("slice", "column range [" + std::to_string(c0) + "," + std::to_string(c1) +
                          ") invalid for shape " + shape_str(a.shape()));
  Eigen::Index rows = a.dim(0), cols = c1 - c0;
  ArrayX<S> v(rows * cols);
  Eigen::Map<MatX<S>>(v.data(), rows, cols) = a.mat().middleCols(c0, cols);
  return detail::make_result<S>(
      {rows, cols}, std::move(v), {a}, [c0, rows, cols](typename Tensor<S>::Node& self) {
        auto& p = *self.parents[0];
        Eigen::Map<MatX<S>> pg(p.ensure_grad().data(), p.shape[0], p.shape[1]);
        pg.middleCols(c0, cols) += Eigen::Map<const MatX<S>>(self.grad.data(), rows, cols);
      });
}

template <class S>
Tensor<S> slice_rows(Tensor<S> a, Eigen::Index r0, Eigen::Index r1) {
  if (a.rank() != 2) op_error("slice", "expects rank-2 tensor");
  if (r0 < 0 || r1 > a.dim(0) || r0 >= r1)
    op_error("slice", "row range [" + std::to_string(r0) + "," + std::to_string(r1) +
                          ") invalid for shape " + shape_str(a.shape()));
  Eigen::Index rows = r1 - r0, cols = a.dim(1);
  ArrayX<S> v(rows * cols);
  Eigen::Map<MatX<S>>(v.data(), rows, cols) = a.mat().middleRows(r0, rows);
  return detail::make_result<S>(
      {rows, cols}, std::move(v), {a}, [r0, rows, cols](typename Tensor<S>::Node& self) {
        auto& p = *self.parents[0];
        Eigen::Map<MatX<S>> pg(p.ensure_grad().data(), p.shape[0], p.shape[1]);
        pg.middleRows(r0, rows) += Eigen::Map<const MatX<S>>(self.grad.data(), rows, cols);
      });
}

template <class S>
Tensor<S> gather_rows(Tensor<S> a, std::vector<Eigen::Index> idx) {
  if (a.rank() != 2) op_error("gather_rows", "expects rank-2 tensor");
  for (auto i : idx)
    if (i < 0 || i >= a.dim(0))
      op_error("gather_rows", "row index " + std::to_string(i) + " out of range for shape " +
                                  shape_str(a.shape()));
  Eigen::Index rows = Eigen::Index(idx.size()), cols = a.dim(1);
  ArrayX<S> v(rows * cols);
  Eigen::Map<MatX<S>> vm(v.data(), rows, cols);
  auto am = a.mat();
  for (Eigen::Index r = 0; r < rows; ++r) vm.row(r) = am.row(idx[size_t(r)]);
  return detail::make_result<S>(
      {rows, cols}, std::move(v), {a},
      [idx = std::move(idx), rows, cols](typename Tensor<S>::Node& self) {
        auto& p = *self.parents[0];
        Eigen::Map<MatX<S>> pg(p.ensure_grad().data(), p.shape[0], p.shape[1]);
        Eigen::Map<const MatX<S>> g(self.grad.data(), rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) pg.row(idx[size_t(r)]) += g.row(r);
      });
}

// Same data, new shape; the element count must be preserved.
template <class S>
Tensor<S> reshape(Tensor<S> a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    op_error("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  ArrayX<S> v = a.value();
  return detail::make_result<S>(std::move(shape), std::move(v), {a},
                                [](typename Tensor<S>::Node& self) {
                                  self.parents[0]->ensure_grad() += self.grad;
                                });
}

// ---------------------------------------------------------------------------
// Reductions.

template <class S>
Tensor<S> sum(Tensor<S> a) {
  ArrayX<S> v(1);
  v[0] = a.value().sum();
  return detail::make_result<S>({1}, std::move(v), {a},
                                [](typename Tensor<S>::Node& self) {
                                  self.parents[0]->ensure_grad() += self.grad[0];
                                });
}

template <class S>
Tensor<S> mean(Tensor<S> a) {
  S inv = S(1) / S(a.numel());
  ArrayX<S> v(1);
  v[0] = a.value().sum() * inv;
  return detail::make_result<S>({1}, std::move(v), {a},
                                [inv](typename Tensor<S>::Node& self) {
                                  self.parents[0]->ensure_grad() += self.grad[0] * inv;
                                });
}

namespace detail {

template <class S>
Tensor<S> reduce_axis(const char* op, Tensor<S> a, int axis, bool take_mean) {
  if (a.rank() != 2) op_error(op, "expects rank-2 tensor, got " + shape_str(a.shape()));
  if (axis != 0 && axis != 1) op_error(op, "axis must be 0 or 1");
  Eigen::Index rows = a.dim(0), cols = a.dim(1);
  S inv = take_mean ? S(1) / S(axis == 0 ? rows : cols) : S(1);
  Shape out_shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  ArrayX<S> v(shape_numel(out_shape));
  if (axis == 0)
    Eigen::Map<MatX<S>>(v.data(), 1, cols) = a.mat().colwise().sum() * inv;
  else
    Eigen::Map<MatX<S>>(v.data(), rows, 1) = a.mat().rowwise().sum() * inv;
  return detail::make_result<S>(
      out_shape, std::move(v), {a}, [axis, rows, cols, inv](typename Tensor<S>::Node& self) {
        auto& p = *self.parents[0];
        Eigen::Map<MatX<S>> pg(p.ensure_grad().data(), rows, cols);
        if (axis == 0) {
          Eigen::Map<const MatX<S>> g(self.grad.data(), 1, cols);
          pg += (g * inv).replicate(rows, 1);
        } else {
          Eigen::Map<const MatX<S>> g(self.grad.data(), rows, 1);
          pg += (g * inv).replicate(1, cols);
        }
      });
}

}  // namespace detail

template <class S>
Tensor<S> sum(Tensor<S> a, int axis) {
  return detail::reduce_axis("sum", a, axis, false);
}

template <class S>
Tensor<S> mean(Tensor<S> a, int axis) {
  return detail::reduce_axis("mean", a, axis, true);
}

// Sum of squares of (a - b), the workhorse of both objectives.
template <class S>
Tensor<S> sum_squared_diff(Tensor<S> a, Tensor<S> b) {
  auto d = sub(a, b);
  return sum(mul(d, d));
}

}  // namespace radiant
