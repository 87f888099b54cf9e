#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "funet/rng.hpp"

namespace funet {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense shape of rank 1..4. Canonical 4-D layout is (n, c, h, w).
struct Shape {
  std::vector<int> dims;

  Shape() = default;
  Shape(std::initializer_list<int> d) : dims(d) { validate(); }
  explicit Shape(std::vector<int> d) : dims(std::move(d)) { validate(); }

  static Shape nchw(int n, int c, int h, int w) { return Shape{n, c, h, w}; }

  int rank() const { return int(dims.size()); }
  std::int64_t numel() const {
    std::int64_t p = 1;
    for (int d : dims) p *= d;
    return p;
  }
  int operator[](int i) const { return dims[size_t(i)]; }

  // NCHW accessors, valid for rank-4 tensors only.
  int n() const { return dims[0]; }
  int c() const { return dims[1]; }
  int h() const { return dims[2]; }
  int w() const { return dims[3]; }

  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return dims != o.dims; }

  std::string str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ")";
    return os.str();
  }

 private:
  void validate() const {
    if (dims.empty() || dims.size() > 4)
      throw Error("shape rank must be 1..4, got " + std::to_string(dims.size()));
    for (int d : dims)
      if (d < 1) throw Error("shape extent must be >= 1, got " + std::to_string(d));
  }
};

template <class T>
struct TensorT;

template <class T>
using TensorPtr = std::shared_ptr<TensorT<T>>;

// Dense row-major tensor. Immutable after forward creation except for the
// grad buffer. `node` is the id of the tape node that produced it, -1 for
// leaves.
template <class T>
struct TensorT {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  int node = -1;

  std::int64_t numel() const { return std::int64_t(data.size()); }

  T item() const {
    if (data.size() != 1) throw Error("item() on non-scalar tensor " + shape.str());
    return data[0];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { grad.assign(data.size(), T(0)); }
};

template <class T>
TensorPtr<T> make_tensor(const Shape& s) {
  auto t = std::make_shared<TensorT<T>>();
  t->shape = s;
  t->data.assign(size_t(s.numel()), T(0));
  return t;
}

// ---------------------------------------------------------------------------
// Tape: ordered records of the forward graph, replayed in reverse by
// backward(). Recording is active while a TapeT instance is alive; nested
// tapes shadow the outer one.
// ---------------------------------------------------------------------------
template <class T>
class TapeT {
 public:
  struct Node {
    const char* op;
    std::vector<TensorPtr<T>> inputs;
    std::vector<TensorPtr<T>> outputs;
    std::function<void()> backward;  // reads output grads, accumulates input grads
  };

  TapeT() : prev_(active()) { active() = this; }
  ~TapeT() { active() = prev_; }
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  static TapeT*& active() {
    thread_local TapeT* t = nullptr;
    return t;
  }

  int record(const char* op, std::vector<TensorPtr<T>> inputs,
             std::vector<TensorPtr<T>> outputs, std::function<void()> backward) {
    const int id = int(nodes_.size());
    for (auto& o : outputs) {
      o->node = id;
      o->requires_grad = true;
      o->ensure_grad();
    }
    nodes_.push_back(Node{op, std::move(inputs), std::move(outputs), std::move(backward)});
    return id;
  }

  size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss)=1 and walks the tape in reverse. Leaf grads
  // accumulate across calls; intermediate grads are reset each call.
  void backward(const TensorPtr<T>& loss) {
    if (loss->numel() != 1) throw Error("backward: loss must be scalar, got " + loss->shape.str());
    if (loss->node < 0 || size_t(loss->node) >= nodes_.size())
      throw Error("backward: loss tensor is not on this tape");
    for (auto& n : nodes_)
      for (auto& o : n.outputs) o->zero_grad();
    for (auto& n : nodes_)
      for (auto& in : n.inputs)
        if (in->requires_grad) in->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->backward) it->backward();
  }

 private:
  std::vector<Node> nodes_;
  TapeT* prev_;
};

// Suppresses tape recording in its scope (eval-mode forwards).
template <class T>
class NoGradT {
 public:
  NoGradT() : saved_(TapeT<T>::active()) { TapeT<T>::active() = nullptr; }
  ~NoGradT() { TapeT<T>::active() = saved_; }

 private:
  TapeT<T>* saved_;
};

template <class T>
inline bool grad_wanted(const TensorPtr<T>& a) {
  return TapeT<T>::active() != nullptr && a->requires_grad;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> zeros(const Shape& s, bool requires_grad = false) {
  auto t = make_tensor<T>(s);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

template <class T>
TensorPtr<T> full(const Shape& s, T v, bool requires_grad = false) {
  auto t = zeros<T>(s, requires_grad);
  std::fill(t->data.begin(), t->data.end(), v);
  return t;
}

template <class T>
TensorPtr<T> from_values(const Shape& s, const std::vector<T>& values,
                         bool requires_grad = false) {
  if (std::int64_t(values.size()) != s.numel())
    throw Error("from_values: " + std::to_string(values.size()) + " values for shape " + s.str());
  auto t = zeros<T>(s, requires_grad);
  t->data = values;
  return t;
}

template <class T>
TensorPtr<T> uniform(const Shape& s, std::uint64_t seed, T lo, T hi,
                     bool requires_grad = false) {
  auto t = zeros<T>(s, requires_grad);
  Rng rng(seed);
  for (auto& v : t->data) v = T(rng.uniform(double(lo), double(hi)));
  return t;
}

template <class T>
TensorPtr<T> normal(const Shape& s, std::uint64_t seed, T mu, T sigma,
                    bool requires_grad = false) {
  auto t = zeros<T>(s, requires_grad);
  Rng rng(seed);
  for (auto& v : t->data) v = T(rng.normal(double(mu), double(sigma)));
  return t;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops (equal shapes only; scalar variants separate)
// ---------------------------------------------------------------------------

template <class T>
inline void check_same_shape(const char* op, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape)
    throw Error(std::string(op) + ": shape mismatch " + a->shape.str() + " vs " + b->shape.str());
}

template <class T>
inline void accum_grad(const TensorPtr<T>& t, size_t i, T v) {
  if (t->requires_grad) t->grad[i] += v;
}

template <class T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  check_same_shape("add", a, b);
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (auto* tape = TapeT<T>::active(); tape && (a->requires_grad || b->requires_grad)) {
    tape->record("add", {a, b}, {out}, [a, b, out] {
      for (size_t i = 0; i < out->data.size(); ++i) {
        accum_grad(a, i, out->grad[i]);
        accum_grad(b, i, out->grad[i]);
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  check_same_shape("sub", a, b);
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] - b->data[i];
  if (auto* tape = TapeT<T>::active(); tape && (a->requires_grad || b->requires_grad)) {
    tape->record("sub", {a, b}, {out}, [a, b, out] {
      for (size_t i = 0; i < out->data.size(); ++i) {
        accum_grad(a, i, out->grad[i]);
        accum_grad(b, i, -out->grad[i]);
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  check_same_shape("mul", a, b);
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
  if (auto* tape = TapeT<T>::active(); tape && (a->requires_grad || b->requires_grad)) {
    tape->record("mul", {a, b}, {out}, [a, b, out] {
      for (size_t i = 0; i < out->data.size(); ++i) {
        accum_grad(a, i, out->grad[i] * b->data[i]);
        accum_grad(b, i, out->grad[i] * a->data[i]);
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> scale(const TensorPtr<T>& a, T s) {
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * s;
  if (auto* tape = TapeT<T>::active(); tape && a->requires_grad) {
    tape->record("scale", {a}, {out}, [a, out, s] {
      for (size_t i = 0; i < out->data.size(); ++i) accum_grad(a, i, out->grad[i] * s);
    });
  }
  return out;
}

template <class T>
TensorPtr<T> add_scalar(const TensorPtr<T>& a, T s) {
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + s;
  if (auto* tape = TapeT<T>::active(); tape && a->requires_grad) {
    tape->record("add_scalar", {a}, {out}, [a, out] {
      for (size_t i = 0; i < out->data.size(); ++i) accum_grad(a, i, out->grad[i]);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(size_t(s.rank()));
  std::int64_t acc = 1;
  for (int i = s.rank() - 1; i >= 0; --i) {
    st[size_t(i)] = acc;
    acc *= s[i];
  }
  return st;
}

}  // namespace detail

// Reduces over `axes` (all axes when empty => scalar result of shape (1)).
// Reduced axes are dropped from the output shape.
template <class T>
TensorPtr<T> reduce_sum(const TensorPtr<T>& x, std::vector<int> axes = {}, bool mean = false) {
  const int rank = x->shape.rank();
  std::vector<bool> red(size_t(rank), false);
  if (axes.empty()) {
    red.assign(size_t(rank), true);
  } else {
    for (int a : axes) {
      if (a < 0 || a >= rank)
        throw Error("reduce: axis " + std::to_string(a) + " invalid for rank " + std::to_string(rank));
      red[size_t(a)] = true;
    }
  }
  std::vector<int> out_dims;
  std::int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    if (red[size_t(i)])
      count *= x->shape[i];
    else
      out_dims.push_back(x->shape[i]);
  }
  if (out_dims.empty()) out_dims.push_back(1);
  auto out = make_tensor<T>(Shape(out_dims));

  const auto xs = detail::row_major_strides(x->shape);
  // map each input linear index to its output linear index
  std::vector<std::int64_t> out_index(x->data.size());
  {
    const auto os = detail::row_major_strides(out->shape);
    std::vector<int> idx(size_t(rank), 0);
    for (std::int64_t li = 0; li < x->numel(); ++li) {
      std::int64_t oi = 0;
      size_t k = 0;
      for (int i = 0; i < rank; ++i)
        if (!red[size_t(i)]) oi += idx[size_t(i)] * os[k++];
      out_index[size_t(li)] = oi;
      for (int i = rank - 1; i >= 0; --i) {
        if (++idx[size_t(i)] < x->shape[i]) break;
        idx[size_t(i)] = 0;
      }
    }
  }
  for (size_t i = 0; i < x->data.size(); ++i) out->data[size_t(out_index[i])] += x->data[i];
  const T inv = mean ? T(1) / T(count) : T(1);
  if (mean)
    for (auto& v : out->data) v *= inv;

  if (auto* tape = TapeT<T>::active(); tape && x->requires_grad) {
    tape->record(mean ? "mean" : "sum", {x}, {out},
                 [x, out, out_index = std::move(out_index), inv] {
                   for (size_t i = 0; i < x->data.size(); ++i)
                     accum_grad(x, i, out->grad[size_t(out_index[i])] * inv);
                 });
  }
  return out;
}

template <class T>
TensorPtr<T> reduce_mean(const TensorPtr<T>& x, std::vector<int> axes = {}) {
  return reduce_sum<T>(x, std::move(axes), true);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle
// ---------------------------------------------------------------------------

// Max over all input coordinates of the relative disagreement between the
// analytic gradient and the central finite difference of f.
template <class T>
double finite_difference_check(
    const std::function<TensorPtr<T>(const std::vector<TensorPtr<T>>&)>& f,
    const std::vector<TensorPtr<T>>& inputs, T eps) {
  if (eps <= T(0)) throw Error("finite_difference_check: eps must be > 0");
  std::vector<std::vector<T>> analytic;
  {
    TapeT<T> tape;
    for (auto& in : inputs) {
      in->requires_grad = true;
      in->zero_grad();
      in->ensure_grad();
    }
    auto loss = f(inputs);
    tape.backward(loss);
    for (auto& in : inputs) analytic.push_back(in->grad);
  }
  double worst = 0.0;
  NoGradT<T> ng;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto& in = inputs[k];
    for (size_t i = 0; i < in->data.size(); ++i) {
      const T saved = in->data[i];
      in->data[i] = saved + eps;
      const double fp = double(f(inputs)->item());
      in->data[i] = saved - eps;
      const double fm = double(f(inputs)->item());
      in->data[i] = saved;
      const double num = (fp - fm) / (2.0 * double(eps));
      const double ana = double(analytic[k][i]);
      const double denom = std::max({std::fabs(ana), std::fabs(num), 1e-8});
      worst = std::max(worst, std::fabs(ana - num) / denom);
    }
  }
  return worst;
}

using Scalar = float;
using Tensor = TensorT<Scalar>;
using Tape = TapeT<Scalar>;
using NoGrad = NoGradT<Scalar>;

}  // namespace funet
