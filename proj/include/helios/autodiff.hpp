#pragma once

// Minimal dense reverse-mode differentiation in double precision.
//
// A Tape owns every value produced during one forward pass. Ops append a node
// holding the result and, when any input requires a gradient, a closure that
// pushes the node's gradient back into its inputs. Tape::backward walks the
// nodes in exact reverse order of creation.
//
// Broadcasting is limited to scalar-tensor pairs; everything else goes through
// an explicit expand().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helios/error.hpp"

namespace helios::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "x" : "") << s[i];
  out << ']';
  return out.str();
}

/// Row-major dense array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(numel(shape_), 0.0) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor filled(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return shape_.at(i); }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] std::vector<double>& data() { return data_; }
  [[nodiscard]] double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  [[nodiscard]] double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Shape shape() const { return value().shape(); }
  [[nodiscard]] std::size_t size() const { return value().size(); }
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] Tensor grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back({std::move(value), {}, requires_grad, {}, "leaf"});
    return {this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op result. The closure is kept only if some input needs a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    for (double v : value.data()) {
      if (std::isnan(v)) throw NumericError(std::string(op) + " produced NaN");
    }
    bool needs = false;
    for (const Var& v : inputs) {
      if (v.tape() != this) throw ContractError(std::string(op) + ": input from a different tape");
      needs = needs || nodes_[v.id()].requires_grad;
    }
    nodes_.push_back({std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, op});
    return {this, nodes_.size() - 1};
  }

  [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator of a node, allocated on first use.
  std::vector<double>& grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }

  [[nodiscard]] Tensor grad(std::size_t id) const {
    const auto& n = nodes_[id];
    if (n.grad.empty()) return Tensor(n.value.shape());
    return Tensor(n.value.shape(), n.grad);
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates in reverse creation order.
  void backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to a different tape");
    if (value(loss.id()).size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_str(value(loss.id()).shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[loss.id()].requires_grad) return;
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::string& op_name(std::size_t id) const { return nodes_[id].op; }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string op;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }
inline Tensor Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(a.shape()));
  }
}

/// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
  [[nodiscard]] std::size_t index(std::size_t o, std::size_t k, std::size_t i) const {
    return (o * len + k) * inner + i;
  }
};

inline AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(s));
  }
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

inline Shape reduced_shape(Shape s, std::size_t axis) {
  s[axis] = 1;
  return s;
}

/// Elementwise unary op; `deriv(x, y)` is dy/dx.
template <typename F, typename D>
Var unary(const char* op, const Var& a, F f, D deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(op, std::move(y), {a}, [ia, deriv](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const auto& g = t.grad_buffer(self);
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

/// Elementwise binary op with scalar broadcasting; `da`, `db` are partials.
template <typename F, typename DA, typename DB>
Var binary(const char* op, const Var& a, const Var& b, F f, DA da, DB db) {
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": inputs on different tapes");
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  // Between two one-element operands the higher-rank shape wins.
  const bool a_scalar =
      x.size() == 1 && (z.size() != 1 || z.shape().size() > x.shape().size());
  const bool b_scalar =
      z.size() == 1 && (x.size() != 1 || x.shape().size() > z.shape().size());
  if (!a_scalar && !b_scalar) require_same_shape(op, a, b);
  Tensor y(a_scalar ? z.shape() : x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = f(x[a_scalar ? 0 : i], z[b_scalar ? 0 : i]);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape()->record(
      op, std::move(y), {a, b}, [ia, ib, a_scalar, b_scalar, da, db](Tape& t, std::size_t self) {
        const auto& g = t.grad_buffer(self);
        const Tensor& xv = t.value(ia);
        const Tensor& zv = t.value(ib);
        if (t.requires_grad(ia)) {
          auto& ga = t.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga[a_scalar ? 0 : i] += g[i] * da(xv[a_scalar ? 0 : i], zv[b_scalar ? 0 : i]);
          }
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb[b_scalar ? 0 : i] += g[i] * db(xv[a_scalar ? 0 : i], zv[b_scalar ? 0 : i]);
          }
        }
      });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Var div(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw NumericError("div: division by zero");
  }
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

inline Var scale(const Var& a, double c) {
  return detail::unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(const Var& a, double c) {
  return detail::unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

/// x^p for a constant exponent p.
inline Var scalar_pow(const Var& a, double p) {
  return detail::unary(
      "scalar_pow", a, [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

inline Var exp(const Var& a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input " + std::to_string(v));
  }
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

/// Square root; the derivative at 0 is taken as 0.
inline Var sqrt(const Var& a) {
  for (double v : a.value().data()) {
    if (v < 0.0) throw NumericError("sqrt: negative input " + std::to_string(v));
  }
  return detail::unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

inline Var tanh(const Var& a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

/// max(x, 0); subgradient 0 at the kink.
inline Var relu(const Var& a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// max(x, lo); gradient flows only where x > lo.
inline Var clamp_min(const Var& a, double lo) {
  return detail::unary(
      "clamp_min", a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra and structure
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  detail::require_rank("matmul", a, 2);
  detail::require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const auto& A = a.value().data();
  const auto& B = b.value().data();
  Tensor c({n, m});
  auto& C = c.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * m];
      double* crow = &C[i * m];
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", std::move(c), {a, b}, [ia, ib, n, k, m](Tape& t, std::size_t self) {
    const auto& G = t.grad_buffer(self);
    const auto& Av = t.value(ia).data();
    const auto& Bv = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto& gA = t.grad_buffer(ia);
      // gA += G·Bᵀ, accumulated row-wise over a transposed copy of B.
      std::vector<double> bt(k * m);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = Bv[p * m + j];
      }
      for (std::size_t i = 0; i < n; ++i) {
        double* garow = &gA[i * k];
        for (std::size_t j = 0; j < m; ++j) {
          const double g = G[i * m + j];
          if (g == 0.0) continue;
          const double* btrow = &bt[j * k];
          for (std::size_t p = 0; p < k; ++p) garow[p] += g * btrow[p];
        }
      }
    }
    if (t.requires_grad(ib)) {
      auto& gB = t.grad_buffer(ib);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gB[p * m + j] += av * G[i * m + j];
        }
      }
    }
  });
}

inline Var transpose(const Var& a) {
  detail::require_rank("transpose", a, 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor y({c, r});
  const auto& x = a.value();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) y.at(j, i) = x.at(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record("transpose", std::move(y), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    }
  });
}

inline Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor y(std::move(shape), a.value().data());
  const std::size_t ia = a.id();
  return a.tape()->record("reshape", std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

/// Repeats size-1 dimensions of `a` up to `shape`.
inline Var expand(const Var& a, const Shape& shape) {
  const Shape& s = a.shape();
  if (s.size() != shape.size()) {
    throw ShapeError("expand: rank mismatch " + shape_str(s) + " vs " + shape_str(shape));
  }
  for (std::size_t d = 0; d < s.size(); ++d) {
    if (s[d] != shape[d] && s[d] != 1) {
      throw ShapeError("expand: cannot expand " + shape_str(s) + " to " + shape_str(shape));
    }
  }
  // Source offset for every output element.
  std::vector<std::size_t> src(numel(shape));
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) off = off * s[d] + (s[d] == 1 ? 0 : idx[d]);
    src[flat] = off;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  Tensor y(shape);
  const auto& x = a.value();
  for (std::size_t i = 0; i < src.size(); ++i) y[i] = x[src[i]];
  const std::size_t ia = a.id();
  return a.tape()->record("expand", std::move(y), {a},
                          [ia, src = std::move(src)](Tape& t, std::size_t self) {
                            const auto& g = t.grad_buffer(self);
                            auto& ga = t.grad_buffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[src[i]] += g[i];
                          });
}

/// Elements [begin, end) along `axis`.
inline Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto sp = detail::split_axis("slice", a.shape(), axis);
  if (begin > end || end > sp.len) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for shape " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  Tensor y(shape);
  const auto& x = a.value();
  const std::size_t len = end - begin;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t k = 0; k < len; ++k) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        y[(o * len + k) * sp.inner + i] = x[sp.index(o, begin + k, i)];
      }
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record("slice", std::move(y), {a}, [ia, sp, begin, len](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t k = 0; k < len; ++k) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          ga[sp.index(o, begin + k, i)] += g[(o * len + k) * sp.inner + i];
        }
      }
    }
  });
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size() && axis < s.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw ShapeError("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s) +
                       " along axis " + std::to_string(axis));
    }
    total += s[axis];
  }
  Shape shape = first;
  shape[axis] = total;
  const auto out_sp = detail::split_axis("concat", shape, axis);
  Tensor y(shape);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto sp = detail::split_axis("concat", p.shape(), axis);
    const auto& x = p.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t k = 0; k < sp.len; ++k) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          y[out_sp.index(o, off + k, i)] = x[sp.index(o, k, i)];
        }
      }
    }
    off += sp.len;
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape()->record(
      "concat", std::move(y), parts,
      [ids, offsets, axis, out_sp](Tape& t, std::size_t self) {
        const auto& g = t.grad_buffer(self);
        for (std::size_t n = 0; n < ids.size(); ++n) {
          if (!t.requires_grad(ids[n])) continue;
          const auto sp = detail::split_axis("concat", t.value(ids[n]).shape(), axis);
          auto& gp = t.grad_buffer(ids[n]);
          for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t k = 0; k < sp.len; ++k) {
              for (std::size_t i = 0; i < sp.inner; ++i) {
                gp[sp.index(o, k, i)] += g[out_sp.index(o, offsets[n] + k, i)];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    for (auto& v : t.grad_buffer(ia)) v += g;
  });
}

inline Var mean(const Var& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// Sum along `axis`, keeping it as a size-1 dimension.
inline Var sum_along_axis(const Var& a, std::size_t axis) {
  const auto sp = detail::split_axis("sum_along_axis", a.shape(), axis);
  Tensor y(detail::reduced_shape(a.shape(), axis));
  const auto& x = a.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t k = 0; k < sp.len; ++k) {
      for (std::size_t i = 0; i < sp.inner; ++i) y[o * sp.inner + i] += x[sp.index(o, k, i)];
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record("sum_along_axis", std::move(y), {a}, [ia, sp](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t k = 0; k < sp.len; ++k) {
        for (std::size_t i = 0; i < sp.inner; ++i) ga[sp.index(o, k, i)] += g[o * sp.inner + i];
      }
    }
  });
}

inline Var mean_along_axis(const Var& a, std::size_t axis) {
  const auto len = detail::split_axis("mean_along_axis", a.shape(), axis).len;
  if (len == 0) throw ShapeError("mean_along_axis over an empty axis");
  return scale(sum_along_axis(a, axis), 1.0 / static_cast<double>(len));
}

/// Max along `axis`; ties resolve to the lowest index, which receives the
/// whole subgradient.
inline Var max_along_axis(const Var& a, std::size_t axis) {
  const auto sp = detail::split_axis("max_along_axis", a.shape(), axis);
  if (sp.len == 0) throw ShapeError("max_along_axis over an empty axis");
  Tensor y(detail::reduced_shape(a.shape(), axis));
  std::vector<std::size_t> arg(y.size());
  const auto& x = a.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = sp.index(o, 0, i);
      for (std::size_t k = 1; k < sp.len; ++k) {
        const std::size_t idx = sp.index(o, k, i);
        if (x[idx] > x[best]) best = idx;
      }
      y[o * sp.inner + i] = x[best];
      arg[o * sp.inner + i] = best;
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record("max_along_axis", std::move(y), {a},
                          [ia, arg = std::move(arg)](Tape& t, std::size_t self) {
                            const auto& g = t.grad_buffer(self);
                            auto& ga = t.grad_buffer(ia);
                            for (std::size_t j = 0; j < g.size(); ++j) ga[arg[j]] += g[j];
                          });
}

inline Var softmax_along_axis(const Var& a, std::size_t axis) {
  const auto sp = detail::split_axis("softmax_along_axis", a.shape(), axis);
  Tensor y(a.shape());
  const auto& x = a.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sp.len; ++k) m = std::max(m, x[sp.index(o, k, i)]);
      double s = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        const std::size_t idx = sp.index(o, k, i);
        y[idx] = std::exp(x[idx] - m);
        s += y[idx];
      }
      for (std::size_t k = 0; k < sp.len; ++k) y[sp.index(o, k, i)] /= s;
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record("softmax_along_axis", std::move(y), {a}, [ia, sp](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& yv = t.value(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < sp.len; ++k) {
          const std::size_t idx = sp.index(o, k, i);
          dot += g[idx] * yv[idx];
        }
        for (std::size_t k = 0; k < sp.len; ++k) {
          const std::size_t idx = sp.index(o, k, i);
          ga[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

/// log Σ exp(x) along `axis`, keeping it as a size-1 dimension.
inline Var logsumexp_along_axis(const Var& a, std::size_t axis) {
  const auto sp = detail::split_axis("logsumexp_along_axis", a.shape(), axis);
  Tensor y(detail::reduced_shape(a.shape(), axis));
  const auto& x = a.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sp.len; ++k) m = std::max(m, x[sp.index(o, k, i)]);
      double s = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) s += std::exp(x[sp.index(o, k, i)] - m);
      y[o * sp.inner + i] = m + std::log(s);
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record("logsumexp_along_axis", std::move(y), {a},
                          [ia, sp](Tape& t, std::size_t self) {
                            const auto& g = t.grad_buffer(self);
                            const auto& yv = t.value(self);
                            const auto& xv = t.value(ia);
                            auto& ga = t.grad_buffer(ia);
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              for (std::size_t i = 0; i < sp.inner; ++i) {
                                const std::size_t r = o * sp.inner + i;
                                for (std::size_t k = 0; k < sp.len; ++k) {
                                  const std::size_t idx = sp.index(o, k, i);
                                  ga[idx] += g[r] * std::exp(xv[idx] - yv[r]);
                                }
                              }
                            }
                          });
}

/// x / ‖x‖ over all elements.
inline Var l2_normalize(const Var& a) {
  double ss = 0.0;
  for (double v : a.value().data()) ss += v * v;
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0)) throw NumericError("l2_normalize: zero-norm input");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] / norm;
  const std::size_t ia = a.id();
  return a.tape()->record("l2_normalize", std::move(y), {a}, [ia, norm](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& yv = t.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * yv[i];
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (g[i] - yv[i] * dot) / norm;
  });
}

/// Scaled dot-product attention evaluated independently inside each group of
/// rows: out[G] = softmax(c · q[G] k[G]^T) v[G]. Rows in different groups never
/// interact. q, k: n × dk; v: n × dv; every row must belong to exactly one group.
inline Var grouped_attention(const Var& q, const Var& k, const Var& v,
                             const std::vector<std::vector<std::size_t>>& groups, double c) {
  detail::require_rank("grouped_attention", q, 2);
  detail::require_same_shape("grouped_attention", q, k);
  detail::require_rank("grouped_attention", v, 2);
  const std::size_t n = q.shape()[0], dk = q.shape()[1], dv = v.shape()[1];
  if (v.shape()[0] != n) {
    throw ShapeError("grouped_attention: shape mismatch " + shape_str(q.shape()) + " vs " +
                     shape_str(v.shape()));
  }
  std::vector<char> seen(n, 0);
  for (const auto& g : groups) {
    for (std::size_t i : g) {
      if (i >= n || seen[i]) throw ContractError("grouped_attention: groups must partition rows");
      seen[i] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ContractError("grouped_attention: groups must cover every row");
  }

  const auto& Q = q.value().data();
  const auto& K = k.value().data();
  const auto& V = v.value().data();
  // Attention weights per group, row-major |G| × |G|, kept for backward.
  std::vector<std::vector<double>> weights(groups.size());
  Tensor out({n, dv});
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const std::size_t m = g.size();
    auto& a = weights[gi];
    a.assign(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < m; ++s) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dk; ++j) dot += Q[g[r] * dk + j] * K[g[s] * dk + j];
        a[r * m + s] = c * dot;
        mx = std::max(mx, a[r * m + s]);
      }
      double total = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        a[r * m + s] = std::exp(a[r * m + s] - mx);
        total += a[r * m + s];
      }
      for (std::size_t s = 0; s < m; ++s) {
        a[r * m + s] /= total;
        const double w = a[r * m + s];
        for (std::size_t j = 0; j < dv; ++j) out[g[r] * dv + j] += w * V[g[s] * dv + j];
      }
    }
  }
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->record(
      "grouped_attention", std::move(out), {q, k, v},
      [iq, ik, iv, dk, dv, c, groups, weights = std::move(weights)](Tape& t, std::size_t self) {
        const auto& G = t.grad_buffer(self);
        const auto& Qv = t.value(iq).data();
        const auto& Kv = t.value(ik).data();
        const auto& Vv = t.value(iv).data();
        const bool gq = t.requires_grad(iq), gk = t.requires_grad(ik), gv = t.requires_grad(iv);
        std::vector<double> ds;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          const auto& g = groups[gi];
          const auto& a = weights[gi];
          const std::size_t m = g.size();
          if (gv) {
            auto& dV = t.grad_buffer(iv);
            for (std::size_t r = 0; r < m; ++r) {
              for (std::size_t s = 0; s < m; ++s) {
                const double w = a[r * m + s];
                for (std::size_t j = 0; j < dv; ++j) dV[g[s] * dv + j] += w * G[g[r] * dv + j];
              }
            }
          }
          if (!gq && !gk) continue;
          // dS = A ∘ (dA - rowsum(dA ∘ A)), with dA = dO · V^T.
          ds.assign(m * m, 0.0);
          for (std::size_t r = 0; r < m; ++r) {
            double rowdot = 0.0;
            for (std::size_t s = 0; s < m; ++s) {
              double da = 0.0;
              for (std::size_t j = 0; j < dv; ++j) da += G[g[r] * dv + j] * Vv[g[s] * dv + j];
              ds[r * m + s] = da;
              rowdot += da * a[r * m + s];
            }
            for (std::size_t s = 0; s < m; ++s) {
              ds[r * m + s] = c * a[r * m + s] * (ds[r * m + s] - rowdot);
            }
          }
          if (gq) {
            auto& dQ = t.grad_buffer(iq);
            for (std::size_t r = 0; r < m; ++r) {
              for (std::size_t s = 0; s < m; ++s) {
                const double w = ds[r * m + s];
                if (w == 0.0) continue;
                for (std::size_t j = 0; j < dk; ++j) dQ[g[r] * dk + j] += w * Kv[g[s] * dk + j];
              }
            }
          }
          if (gk) {
            auto& dK = t.grad_buffer(ik);
            for (std::size_t r = 0; r < m; ++r) {
              for (std::size_t s = 0; s < m; ++s) {
                const double w = ds[r * m + s];
                if (w == 0.0) continue;
                for (std::size_t j = 0; j < dk; ++j) dK[g[s] * dk + j] += w * Qv[g[r] * dk + j];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradcheckOptions {
  double eps = 1e-5;
  double rtol = 1e-4;
  /// Absolute floor so entries whose true gradient is ~0 are not judged on
  /// finite-difference round-off alone.
  double atol = 1e-7;
};

struct GradcheckFailure {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  bool passed = true;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::vector<GradcheckFailure> failures;

  [[nodiscard]] std::string summary() const {
    std::ostringstream out;
    out << (passed ? "pass" : "FAIL") << " max_rel=" << max_rel_error
        << " max_abs=" << max_abs_error << " failures=" << failures.size();
    for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i) {
      const auto& f = failures[i];
      out << " [in" << f.input << "#" << f.index << " a=" << f.analytic << " n=" << f.numeric << ']';
    }
    return out.str();
  }
};

using MultiFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares backward() against central differences for every input element.
/// `f` must return a scalar. Failures are reported, never thrown.
inline GradcheckReport gradcheck(const MultiFunction& f, const std::vector<Tensor>& inputs,
                                 const GradcheckOptions& opts = {}) {
  GradcheckReport report;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
    Var out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  const auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).value().item();
  };
  std::vector<Tensor> probe = inputs;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    for (std::size_t i = 0; i < inputs[n].size(); ++i) {
      const double x0 = inputs[n][i];
      probe[n][i] = x0 + opts.eps;
      const double fp = eval(probe);
      probe[n][i] = x0 - opts.eps;
      const double fm = eval(probe);
      probe[n][i] = x0;
      const double num = (fp - fm) / (2.0 * opts.eps);
      const double ana = analytic[n][i];
      const double err = std::abs(ana - num);
      const double mag = std::max(std::abs(ana), std::abs(num));
      report.max_abs_error = std::max(report.max_abs_error, err);
      if (mag > opts.atol) report.max_rel_error = std::max(report.max_rel_error, err / mag);
      if (err > opts.atol + opts.rtol * mag) {
        report.passed = false;
        report.failures.push_back({n, i, ana, num});
      }
    }
  }
  return report;
}

inline GradcheckReport gradcheck(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                                 double eps = 1e-5, double rtol = 1e-4) {
  GradcheckOptions opts;
  opts.eps = eps;
  opts.rtol = rtol;
  return gradcheck([&](Tape& t, const std::vector<Var>& v) { return f(t, v[0]); }, {x}, opts);
}

}  // namespace helios::ad
