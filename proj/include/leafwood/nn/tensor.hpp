#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace leafwood::nn {

/// Dense 2-D tensor participating in a reverse-mode differentiation graph.
/// Scalars are [1,1]; row vectors [1,c]; column vectors [r,1]. The handle is
/// a cheap shared reference to the graph node. `TensorT<float>` is the
/// production type; tests instantiate double for finite-difference oracles.
template <typename S>
class TensorT {
 public:
  struct Node {
    int rows = 0, cols = 0;
    std::vector<S> values;
    std::vector<S> grad;  // empty until backward touches this node
    bool requires_grad = false;
    std::vector<TensorT> parents;
    std::function<void(Node&)> backward;
    std::string name;  // set for parameters, used in diagnostics
  };

  TensorT() = default;

  TensorT(int rows, int cols, S fill = S(0), bool requires_grad = false) {
    node_ = std::make_shared<Node>();
    node_->rows = rows;
    node_->cols = cols;
    node_->values.assign(std::size_t(rows) * cols, fill);
    node_->requires_grad = requires_grad;
  }

  TensorT(int rows, int cols, std::vector<S> values, bool requires_grad = false) {
    if (std::size_t(rows) * cols != values.size())
      throw std::invalid_argument("tensor: value count does not match shape");
    node_ = std::make_shared<Node>();
    node_->rows = rows;
    node_->cols = cols;
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static TensorT scalar(S value) { return TensorT(1, 1, std::vector<S>{value}); }

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->values.size(); }
  std::vector<S>& values() { return node_->values; }
  const std::vector<S>& values() const { return node_->values; }
  S value() const { return node_->values.at(0); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  std::vector<S>& grad() {
    ensure_grad();
    return node_->grad;
  }
  const std::vector<S>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  Node* node() const { return node_.get(); }

  /// Runs reverse-mode accumulation from this scalar tensor.
  void backward() {
    if (size() != 1)
      throw std::invalid_argument("backward: root must be a scalar tensor");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    topo_sort(node_.get(), seen, order);
    ensure_grad();
    node_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward && !n->grad.empty()) n->backward(*n);
    }
  }

  void ensure_grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), S(0));
  }

 private:
  static void topo_sort(Node* root, std::unordered_set<Node*>& seen,
                        std::vector<Node*>& order) {
    // Iterative DFS; graphs can be a few thousand nodes deep.
    struct Frame {
      Node* node;
      std::size_t next_parent;
    };
    std::vector<Frame> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
      Frame& frame = stack.back();
      if (frame.next_parent < frame.node->parents.size()) {
        Node* parent = frame.node->parents[frame.next_parent++].node();
        if (parent && !seen.contains(parent)) {
          seen.insert(parent);
          stack.push_back({parent, 0});
        }
      } else {
        order.push_back(frame.node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

namespace detail {

template <typename S>
using EigenMat =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Map = Eigen::Map<EigenMat<S>>;
template <typename S>
using ConstMap = Eigen::Map<const EigenMat<S>>;

template <typename S>
Map<S> map(TensorT<S>& t) {
  return Map<S>(t.values().data(), t.rows(), t.cols());
}

template <typename S>
ConstMap<S> cmap(const TensorT<S>& t) {
  return ConstMap<S>(t.values().data(), t.rows(), t.cols());
}

template <typename S>
Map<S> grad_map(typename TensorT<S>::Node& n) {
  return Map<S>(n.grad.data(), n.rows, n.cols);
}

template <typename S>
ConstMap<S> node_grad(const typename TensorT<S>::Node& n) {
  return ConstMap<S>(n.grad.data(), n.rows, n.cols);
}

template <typename S>
[[noreturn]] void shape_error(const char* op, const TensorT<S>& a,
                              const TensorT<S>& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes [" +
                              std::to_string(a.rows()) + "," +
                              std::to_string(a.cols()) + "] and [" +
                              std::to_string(b.rows()) + "," +
                              std::to_string(b.cols()) + "]");
}

template <typename S>
TensorT<S> make_result(int rows, int cols, std::vector<S> values,
                       std::vector<TensorT<S>> parents,
                       std::function<void(typename TensorT<S>::Node&)> backward) {
  bool needs = false;
  for (const auto& p : parents) needs |= p.requires_grad();
  TensorT<S> out(rows, cols, std::move(values), needs);
  if (needs) {
    out.node()->parents = std::move(parents);
    out.node()->backward = std::move(backward);
  }
  return out;
}

/// Accumulates `delta` into a parent respecting row/column/scalar broadcast.
template <typename S>
void accumulate_broadcast(TensorT<S>& parent, const std::vector<S>& delta,
                          int rows, int cols) {
  if (!parent.requires_grad()) return;
  parent.ensure_grad();
  auto& g = parent.grad();
  if (parent.rows() == rows && parent.cols() == cols) {
    for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
  } else if (parent.rows() == 1 && parent.cols() == cols) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) g[c] += delta[std::size_t(r) * cols + c];
  } else if (parent.cols() == 1 && parent.rows() == rows) {
    for (int r = 0; r < rows; ++r) {
      S s = S(0);
      for (int c = 0; c < cols; ++c) s += delta[std::size_t(r) * cols + c];
      g[r] += s;
    }
  } else {  // scalar
    S s = S(0);
    for (S v : delta) s += v;
    g[0] += s;
  }
}

template <typename S>
bool broadcast_compatible(const TensorT<S>& a, const TensorT<S>& b) {
  return (b.rows() == a.rows() && b.cols() == a.cols()) ||
         (b.rows() == 1 && b.cols() == a.cols()) ||
         (b.cols() == 1 && b.rows() == a.rows()) || (b.rows() == 1 && b.cols() == 1);
}

template <typename S>
S broadcast_at(const TensorT<S>& b, int r, int c) {
  const int br = b.rows() == 1 ? 0 : r;
  const int bc = b.cols() == 1 ? 0 : c;
  return b.values()[std::size_t(br) * b.cols() + bc];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic (with row/column/scalar broadcast on the right)

template <typename S>
TensorT<S> add(TensorT<S> a, TensorT<S> b) {
  if (!detail::broadcast_compatible(a, b)) detail::shape_error("add", a, b);
  const int rows = a.rows(), cols = a.cols();
  std::vector<S> out(a.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[std::size_t(r) * cols + c] =
          a.values()[std::size_t(r) * cols + c] + detail::broadcast_at(b, r, c);
  return detail::make_result<S>(
      rows, cols, std::move(out), {a, b},
      [a, b, rows, cols](typename TensorT<S>::Node& n) mutable {
        detail::accumulate_broadcast(a, n.grad, rows, cols);
        detail::accumulate_broadcast(b, n.grad, rows, cols);
      });
}

template <typename S>
TensorT<S> sub(TensorT<S> a, TensorT<S> b) {
  if (!detail::broadcast_compatible(a, b)) detail::shape_error("sub", a, b);
  const int rows = a.rows(), cols = a.cols();
  std::vector<S> out(a.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[std::size_t(r) * cols + c] =
          a.values()[std::size_t(r) * cols + c] - detail::broadcast_at(b, r, c);
  return detail::make_result<S>(
      rows, cols, std::move(out), {a, b},
      [a, b, rows, cols](typename TensorT<S>::Node& n) mutable {
        detail::accumulate_broadcast(a, n.grad, rows, cols);
        std::vector<S> neg(n.grad.size());
        for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -n.grad[i];
        detail::accumulate_broadcast(b, neg, rows, cols);
      });
}

template <typename S>
TensorT<S> mul(TensorT<S> a, TensorT<S> b) {
  if (!detail::broadcast_compatible(a, b)) detail::shape_error("mul", a, b);
  const int rows = a.rows(), cols = a.cols();
  std::vector<S> out(a.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[std::size_t(r) * cols + c] =
          a.values()[std::size_t(r) * cols + c] * detail::broadcast_at(b, r, c);
  return detail::make_result<S>(
      rows, cols, std::move(out), {a, b},
      [a, b, rows, cols](typename TensorT<S>::Node& n) mutable {
        std::vector<S> da(n.grad.size()), db(n.grad.size());
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = std::size_t(r) * cols + c;
            da[i] = n.grad[i] * detail::broadcast_at(b, r, c);
            db[i] = n.grad[i] * a.values()[i];
          }
        detail::accumulate_broadcast(a, da, rows, cols);
        detail::accumulate_broadcast(b, db, rows, cols);
      });
}

template <typename S>
TensorT<S> add_scalar(TensorT<S> a, double s) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + S(s);
  return detail::make_result<S>(a.rows(), a.cols(), std::move(out), {a},
                                [a](typename TensorT<S>::Node& n) mutable {
                                  detail::accumulate_broadcast(a, n.grad, n.rows,
                                                               n.cols);
                                });
}

template <typename S>
TensorT<S> mul_scalar(TensorT<S> a, double s) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * S(s);
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a, s](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad()[i] += n.grad[i] * S(s);
      });
}

// ---------------------------------------------------------------------------
// nonlinearities and pointwise transforms

template <typename S>
TensorT<S> relu(TensorT<S> a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] > S(0) ? a.values()[i] : S(0);
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (a.values()[i] > S(0)) a.grad()[i] += n.grad[i];
      });
}

template <typename S>
TensorT<S> sigmoid(TensorT<S> a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = S(1) / (S(1) + std::exp(-a.values()[i]));
  TensorT<S> result = detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const S y = n.values[i];
          a.grad()[i] += n.grad[i] * y * (S(1) - y);
        }
      });
  return result;
}

template <typename S>
TensorT<S> log(TensorT<S> a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.values()[i]);
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad()[i] += n.grad[i] / a.values()[i];
      });
}

template <typename S>
TensorT<S> exp(TensorT<S> a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.values()[i]);
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad()[i] += n.grad[i] * n.values[i];
      });
}

/// Elementwise power with a constant exponent; inputs must be positive when
/// the exponent is fractional.
template <typename S>
TensorT<S> pow_scalar(TensorT<S> a, double exponent) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = S(std::pow(double(a.values()[i]), exponent));
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a, exponent](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad()[i] += n.grad[i] * S(exponent) *
                         S(std::pow(double(a.values()[i]), exponent - 1.0));
      });
}

/// Clamp with straight-through gradient inside [lo, hi] and zero outside.
template <typename S>
TensorT<S> clamp(TensorT<S> a, double lo, double hi) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::min(std::max(a.values()[i], S(lo)), S(hi));
  return detail::make_result<S>(
      a.rows(), a.cols(), std::move(out), {a},
      [a, lo, hi](typename TensorT<S>::Node& n) mutable {
        if (!a.requires_grad()) return;
        a.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const S v = a.values()[i];
          if (v >= S(lo) && v <= S(hi)) a.grad()[i] += n.grad[i];
        }
      });
}

// ---------------------------------------------------------------------------
// linear algebra and structure ops

template <typename S>
TensorT<S> matmul(TensorT<S> a, TensorT<S> b) {
  if (a.cols() != b.rows()) detail::shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<S> out(std::size_t(m) * n);
  {
    detail::Map<S> o(out.data(), m, n);
    o.noalias() = detail::cmap(a) * detail::cmap(b);
  }
  return detail::make_result<S>(
      m, n, std::move(out), {a, b},
      [a, b, m, k, n](typename TensorT<S>::Node& node) mutable {
        detail::ConstMap<S> dy(node.grad.data(), m, n);
        if (a.requires_grad()) {
          a.ensure_grad();
          detail::Map<S>(a.grad().data(), m, k).noalias() +=
              dy * detail::cmap(b).transpose();
        }
        if (b.requires_grad()) {
          b.ensure_grad();
          detail::Map<S>(b.grad().data(), k, n).noalias() +=
              detail::cmap(a).transpose() * dy;
        }
      });
}

/// Row gather: out[i,:] = x[index[i],:]. Backward scatter-adds.
template <typename S>
TensorT<S> gather_rows(TensorT<S> x, std::vector<std::uint32_t> index) {
  const int cols = x.cols();
  for (std::uint32_t i : index)
    if (int(i) >= x.rows())
      throw std::invalid_argument("gather_rows: index out of range");
  const int out_rows = int(index.size());
  std::vector<S> out(index.size() * std::size_t(cols));
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(x.values().data() + std::size_t(index[r]) * cols, cols,
                out.data() + r * cols);
  return detail::make_result<S>(
      out_rows, cols, std::move(out), {x},
      [x, index = std::move(index), cols](typename TensorT<S>::Node& n) mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto& g = x.grad();
        for (std::size_t r = 0; r < index.size(); ++r) {
          S* dst = g.data() + std::size_t(index[r]) * cols;
          const S* src = n.grad.data() + r * cols;
          for (int c = 0; c < cols; ++c) dst[c] += src[c];
        }
      });
}

template <typename S>
TensorT<S> concat_cols(std::vector<TensorT<S>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) detail::shape_error("concat_cols", parts[0], p);
    cols += p.cols();
  }
  std::vector<S> out(std::size_t(rows) * cols);
  int at = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < rows; ++r)
      std::copy_n(p.values().data() + std::size_t(r) * p.cols(), p.cols(),
                  out.data() + std::size_t(r) * cols + at);
    at += p.cols();
  }
  return detail::make_result<S>(
      rows, cols, std::move(out), parts,
      [parts, rows, cols](typename TensorT<S>::Node& n) mutable {
        int at = 0;
        for (auto& p : parts) {
          if (p.requires_grad()) {
            p.ensure_grad();
            for (int r = 0; r < rows; ++r) {
              S* dst = p.grad().data() + std::size_t(r) * p.cols();
              const S* src = n.grad.data() + std::size_t(r) * cols + at;
              for (int c = 0; c < p.cols(); ++c) dst[c] += src[c];
            }
          }
          at += p.cols();
        }
      });
}

template <typename S>
TensorT<S> slice_cols(TensorT<S> x, int begin, int end) {
  if (begin < 0 || end > x.cols() || begin >= end)
    throw std::invalid_argument("slice_cols: bad column range");
  const int rows = x.rows(), cols = end - begin;
  std::vector<S> out(std::size_t(rows) * cols);
  for (int r = 0; r < rows; ++r)
    std::copy_n(x.values().data() + std::size_t(r) * x.cols() + begin, cols,
                out.data() + std::size_t(r) * cols);
  return detail::make_result<S>(
      rows, cols, std::move(out), {x},
      [x, begin, rows, cols](typename TensorT<S>::Node& n) mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        for (int r = 0; r < rows; ++r) {
          S* dst = x.grad().data() + std::size_t(r) * x.cols() + begin;
          const S* src = n.grad.data() + std::size_t(r) * cols;
          for (int c = 0; c < cols; ++c) dst[c] += src[c];
        }
      });
}

/// Max over contiguous row groups of fixed size `group`; gradient is routed
/// to the argmax row of each (group, column) cell only.
template <typename S>
TensorT<S> grouped_max(TensorT<S> x, int group) {
  if (group < 1 || x.rows() % group != 0)
    throw std::invalid_argument("grouped_max: rows not divisible by group size");
  const int out_rows = x.rows() / group, cols = x.cols();
  std::vector<S> out(std::size_t(out_rows) * cols);
  std::vector<std::uint32_t> argmax(out.size());
  for (int g = 0; g < out_rows; ++g) {
    const S* base = x.values().data() + std::size_t(g) * group * cols;
    for (int c = 0; c < cols; ++c) {
      S best = base[c];
      std::uint32_t best_row = 0;
      for (int r = 1; r < group; ++r) {
        const S v = base[std::size_t(r) * cols + c];
        if (v > best) {
          best = v;
          best_row = std::uint32_t(r);
        }
      }
      out[std::size_t(g) * cols + c] = best;
      argmax[std::size_t(g) * cols + c] = std::uint32_t(g) * group + best_row;
    }
  }
  return detail::make_result<S>(
      out_rows, cols, std::move(out), {x},
      [x, argmax = std::move(argmax), cols](typename TensorT<S>::Node& n) mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const int c = int(i % cols);
          x.grad()[std::size_t(argmax[i]) * cols + c] += n.grad[i];
        }
      });
}

/// Max over variable-length contiguous row segments given by `offsets`
/// (size = segments + 1, offsets.front() == 0, offsets.back() == rows).
template <typename S>
TensorT<S> segment_max(TensorT<S> x, const std::vector<std::uint32_t>& offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 ||
      int(offsets.back()) != x.rows())
    throw std::invalid_argument("segment_max: bad offsets");
  const int segments = int(offsets.size()) - 1, cols = x.cols();
  std::vector<S> out(std::size_t(segments) * cols);
  std::vector<std::uint32_t> argmax(out.size());
  for (int s = 0; s < segments; ++s) {
    if (offsets[s + 1] <= offsets[s])
      throw std::invalid_argument("segment_max: empty segment");
    for (int c = 0; c < cols; ++c) {
      S best = x.values()[std::size_t(offsets[s]) * cols + c];
      std::uint32_t best_row = offsets[s];
      for (std::uint32_t r = offsets[s] + 1; r < offsets[s + 1]; ++r) {
        const S v = x.values()[std::size_t(r) * cols + c];
        if (v > best) {
          best = v;
          best_row = r;
        }
      }
      out[std::size_t(s) * cols + c] = best;
      argmax[std::size_t(s) * cols + c] = best_row;
    }
  }
  return detail::make_result<S>(
      segments, cols, std::move(out), {x},
      [x, argmax = std::move(argmax), cols](typename TensorT<S>::Node& n) mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const int c = int(i % cols);
          x.grad()[std::size_t(argmax[i]) * cols + c] += n.grad[i];
        }
      });
}

template <typename S>
TensorT<S> sum_all(TensorT<S> a) {
  S total = S(0);
  for (S v : a.values()) total += v;
  return detail::make_result<S>(1, 1, std::vector<S>{total}, {a},
                                [a](typename TensorT<S>::Node& n) mutable {
                                  if (!a.requires_grad()) return;
                                  a.ensure_grad();
                                  for (auto& g : a.grad()) g += n.grad[0];
                                });
}

template <typename S>
TensorT<S> mean_all(TensorT<S> a) {
  S total = S(0);
  for (S v : a.values()) total += v;
  const S inv = S(1) / S(a.size());
  return detail::make_result<S>(1, 1, std::vector<S>{total * inv}, {a},
                                [a, inv](typename TensorT<S>::Node& n) mutable {
                                  if (!a.requires_grad()) return;
                                  a.ensure_grad();
                                  for (auto& g : a.grad()) g += n.grad[0] * inv;
                                });
}

// ---------------------------------------------------------------------------
// batch normalization

/// Running statistics for one batch-norm layer; lives with the weights, not
/// in the graph.
template <typename S>
struct BatchNormState {
  std::vector<S> running_mean;
  std::vector<S> running_var;

  explicit BatchNormState(int channels = 0)
      : running_mean(channels, S(0)), running_var(channels, S(1)) {}
};

/// Per-column batch normalization. Training mode normalises with batch
/// statistics (population variance) and updates the running estimates;
/// eval mode is a deterministic affine map using the running statistics.
template <typename S>
TensorT<S> batch_norm(TensorT<S> x, TensorT<S> gamma,
                      TensorT<S> beta, BatchNormState<S>& state,
                      bool training, double momentum = 0.1, double eps = 1e-5) {
  const int rows = x.rows(), cols = x.cols();
  if (gamma.cols() != cols || gamma.rows() != 1 || beta.cols() != cols ||
      beta.rows() != 1)
    detail::shape_error("batch_norm", x, gamma);
  if (int(state.running_mean.size()) != cols)
    throw std::invalid_argument("batch_norm: state width mismatch");

  std::vector<S> out(x.size());
  if (!training) {
    std::vector<S> scale(cols), shift(cols);
    for (int c = 0; c < cols; ++c) {
      const S inv_std = S(1) / std::sqrt(state.running_var[c] + S(eps));
      scale[c] = gamma.values()[c] * inv_std;
      shift[c] = beta.values()[c] - state.running_mean[c] * scale[c];
    }
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = std::size_t(r) * cols + c;
        out[i] = x.values()[i] * scale[c] + shift[c];
      }
    return detail::make_result<S>(
        rows, cols, std::move(out), {x, gamma, beta},
        [x, gamma, beta, scale, rows, cols](typename TensorT<S>::Node& n) mutable {
          if (x.requires_grad()) {
            x.ensure_grad();
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < cols; ++c) {
                const std::size_t i = std::size_t(r) * cols + c;
                x.grad()[i] += n.grad[i] * scale[c];
              }
          }
          // dgamma/dbeta in eval mode: xhat = (y - beta)/gamma when gamma != 0,
          // recovered instead from inputs via scale to stay exact.
          if (gamma.requires_grad() || beta.requires_grad()) {
            if (gamma.requires_grad()) gamma.ensure_grad();
            if (beta.requires_grad()) beta.ensure_grad();
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < cols; ++c) {
                const std::size_t i = std::size_t(r) * cols + c;
                const S xhat = gamma.values()[c] == S(0)
                                   ? S(0)
                                   : (n.values[i] - beta.values()[c]) /
                                         gamma.values()[c];
                if (gamma.requires_grad()) gamma.grad()[c] += n.grad[i] * xhat;
                if (beta.requires_grad()) beta.grad()[c] += n.grad[i];
              }
          }
        });
  }

  // Training path.
  std::vector<S> mean(cols, S(0)), var(cols, S(0)), inv_std(cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) mean[c] += x.values()[std::size_t(r) * cols + c];
  for (int c = 0; c < cols; ++c) mean[c] /= S(rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const S d = x.values()[std::size_t(r) * cols + c] - mean[c];
      var[c] += d * d;
    }
  for (int c = 0; c < cols; ++c) {
    var[c] /= S(rows);
    inv_std[c] = S(1) / std::sqrt(var[c] + S(eps));
  }

  auto xhat = std::make_shared<std::vector<S>>(x.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = std::size_t(r) * cols + c;
      (*xhat)[i] = (x.values()[i] - mean[c]) * inv_std[c];
      out[i] = (*xhat)[i] * gamma.values()[c] + beta.values()[c];
    }

  // Running stats use the unbiased variance, matching common framework
  // semantics; a single-row batch falls back to the biased estimate.
  const S unbias = rows > 1 ? S(rows) / S(rows - 1) : S(1);
  for (int c = 0; c < cols; ++c) {
    state.running_mean[c] =
        S(1.0 - momentum) * state.running_mean[c] + S(momentum) * mean[c];
    state.running_var[c] =
        S(1.0 - momentum) * state.running_var[c] + S(momentum) * var[c] * unbias;
  }

  return detail::make_result<S>(
      rows, cols, std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, rows, cols](typename TensorT<S>::Node& n) mutable {
        std::vector<S> sum_dy(cols, S(0)), sum_dy_xhat(cols, S(0));
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = std::size_t(r) * cols + c;
            sum_dy[c] += n.grad[i];
            sum_dy_xhat[c] += n.grad[i] * (*xhat)[i];
          }
        if (gamma.requires_grad()) {
          gamma.ensure_grad();
          for (int c = 0; c < cols; ++c) gamma.grad()[c] += sum_dy_xhat[c];
        }
        if (beta.requires_grad()) {
          beta.ensure_grad();
          for (int c = 0; c < cols; ++c) beta.grad()[c] += sum_dy[c];
        }
        if (x.requires_grad()) {
          x.ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
              const std::size_t i = std::size_t(r) * cols + c;
              const S term = S(rows) * n.grad[i] - sum_dy[c] -
                             (*xhat)[i] * sum_dy_xhat[c];
              x.grad()[i] += gamma.values()[c] * inv_std[c] * term / S(rows);
            }
        }
      });
}

}  // namespace leafwood::nn
