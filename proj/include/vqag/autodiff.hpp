#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Graph records every operation applied to its nodes. Parameters enter the
// graph by reference (no copy) and their gradients accumulate directly into
// the owning Tensor during backward(). Graphs built with recording disabled
// skip all closure bookkeeping and are used for generation and evaluation.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vqag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Tensor {
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Handle to a node inside a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) { nodes_.reserve(1024); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // ---- leaves -------------------------------------------------------------

  Var constant(Matrix m) { return push(std::move(m), false); }

  Var constant_scalar(double x) {
    Matrix m(1, 1);
    m(0, 0) = x;
    return constant(std::move(m));
  }

  /// References t.value without copying; gradients land in t.grad when the
  /// tensor is trainable. Repeated calls for the same tensor share one node.
  Var param(Tensor& t) {
    auto it = param_nodes_.find(&t);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.ref = &t.value;
    n.needs_grad = record_ && t.trainable;
    if (n.needs_grad) {
      if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols())
        t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
      n.grad_ref = &t.grad;
    }
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&t, id);
    return Var{id};
  }

  /// Gathers rows of an embedding table; backward scatters into table.grad.
  Var lookup(Tensor& table, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.value.rows())
        throw std::out_of_range("lookup: id " + std::to_string(ids[i]) +
                                " outside table of " +
                                std::to_string(table.value.rows()) + " rows");
      out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
    }
    bool ng = record_ && table.trainable;
    Var v = push(std::move(out), ng);
    if (ng) {
      if (table.grad.rows() != table.value.rows() ||
          table.grad.cols() != table.value.cols())
        table.grad = Matrix::Zero(table.value.rows(), table.value.cols());
      std::vector<int> idv(ids.begin(), ids.end());
      Tensor* tp = &table;
      set_backward(v, [tp, idv = std::move(idv)](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        for (std::size_t i = 0; i < idv.size(); ++i)
          tp->grad.row(idv[i]) += gr.row(static_cast<Eigen::Index>(i));
      });
    }
    return v;
  }

  // ---- access -------------------------------------------------------------

  const Matrix& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.ref ? *n.ref : n.own;
  }

  double scalar(Var v) const { return value(v)(0, 0); }

  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }

  /// Gradient of a non-parameter node after backward(); zero if untouched.
  Matrix gradient(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad_ref) return *n.grad_ref;
    if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
    return n.grad;
  }

  void backward(Var loss) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    if (value(loss).size() != 1) throw std::logic_error("backward needs a scalar");
    accumulate(loss.id, Matrix::Constant(1, 1, 1.0));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.back || n.grad.size() == 0) continue;
      n.back(*this, i);
    }
  }

  // ---- linear algebra -----------------------------------------------------

  Var matmul(Var a, Var b) {
    Var out = push(value(a) * value(b), any_grad(a, b));
    if (needs(out))
      set_backward(out, [a, b](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(a)) g.accumulate(a.id, gr * g.value(b).transpose());
        if (g.needs(b)) g.accumulate(b.id, g.value(a).transpose() * gr);
      });
    return out;
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Var out = push(value(a) + value(b), any_grad(a, b));
    if (needs(out))
      set_backward(out, [a, b](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(a)) g.accumulate(a.id, gr);
        if (g.needs(b)) g.accumulate(b.id, gr);
      });
    return out;
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Var out = push(value(a) - value(b), any_grad(a, b));
    if (needs(out))
      set_backward(out, [a, b](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(a)) g.accumulate(a.id, gr);
        if (g.needs(b)) g.accumulate(b.id, -gr);
      });
    return out;
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Var out = push(value(a).cwiseProduct(value(b)), any_grad(a, b));
    if (needs(out))
      set_backward(out, [a, b](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(a)) g.accumulate(a.id, gr.cwiseProduct(g.value(b)));
        if (g.needs(b)) g.accumulate(b.id, gr.cwiseProduct(g.value(a)));
      });
    return out;
  }

  /// Multiplies every entry of `a` by the 1x1 node `s`.
  Var scale_by(Var a, Var s) {
    if (value(s).size() != 1) throw std::invalid_argument("scale_by: non-scalar factor");
    Var out = push(value(a) * scalar(s), any_grad(a, s));
    if (needs(out))
      set_backward(out, [a, s](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(a)) g.accumulate(a.id, gr * g.scalar(s));
        if (g.needs(s))
          g.accumulate(s.id, Matrix::Constant(1, 1, gr.cwiseProduct(g.value(a)).sum()));
      });
    return out;
  }

  Var scale(Var a, double k) {
    Var out = push(value(a) * k, needs(a));
    if (needs(out))
      set_backward(out, [a, k](Graph& g, int self) {
        g.accumulate(a.id, g.nodes_[self].grad * k);
      });
    return out;
  }

  Var add_scalar(Var a, double k) {
    Var out = push(value(a).array() + k, needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) { g.accumulate(a.id, g.nodes_[self].grad); });
    return out;
  }

  /// 1 - a, elementwise.
  Var one_minus(Var a) { return add_scalar(scale(a, -1.0), 1.0); }

  /// Adds the column vector `v` (d x 1) to every row of `m` (L x d).
  Var add_row(Var m, Var v) {
    if (value(v).cols() != 1 || value(v).rows() != value(m).cols())
      throw std::invalid_argument("add_row: shape mismatch");
    Matrix out = value(m);
    out.rowwise() += value(v).col(0).transpose();
    Var o = push(std::move(out), any_grad(m, v));
    if (needs(o))
      set_backward(o, [m, v](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        if (g.needs(m)) g.accumulate(m.id, gr);
        if (g.needs(v)) g.accumulate(v.id, gr.colwise().sum().transpose());
      });
    return o;
  }

  Var transpose(Var a) {
    Var out = push(value(a).transpose(), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        g.accumulate(a.id, g.nodes_[self].grad.transpose());
      });
    return out;
  }

  // ---- elementwise nonlinearities -----------------------------------------

  Var tanh(Var a) {
    Var out = push(value(a).array().tanh().matrix(), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        const Matrix& y = g.value(Var{self});
        g.accumulate(a.id, g.nodes_[self].grad.cwiseProduct(
                               (1.0 - y.array().square()).matrix()));
      });
    return out;
  }

  Var sigmoid(Var a) {
    Matrix y = value(a).unaryExpr([](double x) { return stable_sigmoid(x); });
    Var out = push(std::move(y), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        const Matrix& y = g.value(Var{self});
        g.accumulate(a.id, g.nodes_[self].grad.cwiseProduct(
                               (y.array() * (1.0 - y.array())).matrix()));
      });
    return out;
  }

  Var exp(Var a) {
    Var out = push(value(a).array().exp().matrix(), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        g.accumulate(a.id, g.nodes_[self].grad.cwiseProduct(g.value(Var{self})));
      });
    return out;
  }

  Var log(Var a) {
    Var out = push(value(a).array().log().matrix(), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        g.accumulate(a.id, g.nodes_[self].grad.cwiseQuotient(g.value(a)));
      });
    return out;
  }

  Var square(Var a) { return mul(a, a); }

  /// Elementwise |a| with subgradient sign(0) = 0.
  Var abs(Var a) {
    Var out = push(value(a).cwiseAbs(), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        Matrix s = g.value(a).unaryExpr(
            [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
        g.accumulate(a.id, g.nodes_[self].grad.cwiseProduct(s));
      });
    return out;
  }

  /// Clamps into [lo, hi]; gradient is zero where clamping is active.
  Var clamp(Var a, double lo, double hi) {
    Var out = push(value(a).cwiseMax(lo).cwiseMin(hi), needs(a));
    if (needs(out))
      set_backward(out, [a, lo, hi](Graph& g, int self) {
        Matrix m = g.value(a).unaryExpr(
            [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
        g.accumulate(a.id, g.nodes_[self].grad.cwiseProduct(m));
      });
    return out;
  }

  /// Inverted dropout; identity when rate is 0.
  Var dropout(Var a, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return a;
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix mask(value(a).rows(), value(a).cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
    return mul(a, constant(std::move(mask)));
  }

  // ---- reshaping ----------------------------------------------------------

  /// Vertical concatenation (all parts share a column count).
  Var concat_rows(std::span<const Var> parts) {
    Eigen::Index r = 0, c = value(parts[0]).cols();
    bool ng = false;
    for (Var p : parts) {
      if (value(p).cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
      r += value(p).rows();
      ng = ng || needs(p);
    }
    Matrix out(r, c);
    Eigen::Index off = 0;
    for (Var p : parts) {
      out.middleRows(off, value(p).rows()) = value(p);
      off += value(p).rows();
    }
    Var o = push(std::move(out), ng);
    if (needs(o)) {
      std::vector<Var> ps(parts.begin(), parts.end());
      set_backward(o, [ps = std::move(ps)](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        Eigen::Index off = 0;
        for (Var p : ps) {
          Eigen::Index n = g.value(p).rows();
          if (g.needs(p)) g.accumulate(p.id, gr.middleRows(off, n));
          off += n;
        }
      });
    }
    return o;
  }

  Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
  }

  /// Horizontal concatenation (all parts share a row count).
  Var concat_cols(std::span<const Var> parts) {
    Eigen::Index r = value(parts[0]).rows(), c = 0;
    bool ng = false;
    for (Var p : parts) {
      if (value(p).rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
      c += value(p).cols();
      ng = ng || needs(p);
    }
    Matrix out(r, c);
    Eigen::Index off = 0;
    for (Var p : parts) {
      out.middleCols(off, value(p).cols()) = value(p);
      off += value(p).cols();
    }
    Var o = push(std::move(out), ng);
    if (needs(o)) {
      std::vector<Var> ps(parts.begin(), parts.end());
      set_backward(o, [ps = std::move(ps)](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        Eigen::Index off = 0;
        for (Var p : ps) {
          Eigen::Index n = g.value(p).cols();
          if (g.needs(p)) g.accumulate(p.id, gr.middleCols(off, n));
          off += n;
        }
      });
    }
    return o;
  }

  Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
  }

  /// Stacks column vectors (d x 1 each) as the rows of an (n x d) matrix.
  Var stack_rows(std::span<const Var> columns) {
    return transpose(concat_cols(columns));
  }

  Var slice_rows(Var a, Eigen::Index start, Eigen::Index n) {
    if (start < 0 || n < 0 || start + n > value(a).rows())
      throw std::out_of_range("slice_rows: range outside matrix");
    Var out = push(value(a).middleRows(start, n), needs(a));
    if (needs(out))
      set_backward(out, [a, start, n](Graph& g, int self) {
        Matrix full = Matrix::Zero(g.value(a).rows(), g.value(a).cols());
        full.middleRows(start, n) = g.nodes_[self].grad;
        g.accumulate(a.id, full);
      });
    return out;
  }

  /// Row j of `a` returned as a column vector.
  Var row(Var a, Eigen::Index j) {
    if (j < 0 || j >= value(a).rows()) throw std::out_of_range("row: index outside matrix");
    Var out = push(value(a).row(j).transpose(), needs(a));
    if (needs(out))
      set_backward(out, [a, j](Graph& g, int self) {
        Matrix full = Matrix::Zero(g.value(a).rows(), g.value(a).cols());
        full.row(j) = g.nodes_[self].grad.col(0).transpose();
        g.accumulate(a.id, full);
      });
    return out;
  }

  // ---- reductions ---------------------------------------------------------

  Var sum(Var a) {
    Var out = push(Matrix::Constant(1, 1, value(a).sum()), needs(a));
    if (needs(out))
      set_backward(out, [a](Graph& g, int self) {
        g.accumulate(a.id, Matrix::Constant(g.value(a).rows(), g.value(a).cols(),
                                            g.nodes_[self].grad(0, 0)));
      });
    return out;
  }

  /// Sum of the selected entries of a column vector (empty selection gives 0).
  Var sum_at(Var v, std::span<const int> idx) {
    double s = 0.0;
    for (int i : idx) s += value(v)(i, 0);
    Var out = push(Matrix::Constant(1, 1, s), needs(v));
    if (needs(out)) {
      std::vector<int> iv(idx.begin(), idx.end());
      set_backward(out, [v, iv = std::move(iv)](Graph& g, int self) {
        Matrix full = Matrix::Zero(g.value(v).rows(), 1);
        for (int i : iv) full(i, 0) += g.nodes_[self].grad(0, 0);
        g.accumulate(v.id, full);
      });
    }
    return out;
  }

  Var pick(Var v, int i) {
    std::array<int, 1> one{i};
    return sum_at(v, one);
  }

  /// Sums a list of scalar nodes.
  Var add_all(std::span<const Var> xs) {
    if (xs.empty()) return constant_scalar(0.0);
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
  }

  // ---- probability --------------------------------------------------------

  /// Softmax of a column vector. Entries with mask[i] == false get probability
  /// exactly 0; an empty mask means all positions are live.
  Var softmax(Var v, const std::vector<bool>& mask = {}) {
    Matrix p = masked_softmax(value(v), mask);
    Var out = push(std::move(p), needs(v));
    if (needs(out))
      set_backward(out, [v](Graph& g, int self) {
        const Matrix& p = g.value(Var{self});
        const Matrix& gr = g.nodes_[self].grad;
        double dot = p.cwiseProduct(gr).sum();
        g.accumulate(v.id, p.cwiseProduct((gr.array() - dot).matrix()));
      });
    return out;
  }

  /// Log-softmax of a column vector; masked entries are -infinity and receive
  /// no gradient.
  Var log_softmax(Var v, const std::vector<bool>& mask = {}) {
    const Matrix& x = value(v);
    check_mask(x, mask);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (live(mask, i)) mx = std::max(mx, x(i, 0));
    double z = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (live(mask, i)) z += std::exp(x(i, 0) - mx);
    double lse = mx + std::log(z);
    Matrix out(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i, 0) = live(mask, i) ? x(i, 0) - lse : -std::numeric_limits<double>::infinity();
    Var o = push(std::move(out), needs(v));
    if (needs(o))
      set_backward(o, [v, mask](Graph& g, int self) {
        const Matrix& ls = g.value(Var{self});
        const Matrix& gr = g.nodes_[self].grad;
        double total = 0.0;
        for (Eigen::Index i = 0; i < ls.rows(); ++i)
          if (live(mask, i)) total += gr(i, 0);
        Matrix d = Matrix::Zero(ls.rows(), 1);
        for (Eigen::Index i = 0; i < ls.rows(); ++i)
          if (live(mask, i)) d(i, 0) = gr(i, 0) - std::exp(ls(i, 0)) * total;
        g.accumulate(v.id, d);
      });
    return o;
  }

  // ---- convolution --------------------------------------------------------

  /// Character CNN over `words` words of `width_chars` characters each.
  /// `chars` stacks the character embeddings word by word ((words*len) x c),
  /// `filters` is (F x window*c), `bias` is (F x 1). Returns the (words x F)
  /// max-over-time pooled feature map (before any nonlinearity).
  Var char_conv_maxpool(Var chars, Var filters, Var bias, Eigen::Index words,
                        Eigen::Index word_len, Eigen::Index window) {
    const Matrix& E = value(chars);
    const Matrix& W = value(filters);
    const Matrix& b = value(bias);
    const Eigen::Index c = E.cols();
    const Eigen::Index F = W.rows();
    const Eigen::Index positions = word_len - window + 1;
    if (positions < 1) throw std::invalid_argument("char_conv_maxpool: window longer than word");
    if (W.cols() != window * c) throw std::invalid_argument("char_conv_maxpool: filter width");
    Matrix out(words, F);
    std::vector<int> argmax(static_cast<std::size_t>(words * F));
    Vector win(window * c);
    for (Eigen::Index w = 0; w < words; ++w) {
      Matrix scores(F, positions);
      for (Eigen::Index p = 0; p < positions; ++p) {
        for (Eigen::Index k = 0; k < window; ++k)
          win.segment(k * c, c) = E.row(w * word_len + p + k).transpose();
        scores.col(p) = W * win + b.col(0);
      }
      for (Eigen::Index f = 0; f < F; ++f) {
        Eigen::Index best = 0;
        scores.row(f).maxCoeff(&best);
        out(w, f) = scores(f, best);
        argmax[static_cast<std::size_t>(w * F + f)] = static_cast<int>(best);
      }
    }
    bool ng = needs(chars) || needs(filters) || needs(bias);
    Var o = push(std::move(out), ng);
    if (needs(o))
      set_backward(o, [=, argmax = std::move(argmax)](Graph& g, int self) {
        const Matrix& gr = g.nodes_[self].grad;
        const Matrix& E = g.value(chars);
        const Matrix& W = g.value(filters);
        Matrix dE = Matrix::Zero(E.rows(), E.cols());
        Matrix dW = Matrix::Zero(W.rows(), W.cols());
        Matrix db = Matrix::Zero(F, 1);
        Vector win(window * c);
        for (Eigen::Index w = 0; w < words; ++w)
          for (Eigen::Index f = 0; f < F; ++f) {
            double gv = gr(w, f);
            if (gv == 0.0) continue;
            Eigen::Index p = argmax[static_cast<std::size_t>(w * F + f)];
            for (Eigen::Index k = 0; k < window; ++k)
              win.segment(k * c, c) = E.row(w * word_len + p + k).transpose();
            dW.row(f) += gv * win.transpose();
            db(f, 0) += gv;
            for (Eigen::Index k = 0; k < window; ++k)
              dE.row(w * word_len + p + k) += gv * W.row(f).segment(k * c, c);
          }
        if (g.needs(chars)) g.accumulate(chars.id, dE);
        if (g.needs(filters)) g.accumulate(filters.id, dW);
        if (g.needs(bias)) g.accumulate(bias.id, db);
      });
    return o;
  }

  // ---- helpers shared with value-level code -------------------------------

  static double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  }

  static Matrix masked_softmax(const Matrix& x, const std::vector<bool>& mask) {
    check_mask(x, mask);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (live(mask, i)) mx = std::max(mx, x(i, 0));
    Matrix p = Matrix::Zero(x.rows(), 1);
    double z = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (live(mask, i)) {
        p(i, 0) = std::exp(x(i, 0) - mx);
        z += p(i, 0);
      }
    return p / z;
  }

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    Matrix* grad_ref = nullptr;
    bool needs_grad = false;
    std::function<void(Graph&, int)> back;
  };

  static bool live(const std::vector<bool>& mask, Eigen::Index i) {
    return mask.empty() || mask[static_cast<std::size_t>(i)];
  }

  static void check_mask(const Matrix& x, const std::vector<bool>& mask) {
    if (x.cols() != 1) throw std::invalid_argument("softmax expects a column vector");
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != x.rows())
      throw std::invalid_argument("softmax mask length mismatch");
    bool any = mask.empty() && x.rows() > 0;
    for (bool m : mask) any = any || m;
    if (!any) throw std::invalid_argument("softmax over a fully masked vector");
  }

  Var push(Matrix m, bool needs_grad) {
    Node n;
    n.own = std::move(m);
    n.needs_grad = record_ && needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  bool any_grad(Var a, Var b) const { return needs(a) || needs(b); }

  void set_backward(Var v, std::function<void(Graph&, int)> f) {
    nodes_[static_cast<std::size_t>(v.id)].back = std::move(f);
  }

  void check_same(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                  std::to_string(value(a).rows()) + "x" +
                                  std::to_string(value(a).cols()) + " vs " +
                                  std::to_string(value(b).rows()) + "x" +
                                  std::to_string(value(b).cols()));
  }

  template <typename M>
  void accumulate(int id, const M& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad_ref) {
      *n.grad_ref += g;
      return;
    }
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> param_nodes_;
};

}  // namespace vqag
