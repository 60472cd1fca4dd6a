#include "tpgn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tpgn/binary_io.hpp"
#include "tpgn/corpus.hpp"
#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"

namespace tpgn::nn {

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorKind::ShapeMismatch, what); }

void require_same(Var a, Var b, const char* op) {
  if (a.graph != b.graph) throw Error(ErrorKind::InvalidArgument, std::string(op) + ": operands on different graphs");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_error(std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Graph& g = *a.graph;
  std::vector<double> out(a.size());
  const auto& av = g.value_of(a.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ia = a.id;
  return g.push(std::move(out), a.rows(), a.cols(), [ia, deriv](Graph& g, std::size_t self) {
    const auto& x = g.value_of(ia);
    const auto& y = g.value_of(self);
    const auto& gy = g.grad_of(self);
    auto& gx = g.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

// ---- ParameterSet ----

Parameter& ParameterSet::add(const std::string& name, std::size_t rows, std::size_t cols, Init init, Rng& rng,
                             double scale) {
  if (find(name)) throw Error(ErrorKind::InvalidArgument, "duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(rows, cols);
  p->grad = Tensor(rows, cols);
  p->accum = Tensor(rows, cols, 0.1);
  if (init == Init::Uniform) {
    for (auto& v : p->value.data) v = rng.uniform(-scale, scale);
  }
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterSet::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw Error(ErrorKind::InvalidArgument, "unknown parameter " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

void ParameterSet::reset_accumulators(double value) {
  for (auto& p : params_) std::fill(p->accum.data.begin(), p->accum.data.end(), value);
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---- Graph ----

std::span<const double> Var::value() const { return graph->value_of(id); }
double Var::scalar() const { return graph->value_of(id).at(0); }
std::size_t Var::rows() const { return graph->rows_of(id); }
std::size_t Var::cols() const { return graph->cols_of(id); }

Var Graph::push(std::vector<double> value, std::size_t rows, std::size_t cols, Backward backward) {
  if (value.size() != rows * cols) shape_error("node value does not match its shape");
  nodes_.push_back(Node{std::move(value), {}, rows, cols, std::move(backward)});
  return Var{this, nodes_.size() - 1};
}

std::vector<double>& Graph::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Graph::constant(std::vector<double> values, std::size_t rows, std::size_t cols) {
  return push(std::move(values), rows, cols, nullptr);
}

Var Graph::param(Parameter& p) {
  Parameter* pp = &p;
  return push(p.value.data, p.rows(), p.cols(), [pp](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    for (std::size_t i = 0; i < gy.size(); ++i) pp->grad.data[i] += gy[i];
  });
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error(ErrorKind::InvalidArgument, "loss belongs to another graph");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error(ErrorKind::NonScalarLoss,
                "loss has shape " + std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_of(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // Copy the closure: it may touch nodes_ through grad_of.
    auto fn = n.backward;
    fn(*this, i);
  }
}

// ---- ops ----

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Graph& g = *a.graph;
  std::vector<double> out(a.value().begin(), a.value().end());
  const auto& bv = g.value_of(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id, ib = b.id;
  return g.push(std::move(out), a.rows(), a.cols(), [ia, ib](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    auto& gb = g.grad_of(ib);
    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Graph& g = *a.graph;
  std::vector<double> out(a.value().begin(), a.value().end());
  const auto& bv = g.value_of(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id, ib = b.id;
  return g.push(std::move(out), a.rows(), a.cols(), [ia, ib](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    auto& gb = g.grad_of(ib);
    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Graph& g = *a.graph;
  std::vector<double> out(a.size());
  const auto& av = g.value_of(a.id);
  const auto& bv = g.value_of(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const auto ia = a.id, ib = b.id;
  return g.push(std::move(out), a.rows(), a.cols(), [ia, ib](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const auto& av = g.value_of(ia);
    const auto& bv = g.value_of(ib);
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    auto& gb = g.grad_of(ib);
    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var one_minus(Var a) {
  return unary(
      a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var log_floor(Var a, double floor) {
  return unary(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value()) s += v;
  const auto ia = a.id;
  return g.push({s}, 1, 1, [ia](Graph& g, std::size_t self) {
    const double gy = g.grad_of(self)[0];
    for (auto& v : g.grad_of(ia)) v += gy;
  });
}

Var mean(Var a) {
  if (a.size() == 0) throw Error(ErrorKind::EmptySequence, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var dot(Var a, Var b) {
  if (a.size() != b.size()) shape_error("dot: length mismatch");
  Graph& g = *a.graph;
  double s = 0.0;
  const auto& av = g.value_of(a.id);
  const auto& bv = g.value_of(b.id);
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const auto ia = a.id, ib = b.id;
  return g.push({s}, 1, 1, [ia, ib](Graph& g, std::size_t self) {
    const double gy = g.grad_of(self)[0];
    const auto& av = g.value_of(ia);
    const auto& bv = g.value_of(ib);
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy * bv[i];
    auto& gb = g.grad_of(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy * av[i];
  });
}

Var pick(Var a, std::size_t index) {
  if (index >= a.size()) shape_error("pick: index " + std::to_string(index) + " out of range");
  Graph& g = *a.graph;
  const auto ia = a.id;
  return g.push({a.value()[index]}, 1, 1, [ia, index](Graph& g, std::size_t self) {
    g.grad_of(ia)[index] += g.grad_of(self)[0];
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  if (offset + length > a.size()) shape_error("slice out of range");
  Graph& g = *a.graph;
  const auto v = a.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(offset),
                          v.begin() + static_cast<std::ptrdiff_t>(offset + length));
  const auto ia = a.id;
  return g.push(std::move(out), length, 1, [ia, offset](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[offset + i] += gy[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat of nothing");
  Graph& g = *parts.front().graph;
  std::vector<double> out;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    const auto v = p.value();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id);
  }
  const auto n = out.size();
  return g.push(std::move(out), n, 1, [ids](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    std::size_t off = 0;
    for (auto id : ids) {
      auto& gp = g.grad_of(id);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
      off += gp.size();
    }
  });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw Error(ErrorKind::EmptySequence, "stack of no rows");
  const std::size_t width = rows.front().size();
  Graph& g = *rows.front().graph;
  std::vector<double> out;
  out.reserve(width * rows.size());
  std::vector<std::size_t> ids;
  for (const Var& r : rows) {
    if (r.size() != width) shape_error("stack: rows of unequal length");
    const auto v = r.value();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(r.id);
  }
  return g.push(std::move(out), rows.size(), width, [ids, width](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      auto& gr = g.grad_of(ids[r]);
      for (std::size_t i = 0; i < width; ++i) gr[i] += gy[r * width + i];
    }
  });
}

Var mean_rows(Var m) {
  const std::size_t n = m.rows(), w = m.cols();
  if (n == 0) throw Error(ErrorKind::EmptySequence, "mean of no rows");
  Graph& g = *m.graph;
  std::vector<double> out(w, 0.0);
  const auto& mv = g.value_of(m.id);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < w; ++i) out[i] += mv[r * w + i];
  }
  for (auto& v : out) v /= static_cast<double>(n);
  const auto im = m.id;
  return g.push(std::move(out), w, 1, [im, n, w](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    auto& gm = g.grad_of(im);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < w; ++i) gm[r * w + i] += gy[i] / static_cast<double>(n);
    }
  });
}

Var matvec(Parameter& m, Var x) {
  const std::size_t r = m.rows(), c = m.cols();
  if (x.size() != c) {
    shape_error("matvec " + m.name + ": " + std::to_string(r) + "x" + std::to_string(c) + " times length " +
                std::to_string(x.size()));
  }
  Graph& g = *x.graph;
  std::vector<double> out(r, 0.0);
  const auto& xv = g.value_of(x.id);
  const double* w = m.value.data.data();
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += w[i * c + j] * xv[j];
    out[i] = acc;
  }
  Parameter* pm = &m;
  const auto ix = x.id;
  return g.push(std::move(out), r, 1, [pm, ix, r, c](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const auto& xv = g.value_of(ix);
    auto& gx = g.grad_of(ix);
    const double* w = pm->value.data.data();
    double* gw = pm->grad.data.data();
    for (std::size_t i = 0; i < r; ++i) {
      const double gi = gy[i];
      if (gi == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) {
        gw[i * c + j] += gi * xv[j];
        gx[j] += gi * w[i * c + j];
      }
    }
  });
}

Var matvec(Var m, Var x) {
  const std::size_t r = m.rows(), c = m.cols();
  if (x.size() != c) shape_error("matvec: matrix columns do not match vector length");
  Graph& g = *x.graph;
  std::vector<double> out(r, 0.0);
  const auto& mv = g.value_of(m.id);
  const auto& xv = g.value_of(x.id);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += mv[i * c + j] * xv[j];
  }
  const auto im = m.id, ix = x.id;
  return g.push(std::move(out), r, 1, [im, ix, r, c](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const auto& mv = g.value_of(im);
    const auto& xv = g.value_of(ix);
    auto& gm = g.grad_of(im);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += gy[i] * xv[j];
    }
    auto& gx = g.grad_of(ix);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[j] += gy[i] * mv[i * c + j];
    }
  });
}

Var project_rows(Parameter& m, Var xs) {
  const std::size_t n = xs.rows(), d = xs.cols(), r = m.rows();
  if (m.cols() != d) shape_error("project_rows " + m.name + ": width mismatch");
  Graph& g = *xs.graph;
  std::vector<double> out(n * r, 0.0);
  const auto& xv = g.value_of(xs.id);
  const double* w = m.value.data.data();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += w[i * d + j] * xv[k * d + j];
      out[k * r + i] = acc;
    }
  }
  Parameter* pm = &m;
  const auto ix = xs.id;
  return g.push(std::move(out), n, r, [pm, ix, n, d, r](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const auto& xv = g.value_of(ix);
    auto& gx = g.grad_of(ix);
    const double* w = pm->value.data.data();
    double* gw = pm->grad.data.data();
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = gy[k * r + i];
        if (gi == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          gw[i * d + j] += gi * xv[k * d + j];
          gx[k * d + j] += gi * w[i * d + j];
        }
      }
    }
  });
}

Var add_rows(Var xs, Var v) {
  const std::size_t n = xs.rows(), d = xs.cols();
  if (v.size() != d) shape_error("add_rows: vector length does not match row width");
  Graph& g = *xs.graph;
  std::vector<double> out(xs.value().begin(), xs.value().end());
  const auto& vv = g.value_of(v.id);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) out[k * d + j] += vv[j];
  }
  const auto ix = xs.id, iv = v.id;
  return g.push(std::move(out), n, d, [ix, iv, n, d](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    auto& gx = g.grad_of(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    auto& gv = g.grad_of(iv);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < d; ++j) gv[j] += gy[k * d + j];
    }
  });
}

Var weighted_rows(Var w, Var xs) {
  const std::size_t n = xs.rows(), d = xs.cols();
  if (w.size() != n) shape_error("weighted_rows: weight count does not match row count");
  Graph& g = *xs.graph;
  std::vector<double> out(d, 0.0);
  const auto& wv = g.value_of(w.id);
  const auto& xv = g.value_of(xs.id);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) out[j] += wv[k] * xv[k * d + j];
  }
  const auto iw = w.id, ix = xs.id;
  return g.push(std::move(out), d, 1, [iw, ix, n, d](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const auto& wv = g.value_of(iw);
    const auto& xv = g.value_of(ix);
    auto& gw = g.grad_of(iw);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < d; ++j) gw[k] += gy[j] * xv[k * d + j];
    }
    auto& gx = g.grad_of(ix);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < d; ++j) gx[k * d + j] += gy[j] * wv[k];
    }
  });
}

Var embedding(Graph& g, Parameter& table, std::size_t row) {
  if (row >= table.rows()) shape_error("embedding row " + std::to_string(row) + " out of range for " + table.name);
  const std::size_t d = table.cols();
  const auto first = table.value.data.begin() + static_cast<std::ptrdiff_t>(row * d);
  Parameter* pt = &table;
  return g.push(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(d)), d, 1,
                [pt, row, d](Graph& g, std::size_t self) {
                  const auto& gy = g.grad_of(self);
                  for (std::size_t j = 0; j < d; ++j) pt->grad.data[row * d + j] += gy[j];
                });
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : out) v /= z;
  return out;
}

Var softmax(Var a) {
  if (a.size() == 0) throw Error(ErrorKind::EmptySequence, "softmax of an empty vector");
  Graph& g = *a.graph;
  const auto ia = a.id;
  return g.push(softmax(a.value()), a.rows(), a.cols(), [ia](Graph& g, std::size_t self) {
    const auto& y = g.value_of(self);
    const auto& gy = g.grad_of(self);
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += gy[i] * y[i];
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (gy[i] - inner);
  });
}

Var pointer_mixture(Var p_gen, Var p_vocab, Var attention, std::span<const std::int32_t> source_ids,
                    std::size_t extended_size) {
  if (p_gen.size() != 1) shape_error("pointer_mixture: p_gen must be a scalar");
  if (attention.size() != source_ids.size()) shape_error("pointer_mixture: attention/source length mismatch");
  if (p_vocab.size() > extended_size) shape_error("pointer_mixture: vocabulary larger than extended vocabulary");
  for (auto id : source_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= extended_size) shape_error("pointer_mixture: source id out of range");
  }
  Graph& g = *p_gen.graph;
  const double pg = p_gen.scalar();
  const auto& pv = g.value_of(p_vocab.id);
  const auto& at = g.value_of(attention.id);
  std::vector<double> out(extended_size, 0.0);
  for (std::size_t w = 0; w < pv.size(); ++w) out[w] = pg * pv[w];
  for (std::size_t i = 0; i < at.size(); ++i) out[static_cast<std::size_t>(source_ids[i])] += (1.0 - pg) * at[i];

  std::vector<std::int32_t> ids(source_ids.begin(), source_ids.end());
  const auto ip = p_gen.id, iv = p_vocab.id, ia = attention.id;
  return g.push(std::move(out), extended_size, 1, [ip, iv, ia, ids](Graph& g, std::size_t self) {
    const auto& gy = g.grad_of(self);
    const double pg = g.value_of(ip)[0];
    const auto& pv = g.value_of(iv);
    const auto& at = g.value_of(ia);
    double dpg = 0.0;
    auto& gv = g.grad_of(iv);
    for (std::size_t w = 0; w < pv.size(); ++w) {
      dpg += gy[w] * pv[w];
      gv[w] += gy[w] * pg;
    }
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < at.size(); ++i) {
      const double gi = gy[static_cast<std::size_t>(ids[i])];
      dpg -= gi * at[i];
      ga[i] += gi * (1.0 - pg);
    }
    g.grad_of(ip)[0] += dpg;
  });
}

// ---- layers ----

LstmCell LstmCell::create(ParameterSet& params, const std::string& prefix, std::size_t input_size,
                          std::size_t hidden_size, Rng& rng) {
  LstmCell cell;
  cell.input_size = input_size;
  cell.hidden_size = hidden_size;
  cell.w_input = &params.add(prefix + ".w_input", 4 * hidden_size, input_size, Init::Uniform, rng);
  cell.w_hidden = &params.add(prefix + ".w_hidden", 4 * hidden_size, hidden_size, Init::Uniform, rng);
  cell.bias = &params.add(prefix + ".bias", 4 * hidden_size, 1, Init::Zero, rng);
  return cell;
}

LstmState lstm_step(const LstmCell& cell, Var x, Var h_prev, Var c_prev) {
  const std::size_t H = cell.hidden_size;
  if (x.size() != cell.input_size) {
    shape_error("lstm_step: input length " + std::to_string(x.size()) + ", cell expects " +
                std::to_string(cell.input_size));
  }
  if (h_prev.size() != H || c_prev.size() != H) shape_error("lstm_step: state length does not match hidden size");
  Graph& g = *x.graph;
  Var gates = add(add(matvec(*cell.w_input, x), matvec(*cell.w_hidden, h_prev)), g.param(*cell.bias));
  Var in = sigmoid(slice(gates, 0, H));
  Var forget = sigmoid(slice(gates, H, H));
  Var candidate = tanh(slice(gates, 2 * H, H));
  Var out = sigmoid(slice(gates, 3 * H, H));
  Var c = add(mul(forget, c_prev), mul(in, candidate));
  Var h = mul(out, tanh(c));
  return {h, c};
}

BiLstmOutput bilstm_encode(const LstmCell& fwd, const LstmCell& bwd, std::span<const Var> xs) {
  if (xs.empty()) throw Error(ErrorKind::EmptySequence, "BiLSTM input is empty");
  if (fwd.hidden_size != bwd.hidden_size) shape_error("BiLSTM directions differ in hidden size");
  Graph& g = *xs.front().graph;
  const std::size_t n = xs.size(), H = fwd.hidden_size;

  std::vector<Var> f(n), b(n);
  LstmState s{g.zeros(H), g.zeros(H)};
  for (std::size_t i = 0; i < n; ++i) {
    s = lstm_step(fwd, xs[i], s.h, s.c);
    f[i] = s.h;
  }
  s = {g.zeros(H), g.zeros(H)};
  for (std::size_t i = n; i-- > 0;) {
    s = lstm_step(bwd, xs[i], s.h, s.c);
    b[i] = s.h;
  }
  BiLstmOutput out;
  out.states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.states.push_back(concat({f[i], b[i]}));
  out.final = concat({f[n - 1], b[0]});
  return out;
}

DenseLayer make_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                      Activation activation, Rng& rng) {
  DenseLayer layer;
  layer.weight = &params.add(prefix + ".weight", out, in, Init::Uniform, rng);
  layer.bias = &params.add(prefix + ".bias", out, 1, Init::Zero, rng);
  layer.activation = activation;
  return layer;
}

Var dense_forward(const DenseLayer& layer, Var x) {
  Var y = add(matvec(*layer.weight, x), x.graph->param(*layer.bias));
  switch (layer.activation) {
    case Activation::Tanh: return tanh(y);
    case Activation::Sigmoid: return sigmoid(y);
    case Activation::Linear: break;
  }
  return y;
}

Var mlp_forward(std::span<const DenseLayer> layers, Var x) {
  for (const auto& layer : layers) x = dense_forward(layer, x);
  return x;
}

// ---- optimization ----

void adagrad_step(ParameterSet& params, double lr) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = p.grad.data[i];
      if (gi == 0.0) continue;
      p.accum.data[i] += gi * gi;
      p.value.data[i] -= lr * gi / std::sqrt(p.accum.data[i]);
    }
  }
  params.zero_grad();
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (double gi : params[k].grad.data) sq += gi * gi;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (double& gi : params[k].grad.data) gi *= f;
    }
  }
  return norm;
}

// ---- checkpoints ----

namespace {
constexpr std::string_view kCheckpointMagic = "TPGNCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::string serialize_checkpoint(const ParameterSet& params) {
  std::string out(kCheckpointMagic);
  io::put_u32(out, kCheckpointVersion);
  io::put_u64(out, params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = params[k];
    io::put_str(out, p.name);
    io::put_u64(out, 2);
    io::put_u64(out, p.rows());
    io::put_u64(out, p.cols());
    for (double v : p.value.data) io::put_f32(out, static_cast<float>(v));
  }
  return out;
}

void deserialize_checkpoint(ParameterSet& params, std::string_view bytes) {
  io::Reader in(bytes);
  if (in.take(kCheckpointMagic.size()) != kCheckpointMagic) throw Error(ErrorKind::Format, "not a checkpoint file");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.u64();
  if (count != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "checkpoint has " + std::to_string(count) + " parameters, model has " +
                                              std::to_string(params.size()));
  }
  // Validate everything before touching the model.
  std::vector<std::vector<double>> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::string name = in.str();
    std::size_t slot = params.size();
    for (std::size_t j = 0; j < params.size(); ++j) {
      if (params[j].name == name) slot = j;
    }
    if (slot == params.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint parameter " + name + " is not in the model");
    const Parameter& p = params[slot];
    const auto rank = in.u64();
    if (rank == 0 || rank > 8) throw Error(ErrorKind::Format, "bad rank for " + name);
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t total = 1;
    for (auto& d : dims) {
      d = in.u64();
      total *= d;
    }
    const bool same = rank == 2 ? dims[0] == p.rows() && dims[1] == p.cols()
                                : rank == 1 && p.cols() == 1 && total == p.value.size();
    if (!same) throw Error(ErrorKind::ShapeMismatch, "shape of " + name + " differs from the model");
    std::vector<double> data(total);
    for (auto& x : data) x = static_cast<double>(in.f32());
    values[slot] = std::move(data);
  }
  if (!in.done()) throw Error(ErrorKind::Format, "trailing bytes in checkpoint");
  for (std::size_t j = 0; j < params.size(); ++j) {
    if (values[j].size() != params[j].value.size()) {
      throw Error(ErrorKind::ShapeMismatch, "checkpoint is missing parameter " + params[j].name);
    }
  }
  for (std::size_t j = 0; j < params.size(); ++j) params[j].value.data = std::move(values[j]);
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  corpus::write_file(path, serialize_checkpoint(params));
}

void load_checkpoint(ParameterSet& params, const std::filesystem::path& path) {
  deserialize_checkpoint(params, corpus::read_file(path));
}

}  // namespace tpgn::nn
