#include "kpseq/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace kpseq {

namespace {

template <typename M>
std::string shape_str(const M& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

template <typename M>
void require_same_shape(const char* op, const M& a, const M& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + shape_str(a) +
                                " vs " + shape_str(b) + ")");
  }
}

}  // namespace

Mat& ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (has(name)) throw std::invalid_argument("parameter already exists: " + name);
  names_.push_back(name);
  return tensors_.emplace(name, Mat::Zero(rows, cols)).first->second;
}

Mat& ParameterStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

const Mat& ParameterStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

int64_t ParameterStore::total_parameters() const {
  int64_t n = 0;
  for (const auto& name : names_) n += tensors_.at(name).size();
  return n;
}

template <typename Scalar>
const MatOf<Scalar>& VarT<Scalar>::value() const {
  return graph->value(*this);
}

template <typename Scalar>
Scalar VarT<Scalar>::scalar() const {
  const MatOf<Scalar>& v = value();
  if (v.size() != 1) throw std::invalid_argument("scalar() on a non-1x1 node");
  return v(0, 0);
}

template struct VarT<double>;
template struct VarT<long double>;

template <typename Scalar>
auto GraphT<Scalar>::make(M value) -> V {
  nodes_.push_back(Node{std::move(value), M(), false, nullptr});
  return V{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename Scalar>
void GraphT<Scalar>::accum(int id, const M& g) {
  grad_buffer(id) += g;
}

template <typename Scalar>
auto GraphT<Scalar>::grad_buffer(int id) -> M& {
  Node& n = node(id);
  if (!n.has_grad) {
    n.grad = M::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename Scalar>
auto GraphT<Scalar>::value(V v) const -> const M& {
  return node(v.id).value;
}

template <typename Scalar>
auto GraphT<Scalar>::grad(V v) const -> M {
  const Node& n = node(v.id);
  if (!n.has_grad) return M::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename Scalar>
auto GraphT<Scalar>::param_grad(const std::string& name) const -> const M* {
  auto it = param_nodes_.find(name);
  if (it == param_nodes_.end()) return nullptr;
  const Node& n = node(it->second);
  return n.has_grad ? &n.grad : nullptr;
}

template <typename Scalar>
auto GraphT<Scalar>::leaf(M value) -> V {
  return make(std::move(value));
}

template <typename Scalar>
auto GraphT<Scalar>::scalar(Scalar v) -> V {
  return make(M::Constant(1, 1, v));
}

template <typename Scalar>
auto GraphT<Scalar>::param(const std::string& name, const ParameterStore& store) -> V {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return V{this, it->second};
  V v = make(store.get(name).template cast<Scalar>());
  param_nodes_[name] = v.id;
  return v;
}

template <typename Scalar>
auto GraphT<Scalar>::param(const std::string& name, M value) -> V {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return V{this, it->second};
  V v = make(std::move(value));
  param_nodes_[name] = v.id;
  return v;
}

template <typename Scalar>
auto GraphT<Scalar>::add(V a, V b) -> V {
  require_same_shape("add", value(a), value(b));
  V out = make(value(a) + value(b));
  node(out.id).back = [ai = a.id, bi = b.id, oi = out.id](GraphT& g) {
    g.accum(ai, g.node(oi).grad);
    g.accum(bi, g.node(oi).grad);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::sub(V a, V b) -> V {
  require_same_shape("sub", value(a), value(b));
  V out = make(value(a) - value(b));
  node(out.id).back = [ai = a.id, bi = b.id, oi = out.id](GraphT& g) {
    g.accum(ai, g.node(oi).grad);
    g.accum(bi, -g.node(oi).grad);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::cmul(V a, V b) -> V {
  require_same_shape("cmul", value(a), value(b));
  V out = make(value(a).cwiseProduct(value(b)));
  node(out.id).back = [ai = a.id, bi = b.id, oi = out.id](GraphT& g) {
    g.accum(ai, g.node(oi).grad.cwiseProduct(g.node(bi).value));
    g.accum(bi, g.node(oi).grad.cwiseProduct(g.node(ai).value));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::cwise_min(V a, V b) -> V {
  require_same_shape("cwise_min", value(a), value(b));
  V out = make(value(a).cwiseMin(value(b)));
  node(out.id).back = [ai = a.id, bi = b.id, oi = out.id](GraphT& g) {
    const M& av = g.node(ai).value;
    const M& bv = g.node(bi).value;
    const M& go = g.node(oi).grad;
    // subgradient: ties route to the first operand
    M mask = (av.array() <= bv.array()).template cast<Scalar>();
    g.accum(ai, go.cwiseProduct(mask));
    g.accum(bi, go.cwiseProduct(M(M::Ones(mask.rows(), mask.cols()) - mask)));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::matmul(V a, V b) -> V {
  if (value(a).cols() != value(b).rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch (" + shape_str(value(a)) +
                                " * " + shape_str(value(b)) + ")");
  }
  V out = make(value(a) * value(b));
  node(out.id).back = [ai = a.id, bi = b.id, oi = out.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    g.accum(ai, go * g.node(bi).value.transpose());
    g.accum(bi, g.node(ai).value.transpose() * go);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::affine(V w, V x, V b) -> V {
  return add(matmul(w, x), b);
}

template <typename Scalar>
auto GraphT<Scalar>::transpose(V a) -> V {
  V out = make(value(a).transpose());
  node(out.id).back = [ai = a.id, oi = out.id](GraphT& g) {
    g.accum(ai, g.node(oi).grad.transpose());
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::sigmoid(V x) -> V {
  M y = value(x).unaryExpr([](Scalar v) {
    using std::exp;
    return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-v)) : exp(v) / (Scalar(1) + exp(v));
  });
  V out = make(std::move(y));
  node(out.id).back = [xi = x.id, oi = out.id](GraphT& g) {
    const M& yv = g.node(oi).value;
    M dy = yv.array() * (Scalar(1) - yv.array());
    g.accum(xi, g.node(oi).grad.cwiseProduct(dy));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::tanh(V x) -> V {
  V out = make(value(x).array().tanh().matrix());
  node(out.id).back = [xi = x.id, oi = out.id](GraphT& g) {
    const M& yv = g.node(oi).value;
    M dy = Scalar(1) - yv.array().square();
    g.accum(xi, g.node(oi).grad.cwiseProduct(dy));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::softmax(V v) -> V {
  const M& x = value(v);
  if (x.size() == 0) throw std::invalid_argument("softmax: empty vector");
  if (x.cols() != 1) throw std::invalid_argument("softmax: expected a column vector");
  Scalar mx = x.maxCoeff();
  M y = (x.array() - mx).exp();
  y /= y.sum();
  V out = make(std::move(y));
  node(out.id).back = [vi = v.id, oi = out.id](GraphT& g) {
    const M& yv = g.node(oi).value;
    const M& go = g.node(oi).grad;
    Scalar dot = (go.array() * yv.array()).sum();
    g.accum(vi, (yv.array() * (go.array() - dot)).matrix());
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::colwise_add(V m, V v) -> V {
  if (value(v).cols() != 1 || value(v).rows() != value(m).rows()) {
    throw std::invalid_argument("colwise_add: bias shape mismatch (" + shape_str(value(m)) +
                                " + " + shape_str(value(v)) + ")");
  }
  V out = make(value(m).colwise() + value(v).col(0));
  node(out.id).back = [mi = m.id, vi = v.id, oi = out.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    g.accum(mi, go);
    g.accum(vi, go.rowwise().sum());
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::hstack(std::span<const V> cols) -> V {
  if (cols.empty()) throw std::invalid_argument("hstack: no columns");
  Eigen::Index rows = value(cols[0]).rows();
  Eigen::Index total = 0;
  for (const V& c : cols) {
    if (value(c).rows() != rows) throw std::invalid_argument("hstack: row count mismatch");
    total += value(c).cols();
  }
  M out(rows, total);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const V& c : cols) {
    out.middleCols(at, value(c).cols()) = value(c);
    ids.push_back(c.id);
    widths.push_back(value(c).cols());
    at += value(c).cols();
  }
  V o = make(std::move(out));
  node(o.id).back = [ids, widths, oi = o.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    Eigen::Index at2 = 0;
    for (size_t k = 0; k < ids.size(); k++) {
      g.accum(ids[k], go.middleCols(at2, widths[k]));
      at2 += widths[k];
    }
  };
  return o;
}

template <typename Scalar>
auto GraphT<Scalar>::vstack(V a, V b) -> V {
  if (value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("vstack: column count mismatch (" + shape_str(value(a)) +
                                " ; " + shape_str(value(b)) + ")");
  }
  M out(value(a).rows() + value(b).rows(), value(a).cols());
  out.topRows(value(a).rows()) = value(a);
  out.bottomRows(value(b).rows()) = value(b);
  V o = make(std::move(out));
  node(o.id).back = [ai = a.id, bi = b.id, oi = o.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    Eigen::Index ar = g.node(ai).value.rows();
    g.accum(ai, go.topRows(ar));
    g.accum(bi, go.bottomRows(go.rows() - ar));
  };
  return o;
}

template <typename Scalar>
auto GraphT<Scalar>::embed_row(V table, int row) -> V {
  const M& t = value(table);
  if (row < 0 || row >= t.rows()) {
    throw std::out_of_range("embed_row: row " + std::to_string(row) + " out of range [0, " +
                            std::to_string(t.rows()) + ")");
  }
  V out = make(t.row(row).transpose());
  node(out.id).back = [ti = table.id, row, oi = out.id](GraphT& g) {
    g.grad_buffer(ti).row(row) += g.node(oi).grad.transpose();
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::embedding_gather(V table, std::span<const int> ids) -> V {
  const M& t = value(table);
  M out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (size_t k = 0; k < ids.size(); k++) {
    if (ids[k] < 0 || ids[k] >= t.rows()) {
      throw std::out_of_range("embedding_gather: id " + std::to_string(ids[k]) +
                              " out of range [0, " + std::to_string(t.rows()) + ")");
    }
    out.row(static_cast<Eigen::Index>(k)) = t.row(ids[k]);
  }
  V o = make(std::move(out));
  std::vector<int> idv(ids.begin(), ids.end());
  node(o.id).back = [ti = table.id, idv, oi = o.id](GraphT& g) {
    M& dt = g.grad_buffer(ti);
    const M& go = g.node(oi).grad;
    for (size_t k = 0; k < idv.size(); k++) {
      dt.row(idv[k]) += go.row(static_cast<Eigen::Index>(k));
    }
  };
  return o;
}

template <typename Scalar>
auto GraphT<Scalar>::pick(V v, int index) -> V {
  const M& x = value(v);
  if (x.cols() != 1) throw std::invalid_argument("pick: expected a column vector");
  if (index < 0 || index >= x.rows()) {
    throw std::out_of_range("pick: index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(x.rows()) + ")");
  }
  V out = make(M::Constant(1, 1, x(index, 0)));
  node(out.id).back = [vi = v.id, index, oi = out.id](GraphT& g) {
    g.grad_buffer(vi)(index, 0) += g.node(oi).grad(0, 0);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::log_floored(V x, double floor) -> V {
  const Scalar fl = static_cast<Scalar>(floor);
  V out = make(value(x).cwiseMax(fl).array().log().matrix());
  node(out.id).back = [xi = x.id, fl, oi = out.id](GraphT& g) {
    const M& xv = g.node(xi).value;
    M dx = (xv.array() > fl).template cast<Scalar>() / xv.cwiseMax(fl).array();
    g.accum(xi, g.node(oi).grad.cwiseProduct(dx));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::scale(V v, V s) -> V {
  if (value(s).size() != 1) throw std::invalid_argument("scale: scale factor must be 1x1");
  V out = make(value(v) * value(s)(0, 0));
  node(out.id).back = [vi = v.id, si = s.id, oi = out.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    g.accum(vi, go * g.node(si).value(0, 0));
    g.accum(si, M::Constant(1, 1, (go.array() * g.node(vi).value.array()).sum()));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::scale_const(V v, double c) -> V {
  const Scalar cs = static_cast<Scalar>(c);
  V out = make(value(v) * cs);
  node(out.id).back = [vi = v.id, cs, oi = out.id](GraphT& g) {
    g.accum(vi, g.node(oi).grad * cs);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::one_minus(V x) -> V {
  V out = make((Scalar(1) - value(x).array()).matrix());
  node(out.id).back = [xi = x.id, oi = out.id](GraphT& g) {
    g.accum(xi, -g.node(oi).grad);
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::sum(V v) -> V {
  V out = make(M::Constant(1, 1, value(v).sum()));
  node(out.id).back = [vi = v.id, oi = out.id](GraphT& g) {
    Scalar go = g.node(oi).grad(0, 0);
    const M& xv = g.node(vi).value;
    g.accum(vi, M::Constant(xv.rows(), xv.cols(), go));
  };
  return out;
}

template <typename Scalar>
auto GraphT<Scalar>::pad_rows(V v, Eigen::Index rows) -> V {
  const M& x = value(v);
  if (rows < x.rows()) throw std::invalid_argument("pad_rows: target smaller than input");
  M out = M::Zero(rows, x.cols());
  out.topRows(x.rows()) = x;
  V o = make(std::move(out));
  node(o.id).back = [vi = v.id, oi = o.id](GraphT& g) {
    g.accum(vi, g.node(oi).grad.topRows(g.node(vi).value.rows()));
  };
  return o;
}

template <typename Scalar>
auto GraphT<Scalar>::scatter_add(V base, std::span<const int> indices, V addends) -> V {
  const M& b = value(base);
  const M& a = value(addends);
  if (b.cols() != 1 || a.cols() != 1) {
    throw std::invalid_argument("scatter_add: expected column vectors");
  }
  if (a.rows() != static_cast<Eigen::Index>(indices.size())) {
    throw std::invalid_argument("scatter_add: index/addend length mismatch");
  }
  M out = b;
  for (size_t k = 0; k < indices.size(); k++) {
    if (indices[k] < 0 || indices[k] >= b.rows()) {
      throw std::out_of_range("scatter_add: index " + std::to_string(indices[k]) +
                              " out of range [0, " + std::to_string(b.rows()) + ")");
    }
    out(indices[k], 0) += a(static_cast<Eigen::Index>(k), 0);
  }
  V o = make(std::move(out));
  std::vector<int> idv(indices.begin(), indices.end());
  node(o.id).back = [bi = base.id, ai = addends.id, idv, oi = o.id](GraphT& g) {
    const M& go = g.node(oi).grad;
    g.accum(bi, go);
    M da(static_cast<Eigen::Index>(idv.size()), 1);
    for (size_t k = 0; k < idv.size(); k++) da(static_cast<Eigen::Index>(k), 0) = go(idv[k], 0);
    g.accum(ai, da);
  };
  return o;
}

template <typename Scalar>
void GraphT<Scalar>::backward(V loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss from another graph");
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar (got " +
                                shape_str(value(loss)) + ")");
  }
  accum(loss.id, M::Constant(1, 1, Scalar(1)));
  for (int i = loss.id; i >= 0; i--) {
    Node& n = node(i);
    if (n.has_grad && n.back) n.back(*this);
  }
}

template class GraphT<double>;
template class GraphT<long double>;

template <typename Scalar>
VarT<Scalar> gru_cell(GraphT<Scalar>& g, VarT<Scalar> x, VarT<Scalar> h,
                      const GruVarsT<Scalar>& p) {
  VarT<Scalar> xh = g.vstack(x, h);
  VarT<Scalar> z = g.sigmoid(g.affine(p.wz, xh, p.bz));
  VarT<Scalar> r = g.sigmoid(g.affine(p.wr, xh, p.br));
  VarT<Scalar> xrh = g.vstack(x, g.cmul(r, h));
  VarT<Scalar> htilde = g.tanh(g.affine(p.wh, xrh, p.bh));
  return g.add(g.cmul(g.one_minus(z), h), g.cmul(z, htilde));
}

template Var gru_cell(Graph&, Var, Var, const GruVars&);
template VarT<long double> gru_cell(GraphT<long double>&, VarT<long double>, VarT<long double>,
                                    const GruVarsT<long double>&);

}  // namespace kpseq
