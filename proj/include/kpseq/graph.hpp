#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kpseq {

template <typename Scalar>
using MatOf = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Mat = MatOf<double>;  // column vectors are n x 1

// Named dense tensors holding every trainable of a model. Iteration follows
// insertion order so that optimizer updates and serialization are
// deterministic.
class ParameterStore {
 public:
  Mat& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Mat& get(const std::string& name);
  const Mat& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  int64_t total_parameters() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Mat> tensors_;
};

using GradMap = std::unordered_map<std::string, Mat>;

template <typename Scalar>
class GraphT;

// Handle to a node of a graph. Cheap to copy; valid as long as the graph is.
template <typename Scalar>
struct VarT {
  GraphT<Scalar>* graph = nullptr;
  int id = -1;
  const MatOf<Scalar>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const;  // value of a 1x1 node
};

using Var = VarT<double>;

// Reverse-mode tape over dense matrices, templated on the scalar so the same
// forward code can run in wider precision (the gradient checker evaluates its
// central differences with long double). Records every primitive application
// in topological order; backward() walks the record in reverse, accumulating
// gradients additively at fan-out.
template <typename Scalar>
class GraphT {
 public:
  using M = MatOf<Scalar>;
  using V = VarT<Scalar>;

  GraphT() = default;
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  V leaf(M value);
  V scalar(Scalar v);
  // One node per distinct name; repeated lookups share it, so a parameter
  // used twice accumulates both path gradients.
  V param(const std::string& name, const ParameterStore& store);
  V param(const std::string& name, M value);

  V add(V a, V b);
  V sub(V a, V b);
  V cmul(V a, V b);           // elementwise
  V cwise_min(V a, V b);
  V matmul(V a, V b);
  V affine(V w, V x, V b);    // w x + b
  V transpose(V a);
  V sigmoid(V x);
  V tanh(V x);
  V softmax(V v);             // column vector, max-subtracted
  V colwise_add(V m, V v);    // m + v broadcast across columns (bias)
  V hstack(std::span<const V> cols);
  V vstack(V a, V b);
  V embed_row(V table, int row);                          // table row as a column
  V embedding_gather(V table, std::span<const int> ids);  // (#ids x cols)
  V pick(V v, int index);                                 // 1x1
  V log_floored(V x, double floor);                       // log(max(x, floor))
  V scale(V v, V s);                                      // v * s, s is 1x1
  V scale_const(V v, double c);
  V one_minus(V x);  // 1 - x elementwise
  V sum(V v);        // 1x1
  V pad_rows(V v, Eigen::Index rows);  // append zero rows
  V scatter_add(V base, std::span<const int> indices, V addends);

  // Populates gradients for every node that can reach `loss` (a 1x1 node).
  void backward(V loss);

  const M& value(V v) const;
  // Zero matrix if the node never received a gradient.
  M grad(V v) const;
  // Gradient of a named parameter, or nullptr if the parameter was never
  // used in this graph.
  const M* param_grad(const std::string& name) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;
    bool has_grad = false;
    std::function<void(GraphT&)> back;
  };

  V make(M value);
  void accum(int id, const M& g);
  // zero-initialized gradient buffer for in-place accumulation
  M& grad_buffer(int id);
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_nodes_;
};

using Graph = GraphT<double>;

extern template class GraphT<double>;
extern template class GraphT<long double>;

// Standard GRU cell: z = sigmoid(Wz [x;h] + bz), r = sigmoid(Wr [x;h] + br),
// htilde = tanh(Wh [x; r.h] + bh), h' = (1-z).h + z.htilde.
template <typename Scalar>
struct GruVarsT {
  VarT<Scalar> wz, wr, wh, bz, br, bh;
};
using GruVars = GruVarsT<double>;

template <typename Scalar>
VarT<Scalar> gru_cell(GraphT<Scalar>& g, VarT<Scalar> x, VarT<Scalar> h,
                      const GruVarsT<Scalar>& p);

extern template Var gru_cell(Graph&, Var, Var, const GruVars&);
extern template VarT<long double> gru_cell(GraphT<long double>&, VarT<long double>,
                                           VarT<long double>, const GruVarsT<long double>&);

// Central-difference gradient check. The analytic side runs the double tape;
// the displaced evaluations run in long double so near-zero coordinates are
// not swamped by cancellation. Returns the worst relative error with
// denominator max(|analytic|, |numeric|, 1e-8). The callable must accept any
// graph scalar: f(GraphT<S>&, const ParameterStore&) -> VarT<S>.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
};

template <typename F>
GradCheckReport grad_check(F&& f, ParameterStore& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  Graph g;
  Var loss = f(g, params);
  g.backward(loss);

  GradCheckReport report;
  auto eval = [&]() -> long double {
    GraphT<long double> gw;
    return f(gw, params).scalar();
  };
  for (const auto& name : params.names()) {
    Mat& tensor = params.get(name);
    const Mat* analytic = g.param_grad(name);
    for (Eigen::Index i = 0; i < tensor.rows(); i++) {
      for (Eigen::Index j = 0; j < tensor.cols(); j++) {
        double a = analytic ? (*analytic)(i, j) : 0.0;
        const double orig = tensor(i, j);
        const double plus = orig + eps;
        const double minus = orig - eps;
        tensor(i, j) = plus;
        long double fp = eval();
        tensor(i, j) = minus;
        long double fm = eval();
        tensor(i, j) = orig;
        // divide by the width actually realized in double
        long double numeric = (fp - fm) / (static_cast<long double>(plus) - minus);
        double n = static_cast<double>(numeric);
        double denom = std::max({std::abs(a), std::abs(n), 1e-8});
        double rel = std::abs(a - n) / denom;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = name;
        }
      }
    }
  }
  return report;
}

}  // namespace kpseq
