#include "alti/autodiff.hpp"

#include <utility>

namespace alti::ad {
namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("autodiff: operands live on different tapes");
  }
  return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
}

void accumulate(Matrix& slot, const Matrix& contribution) {
  if (slot.size() == 0) {
    slot = contribution;
  } else {
    slot += contribution;
  }
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::matmul_nt: return "matmul_nt";
    case OpKind::add: return "add";
    case OpKind::add_row: return "add_row";
    case OpKind::scale: return "scale";
    case OpKind::hadamard: return "hadamard";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::layer_norm_rows: return "layer_norm_rows";
    case OpKind::gelu: return "gelu";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::row: return "row";
    case OpKind::element: return "element";
    case OpKind::sum: return "sum";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape->value(*this); }

Matrix Gradients::wrt(Var v) const {
  if (v.tape != tape_) {
    throw std::invalid_argument("Gradients::wrt: variable belongs to another tape");
  }
  if (v.id < grads_.size() && grads_[v.id].size() != 0) {
    return grads_[v.id];
  }
  return Matrix::Zero(v.rows(), v.cols());
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.op = OpKind::leaf;
  n.requires_grad = true;
  require_finite(value, "leaf");
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = OpKind::constant;
  require_finite(value, "constant");
  n.value = std::move(value);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::out_of_range("autodiff: dangling variable");
  }
  return nodes_[v.id];
}

Var Tape::push(Node node) {
  require_finite(node.value, op_name(node.op));
  for (int p = 0; p < node.num_parents; ++p) {
    node.requires_grad = node.requires_grad || nodes_[node.parents[p]].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var root) const {
  const Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ShapeError("backward: root must be scalar, got " +
                     shape_string(r.value.rows(), r.value.cols()));
  }
  Gradients out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  out.grads_[root.id] = Matrix::Ones(1, 1);

  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || out.grads_[id].size() == 0) {
      continue;
    }
    const Matrix& g = out.grads_[id];
    auto wants = [&](int p) { return nodes_[n.parents[p]].requires_grad; };
    auto slot = [&](int p) -> Matrix& { return out.grads_[n.parents[p]]; };
    auto parent_value = [&](int p) -> const Matrix& { return nodes_[n.parents[p]].value; };

    switch (n.op) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::matmul:
        if (wants(0)) accumulate(slot(0), g * parent_value(1).transpose());
        if (wants(1)) accumulate(slot(1), parent_value(0).transpose() * g);
        break;
      case OpKind::matmul_nt:
        if (wants(0)) accumulate(slot(0), g * parent_value(1));
        if (wants(1)) accumulate(slot(1), g.transpose() * parent_value(0));
        break;
      case OpKind::add:
        if (wants(0)) accumulate(slot(0), g);
        if (wants(1)) accumulate(slot(1), g);
        break;
      case OpKind::add_row:
        if (wants(0)) accumulate(slot(0), g);
        if (wants(1)) accumulate(slot(1), g.colwise().sum());
        break;
      case OpKind::scale:
        if (wants(0)) accumulate(slot(0), n.scalar * g);
        break;
      case OpKind::hadamard:
        if (wants(0)) accumulate(slot(0), g.cwiseProduct(parent_value(1)));
        if (wants(1)) accumulate(slot(1), g.cwiseProduct(parent_value(0)));
        break;
      case OpKind::softmax_rows: {
        const Matrix& y = n.value;
        Matrix d(y.rows(), y.cols());
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          const double dot = g.row(i).dot(y.row(i));
          d.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
        }
        accumulate(slot(0), d);
        break;
      }
      case OpKind::layer_norm_rows: {
        const Matrix& xhat = n.aux;
        Matrix d(xhat.rows(), xhat.cols());
        for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
          const RowVector gg = g.row(i).cwiseProduct(n.gamma.transpose());
          const double mean_g = gg.mean();
          const double mean_gx = gg.cwiseProduct(xhat.row(i)).mean();
          d.row(i) = ((gg.array() - mean_g - xhat.row(i).array() * mean_gx) / n.sigma(i))
                         .matrix();
        }
        accumulate(slot(0), d);
        break;
      }
      case OpKind::gelu:
        accumulate(slot(0), g.cwiseProduct(parent_value(0).unaryExpr(&alti::gelu_derivative)));
        break;
      case OpKind::relu:
        accumulate(slot(0),
                   g.cwiseProduct((parent_value(0).array() > 0.0).cast<double>().matrix()));
        break;
      case OpKind::tanh:
        accumulate(slot(0),
                   g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case OpKind::row: {
        const Matrix& a = parent_value(0);
        Matrix d = Matrix::Zero(a.rows(), a.cols());
        d.row(n.index0) = g;
        accumulate(slot(0), d);
        break;
      }
      case OpKind::element: {
        const Matrix& a = parent_value(0);
        Matrix d = Matrix::Zero(a.rows(), a.cols());
        d(n.index0, n.index1) = g(0, 0);
        accumulate(slot(0), d);
        break;
      }
      case OpKind::sum: {
        const Matrix& a = parent_value(0);
        accumulate(slot(0), Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
        break;
      }
    }
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_string(av.rows(), av.cols()) + " * " +
                     shape_string(bv.rows(), bv.cols()));
  }
  Tape::Node n;
  n.op = OpKind::matmul;
  n.parents[0] = a.id;
  n.parents[1] = b.id;
  n.num_parents = 2;
  n.value = av * bv;
  return t.push(std::move(n));
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(av.rows(), av.cols()) + " * " +
                     shape_string(bv.rows(), bv.cols()) + "^T");
  }
  Tape::Node n;
  n.op = OpKind::matmul_nt;
  n.parents[0] = a.id;
  n.parents[1] = b.id;
  n.num_parents = 2;
  n.value = av * bv.transpose();
  return t.push(std::move(n));
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(t.value(a), t.value(b), "add");
  Tape::Node n;
  n.op = OpKind::add;
  n.parents[0] = a.id;
  n.parents[1] = b.id;
  n.num_parents = 2;
  n.value = t.value(a) + t.value(b);
  return t.push(std::move(n));
}

Var add_row(Var a, Var row_vec) {
  Tape& t = same_tape(a, row_vec);
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row_vec);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: " + shape_string(av.rows(), av.cols()) + " + " +
                     shape_string(rv.rows(), rv.cols()));
  }
  Tape::Node n;
  n.op = OpKind::add_row;
  n.parents[0] = a.id;
  n.parents[1] = row_vec.id;
  n.num_parents = 2;
  n.value = av.rowwise() + rv.row(0);
  return t.push(std::move(n));
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::scale;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.scalar = s;
  n.value = s * t.value(a);
  return t.push(std::move(n));
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(t.value(a), t.value(b), "hadamard");
  Tape::Node n;
  n.op = OpKind::hadamard;
  n.parents[0] = a.id;
  n.parents[1] = b.id;
  n.num_parents = 2;
  n.value = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(n));
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::softmax_rows;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = alti::softmax_rows(t.value(a));
  return t.push(std::move(n));
}

Var layer_norm_rows(Var a, const Vector& gamma, const Vector& beta, double eps) {
  Tape& t = *a.tape;
  const Matrix& x = t.value(a);
  Tape::Node n;
  n.op = OpKind::layer_norm_rows;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = alti::layer_norm_rows(x, gamma, beta, eps, &n.sigma);
  n.aux = (x.colwise() - x.rowwise().mean()).array().colwise() / n.sigma.array();
  n.gamma = gamma;
  return t.push(std::move(n));
}

Var gelu(Var a) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::gelu;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = t.value(a).unaryExpr(&alti::gelu);
  return t.push(std::move(n));
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::relu;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = t.value(a).cwiseMax(0.0);
  return t.push(std::move(n));
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::tanh;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = t.value(a).array().tanh().matrix();
  return t.push(std::move(n));
}

Var row(Var a, Eigen::Index i) {
  Tape& t = *a.tape;
  const Matrix& av = t.value(a);
  if (i < 0 || i >= av.rows()) {
    throw std::out_of_range("row: index " + std::to_string(i) + " outside " +
                            shape_string(av.rows(), av.cols()));
  }
  Tape::Node n;
  n.op = OpKind::row;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.index0 = i;
  n.value = av.row(i);
  return t.push(std::move(n));
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  Tape& t = *a.tape;
  const Matrix& av = t.value(a);
  if (r < 0 || r >= av.rows() || c < 0 || c >= av.cols()) {
    throw std::out_of_range("element: index outside " + shape_string(av.rows(), av.cols()));
  }
  Tape::Node n;
  n.op = OpKind::element;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.index0 = r;
  n.index1 = c;
  n.value = Matrix::Constant(1, 1, av(r, c));
  return t.push(std::move(n));
}

Var sum(Var a) {
  Tape& t = *a.tape;
  Tape::Node n;
  n.op = OpKind::sum;
  n.parents[0] = a.id;
  n.num_parents = 1;
  n.value = Matrix::Constant(1, 1, t.value(a).sum());
  return t.push(std::move(n));
}

}  // namespace alti::ad
