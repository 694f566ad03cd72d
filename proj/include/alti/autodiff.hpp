#pragma once

#include "alti/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace alti::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  matmul,
  matmul_nt,
  add,
  add_row,
  scale,
  hadamard,
  softmax_rows,
  layer_norm_rows,
  gelu,
  relu,
  tanh,
  row,
  element,
  sum,
};

const char* op_name(OpKind op);

/// Gradients of a scalar root with respect to every node that required one.
class Gradients {
 public:
  /// Gradient w.r.t. `v`; a zero matrix of v's shape when v does not influence the root.
  Matrix wrt(Var v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
};

/// Records a matrix-valued computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every parent id is smaller than its
/// child's id and the reverse sweep is a plain backward loop. Parameters that never
/// need gradients should enter as constants so the sweep skips them.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value);
  Var constant(Matrix value);

  const Matrix& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 root. Throws ShapeError for a non-scalar root.
  Gradients backward(Var root) const;

 private:
  struct Node {
    OpKind op = OpKind::leaf;
    std::size_t parents[2] = {0, 0};
    int num_parents = 0;
    bool requires_grad = false;
    Matrix value;
    Matrix aux;       // normalized rows (layer_norm) or unused
    Vector sigma;     // per-row sigma (layer_norm)
    Vector gamma;     // layer_norm scale
    double scalar = 0.0;
    Eigen::Index index0 = 0;
    Eigen::Index index1 = 0;
  };

  Var push(Node node);
  const Node& node(Var v) const;

  friend Var matmul(Var a, Var b);
  friend Var matmul_nt(Var a, Var b);
  friend Var add(Var a, Var b);
  friend Var add_row(Var a, Var row_vec);
  friend Var scale(Var a, double s);
  friend Var hadamard(Var a, Var b);
  friend Var softmax_rows(Var a);
  friend Var layer_norm_rows(Var a, const Vector& gamma, const Vector& beta, double eps);
  friend Var gelu(Var a);
  friend Var relu(Var a);
  friend Var tanh(Var a);
  friend Var row(Var a, Eigen::Index i);
  friend Var element(Var a, Eigen::Index r, Eigen::Index c);
  friend Var sum(Var a);

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row_vec);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var softmax_rows(Var a);
/// Row-wise layer norm; gamma and beta are treated as constants.
Var layer_norm_rows(Var a, const Vector& gamma, const Vector& beta, double eps);
Var gelu(Var a);
Var relu(Var a);
Var tanh(Var a);
Var row(Var a, Eigen::Index i);
Var element(Var a, Eigen::Index r, Eigen::Index c);
Var sum(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }

}  // namespace alti::ad
