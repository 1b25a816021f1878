#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gmt/errors.hpp"

namespace gmt::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Lightweight handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over dense double matrices. Nodes are created by the
/// free-function ops below; backward() walks them in reverse creation order.
/// Not thread-safe; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Gradient-tracked node referencing external storage (parameters, probed
  /// inputs). The caller keeps `external` alive for the life of the tape.
  Var leaf(const Mat& external) { return emit(&external, {}, true, nullptr); }

  /// Untracked node owning its value (data, masks, positional tables).
  Var constant(Mat value) { return emit(nullptr, std::move(value), false, nullptr); }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and accumulates gradients
  /// into every tracked node on the path.
  void backward(const Var& root);

  /// Gradient of `v` after backward(); zeros if the node was never touched.
  Mat grad(const Var& v) const;

  /// Drops all nodes; capacity is retained for reuse.
  void reset();

  std::size_t size() const { return nodes_.size(); }

  // --- internals used by the op implementations ---
  using Backprop = std::function<void(Tape&, int)>;

  Var emit(const Mat* external, Mat owned, bool track, Backprop pull);
  const Mat& val(int id) const;
  const Mat& val(const Var& v) const { return val(v.id()); }
  bool tracked(int id) const { return nodes_[static_cast<std::size_t>(id)].track; }
  bool tracked(const Var& v) const { return tracked(v.id()); }
  /// Accumulation buffer for node `id`, zero-initialized on first access.
  Mat& grad_buf(int id);
  bool has_grad(int id) const;

 private:
  struct Node {
    const Mat* external = nullptr;
    Mat owned;
    Mat grad;
    bool grad_live = false;
    bool track = false;
    Backprop pull;
  };
  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape_->val(id_); }

// ---- ops ----

Var matmul(Var a, Var b);     // A B
Var matmul_nt(Var a, Var b);  // A B^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_rowvec(Var a, Var row);                     // broadcast 1xC over rows
Var add_const(Var a, Mat c);                        // untracked addend
Var const_matmul(Mat w, Var x);                     // untracked left factor
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var scale_rows(Var a, Eigen::VectorXd d);           // untracked per-row factors
Var softmax_rows(Var logits, Eigen::RowVectorXd bias);  // bias 0 / -inf mask
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
Var gelu(Var x);
Var abs(Var x);
Var sum_all(Var x);                                 // 1x1
Var slice_rows(Var x, int start, int n);
Var slice_cols(Var x, int start, int n);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(Var x, std::vector<int> idx);
/// Column-wise max over contiguous row ranges {start, len}; one output row
/// per range. Gradients flow to the argmax rows.
Var group_max(Var x, std::vector<std::pair<int, int>> ranges);

}  // namespace gmt::ad
