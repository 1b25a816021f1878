#include "gmt/tensor.hpp"

#include <cmath>
#include <limits>

namespace gmt::ad {

Var Tape::emit(const Mat* external, Mat owned, bool track, Backprop pull) {
  Node n;
  n.external = external;
  n.owned = std::move(owned);
  n.track = track;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Mat& Tape::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.owned;
}

Mat& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_live) {
    n.grad.setZero(val(id).rows(), val(id).cols());
    n.grad_live = true;
  }
  return n.grad;
}

bool Tape::has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_live; }

void Tape::backward(const Var& root) {
  if (root.value().size() != 1) {
    throw UsageError("Tape::backward: root must be a 1x1 value");
  }
  grad_buf(root.id()).setOnes();
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad_live && n.pull) n.pull(*this, id);
  }
}

Mat Tape::grad(const Var& v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad_live) return n.grad;
  return Mat::Zero(val(v.id()).rows(), val(v.id()).cols());
}

void Tape::reset() { nodes_.clear(); }

namespace {

Tape& tp(const Var& v) { return *v.tape(); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tp(a);
  Mat out = t.val(a) * t.val(b);
  const int ia = a.id(), ib = b.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(b),
                [ia, ib](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia).noalias() += g * t.val(ib).transpose();
                  if (t.tracked(ib)) t.grad_buf(ib).noalias() += t.val(ia).transpose() * g;
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tp(a);
  Mat out = t.val(a) * t.val(b).transpose();
  const int ia = a.id(), ib = b.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(b),
                [ia, ib](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia).noalias() += g * t.val(ib);
                  if (t.tracked(ib)) t.grad_buf(ib).noalias() += g.transpose() * t.val(ia);
                });
}

Var add(Var a, Var b) {
  Tape& t = tp(a);
  Mat out = t.val(a) + t.val(b);
  const int ia = a.id(), ib = b.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(b),
                [ia, ib](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia) += g;
                  if (t.tracked(ib)) t.grad_buf(ib) += g;
                });
}

Var sub(Var a, Var b) {
  Tape& t = tp(a);
  Mat out = t.val(a) - t.val(b);
  const int ia = a.id(), ib = b.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(b),
                [ia, ib](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia) += g;
                  if (t.tracked(ib)) t.grad_buf(ib) -= g;
                });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = tp(a);
  Mat out = t.val(a).rowwise() + t.val(row).row(0);
  const int ia = a.id(), ir = row.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(row),
                [ia, ir](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia) += g;
                  if (t.tracked(ir)) t.grad_buf(ir).row(0) += g.colwise().sum();
                });
}

Var add_const(Var a, Mat c) {
  Tape& t = tp(a);
  Mat out = t.val(a) + c;
  const int ia = a.id();
  return t.emit(nullptr, std::move(out), t.tracked(a), [ia](Tape& t, int id) {
    if (t.tracked(ia)) t.grad_buf(ia) += t.grad_buf(id);
  });
}

Var const_matmul(Mat w, Var x) {
  Tape& t = tp(x);
  Mat out = w * t.val(x);
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x),
                [ix, w = std::move(w)](Tape& t, int id) {
                  if (t.tracked(ix)) t.grad_buf(ix).noalias() += w.transpose() * t.grad_buf(id);
                });
}

Var scale(Var a, double s) {
  Tape& t = tp(a);
  Mat out = s * t.val(a);
  const int ia = a.id();
  return t.emit(nullptr, std::move(out), t.tracked(a), [ia, s](Tape& t, int id) {
    if (t.tracked(ia)) t.grad_buf(ia) += s * t.grad_buf(id);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tp(a);
  Mat out = t.val(a).cwiseProduct(t.val(b));
  const int ia = a.id(), ib = b.id();
  return t.emit(nullptr, std::move(out), t.tracked(a) || t.tracked(b),
                [ia, ib](Tape& t, int id) {
                  const Mat& g = t.grad_buf(id);
                  if (t.tracked(ia)) t.grad_buf(ia) += g.cwiseProduct(t.val(ib));
                  if (t.tracked(ib)) t.grad_buf(ib) += g.cwiseProduct(t.val(ia));
                });
}

Var scale_rows(Var a, Eigen::VectorXd d) {
  Tape& t = tp(a);
  Mat out = d.asDiagonal() * t.val(a);
  const int ia = a.id();
  return t.emit(nullptr, std::move(out), t.tracked(a),
                [ia, d = std::move(d)](Tape& t, int id) {
                  if (t.tracked(ia)) t.grad_buf(ia) += d.asDiagonal() * t.grad_buf(id);
                });
}

Var softmax_rows(Var logits, Eigen::RowVectorXd bias) {
  Tape& t = tp(logits);
  Mat z = t.val(logits);
  z.rowwise() += bias;
  Mat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    if (!std::isfinite(m)) {
      throw AllTokensMasked("softmax_rows: all logits masked in a row");
    }
    Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  const int il = logits.id();
  return t.emit(nullptr, std::move(out), t.tracked(logits), [il](Tape& t, int id) {
    if (!t.tracked(il)) return;
    const Mat& y = t.val(id);
    const Mat& g = t.grad_buf(id);
    Mat& gl = t.grad_buf(il);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      gl.row(i) += (g.row(i).array() - dot).matrix().cwiseProduct(y.row(i));
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tp(x);
  const Mat& xv = t.val(x);
  const Eigen::Index n = xv.cols();
  Eigen::VectorXd mu = xv.rowwise().mean();
  Mat centered = xv.colwise() - mu;
  Eigen::VectorXd inv_sigma =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps)
          .sqrt()
          .inverse();
  Mat xhat = inv_sigma.asDiagonal() * centered;
  Mat out = (xhat.array().rowwise() * t.val(gamma).row(0).array()).rowwise() +
            t.val(beta).row(0).array();
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool track = t.tracked(x) || t.tracked(gamma) || t.tracked(beta);
  return t.emit(
      nullptr, std::move(out), track,
      [ix, ig, ib, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t, int id) {
        const Mat& g = t.grad_buf(id);
        const Eigen::Index n = g.cols();
        if (t.tracked(ig)) t.grad_buf(ig).row(0) += g.cwiseProduct(xhat).colwise().sum();
        if (t.tracked(ib)) t.grad_buf(ib).row(0) += g.colwise().sum();
        if (t.tracked(ix)) {
          // dxhat = g * gamma; dx = (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat)) / sigma
          Mat dxhat = g.array().rowwise() * t.val(ig).row(0).array();
          Eigen::VectorXd m1 = dxhat.rowwise().mean();
          Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / static_cast<double>(n);
          Mat dx = dxhat;
          dx.colwise() -= m1;
          dx -= m2.asDiagonal() * xhat;
          t.grad_buf(ix) += inv_sigma.asDiagonal() * dx;
        }
      });
}

Var gelu(Var x) {
  Tape& t = tp(x);
  const Mat& xv = t.val(x);
  const double inv_sqrt2 = 0.7071067811865475244;
  Mat phi = (0.5 * (1.0 + (xv.array() * inv_sqrt2).erf())).matrix();
  Mat out = xv.cwiseProduct(phi);
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x),
                [ix, phi = std::move(phi)](Tape& t, int id) {
                  if (!t.tracked(ix)) return;
                  const Mat& xv = t.val(ix);
                  const double inv_sqrt_2pi = 0.3989422804014326779;
                  Mat d = phi.array() +
                          xv.array() * (-0.5 * xv.array().square()).exp() * inv_sqrt_2pi;
                  t.grad_buf(ix) += t.grad_buf(id).cwiseProduct(d);
                });
}

Var abs(Var x) {
  Tape& t = tp(x);
  Mat out = t.val(x).cwiseAbs();
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x), [ix](Tape& t, int id) {
    if (!t.tracked(ix)) return;
    t.grad_buf(ix) += t.grad_buf(id).cwiseProduct(
        t.val(ix).unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }));
  });
}

Var sum_all(Var x) {
  Tape& t = tp(x);
  Mat out(1, 1);
  out(0, 0) = t.val(x).sum();
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x), [ix](Tape& t, int id) {
    if (t.tracked(ix)) t.grad_buf(ix).array() += t.grad_buf(id)(0, 0);
  });
}

Var slice_rows(Var x, int start, int n) {
  Tape& t = tp(x);
  Mat out = t.val(x).middleRows(start, n);
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x), [ix, start, n](Tape& t, int id) {
    if (t.tracked(ix)) t.grad_buf(ix).middleRows(start, n) += t.grad_buf(id);
  });
}

Var slice_cols(Var x, int start, int n) {
  Tape& t = tp(x);
  Mat out = t.val(x).middleCols(start, n);
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x), [ix, start, n](Tape& t, int id) {
    if (t.tracked(ix)) t.grad_buf(ix).middleCols(start, n) += t.grad_buf(id);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  Tape& t = tp(parts.front());
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.val(parts.front()).cols();
  bool track = false;
  std::vector<int> ids;
  for (const Var& p : parts) {
    rows += t.val(p).rows();
    track = track || t.tracked(p);
    ids.push_back(p.id());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, t.val(p).rows()) = t.val(p);
    at += t.val(p).rows();
  }
  return t.emit(nullptr, std::move(out), track, [ids = std::move(ids)](Tape& t, int id) {
    const Mat& g = t.grad_buf(id);
    Eigen::Index at = 0;
    for (int pid : ids) {
      const Eigen::Index r = t.val(pid).rows();
      if (t.tracked(pid)) t.grad_buf(pid) += g.middleRows(at, r);
      at += r;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  Tape& t = tp(parts.front());
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.val(parts.front()).rows();
  bool track = false;
  std::vector<int> ids;
  for (const Var& p : parts) {
    cols += t.val(p).cols();
    track = track || t.tracked(p);
    ids.push_back(p.id());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, t.val(p).cols()) = t.val(p);
    at += t.val(p).cols();
  }
  return t.emit(nullptr, std::move(out), track, [ids = std::move(ids)](Tape& t, int id) {
    const Mat& g = t.grad_buf(id);
    Eigen::Index at = 0;
    for (int pid : ids) {
      const Eigen::Index c = t.val(pid).cols();
      if (t.tracked(pid)) t.grad_buf(pid) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var gather_rows(Var x, std::vector<int> idx) {
  Tape& t = tp(x);
  Mat out(static_cast<Eigen::Index>(idx.size()), t.val(x).cols());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = t.val(x).row(idx[j]);
  }
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x),
                [ix, idx = std::move(idx)](Tape& t, int id) {
                  if (!t.tracked(ix)) return;
                  const Mat& g = t.grad_buf(id);
                  Mat& gx = t.grad_buf(ix);
                  for (std::size_t j = 0; j < idx.size(); ++j) {
                    gx.row(idx[j]) += g.row(static_cast<Eigen::Index>(j));
                  }
                });
}

Var group_max(Var x, std::vector<std::pair<int, int>> ranges) {
  Tape& t = tp(x);
  const Mat& xv = t.val(x);
  const Eigen::Index cols = xv.cols();
  Mat out(static_cast<Eigen::Index>(ranges.size()), cols);
  Eigen::MatrixXi argmax(static_cast<Eigen::Index>(ranges.size()), cols);
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    const auto [start, len] = ranges[r];
    if (len < 1) throw BadCount("group_max: empty range");
    for (Eigen::Index c = 0; c < cols; ++c) {
      int best = start;
      double bv = xv(start, c);
      for (int i = start + 1; i < start + len; ++i) {
        if (xv(i, c) > bv) {
          bv = xv(i, c);
          best = i;
        }
      }
      out(static_cast<Eigen::Index>(r), c) = bv;
      argmax(static_cast<Eigen::Index>(r), c) = best;
    }
  }
  const int ix = x.id();
  return t.emit(nullptr, std::move(out), t.tracked(x),
                [ix, argmax = std::move(argmax)](Tape& t, int id) {
                  if (!t.tracked(ix)) return;
                  const Mat& g = t.grad_buf(id);
                  Mat& gx = t.grad_buf(ix);
                  for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    for (Eigen::Index c = 0; c < g.cols(); ++c) {
                      gx(argmax(r, c), c) += g(r, c);
                    }
                  }
                });
}

}  // namespace gmt::ad
