#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "gmt/tensor.hpp"

namespace gmt::nn {

enum class Init { UniformFanIn, Zero, Normal002 };

/// Named, ordered parameter tensors with persistent gradient buffers.
/// Creation order is the canonical order used by optimizers and checkpoints.
struct ParamStore {
  struct Entry {
    std::string name;
    ad::Mat value;
    ad::Mat grad;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
          std::mt19937_64& rng, Eigen::Index fan_in = -1);
  int find(const std::string& name) const;
  void zero_grads();
  std::size_t scalar_count() const;
};

/// Per-forward binding of a parameter store to a tape: leaf nodes are created
/// lazily, once per parameter, so gradients accumulate in one place.
struct Ctx {
  ad::Tape& tape;
  ParamStore& params;
  std::vector<ad::Var> bound;

  Ctx(ad::Tape& t, ParamStore& p) : tape(t), params(p) {
    bound.resize(params.entries.size());
  }

  ad::Var param(int id) {
    if (!bound[static_cast<std::size_t>(id)].valid()) {
      bound[static_cast<std::size_t>(id)] =
          tape.leaf(params.entries[static_cast<std::size_t>(id)].value);
    }
    return bound[static_cast<std::size_t>(id)];
  }

  /// Adds tape gradients of all bound parameters into the store buffers,
  /// scaled by `weight`.
  void harvest_grads(double weight = 1.0);
};

struct Linear {
  int w = -1, b = -1;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
         std::mt19937_64& rng, bool zero_bias = false);
  ad::Var operator()(Ctx& c, ad::Var x) const {
    return ad::add_rowvec(ad::matmul(x, c.param(w)), c.param(b));
  }
};

struct LayerNorm {
  int gamma = -1, beta = -1;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, Eigen::Index dim,
            std::mt19937_64& rng);
  ad::Var operator()(Ctx& c, ad::Var x) const {
    return ad::layer_norm_rows(x, c.param(gamma), c.param(beta));
  }
};

/// Attention matrices recorded during a forward pass, one entry per
/// (layer, head) in evaluation order.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> attentions;
};

/// Multi-head scaled dot-product attention with output projection. No
/// residual, no normalization; callers compose those.
struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  int dim = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, Eigen::Index q_in,
                     Eigen::Index kv_in, Eigen::Index d, int heads,
                     std::mt19937_64& rng);

  /// `mask_bias` has one entry per key token: 0 keeps it, -inf drops it.
  /// Throws AllTokensMasked when every key is dropped.
  ad::Var operator()(Ctx& c, ad::Var query_in, ad::Var kv_in,
                     const Eigen::RowVectorXd* mask_bias = nullptr,
                     ForwardTrace* trace = nullptr) const;
};

struct FeedForward {
  Linear in, out;
  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, Eigen::Index dim,
              Eigen::Index hidden, std::mt19937_64& rng);
  ad::Var operator()(Ctx& c, ad::Var x) const {
    return out(c, ad::gelu(in(c, x)));
  }
};

/// Sinusoidal positional encoding table, rows = positions.
Eigen::MatrixXd sinusoidal_encoding(Eigen::Index length, Eigen::Index dim);

/// 0 / -inf additive key bias from a boolean mask.
Eigen::RowVectorXd mask_to_bias(const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);

}  // namespace gmt::nn
