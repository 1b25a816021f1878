#include "gmt/nn.hpp"

#include <cmath>
#include <limits>

namespace gmt::nn {

int ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    Init init, std::mt19937_64& rng, Eigen::Index fan_in) {
  if (index.count(name)) throw UsageError("ParamStore: duplicate parameter " + name);
  Entry e;
  e.name = name;
  e.value.resize(rows, cols);
  switch (init) {
    case Init::Zero:
      e.value.setZero();
      break;
    case Init::UniformFanIn: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : rows));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) e.value(i, j) = u(rng);
      }
      break;
    }
    case Init::Normal002: {
      std::normal_distribution<double> n(0.0, 0.02);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) e.value(i, j) = n(rng);
      }
      break;
    }
  }
  e.grad = ad::Mat::Zero(rows, cols);
  entries.push_back(std::move(e));
  const int id = static_cast<int>(entries.size()) - 1;
  index.emplace(name, id);
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw UsageError("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (Entry& e : entries) e.grad.setZero();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries) n += static_cast<std::size_t>(e.value.size());
  return n;
}

void Ctx::harvest_grads(double weight) {
  for (std::size_t i = 0; i < bound.size(); ++i) {
    if (!bound[i].valid()) continue;
    params.entries[i].grad += weight * tape.grad(bound[i]);
  }
}

Linear::Linear(ParamStore& ps, const std::string& name, Eigen::Index in,
               Eigen::Index out, std::mt19937_64& rng, bool zero_bias) {
  w = ps.add(name + ".w", in, out, Init::UniformFanIn, rng, in);
  b = ps.add(name + ".b", 1, out, zero_bias ? Init::Zero : Init::UniformFanIn, rng, in);
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, Eigen::Index dim,
                     std::mt19937_64& rng) {
  gamma = ps.add(name + ".gamma", 1, dim, Init::Zero, rng);
  beta = ps.add(name + ".beta", 1, dim, Init::Zero, rng);
  ps.entries[static_cast<std::size_t>(gamma)].value.setOnes();
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name,
                                       Eigen::Index q_in, Eigen::Index kv_in,
                                       Eigen::Index d, int heads_, std::mt19937_64& rng)
    : q(ps, name + ".q", q_in, d, rng),
      k(ps, name + ".k", kv_in, d, rng),
      v(ps, name + ".v", kv_in, d, rng),
      o(ps, name + ".o", d, d, rng),
      heads(heads_),
      dim(static_cast<int>(d)) {
  if (d % heads_ != 0) throw ConfigMismatch("attention dim not divisible by heads");
}

ad::Var MultiHeadAttention::operator()(Ctx& c, ad::Var query_in, ad::Var kv_in,
                                       const Eigen::RowVectorXd* mask_bias,
                                       ForwardTrace* trace) const {
  if (kv_in.rows() == 0) throw AllTokensMasked("attention: no key tokens");
  Eigen::RowVectorXd bias = mask_bias
                                ? *mask_bias
                                : Eigen::RowVectorXd::Zero(kv_in.rows());
  if (!(bias.array() > -std::numeric_limits<double>::infinity()).any()) {
    throw AllTokensMasked("attention: every key token is masked");
  }

  ad::Var Q = q(c, query_in);
  ad::Var K = k(c, kv_in);
  ad::Var V = v(c, kv_in);
  const int dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> per_head;
  per_head.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    ad::Var Qh = ad::slice_cols(Q, h * dh, dh);
    ad::Var Kh = ad::slice_cols(K, h * dh, dh);
    ad::Var Vh = ad::slice_cols(V, h * dh, dh);
    ad::Var logits = ad::scale(ad::matmul_nt(Qh, Kh), inv_sqrt);
    ad::Var attn = ad::softmax_rows(logits, bias);
    if (trace) trace->attentions.push_back(attn.value());
    per_head.push_back(ad::matmul(attn, Vh));
  }
  return o(c, ad::concat_cols(per_head));
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, Eigen::Index dim,
                         Eigen::Index hidden, std::mt19937_64& rng)
    : in(ps, name + ".in", dim, hidden, rng), out(ps, name + ".out", hidden, dim, rng) {}

Eigen::MatrixXd sinusoidal_encoding(Eigen::Index length, Eigen::Index dim) {
  Eigen::MatrixXd pe(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < dim; i += 2) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(pos, i) = std::sin(static_cast<double>(pos) * rate);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(static_cast<double>(pos) * rate);
    }
  }
  return pe;
}

Eigen::RowVectorXd mask_to_bias(const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  Eigen::RowVectorXd bias(mask.size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    bias(i) = mask(i) ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return bias;
}

}  // namespace gmt::nn
