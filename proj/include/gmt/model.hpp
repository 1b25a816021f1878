#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gmt/nn.hpp"
#include "gmt/sample.hpp"
#include "gmt/text_embedding.hpp"

namespace gmt {

/// Input-dropping variants mirroring the ablation table.
struct AblationFlags {
  bool no_pointcloud = false;
  bool no_semantic = false;
  bool no_goal = false;
  bool first_frame = false;

  static AblationFlags parse(const std::string& name);
  std::string name() const;
};

struct ModelConfig {
  int T = 200;
  double input_ratio = 0.3;

  int d_modal = 128;       // per-modality feature width
  int d_point_local = 64;  // per-point feature width
  int d_latent = 256;
  int layers = 6;
  int heads = 8;
  int ffn_hidden = 512;

  int tp_layers = 2;  // trajectory/geometry fusion stack depth
  int tp_heads = 8;
  int fixture_heads = 4;

  int fixture_k = 8;
  int point_budget = 1024;
  int sa1_points = 256;
  double sa1_radius = 0.2;
  int sa1_k = 32;
  int sa1_dim = 64;
  int sa2_points = 64;
  double sa2_radius = 0.4;
  int sa2_k = 64;
  int sa2_dim = 128;
  int interp_k = 3;

  std::string embedder = "fallback";
  int embedder_dim = 512;
  std::string embedder_path;

  std::uint64_t init_seed = 0;

  int history_len() const {
    return static_cast<int>(std::ceil(input_ratio * static_cast<double>(T)));
  }
  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& text);
};

/// Token matrix plus validity mask; masked rows are exactly zero.
struct TokenVar {
  ad::Var tokens;
  BoolArray mask;
};

/// The goal-conditioned multimodal trajectory transformer: modality encoders,
/// a latent-array fusion stack and a per-frame pose head.
class GmtModel {
 public:
  explicit GmtModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const TextEmbedder& embedder() const { return *embedder_; }

  /// Full forward pass: encoders, trajectory/geometry fusion, context
  /// assembly, L cross+self layers over T latent slots and the linear head.
  /// Output row t is the predicted 9D pose for frame t (history included).
  ad::Var forward(nn::Ctx& ctx, const TrajectorySample& sample,
                  const AblationFlags& flags = {},
                  nn::ForwardTrace* trace = nullptr) const;

  /// Value-only forward on an internal tape.
  Eigen::MatrixXd predict(const TrajectorySample& sample,
                          const AblationFlags& flags = {}) const;

  // --- individual stages, exposed for tests and tooling ---

  TokenVar encode_trajectory(nn::Ctx& ctx, ad::Var history9,
                             const BoolArray& hist_mask) const;

  struct PointEncoding {
    ad::Var global;     // 1 x d_modal
    ad::Var per_point;  // N x d_point_local, rows aligned with the input cloud
  };
  PointEncoding encode_points(nn::Ctx& ctx, const PointCloud& cloud) const;

  /// Box tokens via self-attention over projected box parameters plus
  /// index-aligned label tokens. Returns (F_b, F_f).
  std::pair<TokenVar, TokenVar> encode_fixtures(nn::Ctx& ctx,
                                                const FixtureSet& fixtures) const;

  ad::Var embed_description(nn::Ctx& ctx, const std::string& text) const;
  ad::Var encode_goal(nn::Ctx& ctx, ad::Var goal9) const;

  /// Per-frame concatenation of trajectory and propagated geometry features
  /// refined by a dedicated latent stack (one slot per history frame).
  TokenVar fuse_traj_spatial(nn::Ctx& ctx, const TokenVar& traj_tokens,
                             const TokenVar& point_tokens,
                             nn::ForwardTrace* trace = nullptr) const;

  /// Token sequence [F_tp | F_b | F_f | F_d | F_o | F_g] with concatenated
  /// masks and learned modality-type embeddings.
  TokenVar assemble_context(nn::Ctx& ctx, const TokenVar& f_tp, const TokenVar& f_b,
                            const TokenVar& f_f, ad::Var f_d, bool d_valid,
                            ad::Var f_o, bool o_valid, ad::Var f_g) const;

  /// Inverse-squared-distance interpolation matrix (rows: queries, cols:
  /// cloud points) realizing the k-NN feature propagation as a fixed linear
  /// map. Rows for invalid queries are zero.
  Eigen::MatrixXd interpolation_matrix(const Points& cloud_points,
                                       const Points& queries,
                                       const std::vector<bool>& query_valid) const;

 private:
  struct CrossLayer {
    nn::LayerNorm ln_q, ln_kv, ln_self, ln_ffn;
    nn::MultiHeadAttention cross, self;
    nn::FeedForward ffn;
  };

  ad::Var run_stack(nn::Ctx& ctx, ad::Var z0, const std::vector<CrossLayer>& stack,
                    ad::Var tokens, const Eigen::RowVectorXd& bias,
                    nn::ForwardTrace* trace) const;

  ModelConfig cfg_;
  nn::ParamStore params_;
  std::shared_ptr<TextEmbedder> embedder_;

  nn::Linear traj_embed_;
  nn::Linear point_sa1_l1_, point_sa1_l2_, point_sa2_l1_, point_sa2_l2_;
  nn::Linear point_global_, point_local_;
  nn::Linear box_embed_;
  nn::MultiHeadAttention box_attn_;
  nn::Linear text_proj_;
  nn::Linear goal_embed_, goal_proj_;

  int tp_z0_ = -1;
  std::vector<CrossLayer> tp_stack_;

  nn::Linear proj_b_, proj_f_, proj_d_, proj_o_, proj_g_;
  int type_emb_ = -1;   // 6 x d_latent, one row per modality segment
  int null_goal_ = -1;  // 1 x d_latent

  int main_z0_ = -1;
  std::vector<CrossLayer> main_stack_;
  nn::LayerNorm final_ln_;
  nn::Linear head_;
};

// Latent-array building blocks (the fusion primitives).

/// Latent update attending to input tokens: Z + MHA(Z, X) with masked keys
/// receiving -inf logits.
ad::Var cross_attend(nn::Ctx& ctx, ad::Var z, ad::Var tokens,
                     const nn::MultiHeadAttention& attn,
                     const Eigen::RowVectorXd& mask_bias,
                     nn::ForwardTrace* trace = nullptr);

/// Pre-norm latent block: self-attention then feed-forward, both residual.
ad::Var latent_block(nn::Ctx& ctx, ad::Var z, const nn::LayerNorm& ln_self,
                     const nn::MultiHeadAttention& self_attn,
                     const nn::LayerNorm& ln_ffn, const nn::FeedForward& ffn,
                     nn::ForwardTrace* trace = nullptr);

}  // namespace gmt
