#include "gmt/model.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

namespace gmt {

using ad::Var;
using nn::Ctx;

AblationFlags AblationFlags::parse(const std::string& name) {
  AblationFlags f;
  if (name.empty() || name == "none") return f;
  if (name == "no_pointcloud") {
    f.no_pointcloud = true;
  } else if (name == "no_semantic") {
    f.no_semantic = true;
  } else if (name == "no_goal") {
    f.no_goal = true;
  } else if (name == "first_frame") {
    f.first_frame = true;
  } else {
    throw UsageError("unknown ablation \"" + name + "\"");
  }
  return f;
}

std::string AblationFlags::name() const {
  if (no_pointcloud) return "no_pointcloud";
  if (no_semantic) return "no_semantic";
  if (no_goal) return "no_goal";
  if (first_frame) return "first_frame";
  return "none";
}

namespace {

using Json = nlohmann::ordered_json;

Json config_to_json(const ModelConfig& c) {
  Json j;
  j["T"] = c.T;
  j["input_ratio"] = c.input_ratio;
  j["d_modal"] = c.d_modal;
  j["d_point_local"] = c.d_point_local;
  j["d_latent"] = c.d_latent;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["ffn_hidden"] = c.ffn_hidden;
  j["tp_layers"] = c.tp_layers;
  j["tp_heads"] = c.tp_heads;
  j["fixture_heads"] = c.fixture_heads;
  j["fixture_k"] = c.fixture_k;
  j["point_budget"] = c.point_budget;
  j["sa1_points"] = c.sa1_points;
  j["sa1_radius"] = c.sa1_radius;
  j["sa1_k"] = c.sa1_k;
  j["sa1_dim"] = c.sa1_dim;
  j["sa2_points"] = c.sa2_points;
  j["sa2_radius"] = c.sa2_radius;
  j["sa2_k"] = c.sa2_k;
  j["sa2_dim"] = c.sa2_dim;
  j["interp_k"] = c.interp_k;
  j["embedder"] = c.embedder;
  j["embedder_dim"] = c.embedder_dim;
  j["embedder_path"] = c.embedder_path;
  j["init_seed"] = c.init_seed;
  return j;
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig c;
  auto get = [&j](const char* key, auto& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
  };
  get("T", c.T);
  get("input_ratio", c.input_ratio);
  get("d_modal", c.d_modal);
  get("d_point_local", c.d_point_local);
  get("d_latent", c.d_latent);
  get("layers", c.layers);
  get("heads", c.heads);
  get("ffn_hidden", c.ffn_hidden);
  get("tp_layers", c.tp_layers);
  get("tp_heads", c.tp_heads);
  get("fixture_heads", c.fixture_heads);
  get("fixture_k", c.fixture_k);
  get("point_budget", c.point_budget);
  get("sa1_points", c.sa1_points);
  get("sa1_radius", c.sa1_radius);
  get("sa1_k", c.sa1_k);
  get("sa1_dim", c.sa1_dim);
  get("sa2_points", c.sa2_points);
  get("sa2_radius", c.sa2_radius);
  get("sa2_k", c.sa2_k);
  get("sa2_dim", c.sa2_dim);
  get("interp_k", c.interp_k);
  get("embedder", c.embedder);
  get("embedder_dim", c.embedder_dim);
  get("embedder_path", c.embedder_path);
  get("init_seed", c.init_seed);
  return c;
}

}  // namespace

std::string ModelConfig::to_json_string() const { return config_to_json(*this).dump(2); }

ModelConfig ModelConfig::from_json_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model config: bad JSON: ") + e.what());
  }
  return config_from_json(j);
}

GmtModel::GmtModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.d_latent % cfg_.heads != 0 || cfg_.d_latent % cfg_.tp_heads != 0 ||
      cfg_.d_modal % cfg_.fixture_heads != 0) {
    throw ConfigMismatch("model dims not divisible by head counts");
  }
  if (cfg_.input_ratio <= 0.0 || cfg_.input_ratio >= 1.0) {
    throw ConfigMismatch("input_ratio must be in (0, 1)");
  }
  embedder_ = make_embedder(cfg_.embedder, cfg_.embedder_dim, cfg_.embedder_path);

  std::mt19937_64 rng(cfg_.init_seed);
  auto& ps = params_;
  const int H = cfg_.history_len();
  const int d = cfg_.d_latent;

  traj_embed_ = nn::Linear(ps, "traj.embed", 9, cfg_.d_modal, rng);

  point_sa1_l1_ = nn::Linear(ps, "points.sa1.l1", 3, cfg_.sa1_dim, rng);
  point_sa1_l2_ = nn::Linear(ps, "points.sa1.l2", cfg_.sa1_dim, cfg_.sa1_dim, rng);
  point_sa2_l1_ = nn::Linear(ps, "points.sa2.l1", 3 + cfg_.sa1_dim, cfg_.sa2_dim, rng);
  point_sa2_l2_ = nn::Linear(ps, "points.sa2.l2", cfg_.sa2_dim, cfg_.sa2_dim, rng);
  point_global_ = nn::Linear(ps, "points.global", cfg_.sa2_dim, cfg_.d_modal, rng);
  point_local_ = nn::Linear(ps, "points.local", cfg_.sa2_dim, cfg_.d_point_local, rng);

  box_embed_ = nn::Linear(ps, "fixtures.embed", 12, cfg_.d_modal, rng);
  box_attn_ = nn::MultiHeadAttention(ps, "fixtures.attn", cfg_.d_modal, cfg_.d_modal,
                                     cfg_.d_modal, cfg_.fixture_heads, rng);

  text_proj_ =
      nn::Linear(ps, "text.proj", embedder_->dimension(), cfg_.d_modal, rng);

  goal_embed_ = nn::Linear(ps, "goal.embed", 9, cfg_.d_modal, rng);
  goal_proj_ = nn::Linear(ps, "goal.proj", cfg_.d_modal, cfg_.d_modal, rng);

  auto make_layer = [&](const std::string& prefix, int kv_dim, int heads) {
    CrossLayer l;
    l.ln_q = nn::LayerNorm(ps, prefix + ".ln_q", d, rng);
    l.ln_kv = nn::LayerNorm(ps, prefix + ".ln_kv", kv_dim, rng);
    l.cross = nn::MultiHeadAttention(ps, prefix + ".cross", d, kv_dim, d, heads, rng);
    l.ln_self = nn::LayerNorm(ps, prefix + ".ln_self", d, rng);
    l.self = nn::MultiHeadAttention(ps, prefix + ".self", d, d, d, heads, rng);
    l.ln_ffn = nn::LayerNorm(ps, prefix + ".ln_ffn", d, rng);
    l.ffn = nn::FeedForward(ps, prefix + ".ffn", d, cfg_.ffn_hidden, rng);
    return l;
  };

  tp_z0_ = ps.add("tp.z0", H, d, nn::Init::Normal002, rng);
  const int tp_kv = cfg_.d_modal + cfg_.d_point_local;
  for (int i = 0; i < cfg_.tp_layers; ++i) {
    tp_stack_.push_back(make_layer("tp.layer" + std::to_string(i), tp_kv, cfg_.tp_heads));
  }

  proj_b_ = nn::Linear(ps, "fuse.proj_b", cfg_.d_modal, d, rng);
  proj_f_ = nn::Linear(ps, "fuse.proj_f", cfg_.d_modal, d, rng);
  proj_d_ = nn::Linear(ps, "fuse.proj_d", cfg_.d_modal, d, rng);
  proj_o_ = nn::Linear(ps, "fuse.proj_o", cfg_.d_modal, d, rng);
  proj_g_ = nn::Linear(ps, "fuse.proj_g", cfg_.d_modal, d, rng);
  type_emb_ = ps.add("fuse.type_emb", 6, d, nn::Init::Normal002, rng);
  null_goal_ = ps.add("fuse.null_goal", 1, d, nn::Init::Normal002, rng);

  main_z0_ = ps.add("main.z0", cfg_.T, d, nn::Init::Normal002, rng);
  for (int i = 0; i < cfg_.layers; ++i) {
    main_stack_.push_back(make_layer("main.layer" + std::to_string(i), d, cfg_.heads));
  }
  final_ln_ = nn::LayerNorm(ps, "main.final_ln", d, rng);
  head_ = nn::Linear(ps, "head", d, 9, rng, /*zero_bias=*/true);
}

TokenVar GmtModel::encode_trajectory(Ctx& ctx, Var history9,
                                     const BoolArray& hist_mask) const {
  if (!hist_mask.any()) throw EmptyHistory("encode_trajectory: no valid frames");
  Var tok = traj_embed_(ctx, history9);
  tok = ad::add_const(tok, nn::sinusoidal_encoding(history9.rows(), cfg_.d_modal));
  Eigen::VectorXd m(hist_mask.size());
  for (Eigen::Index i = 0; i < hist_mask.size(); ++i) m(i) = hist_mask(i) ? 1.0 : 0.0;
  return {ad::scale_rows(tok, m), hist_mask};
}

GmtModel::PointEncoding GmtModel::encode_points(Ctx& ctx, const PointCloud& cloud) const {
  const int n = static_cast<int>(cloud.size());
  if (n < 1) throw EmptyCloud("encode_points: empty cloud");

  // Canonical order decouples sampling and grouping from input permutation.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int c = 0; c < 3; ++c) {
      if (cloud.points(a, c) != cloud.points(b, c)) return cloud.points(a, c) < cloud.points(b, c);
    }
    return a < b;
  });
  PointCloud sorted;
  sorted.points.resize(n, 3);
  for (int j = 0; j < n; ++j) sorted.points.row(j) = cloud.points.row(order[static_cast<std::size_t>(j)]);

  auto abstraction = [&](const PointCloud& level, const std::vector<int>& center_idx,
                         double radius, int max_k, Var* level_feats) {
    // Gathered relative coordinates (plus member features on upper levels)
    // run through a shared MLP and a per-group max pool.
    Points centers(static_cast<Eigen::Index>(center_idx.size()), 3);
    for (std::size_t j = 0; j < center_idx.size(); ++j) {
      centers.row(static_cast<Eigen::Index>(j)) = level.points.row(center_idx[j]);
    }
    auto groups = ball_query(level, centers, radius, max_k);
    std::vector<std::pair<int, int>> ranges;
    std::vector<int> flat;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].empty()) groups[g].push_back(center_idx[g]);
      ranges.emplace_back(static_cast<int>(flat.size()), static_cast<int>(groups[g].size()));
      flat.insert(flat.end(), groups[g].begin(), groups[g].end());
    }
    ad::Mat rel(static_cast<Eigen::Index>(flat.size()), 3);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto [start, len] = ranges[g];
      for (int j = 0; j < len; ++j) {
        rel.row(start + j) = level.points.row(flat[static_cast<std::size_t>(start + j)]) -
                             centers.row(static_cast<Eigen::Index>(g));
      }
    }
    Var members = ctx.tape.constant(rel);
    if (level_feats) {
      members = ad::concat_cols({members, ad::gather_rows(*level_feats, flat)});
    }
    return std::pair{members, ranges};
  };

  const int s1 = std::min(cfg_.sa1_points, n);
  const std::vector<int> c1 = farthest_point_sampling(sorted, s1, 0);
  auto [m1, r1] = abstraction(sorted, c1, cfg_.sa1_radius, cfg_.sa1_k, nullptr);
  Var f1 = ad::group_max(
      ad::gelu(point_sa1_l2_(ctx, ad::gelu(point_sa1_l1_(ctx, m1)))), r1);

  PointCloud level1;
  level1.points.resize(s1, 3);
  for (int j = 0; j < s1; ++j) level1.points.row(j) = sorted.points.row(c1[static_cast<std::size_t>(j)]);

  const int s2 = std::min(cfg_.sa2_points, s1);
  const std::vector<int> c2 = farthest_point_sampling(level1, s2, 0);
  auto [m2, r2] = abstraction(level1, c2, cfg_.sa2_radius, cfg_.sa2_k, &f1);
  Var f2 = ad::group_max(
      ad::gelu(point_sa2_l2_(ctx, ad::gelu(point_sa2_l1_(ctx, m2)))), r2);

  Var global = point_global_(ctx, ad::group_max(f2, {{0, s2}}));

  Points centers2(s2, 3);
  for (int j = 0; j < s2; ++j) centers2.row(j) = level1.points.row(c2[static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd w = interpolation_matrix(
      centers2, sorted.points, std::vector<bool>(static_cast<std::size_t>(n), true));
  Var local_sorted = ad::gelu(point_local_(ctx, ad::const_matmul(w, f2)));

  std::vector<int> inverse(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) inverse[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = j;
  return {global, ad::gather_rows(local_sorted, inverse)};
}

std::pair<TokenVar, TokenVar> GmtModel::encode_fixtures(Ctx& ctx,
                                                        const FixtureSet& fixtures) const {
  const int k = fixtures.size();
  BoolArray mask = BoolArray::Constant(k, true);
  if (k == 0) {
    Var empty = ctx.tape.constant(ad::Mat::Zero(0, cfg_.d_modal));
    return {TokenVar{empty, mask}, TokenVar{empty, mask}};
  }

  ad::Mat boxes(k, 12);
  ad::Mat labels(k, embedder_->dimension());
  for (int i = 0; i < k; ++i) {
    const Fixture& f = fixtures.entries[static_cast<std::size_t>(i)];
    if (f.label.empty()) throw EmptyDescription("encode_fixtures: empty fixture label");
    boxes.row(i) = f.box.coeffs().transpose();
    labels.row(i) = embedder_->embed(f.label).transpose();
  }
  Var box_tok = box_embed_(ctx, ctx.tape.constant(boxes));
  Var f_b = box_attn_(ctx, box_tok, box_tok);
  Var f_f = text_proj_(ctx, ctx.tape.constant(labels));
  return {TokenVar{f_b, mask}, TokenVar{f_f, mask}};
}

Var GmtModel::embed_description(Ctx& ctx, const std::string& text) const {
  if (text.empty()) throw EmptyDescription("embed_description: empty string");
  return text_proj_(ctx, ctx.tape.constant(embedder_->embed(text).transpose()));
}

Var GmtModel::encode_goal(Ctx& ctx, Var goal9) const {
  return goal_proj_(ctx, goal_embed_(ctx, goal9));
}

Eigen::MatrixXd GmtModel::interpolation_matrix(const Points& cloud_points,
                                               const Points& queries,
                                               const std::vector<bool>& query_valid) const {
  const Eigen::Index n = cloud_points.rows();
  const int k = std::min<int>(cfg_.interp_k, static_cast<int>(n));
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(queries.rows(), n);
  std::vector<std::pair<double, int>> d2(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    if (!query_valid[static_cast<std::size_t>(q)]) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = {(cloud_points.row(i) - queries.row(q)).squaredNorm(),
                                         static_cast<int>(i)};
    }
    std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
    if (d2[0].first < 1e-16) {
      w(q, d2[0].second) = 1.0;  // snap to the exact feature at the data point
      continue;
    }
    double wsum = 0.0;
    for (int j = 0; j < k; ++j) wsum += 1.0 / d2[static_cast<std::size_t>(j)].first;
    for (int j = 0; j < k; ++j) {
      w(q, d2[static_cast<std::size_t>(j)].second) =
          (1.0 / d2[static_cast<std::size_t>(j)].first) / wsum;
    }
  }
  return w;
}

Var cross_attend(Ctx& ctx, Var z, Var tokens, const nn::MultiHeadAttention& attn,
                 const Eigen::RowVectorXd& mask_bias, nn::ForwardTrace* trace) {
  return ad::add(z, attn(ctx, z, tokens, &mask_bias, trace));
}

Var latent_block(Ctx& ctx, Var z, const nn::LayerNorm& ln_self,
                 const nn::MultiHeadAttention& self_attn, const nn::LayerNorm& ln_ffn,
                 const nn::FeedForward& ffn, nn::ForwardTrace* trace) {
  Var zn = ln_self(ctx, z);
  z = ad::add(z, self_attn(ctx, zn, zn, nullptr, trace));
  return ad::add(z, ffn(ctx, ln_ffn(ctx, z)));
}

Var GmtModel::run_stack(Ctx& ctx, Var z0, const std::vector<CrossLayer>& stack,
                        Var tokens, const Eigen::RowVectorXd& bias,
                        nn::ForwardTrace* trace) const {
  Var z = z0;
  for (const CrossLayer& l : stack) {
    Var kv = l.ln_kv(ctx, tokens);
    z = ad::add(z, l.cross(ctx, l.ln_q(ctx, z), kv, &bias, trace));
    z = latent_block(ctx, z, l.ln_self, l.self, l.ln_ffn, l.ffn, trace);
  }
  return z;
}

TokenVar GmtModel::fuse_traj_spatial(Ctx& ctx, const TokenVar& traj_tokens,
                                     const TokenVar& point_tokens,
                                     nn::ForwardTrace* trace) const {
  if (traj_tokens.tokens.rows() != point_tokens.tokens.rows() ||
      (traj_tokens.mask != point_tokens.mask).any()) {
    throw LengthMismatch("fuse_traj_spatial: token length or mask mismatch");
  }
  Var cat = ad::concat_cols({traj_tokens.tokens, point_tokens.tokens});
  const Eigen::RowVectorXd bias = nn::mask_to_bias(traj_tokens.mask);
  Var z = run_stack(ctx, ctx.param(tp_z0_), tp_stack_, cat, bias, trace);
  Eigen::VectorXd m(traj_tokens.mask.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = traj_tokens.mask(i) ? 1.0 : 0.0;
  return {ad::scale_rows(z, m), traj_tokens.mask};
}

TokenVar GmtModel::assemble_context(Ctx& ctx, const TokenVar& f_tp, const TokenVar& f_b,
                                    const TokenVar& f_f, Var f_d, bool d_valid, Var f_o,
                                    bool o_valid, Var f_g) const {
  struct Segment {
    Var tokens;
    BoolArray mask;
  };
  auto singleton = [](Var v, bool valid) {
    return Segment{v, BoolArray::Constant(1, valid)};
  };
  std::vector<Segment> segments = {
      {f_tp.tokens, f_tp.mask}, {f_b.tokens, f_b.mask},   {f_f.tokens, f_f.mask},
      singleton(f_d, d_valid),  singleton(f_o, o_valid), singleton(f_g, true)};

  std::vector<Var> parts;
  Eigen::Index total = 0;
  for (auto& s : segments) total += s.tokens.rows();
  BoolArray mask(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Segment& s = segments[i];
    const Eigen::Index rows = s.tokens.rows();
    if (rows == 0) continue;
    Var tok = ad::add_rowvec(
        s.tokens, ad::slice_rows(ctx.param(type_emb_), static_cast<int>(i), 1));
    Eigen::VectorXd m(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r) = s.mask(r) ? 1.0 : 0.0;
      mask(at + r) = s.mask(r);
    }
    parts.push_back(ad::scale_rows(tok, m));
    at += rows;
  }
  if (!mask.any()) throw AllTokensMasked("assemble_context: no valid tokens");
  return {ad::concat_rows(parts), mask};
}

Var GmtModel::forward(Ctx& ctx, const TrajectorySample& sample,
                      const AblationFlags& flags, nn::ForwardTrace* trace) const {
  const Trajectory& traj = sample.trajectory;
  if (traj.length() != cfg_.T || traj.mask.size() != cfg_.T) {
    throw ConfigMismatch("forward: trajectory length differs from configured T");
  }
  const HistorySplit split = history_split(traj, cfg_.input_ratio);
  if (split.history.empty()) throw EmptyHistory("forward: no valid history frames");
  const int h_max = cfg_.history_len();
  const int h = static_cast<int>(split.history.size());

  BoolArray hist_mask = BoolArray::Constant(h_max, false);
  for (int j = 0; j < h; ++j) hist_mask(j) = true;
  if (flags.first_frame) {
    hist_mask.setConstant(false);
    hist_mask(0) = true;
  }

  ad::Mat hist9 = ad::Mat::Zero(h_max, 9);
  for (int j = 0; j < h; ++j) hist9.row(j) = traj.poses.row(split.history[static_cast<std::size_t>(j)]);
  TokenVar f_t = encode_trajectory(ctx, ctx.tape.constant(hist9), hist_mask);

  TokenVar f_p;
  f_p.mask = hist_mask;
  Var f_o;
  bool o_valid = false;
  if (flags.no_pointcloud) {
    f_p.tokens = ctx.tape.constant(ad::Mat::Zero(h_max, cfg_.d_point_local));
    f_o = ctx.tape.constant(ad::Mat::Zero(1, cfg_.d_modal));
  } else {
    PointEncoding pe = encode_points(ctx, sample.scene.cloud);
    Points queries = Points::Zero(h_max, 3);
    std::vector<bool> valid(static_cast<std::size_t>(h_max), false);
    for (int j = 0; j < h_max; ++j) {
      if (!hist_mask(j)) continue;
      queries.row(j) = traj.poses.row(split.history[static_cast<std::size_t>(j)]).head<3>();
      valid[static_cast<std::size_t>(j)] = true;
    }
    const Eigen::MatrixXd w =
        interpolation_matrix(sample.scene.cloud.points, queries, valid);
    f_p.tokens = ad::const_matmul(w, pe.per_point);
    f_o = pe.global;
    o_valid = true;
  }

  TokenVar f_tp = fuse_traj_spatial(ctx, f_t, f_p, trace);

  const FixtureSet fixtures =
      nearest_fixtures(sample.scene.fixtures, traj, cfg_.fixture_k);
  auto [f_b, f_f] = encode_fixtures(ctx, fixtures);
  if (flags.no_semantic) f_f.mask.setConstant(false);

  const bool d_valid = !flags.no_semantic;
  Var f_d = d_valid ? embed_description(ctx, sample.description)
                    : ctx.tape.constant(ad::Mat::Zero(1, cfg_.d_modal));

  Var f_g = flags.no_goal
                ? ctx.param(null_goal_)
                : proj_g_(ctx, encode_goal(ctx, ctx.tape.constant(
                                                    sample.goal.coeffs().transpose())));

  TokenVar f_b_p{proj_b_(ctx, f_b.tokens), f_b.mask};
  TokenVar f_f_p{proj_f_(ctx, f_f.tokens), f_f.mask};
  TokenVar context =
      assemble_context(ctx, f_tp, f_b_p, f_f_p, proj_d_(ctx, f_d), d_valid,
                       proj_o_(ctx, f_o), o_valid, f_g);

  const Eigen::RowVectorXd bias = nn::mask_to_bias(context.mask);
  Var z = run_stack(ctx, ctx.param(main_z0_), main_stack_, context.tokens, bias, trace);
  return head_(ctx, final_ln_(ctx, z));
}

Eigen::MatrixXd GmtModel::predict(const TrajectorySample& sample,
                                  const AblationFlags& flags) const {
  ad::Tape tape;
  // Forward only; parameter gradients are never harvested here.
  Ctx ctx(tape, const_cast<nn::ParamStore&>(params_));
  return forward(ctx, sample, flags).value();
}

}  // namespace gmt
