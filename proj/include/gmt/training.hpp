#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gmt/metrics.hpp"
#include "gmt/model.hpp"

namespace gmt {

struct LossWeights {
  double trans = 1.0;
  double ori = 1.0;
  double rec = 1.0;
  double dest = 1.0;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double lr_decay_per_epoch = 0.99;
  int epochs = 300;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double input_ratio = 0.3;
  LossWeights weights;
  AblationFlags ablation;
  double grad_clip = 1.0;
  int patience = 20;  // early stop on validation ADE

  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
};

/// History/future partition over valid frames: H = ceil(ratio * T_valid)
/// frames of history, the rest future. Throws TooShort below 2 valid frames.
std::pair<std::vector<int>, std::vector<int>> split_history_future(
    const Trajectory& trajectory, double input_ratio);

// Value-level loss terms (mean per valid frame, L1).
double loss_translation(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                        const BoolArray& future_mask);
double loss_orientation(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                        const BoolArray& future_mask);
double loss_reconstruction(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                           const BoolArray& history_mask);
double loss_destination(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                        int last_valid_index);
double loss_total(double trans, double ori, double rec, double dest,
                  const LossWeights& weights);

/// Differentiable loss assembly over a predicted T x 9 sequence.
struct LossVars {
  ad::Var trans, ori, rec, dest, total;
};
LossVars build_losses(nn::Ctx& ctx, ad::Var pred, const Trajectory& gt,
                      double input_ratio, const LossWeights& weights);

/// Seeded shuffle then 90/5/5 split by count (floor for val, remainder to
/// test). Throws TooFewSamples below 20.
struct DatasetSplit {
  std::vector<int> train, val, test;
};
DatasetSplit split_dataset(int n_samples, std::uint64_t seed);

/// Decoupled-weight-decay adaptive-moment optimizer state, one slot per
/// parameter in store order.
struct AdamWState {
  std::vector<ad::Mat> m, v;
  long step = 0;

  static AdamWState init(const nn::ParamStore& params);
};

void adamw_step(nn::ParamStore& params, AdamWState& state, double lr,
                double weight_decay);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
void clip_gradients(nn::ParamStore& params, double max_norm);

struct EpochLog {
  int epoch = 0;
  std::string split;
  double l_trans = 0.0, l_ori = 0.0, l_rec = 0.0, l_dest = 0.0, total = 0.0;
  double ade_val = 0.0;
  std::string to_json_line() const;
};

struct FitResult {
  std::vector<EpochLog> log;
  double best_monitor = 0.0;  // validation ADE (or train total when no val)
  int best_epoch = -1;
  std::vector<ad::Mat> best_params;
  int epochs_run = 0;
};

/// Full training loop: per-epoch exponential LR decay, gradient clipping,
/// early stopping on validation ADE, best-state snapshotting. Deterministic
/// given the config seed. Throws NonFiniteLoss naming the offending batch.
FitResult fit(GmtModel& model, const std::vector<TrajectorySample>& train,
              const std::vector<TrajectorySample>& val, const TrainConfig& config,
              AdamWState& adam, std::ostream* log_stream = nullptr);

/// Per-sample forward + metric aggregation at the configured ablation.
MetricReport evaluate(const GmtModel& model, const std::vector<TrajectorySample>& samples,
                      const AblationFlags& flags,
                      std::vector<Eigen::MatrixXd>* predictions = nullptr);

}  // namespace gmt
