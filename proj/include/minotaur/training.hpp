#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minotaur/data.hpp"
#include "minotaur/divergence.hpp"
#include "minotaur/model.hpp"
#include "minotaur/rng.hpp"

namespace minotaur {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 10;
  int episodic_period = 20;  // k
  int max_steps = 0;         // 0 = bounded by epochs only
  AlignmentConfig alignment;
  bool parallel_alignment = true;
  uint64_t seed = 1;
  int early_stopping_patience = 2;
  double grad_clip_norm = 1.0;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  ModelConfig model;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// True when some alignment term carries nonzero weight, i.e. the episodic
/// loop actually schedules alignment steps.
bool alignment_active(const TrainConfig& cfg);

/// Loss components of one optimizer step. Divergence and CE fields hold their
/// weighted contributions, so total equals their sum.
struct StepLog {
  int step = 0;
  bool is_alignment_step = false;
  double cross_entropy_en = 0;
  double cross_entropy_tgt = 0;
  double prior_reg = 0;
  double d_individual = 0;
  double d_aggregate = 0;
  double total = 0;

  nlohmann::json to_json() const;
};

/// Per-language task loss of Eq-style training: mean teacher-forced CE over
/// the batch plus the weighted prior regularizer over pooled token latents.
std::pair<double, StepLog> task_loss(const ModelParameters& params,
                                     const std::vector<Example>& batch,
                                     const Vocab& src, const Vocab& tgt,
                                     const ModelConfig& mcfg, const AlignmentConfig& acfg,
                                     Rng& rng);

/// Episodic alignment step over a quadruple batch of (x_EN, x_l, y_EN, y_l):
/// both task losses plus the two-level alignment divergence.
std::pair<double, StepLog> minotaur_step(const ModelParameters& params,
                                         const std::vector<std::pair<Example, Example>>& pairs,
                                         const Vocab& src, const Vocab& tgt,
                                         const TrainConfig& cfg, Rng& rng);

struct TrainResult {
  ModelParameters params;  // best-validation snapshot
  std::vector<StepLog> steps;
  std::vector<double> validation_curve;
  int best_epoch = -1;
  double best_validation = 0;
  int total_steps = 0;
};

using StepCallback = std::function<void(const StepLog&)>;
using BestCallback =
    std::function<void(const ModelParameters&, int epoch, double val_loss)>;

/// The episodic training loop: every k-th step is an alignment step over a
/// parallel quadruple batch, all others are mixed-language task steps. Early
/// stops after `patience` validations without improvement. Deterministic
/// given cfg.seed.
TrainResult train(const ModelParameters& init, const Corpus& train_corpus,
                  const Corpus& valid_corpus, const Vocab& src, const Vocab& tgt,
                  const TrainConfig& cfg, const StepCallback& on_step = {},
                  const BestCallback& on_best = {});

/// Mean teacher-forced cross-entropy with z = mu (no sampling, no dropout).
double validation_loss(const ModelParameters& params, const Corpus& corpus,
                       const Vocab& src, const Vocab& tgt, const ModelConfig& cfg);

/// Non-latent ablation distances over raw encoder states: mean pairwise
/// squared L2, and discrete KL between softmax-normalized rows.
double deterministic_l2_pairs(const Eigen::MatrixXd& tgt, const Eigen::MatrixXd& en);
double deterministic_statistical_kl_pairs(const Eigen::MatrixXd& tgt,
                                          const Eigen::MatrixXd& en);

struct SignTestResult {
  double p_value = 1.0;
  bool all_tied = false;
  int n_discordant = 0;
};

/// Exact two-tailed binomial sign test over discordant pairs (ties dropped).
SignTestResult sign_test(const std::vector<bool>& a, const std::vector<bool>& b);

}  // namespace minotaur
