#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "minotaur/ad.hpp"
#include "minotaur/data.hpp"
#include "minotaur/divergence.hpp"
#include "minotaur/rng.hpp"

namespace minotaur {

struct ModelConfig {
  int source_vocab_size = 0;
  int target_vocab_size = 0;
  int d = 64;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int attention_heads = 4;
  int ffn_hidden = 0;  // 0 = 4 * d
  int max_source_len = 128;
  int max_target_len = 64;
  double dropout = 0.1;
  bool deterministic_bottleneck = false;
  bool reparam_printed_scaling = false;  // z = mu + sigma^2 * eps compatibility mode

  int ffn() const { return ffn_hidden > 0 ? ffn_hidden : 4 * d; }
  int head_dim() const { return d / attention_heads; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Trainable state: named parameter matrices. Biases and layer-norm terms are
/// stored as 1 x d rows.
struct ModelParameters {
  std::map<std::string, Eigen::MatrixXd> arrays;

  static ModelParameters init(const ModelConfig& cfg, Rng& rng);
  const Eigen::MatrixXd& at(const std::string& name) const;
  bool all_finite() const;
};

/// Sinusoidal position table, rows 0..len-1.
Eigen::MatrixXd sinusoidal_positions(int len, int d);

/// Parameters bound into a graph, as leaves (trainable) or constants.
struct ParamGraph {
  std::map<std::string, ad::Var> vars;

  static ParamGraph bind(const ModelParameters& params, bool trainable);
  const ad::Var& at(const std::string& name) const;
};

/// Graph outputs of encoding one token sequence.
struct EncoderGraph {
  ad::Var hidden;  // T x d final encoder states (the posterior means)
  ad::Var means;   // alias of hidden
  ad::Var var;     // 1 x d shared variance, softplus-floored
};

/// mask (optional) marks valid positions with 1; masked positions are ignored
/// by attention keys and by the variance pooler.
EncoderGraph encode_graph(const ParamGraph& pg, const std::vector<int>& tokens,
                          const ModelConfig& cfg,
                          const std::vector<int>* mask = nullptr,
                          Rng* dropout_rng = nullptr);

/// Teacher-forced decoder cross-entropy over gold (BOS-shifted, EOS-closed).
ad::Var decode_ce_graph(const ParamGraph& pg, const ad::Var& memory,
                        const std::vector<int>& gold, const ModelConfig& cfg,
                        const std::vector<int>* src_mask = nullptr,
                        Rng* dropout_rng = nullptr, ad::Var* logits_out = nullptr);

// ---- plain-value API --------------------------------------------------------

GaussianSequence encode(const ModelParameters& params, const std::vector<int>& tokens,
                        const ModelConfig& cfg, const std::vector<int>* mask = nullptr);

/// Raw final hidden states for the non-latent ablation; requires
/// cfg.deterministic_bottleneck.
Eigen::MatrixXd encode_deterministic(const ModelParameters& params,
                                     const std::vector<int>& tokens,
                                     const ModelConfig& cfg,
                                     const std::vector<int>* mask = nullptr);

/// Attention pooling of hidden rows into the shared variance (softplus + floor).
Eigen::VectorXd pool_variance(const ModelParameters& params,
                              const Eigen::MatrixXd& hidden,
                              const ModelConfig& cfg,
                              const std::vector<int>* mask = nullptr);

/// z_i = mu_i + sigma o eps_i. printed_scaling multiplies eps by sigma^2
/// instead of sigma.
Eigen::MatrixXd reparameterize(const GaussianSequence& g, Rng& rng,
                               bool printed_scaling = false);

/// Returns (per-position logits, mean token cross-entropy).
std::pair<Eigen::MatrixXd, double> decode_teacher_forced(
    const ModelParameters& params, const Eigen::MatrixXd& z,
    const std::vector<int>& gold, const ModelConfig& cfg,
    const std::vector<int>* src_mask = nullptr);

/// Length-normalized beam search over the closed target vocabulary.
/// beam_width = 1 is exactly greedy decoding.
std::vector<int> beam_decode(const ModelParameters& params, const Eigen::MatrixXd& z,
                             int beam_width, int max_len, const ModelConfig& cfg,
                             const std::vector<int>* src_mask = nullptr);

struct EncodedExample {
  GaussianSequence posterior;
  std::vector<int> mask;
  Eigen::MatrixXd z;
};

/// Inference-mode encoding of a batch; sample=false uses z = mu.
std::vector<EncodedExample> encode_batch(const ModelParameters& params,
                                         const std::vector<std::vector<int>>& batch,
                                         const ModelConfig& cfg, Rng& rng, bool sample);

// ---- checkpoints ------------------------------------------------------------

inline constexpr const char* kCheckpointHeader = "minotaur-ckpt-v1";

struct Checkpoint {
  ModelParameters params;
  ModelConfig config;
  Vocab source_vocab;
  Vocab target_vocab;
};

/// Single-file archive: header line, JSON metadata line, then raw row-major
/// little-endian doubles. Written atomically (temp file + rename).
void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const ModelConfig& cfg, const Vocab& source_vocab,
                     const Vocab& target_vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace minotaur
