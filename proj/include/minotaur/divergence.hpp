#pragma once

#include <vector>

#include <Eigen/Dense>

#include "minotaur/ad.hpp"
#include "minotaur/rng.hpp"

namespace minotaur {

/// Gaussian with diagonal covariance, stored as elementwise variances.
struct DiagonalGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

/// Per-token posterior of one encoded sequence: T mean vectors sharing a
/// single variance vector. Row i with the shared variance forms the
/// DiagonalGaussian of token i.
struct GaussianSequence {
  Eigen::MatrixXd means;     // T x d
  Eigen::VectorXd variance;  // d

  int length() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
  DiagonalGaussian token(int i) const { return {means.row(i).transpose(), variance}; }
  void validate() const;
};

/// Inverse-multiquadratic kernel configuration: k(p,q) = sum_s sC/(sC+|p-q|^2).
struct KernelConfig {
  std::vector<double> scales{0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  double base = 2.0;  // C

  /// Canonical C = 2 * d * prior_variance for latent dimension d.
  static KernelConfig for_dim(int d, double prior_variance = 1.0);
  void validate() const;
};

/// base <= 0 acts as "derive C from the dimension in play"; this resolves it.
KernelConfig resolved_kernel(const KernelConfig& cfg, int d);

enum class IndividualMetric { W2, KL, None };
enum class AggregateMetric { MMD, None };

/// Weights and metric selection for the two-level alignment divergence.
struct AlignmentConfig {
  IndividualMetric individual_metric = IndividualMetric::W2;
  AggregateMetric aggregate_metric = AggregateMetric::MMD;
  double alpha_p = 0.01;      // aggregate weight
  double beta_p = 0.5;        // individual weight
  double alpha_prior = 1.0;   // prior-regularizer weight
  bool kl_printed_form = false;
  KernelConfig kernel = auto_kernel();

  /// Default kernel with base 0: C resolves to 2 * d at the point of use.
  static KernelConfig auto_kernel() {
    KernelConfig k;
    k.base = 0.0;
    return k;
  }
};

// Variances below this floor are clamped before entering any divergence.
inline constexpr double kVarianceFloor = 1e-6;

// ---- scalar API -------------------------------------------------------------

double imq_kernel(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                  const KernelConfig& cfg);

/// Three-term U-statistic MMD estimator. Unbiased, so it may come out negative.
double mmd_unbiased(const std::vector<Eigen::VectorXd>& samples_p,
                    const std::vector<Eigen::VectorXd>& samples_q,
                    const KernelConfig& cfg);

/// Squared L2-Wasserstein distance between diagonal Gaussians:
/// |mu_p - mu_q|^2 + sum_i (sigma_p,i - sigma_q,i)^2.
double w2_diag(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// KL(p || q) between diagonal Gaussians in the standard closed form.
/// printed_form scales the mean term by sigma_q^2 instead of dividing by it.
double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q,
               bool printed_form = false);

/// Mean of the token-pair divergence over all (i, j) pairs of two sequences.
/// KL is taken in the direction kl(a_i || b_j).
double individual_divergence(const GaussianSequence& a, const GaussianSequence& b,
                             IndividualMetric metric, bool kl_printed_form = false);

/// MMD between two pools of token-level latent samples.
double aggregate_divergence(const std::vector<Eigen::VectorXd>& tokens_a,
                            const std::vector<Eigen::VectorXd>& tokens_b,
                            const KernelConfig& cfg);

/// alpha_P * D_Z(pooled tokens) + beta_P * D_{Z|X}(tgt || en); a metric set
/// to None contributes zero.
double minotaur_divergence(const GaussianSequence& en, const GaussianSequence& tgt,
                           const std::vector<Eigen::VectorXd>& en_batch_tokens,
                           const std::vector<Eigen::VectorXd>& tgt_batch_tokens,
                           const AlignmentConfig& cfg);

/// MMD between latent samples and n_prior fresh draws from the unit Gaussian.
double prior_regularizer(const std::vector<Eigen::VectorXd>& z_samples, int n_prior,
                         const KernelConfig& cfg, Rng& rng);

// ---- graph API (training path; identical math, gradients attached) ---------

/// p, q are 1 x d row vectors.
ad::Var imq_kernel(const ad::Var& p, const ad::Var& q, const KernelConfig& cfg);

/// Rows of P and Q are samples.
ad::Var mmd_unbiased(const ad::Var& P, const ad::Var& Q, const KernelConfig& cfg);

/// Means are 1 x d, variances 1 x d.
ad::Var w2_diag(const ad::Var& mean_p, const ad::Var& var_p,
                const ad::Var& mean_q, const ad::Var& var_q);
ad::Var kl_diag(const ad::Var& mean_p, const ad::Var& var_p,
                const ad::Var& mean_q, const ad::Var& var_q,
                bool printed_form = false);

/// means_* are T x d; var_* are 1 x d shared across the rows.
ad::Var individual_divergence(const ad::Var& means_a, const ad::Var& var_a,
                              const ad::Var& means_b, const ad::Var& var_b,
                              IndividualMetric metric, bool kl_printed_form = false);

/// Z rows are latent samples; draws n_prior unit-Gaussian rows from rng.
ad::Var prior_regularizer(const ad::Var& Z, int n_prior, const KernelConfig& cfg,
                          Rng& rng);

}  // namespace minotaur
