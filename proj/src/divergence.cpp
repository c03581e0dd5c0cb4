#include "minotaur/divergence.hpp"

#include <cmath>
#include <stdexcept>

namespace minotaur {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

ad::Var rows_as_matrix(const std::vector<Eigen::VectorXd>& samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d = samples.front().size();
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (samples[static_cast<size_t>(i)].size() != d)
      throw std::invalid_argument("sample dimension mismatch");
    m.row(i) = samples[static_cast<size_t>(i)].transpose();
  }
  return ad::constant(std::move(m));
}

ad::Var as_row(const Eigen::VectorXd& v) { return ad::constant(v.transpose()); }

ad::Var floored(const ad::Var& variance) { return ad::clamp_min(variance, kVarianceFloor); }

}  // namespace

void DiagonalGaussian::validate() const {
  require(mean.size() >= 1, "DiagonalGaussian: empty mean");
  require(mean.size() == variance.size(), "DiagonalGaussian: mean/variance length mismatch");
  require((variance.array() > 0).all(), "DiagonalGaussian: nonpositive variance");
  check_finite(mean, "DiagonalGaussian mean");
  check_finite(variance, "DiagonalGaussian variance");
}

void GaussianSequence::validate() const {
  require(means.rows() >= 1, "GaussianSequence: empty sequence");
  require(means.cols() == variance.size(), "GaussianSequence: means/variance width mismatch");
  require((variance.array() > 0).all(), "GaussianSequence: nonpositive variance");
}

KernelConfig KernelConfig::for_dim(int d, double prior_variance) {
  require(d >= 1, "KernelConfig: dimension must be positive");
  KernelConfig cfg;
  cfg.base = 2.0 * d * prior_variance;
  return cfg;
}

void KernelConfig::validate() const {
  require(!scales.empty(), "KernelConfig: empty scale list");
  for (double s : scales) require(s > 0, "KernelConfig: nonpositive scale");
  require(base > 0, "KernelConfig: nonpositive base");
}

KernelConfig resolved_kernel(const KernelConfig& cfg, int d) {
  if (cfg.base > 0) return cfg;
  KernelConfig out = cfg;
  out.base = 2.0 * d;
  return out;
}

// ---- graph implementations --------------------------------------------------

ad::Var imq_kernel(const ad::Var& p, const ad::Var& q, const KernelConfig& cfg) {
  cfg.validate();
  if (p.rows() != 1 || q.rows() != 1 || p.cols() != q.cols())
    throw std::invalid_argument("imq_kernel: p, q must be 1 x d of equal length");
  ad::Var diff = ad::sub(p, q);
  ad::Var sq = ad::sum_all(ad::cmul(diff, diff));
  return ad::imq_from_sqdist(sq, cfg.scales, cfg.base);
}

ad::Var mmd_unbiased(const ad::Var& P, const ad::Var& Q, const KernelConfig& cfg) {
  cfg.validate();
  const auto np = static_cast<double>(P.rows());
  const auto nq = static_cast<double>(Q.rows());
  if (np < 2 || nq < 2)
    throw std::invalid_argument("mmd_unbiased: need at least 2 samples per side");
  if (P.cols() != Q.cols()) throw std::invalid_argument("mmd_unbiased: dimension mismatch");

  ad::Var kpp = ad::imq_from_sqdist(ad::pairwise_sqdist(P, P), cfg.scales, cfg.base);
  ad::Var kqq = ad::imq_from_sqdist(ad::pairwise_sqdist(Q, Q), cfg.scales, cfg.base);
  ad::Var kpq = ad::imq_from_sqdist(ad::pairwise_sqdist(P, Q), cfg.scales, cfg.base);

  // Diagonals are k(x,x) = |S| with zero derivative, so the off-diagonal sums
  // are plain sums minus a constant.
  const double diag = static_cast<double>(cfg.scales.size());
  ad::Var within_p = ad::add_scalar(ad::sum_all(kpp), -diag * np);
  ad::Var within_q = ad::add_scalar(ad::sum_all(kqq), -diag * nq);
  return ad::add(ad::add(ad::scale(within_p, 1.0 / (np * (np - 1.0))),
                         ad::scale(within_q, 1.0 / (nq * (nq - 1.0)))),
                 ad::scale(ad::sum_all(kpq), -2.0 / (np * nq)));
}

ad::Var w2_diag(const ad::Var& mean_p, const ad::Var& var_p,
                const ad::Var& mean_q, const ad::Var& var_q) {
  ad::Var dmean = ad::sub(mean_p, mean_q);
  ad::Var dstd = ad::sub(ad::sqrt(floored(var_p)), ad::sqrt(floored(var_q)));
  return ad::add(ad::sum_all(ad::cmul(dmean, dmean)), ad::sum_all(ad::cmul(dstd, dstd)));
}

ad::Var kl_diag(const ad::Var& mean_p, const ad::Var& var_p,
                const ad::Var& mean_q, const ad::Var& var_q, bool printed_form) {
  const double d = static_cast<double>(mean_p.cols());
  ad::Var vp = floored(var_p);
  ad::Var vq = floored(var_q);
  ad::Var log_ratio = ad::sum_all(ad::sub(ad::log(vq), ad::log(vp)));
  ad::Var trace = ad::sum_all(ad::cdiv(vp, vq));
  ad::Var dmean = ad::sub(mean_q, mean_p);
  ad::Var mean_term = printed_form
                          ? ad::sum_all(ad::cmul(ad::cmul(dmean, dmean), vq))
                          : ad::sum_all(ad::cdiv(ad::cmul(dmean, dmean), vq));
  return ad::scale(ad::add(ad::add(ad::add_scalar(log_ratio, -d), trace), mean_term), 0.5);
}

ad::Var individual_divergence(const ad::Var& means_a, const ad::Var& var_a,
                              const ad::Var& means_b, const ad::Var& var_b,
                              IndividualMetric metric, bool kl_printed_form) {
  if (means_a.cols() != means_b.cols())
    throw std::invalid_argument("individual_divergence: dimension mismatch");
  const double ta = static_cast<double>(means_a.rows());
  const double tb = static_cast<double>(means_b.rows());
  const double pairs = ta * tb;
  const double d = static_cast<double>(means_a.cols());
  ad::Var va = floored(var_a);
  ad::Var vb = floored(var_b);

  switch (metric) {
    case IndividualMetric::W2: {
      // The variance part is identical for every token pair (shared variances),
      // so only the mean distances need the pairwise matrix.
      ad::Var mean_part = ad::scale(ad::sum_all(ad::pairwise_sqdist(means_a, means_b)),
                                    1.0 / pairs);
      ad::Var dstd = ad::sub(ad::sqrt(va), ad::sqrt(vb));
      return ad::add(mean_part, ad::sum_all(ad::cmul(dstd, dstd)));
    }
    case IndividualMetric::KL: {
      // kl(a_i || b_j): variance terms are pair-independent; the mean term is a
      // pairwise squared distance in coordinates scaled by 1/sigma_b.
      ad::Var log_ratio = ad::sum_all(ad::sub(ad::log(vb), ad::log(va)));
      ad::Var trace = ad::sum_all(ad::cdiv(va, vb));
      ad::Var mean_term;
      if (kl_printed_form) {
        ad::Var w = ad::sqrt(vb);
        ad::Var sa = ad::cmul(means_a, ad::broadcast_rows(w, static_cast<int>(ta)));
        ad::Var sb = ad::cmul(means_b, ad::broadcast_rows(w, static_cast<int>(tb)));
        mean_term = ad::scale(ad::sum_all(ad::pairwise_sqdist(sb, sa)), 1.0 / pairs);
      } else {
        ad::Var w = ad::reciprocal(ad::sqrt(vb));
        ad::Var sa = ad::cmul(means_a, ad::broadcast_rows(w, static_cast<int>(ta)));
        ad::Var sb = ad::cmul(means_b, ad::broadcast_rows(w, static_cast<int>(tb)));
        mean_term = ad::scale(ad::sum_all(ad::pairwise_sqdist(sb, sa)), 1.0 / pairs);
      }
      return ad::scale(
          ad::add(ad::add(ad::add_scalar(log_ratio, -d), trace), mean_term), 0.5);
    }
    case IndividualMetric::None:
      return ad::constant(Eigen::MatrixXd::Zero(1, 1));
  }
  throw std::logic_error("individual_divergence: unknown metric");
}

ad::Var prior_regularizer(const ad::Var& Z, int n_prior, const KernelConfig& cfg,
                          Rng& rng) {
  if (Z.rows() < 2) throw std::invalid_argument("prior_regularizer: need >= 2 samples");
  if (n_prior < 2) throw std::invalid_argument("prior_regularizer: n_prior must be >= 2");
  ad::Var prior = ad::constant(rng.normal_matrix(n_prior, static_cast<int>(Z.cols())));
  return mmd_unbiased(Z, prior, cfg);
}

// ---- scalar wrappers --------------------------------------------------------

double imq_kernel(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                  const KernelConfig& cfg) {
  if (p.size() != q.size()) throw std::invalid_argument("imq_kernel: length mismatch");
  check_finite(p, "imq_kernel p");
  check_finite(q, "imq_kernel q");
  return imq_kernel(as_row(p), as_row(q), cfg).scalar();
}

double mmd_unbiased(const std::vector<Eigen::VectorXd>& samples_p,
                    const std::vector<Eigen::VectorXd>& samples_q,
                    const KernelConfig& cfg) {
  if (samples_p.size() < 2 || samples_q.size() < 2)
    throw std::invalid_argument("mmd_unbiased: need at least 2 samples per side");
  return mmd_unbiased(rows_as_matrix(samples_p), rows_as_matrix(samples_q), cfg).scalar();
}

double w2_diag(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  p.validate();
  q.validate();
  if (p.dim() != q.dim()) throw std::invalid_argument("w2_diag: dimension mismatch");
  return w2_diag(as_row(p.mean), as_row(p.variance), as_row(q.mean), as_row(q.variance))
      .scalar();
}

double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q, bool printed_form) {
  p.validate();
  q.validate();
  if (p.dim() != q.dim()) throw std::invalid_argument("kl_diag: dimension mismatch");
  return kl_diag(as_row(p.mean), as_row(p.variance), as_row(q.mean), as_row(q.variance),
                 printed_form)
      .scalar();
}

double individual_divergence(const GaussianSequence& a, const GaussianSequence& b,
                             IndividualMetric metric, bool kl_printed_form) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim())
    throw std::invalid_argument("individual_divergence: dimension mismatch");
  return individual_divergence(ad::constant(a.means), as_row(a.variance),
                               ad::constant(b.means), as_row(b.variance), metric,
                               kl_printed_form)
      .scalar();
}

double aggregate_divergence(const std::vector<Eigen::VectorXd>& tokens_a,
                            const std::vector<Eigen::VectorXd>& tokens_b,
                            const KernelConfig& cfg) {
  return mmd_unbiased(tokens_a, tokens_b, cfg);
}

double minotaur_divergence(const GaussianSequence& en, const GaussianSequence& tgt,
                           const std::vector<Eigen::VectorXd>& en_batch_tokens,
                           const std::vector<Eigen::VectorXd>& tgt_batch_tokens,
                           const AlignmentConfig& cfg) {
  double total = 0.0;
  if (cfg.aggregate_metric == AggregateMetric::MMD && cfg.alpha_p != 0.0)
    total += cfg.alpha_p * aggregate_divergence(en_batch_tokens, tgt_batch_tokens,
                                                resolved_kernel(cfg.kernel, en.dim()));
  if (cfg.individual_metric != IndividualMetric::None && cfg.beta_p != 0.0)
    total += cfg.beta_p *
             individual_divergence(tgt, en, cfg.individual_metric, cfg.kl_printed_form);
  return total;
}

double prior_regularizer(const std::vector<Eigen::VectorXd>& z_samples, int n_prior,
                         const KernelConfig& cfg, Rng& rng) {
  if (z_samples.size() < 2)
    throw std::invalid_argument("prior_regularizer: need >= 2 samples");
  return prior_regularizer(rows_as_matrix(z_samples), n_prior, cfg, rng).scalar();
}

}  // namespace minotaur
