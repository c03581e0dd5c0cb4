#include "minotaur/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minotaur {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<std::string> split_lf(const std::string& lf) {
  std::vector<std::string> out;
  std::string t;
  for (char c : lf) {
    if (c == ' ') {
      if (!t.empty()) out.push_back(t);
      t.clear();
    } else {
      t.push_back(c);
    }
  }
  if (!t.empty()) out.push_back(t);
  return out;
}

struct Prepared {
  const Example* ex = nullptr;
  std::vector<int> src_ids;
  std::vector<int> tgt_ids;
  bool is_en = false;
};

Prepared prepare_example(const Example& ex, const Vocab& src, const Vocab& tgt,
                         const ModelConfig& cfg) {
  Prepared p;
  p.ex = &ex;
  Sentinelized s = sentinelize(ex.tokens);
  p.src_ids.reserve(s.tokens.size());
  for (const auto& t : s.tokens) p.src_ids.push_back(src.id_of(t));
  for (const auto& t : split_lf(ex.lf)) p.tgt_ids.push_back(tgt.id_of(t));
  p.is_en = ex.lang == "en";
  require(static_cast<int>(p.src_ids.size()) <= cfg.max_source_len,
          "train: source longer than max_source_len: " + ex.id);
  require(static_cast<int>(p.tgt_ids.size()) + 1 <= cfg.max_target_len,
          "train: target longer than max_target_len: " + ex.id);
  return p;
}

std::vector<Prepared> prepare_corpus(const Corpus& corpus, const Vocab& src,
                                     const Vocab& tgt, const ModelConfig& cfg) {
  std::vector<Prepared> out;
  out.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples)
    out.push_back(prepare_example(ex, src, tgt, cfg));
  return out;
}

struct EncodedVar {
  ad::Var means, var, z;
};

EncodedVar encode_with_latent(const ParamGraph& pg, const Prepared& p,
                              const ModelConfig& cfg, Rng& reparam_rng,
                              Rng* dropout_rng) {
  EncodedVar out;
  EncoderGraph eg = encode_graph(pg, p.src_ids, cfg, nullptr, dropout_rng);
  out.means = eg.means;
  out.var = eg.var;
  if (cfg.deterministic_bottleneck) {
    out.z = eg.hidden;
    return out;
  }
  const int t = static_cast<int>(p.src_ids.size());
  ad::Var noise = ad::constant(reparam_rng.normal_matrix(t, cfg.d));
  ad::Var sigma = cfg.reparam_printed_scaling ? eg.var : ad::sqrt(eg.var);
  out.z = ad::add(eg.means, ad::cmul(ad::broadcast_rows(sigma, t), noise));
  return out;
}

ad::Var mean_of(const std::vector<ad::Var>& terms) {
  ad::Var acc = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return ad::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

// Mean over token pairs of the discrete KL between softmax-normalized rows;
// the non-latent stand-in for the parametric KL.
ad::Var statistical_kl_pairs(const ad::Var& tgt_raw, const ad::Var& en_raw) {
  const double ta = static_cast<double>(tgt_raw.rows());
  const double tb = static_cast<double>(en_raw.rows());
  ad::Var p = ad::row_softmax(tgt_raw);
  ad::Var q = ad::row_softmax(en_raw);
  ad::Var negent = ad::scale(ad::sum_all(ad::cmul(p, ad::log(p))), 1.0 / ta);
  ad::Var cross =
      ad::scale(ad::sum_all(ad::matmul(p, ad::transpose(ad::log(q)))), 1.0 / (ta * tb));
  return ad::sub(negent, cross);
}

// Mean pairwise squared euclidean distance between token rows.
ad::Var l2_pairs(const ad::Var& a, const ad::Var& b) {
  const double pairs = static_cast<double>(a.rows()) * static_cast<double>(b.rows());
  return ad::scale(ad::sum_all(ad::pairwise_sqdist(a, b)), 1.0 / pairs);
}

struct LossBuild {
  ad::Var loss;
  StepLog log;
};

LossBuild build_task_loss(const ParamGraph& pg, const std::vector<const Prepared*>& batch,
                          const ModelConfig& mcfg, const AlignmentConfig& acfg,
                          Rng& reparam_rng, Rng& prior_rng, Rng* dropout_rng) {
  require(!batch.empty(), "task_loss: empty batch");
  std::vector<ad::Var> ces;
  std::vector<ad::Var> zs;
  double ce_en = 0, ce_tgt = 0;
  const double b = static_cast<double>(batch.size());
  for (const Prepared* p : batch) {
    EncodedVar enc = encode_with_latent(pg, *p, mcfg, reparam_rng, dropout_rng);
    ad::Var ce = decode_ce_graph(pg, enc.z, p->tgt_ids, mcfg, nullptr, dropout_rng);
    ces.push_back(ce);
    zs.push_back(enc.z);
    (p->is_en ? ce_en : ce_tgt) += ce.scalar() / b;
  }
  LossBuild out;
  out.loss = mean_of(ces);
  out.log.cross_entropy_en = ce_en;
  out.log.cross_entropy_tgt = ce_tgt;

  if (!mcfg.deterministic_bottleneck && acfg.alpha_prior != 0.0) {
    ad::Var pooled = zs.size() == 1 ? zs[0] : ad::concat_rows(zs);
    KernelConfig kernel = resolved_kernel(acfg.kernel, mcfg.d);
    ad::Var prior =
        prior_regularizer(pooled, static_cast<int>(pooled.rows()), kernel, prior_rng);
    out.loss = ad::add(out.loss, ad::scale(prior, acfg.alpha_prior));
    out.log.prior_reg = acfg.alpha_prior * prior.scalar();
  }
  out.log.total = out.loss.scalar();
  return out;
}

LossBuild build_minotaur_step(const ParamGraph& pg,
                              const std::vector<std::pair<const Prepared*, const Prepared*>>& pairs,
                              const ModelConfig& mcfg, const AlignmentConfig& acfg,
                              Rng& reparam_rng, Rng& prior_rng, Rng* dropout_rng) {
  require(!pairs.empty(), "minotaur_step: empty batch");
  const double b = static_cast<double>(pairs.size());
  KernelConfig kernel = resolved_kernel(acfg.kernel, mcfg.d);

  std::vector<ad::Var> ces_en, ces_tgt, z_en, z_tgt, ind_terms;
  LossBuild out;
  for (const auto& [en, tgt] : pairs) {
    EncodedVar e = encode_with_latent(pg, *en, mcfg, reparam_rng, dropout_rng);
    EncodedVar g = encode_with_latent(pg, *tgt, mcfg, reparam_rng, dropout_rng);
    ces_en.push_back(decode_ce_graph(pg, e.z, en->tgt_ids, mcfg, nullptr, dropout_rng));
    ces_tgt.push_back(decode_ce_graph(pg, g.z, tgt->tgt_ids, mcfg, nullptr, dropout_rng));
    z_en.push_back(e.z);
    z_tgt.push_back(g.z);

    if (acfg.individual_metric != IndividualMetric::None && acfg.beta_p != 0.0) {
      if (mcfg.deterministic_bottleneck) {
        // Non-latent ablation: W2 degenerates to squared L2, KL to the
        // statistical KL over softmax-normalized states.
        ind_terms.push_back(acfg.individual_metric == IndividualMetric::W2
                                ? l2_pairs(g.means, e.means)
                                : statistical_kl_pairs(g.means, e.means));
      } else {
        ind_terms.push_back(individual_divergence(g.means, g.var, e.means, e.var,
                                                  acfg.individual_metric,
                                                  acfg.kl_printed_form));
      }
    }
  }

  ad::Var loss = ad::add(mean_of(ces_en), mean_of(ces_tgt));
  double ce_en_val = 0, ce_tgt_val = 0;
  for (const auto& c : ces_en) ce_en_val += c.scalar() / b;
  for (const auto& c : ces_tgt) ce_tgt_val += c.scalar() / b;
  out.log.cross_entropy_en = ce_en_val;
  out.log.cross_entropy_tgt = ce_tgt_val;

  if (!mcfg.deterministic_bottleneck && acfg.alpha_prior != 0.0) {
    ad::Var pooled_en = z_en.size() == 1 ? z_en[0] : ad::concat_rows(z_en);
    ad::Var pooled_tgt = z_tgt.size() == 1 ? z_tgt[0] : ad::concat_rows(z_tgt);
    ad::Var prior_en = prior_regularizer(pooled_en, static_cast<int>(pooled_en.rows()),
                                         kernel, prior_rng);
    ad::Var prior_tgt = prior_regularizer(pooled_tgt, static_cast<int>(pooled_tgt.rows()),
                                          kernel, prior_rng);
    ad::Var prior = ad::scale(ad::add(prior_en, prior_tgt), acfg.alpha_prior);
    loss = ad::add(loss, prior);
    out.log.prior_reg = prior.scalar();
  }

  if (!ind_terms.empty()) {
    ad::Var ind = ad::scale(mean_of(ind_terms), acfg.beta_p);
    loss = ad::add(loss, ind);
    out.log.d_individual = ind.scalar();
  }
  if (acfg.aggregate_metric == AggregateMetric::MMD && acfg.alpha_p != 0.0) {
    ad::Var pooled_en = z_en.size() == 1 ? z_en[0] : ad::concat_rows(z_en);
    ad::Var pooled_tgt = z_tgt.size() == 1 ? z_tgt[0] : ad::concat_rows(z_tgt);
    ad::Var agg = ad::scale(mmd_unbiased(pooled_en, pooled_tgt, kernel), acfg.alpha_p);
    loss = ad::add(loss, agg);
    out.log.d_aggregate = agg.scalar();
  }

  out.loss = loss;
  out.log.is_alignment_step = true;
  out.log.total = loss.scalar();
  return out;
}

struct AdamState {
  std::map<std::string, Eigen::MatrixXd> m, v;
  int t = 0;
};

void adam_update(ModelParameters& params, AdamState& state,
                 const std::map<std::string, Eigen::MatrixXd>& grads,
                 const TrainConfig& cfg) {
  double sq_norm = 0;
  for (const auto& [name, g] : grads) sq_norm += g.squaredNorm();
  double norm = std::sqrt(sq_norm);
  double clip =
      cfg.grad_clip_norm > 0 && norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;

  ++state.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, state.t);
  const double bias2 = 1.0 - std::pow(b2, state.t);
  for (const auto& [name, g0] : grads) {
    Eigen::MatrixXd g = clip * g0;
    auto& m = state.m.try_emplace(name, Eigen::MatrixXd::Zero(g.rows(), g.cols()))
                  .first->second;
    auto& v = state.v.try_emplace(name, Eigen::MatrixXd::Zero(g.rows(), g.cols()))
                  .first->second;
    m = b1 * m + (1 - b1) * g;
    v = (b2 * v.array() + (1 - b2) * g.array().square()).matrix();
    Eigen::ArrayXXd mhat = m.array() / bias1;
    Eigen::ArrayXXd vhat = v.array() / bias2;
    params.arrays.at(name).array() -=
        cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
  }
}

std::map<std::string, Eigen::MatrixXd> collect_grads(const ParamGraph& pg) {
  std::map<std::string, Eigen::MatrixXd> grads;
  for (const auto& [name, var] : pg.vars)
    if (var.node->grad.size() != 0) grads.emplace(name, var.node->grad);
  return grads;
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0, "TrainConfig: nonpositive learning rate");
  require(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
  require(max_epochs >= 1, "TrainConfig: max_epochs must be >= 1");
  require(episodic_period >= 1, "TrainConfig: episodic period k must be >= 1");
  require(early_stopping_patience >= 1, "TrainConfig: patience must be >= 1");
  require(alignment.alpha_p >= 0 && alignment.beta_p >= 0 && alignment.alpha_prior >= 0,
          "TrainConfig: alignment weights must be nonnegative");
}

bool alignment_active(const TrainConfig& cfg) {
  const auto& a = cfg.alignment;
  return (a.aggregate_metric == AggregateMetric::MMD && a.alpha_p != 0.0) ||
         (a.individual_metric != IndividualMetric::None && a.beta_p != 0.0);
}

nlohmann::json StepLog::to_json() const {
  return {{"step", step},
          {"is_alignment_step", is_alignment_step},
          {"cross_entropy_en", cross_entropy_en},
          {"cross_entropy_tgt", cross_entropy_tgt},
          {"prior_reg", prior_reg},
          {"d_individual", d_individual},
          {"d_aggregate", d_aggregate},
          {"total", total}};
}

namespace {

std::string metric_name(IndividualMetric m) {
  switch (m) {
    case IndividualMetric::W2: return "w2";
    case IndividualMetric::KL: return "kl";
    case IndividualMetric::None: return "none";
  }
  return "none";
}

IndividualMetric individual_from_name(const std::string& s) {
  if (s == "w2") return IndividualMetric::W2;
  if (s == "kl") return IndividualMetric::KL;
  if (s == "none") return IndividualMetric::None;
  throw std::invalid_argument("unknown individual metric: " + s);
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json a;
  a["individual"] = metric_name(alignment.individual_metric);
  a["aggregate"] = alignment.aggregate_metric == AggregateMetric::MMD ? "mmd" : "none";
  a["alpha_p"] = alignment.alpha_p;
  a["beta_p"] = alignment.beta_p;
  a["alpha_prior"] = alignment.alpha_prior;
  a["kl_printed_form"] = alignment.kl_printed_form;
  a["kernel_scales"] = alignment.kernel.scales;
  a["kernel_base"] = alignment.kernel.base;
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"episodic_period", episodic_period},
          {"max_steps", max_steps},
          {"alignment", a},
          {"parallel_alignment", parallel_alignment},
          {"seed", seed},
          {"early_stopping_patience", early_stopping_patience},
          {"grad_clip_norm", grad_clip_norm},
          {"model", model.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.episodic_period = j.value("episodic_period", c.episodic_period);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.parallel_alignment = j.value("parallel_alignment", c.parallel_alignment);
  c.seed = j.value("seed", c.seed);
  c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  if (j.contains("alignment")) {
    const auto& a = j["alignment"];
    c.alignment.individual_metric = individual_from_name(a.value("individual", "w2"));
    std::string agg = a.value("aggregate", "mmd");
    if (agg == "mmd")
      c.alignment.aggregate_metric = AggregateMetric::MMD;
    else if (agg == "none")
      c.alignment.aggregate_metric = AggregateMetric::None;
    else
      throw std::invalid_argument("unknown aggregate metric: " + agg);
    c.alignment.alpha_p = a.value("alpha_p", c.alignment.alpha_p);
    c.alignment.beta_p = a.value("beta_p", c.alignment.beta_p);
    c.alignment.alpha_prior = a.value("alpha_prior", c.alignment.alpha_prior);
    c.alignment.kl_printed_form = a.value("kl_printed_form", false);
    if (a.contains("kernel_scales"))
      c.alignment.kernel.scales = a["kernel_scales"].get<std::vector<double>>();
    c.alignment.kernel.base = a.value("kernel_base", 0.0);
  }
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
  return c;
}

std::pair<double, StepLog> task_loss(const ModelParameters& params,
                                     const std::vector<Example>& batch, const Vocab& src,
                                     const Vocab& tgt, const ModelConfig& mcfg,
                                     const AlignmentConfig& acfg, Rng& rng) {
  std::vector<Prepared> prepared;
  prepared.reserve(batch.size());
  for (const auto& ex : batch) prepared.push_back(prepare_example(ex, src, tgt, mcfg));
  std::vector<const Prepared*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);

  ParamGraph pg = ParamGraph::bind(params, false);
  Rng reparam = rng.fork(1), prior = rng.fork(2);
  LossBuild lb = build_task_loss(pg, ptrs, mcfg, acfg, reparam, prior, nullptr);
  return {lb.loss.scalar(), lb.log};
}

std::pair<double, StepLog> minotaur_step(const ModelParameters& params,
                                         const std::vector<std::pair<Example, Example>>& pairs,
                                         const Vocab& src, const Vocab& tgt,
                                         const TrainConfig& cfg, Rng& rng) {
  if (cfg.parallel_alignment) {
    for (const auto& [en, l] : pairs)
      require(en.parallel_id == l.parallel_id,
              "minotaur_step: unpaired batch under parallel alignment");
  }
  std::vector<Prepared> storage;
  storage.reserve(pairs.size() * 2);
  std::vector<std::pair<const Prepared*, const Prepared*>> ptrs;
  for (const auto& [en, l] : pairs) {
    storage.push_back(prepare_example(en, src, tgt, cfg.model));
    storage.push_back(prepare_example(l, src, tgt, cfg.model));
  }
  for (size_t i = 0; i < pairs.size(); ++i)
    ptrs.emplace_back(&storage[2 * i], &storage[2 * i + 1]);

  ParamGraph pg = ParamGraph::bind(params, false);
  Rng reparam = rng.fork(1), prior = rng.fork(2);
  LossBuild lb = build_minotaur_step(pg, ptrs, cfg.model, cfg.alignment, reparam, prior,
                                     nullptr);
  return {lb.loss.scalar(), lb.log};
}

double validation_loss(const ModelParameters& params, const Corpus& corpus,
                       const Vocab& src, const Vocab& tgt, const ModelConfig& cfg) {
  require(!corpus.examples.empty(), "validation_loss: empty corpus");
  std::vector<Prepared> prepared = prepare_corpus(corpus, src, tgt, cfg);
  ParamGraph pg = ParamGraph::bind(params, false);
  double total = 0;
  for (const auto& p : prepared) {
    EncoderGraph eg = encode_graph(pg, p.src_ids, cfg);
    total += decode_ce_graph(pg, eg.means, p.tgt_ids, cfg).scalar();
  }
  return total / static_cast<double>(prepared.size());
}

TrainResult train(const ModelParameters& init, const Corpus& train_corpus,
                  const Corpus& valid_corpus, const Vocab& src, const Vocab& tgt,
                  const TrainConfig& cfg, const StepCallback& on_step,
                  const BestCallback& on_best) {
  cfg.validate();
  cfg.model.validate();
  require(!train_corpus.examples.empty(), "train: empty training corpus");
  require(!valid_corpus.examples.empty(), "train: empty validation corpus");

  std::vector<Prepared> prepared = prepare_corpus(train_corpus, src, tgt, cfg.model);
  const bool align = alignment_active(cfg);

  // Parallel pool: target-language examples, each with an English partner when
  // parallel alignment is requested.
  std::map<std::string, size_t> en_by_group;
  std::vector<size_t> en_indices, tgt_indices;
  for (size_t i = 0; i < prepared.size(); ++i) {
    if (prepared[i].is_en) {
      en_by_group[prepared[i].ex->parallel_id] = i;
      en_indices.push_back(i);
    } else {
      tgt_indices.push_back(i);
    }
  }
  std::vector<std::pair<size_t, size_t>> parallel_pool;  // (en, tgt)
  if (align) {
    require(!tgt_indices.empty(),
            "train: alignment requested but no non-EN examples present");
    if (cfg.parallel_alignment) {
      for (size_t ti : tgt_indices) {
        auto it = en_by_group.find(prepared[ti].ex->parallel_id);
        if (it != en_by_group.end()) parallel_pool.emplace_back(it->second, ti);
      }
      require(!parallel_pool.empty(),
              "train: alignment requested with no parallel pairs available");
    } else {
      require(en_indices.size() >= 2, "train: non-parallel alignment needs EN examples");
    }
  }

  Rng master(cfg.seed);
  Rng shuffle_rng = master.fork(1);
  Rng reparam_rng = master.fork(2);
  Rng prior_rng = master.fork(3);
  Rng pair_rng = master.fork(4);
  Rng dropout_rng = master.fork(5);
  Rng* drop = cfg.model.dropout > 0 ? &dropout_rng : nullptr;

  ModelParameters params = init;
  AdamState adam;
  TrainResult result;
  result.params = init;
  result.best_validation = std::numeric_limits<double>::infinity();

  int step = 0, bad_validations = 0;
  bool halted = false;

  for (int epoch = 1; epoch <= cfg.max_epochs && !halted; ++epoch) {
    std::vector<size_t> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    size_t pos = 0;
    while (pos < order.size()) {
      ++step;
      ParamGraph pg = ParamGraph::bind(params, true);
      LossBuild lb;
      if (align && step % cfg.episodic_period == 0) {
        std::vector<std::pair<const Prepared*, const Prepared*>> quad;
        quad.reserve(static_cast<size_t>(cfg.batch_size));
        for (int i = 0; i < cfg.batch_size; ++i) {
          if (cfg.parallel_alignment) {
            const auto& [ei, ti] =
                parallel_pool[static_cast<size_t>(pair_rng.uniform_int(
                    static_cast<int>(parallel_pool.size())))];
            quad.emplace_back(&prepared[ei], &prepared[ti]);
          } else {
            size_t ti = tgt_indices[static_cast<size_t>(
                pair_rng.uniform_int(static_cast<int>(tgt_indices.size())))];
            size_t ei = ti;
            for (int tries = 0; tries < 1000; ++tries) {
              ei = en_indices[static_cast<size_t>(
                  pair_rng.uniform_int(static_cast<int>(en_indices.size())))];
              if (prepared[ei].ex->parallel_id != prepared[ti].ex->parallel_id) break;
            }
            require(prepared[ei].ex->parallel_id != prepared[ti].ex->parallel_id,
                    "train: could not draw a non-parallel EN example");
            quad.emplace_back(&prepared[ei], &prepared[ti]);
          }
        }
        lb = build_minotaur_step(pg, quad, cfg.model, cfg.alignment, reparam_rng,
                                 prior_rng, drop);
      } else {
        std::vector<const Prepared*> batch;
        size_t end = std::min(pos + static_cast<size_t>(cfg.batch_size), order.size());
        for (; pos < end; ++pos) batch.push_back(&prepared[order[pos]]);
        lb = build_task_loss(pg, batch, cfg.model, cfg.alignment, reparam_rng, prior_rng,
                             drop);
      }

      ad::backward(lb.loss);
      adam_update(params, adam, collect_grads(pg), cfg);

      lb.log.step = step;
      result.steps.push_back(lb.log);
      if (on_step) on_step(lb.log);

      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        halted = true;
        break;
      }
    }

    if (halted) break;

    double val = validation_loss(params, valid_corpus, src, tgt, cfg.model);
    result.validation_curve.push_back(val);
    if (val < result.best_validation) {
      result.best_validation = val;
      result.best_epoch = epoch;
      result.params = params;
      bad_validations = 0;
      if (on_best) on_best(params, epoch, val);
    } else {
      ++bad_validations;
      if (bad_validations >= cfg.early_stopping_patience) break;
    }
  }

  if (result.best_epoch < 0) result.params = params;  // halted before any validation
  result.total_steps = step;
  return result;
}

double deterministic_l2_pairs(const Eigen::MatrixXd& tgt, const Eigen::MatrixXd& en) {
  return l2_pairs(ad::constant(tgt), ad::constant(en)).scalar();
}

double deterministic_statistical_kl_pairs(const Eigen::MatrixXd& tgt,
                                          const Eigen::MatrixXd& en) {
  return statistical_kl_pairs(ad::constant(tgt), ad::constant(en)).scalar();
}

SignTestResult sign_test(const std::vector<bool>& a, const std::vector<bool>& b) {
  require(a.size() == b.size(), "sign_test: length mismatch");
  int na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) ++na;
    if (!a[i] && b[i]) ++nb;
  }
  SignTestResult r;
  r.n_discordant = na + nb;
  if (r.n_discordant == 0) {
    r.all_tied = true;
    r.p_value = 1.0;
    return r;
  }
  const int n = r.n_discordant;
  const int x = std::min(na, nb);
  // Exact binomial tail: 2 * P(X <= x), X ~ Bin(n, 1/2).
  double tail = 0;
  for (int i = 0; i <= x; ++i) {
    double log_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    tail += std::exp(log_c - n * std::log(2.0));
  }
  r.p_value = std::min(1.0, 2.0 * tail);
  return r;
}

}  // namespace minotaur
