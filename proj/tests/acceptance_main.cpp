// Acceptance suite: one pass/fail line per criterion. Exit status is the
// number of failed criteria. Criteria 7 and 8 train full desk-scale models
// over three seeds each and dominate the runtime.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "minotaur/pipeline.hpp"
#include "minotaur/training.hpp"

using namespace minotaur;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << name;
  if (!detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

// ---- criterion 1: divergence golden values ---------------------------------

double kl_quadrature(double mu_p, double var_p, double mu_q, double var_q) {
  auto logpdf = [](double x, double mu, double var) {
    return -0.5 * std::log(2 * M_PI * var) - (x - mu) * (x - mu) / (2 * var);
  };
  const int n = 40000;
  const double lo = -14, hi = 14, h = (hi - lo) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    double x = lo + i * h;
    double lp = logpdf(x, mu_p, var_p);
    double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::exp(lp) * (lp - logpdf(x, mu_q, var_q));
  }
  return acc * h / 3.0;
}

void criterion1() {
  std::ostringstream detail;
  bool ok = true;

  KernelConfig k2 = KernelConfig::for_dim(2);  // C = 4
  Eigen::VectorXd p(2), q(2);
  p << 0.7, -0.1;
  double identity = imq_kernel(p, p, k2);
  ok &= identity == 7.0;
  detail << "imq(p,p)=" << identity;

  q = p;
  q(0) += 2.0;  // |p-q|^2 = C
  double at_c = imq_kernel(p, q, k2);
  ok &= std::abs(at_c - 3.5) < 1e-12;
  detail << " imq@C=" << at_c;

  DiagonalGaussian a{vec1(0), vec1(1)}, b{vec1(1), vec1(4)};
  double w2 = w2_diag(a, b);
  ok &= std::abs(w2 - 2.0) < 1e-12;
  detail << " w2=" << w2;

  DiagonalGaussian c{vec1(1), vec1(1)}, d{vec1(0), vec1(1)};
  double kl1 = kl_diag(c, d);
  ok &= std::abs(kl1 - 0.5) < 1e-12;
  detail << " kl(1,1||0,1)=" << kl1;

  DiagonalGaussian e{vec1(0), vec1(1)}, f{vec1(0), vec1(std::exp(1.0))};
  double kl2 = kl_diag(e, f);
  double oracle = kl_quadrature(0, 1, 0, std::exp(1.0));
  ok &= std::abs(kl2 - oracle) < 1e-6;
  detail << " kl_vs_quadrature=" << std::abs(kl2 - oracle);

  KernelConfig kc;
  kc.base = 4.0;
  std::vector<Eigen::VectorXd> s = {vec1(0), vec1(2)};
  double mmd = mmd_unbiased(s, s, kc);
  ok &= std::abs(mmd + 3.5) < 1e-12;
  detail << " mmd=" << mmd;

  report(1, "divergence golden values", ok, detail.str());
}

// ---- criterion 2: gradient suite --------------------------------------------

void criterion2() {
  Rng rng(4242);
  int cases = 0, failures = 0;

  auto rand_means = [&](int t, int d) {
    Eigen::MatrixXd m(t, d);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-2, 2);
    return m;
  };
  auto rand_vars = [&](int d) {
    Eigen::MatrixXd m(1, d);
    for (int j = 0; j < d; ++j) m(0, j) = rng.uniform(0.25, 4);
    return m;
  };
  auto run = [&](const gradcheck::GraphFn& fn, std::vector<Eigen::MatrixXd> inputs) {
    ++cases;
    if (!gradcheck::check(fn, std::move(inputs)).empty()) ++failures;
  };

  for (int trial = 0; trial < 12; ++trial) {
    int d = 2 + rng.uniform_int(4);
    KernelConfig kc = KernelConfig::for_dim(d);

    run([&](const auto& in) { return w2_diag(in[0], in[1], in[2], in[3]); },
        {rand_means(1, d), rand_vars(d), rand_means(1, d), rand_vars(d)});
    run([&](const auto& in) { return kl_diag(in[0], in[1], in[2], in[3]); },
        {rand_means(1, d), rand_vars(d), rand_means(1, d), rand_vars(d)});
    run([&](const auto& in) { return imq_kernel(in[0], in[1], kc); },
        {rand_means(1, d), rand_means(1, d)});
    run([&](const auto& in) { return mmd_unbiased(in[0], in[1], kc); },
        {rand_means(3 + trial % 3, d), rand_means(3, d)});
    run([&](const auto& in) {
          return individual_divergence(in[0], in[1], in[2], in[3], IndividualMetric::W2);
        },
        {rand_means(2, d), rand_vars(d), rand_means(3, d), rand_vars(d)});
    run([&](const auto& in) {
          return individual_divergence(in[0], in[1], in[2], in[3], IndividualMetric::KL);
        },
        {rand_means(2, d), rand_vars(d), rand_means(3, d), rand_vars(d)});

    // aggregate divergence + prior regularizer + full two-level combination
    run([&](const auto& in) { return mmd_unbiased(in[0], in[1], kc); },
        {rand_means(4, d), rand_means(5, d)});
    {
      Rng prior_seed(7000 + trial);
      Eigen::MatrixXd draws = prior_seed.normal_matrix(4, d);
      run([&](const auto& in) {
            return mmd_unbiased(in[0], ad::constant(draws), kc);
          },
          {rand_means(4, d)});
    }
    run([&](const auto& in) {
          ad::Var agg = mmd_unbiased(in[0], in[2], kc);
          ad::Var ind = individual_divergence(in[2], in[3], in[0], in[1],
                                              IndividualMetric::W2);
          return ad::add(ad::scale(agg, 0.01), ad::scale(ind, 0.5));
        },
        {rand_means(3, d), rand_vars(d), rand_means(2, d), rand_vars(d)});
  }

  // decode_teacher_forced gradients w.r.t. z and, through the sampling path,
  // w.r.t. means and variances.
  ModelConfig cfg;
  cfg.source_vocab_size = 11;
  cfg.target_vocab_size = 9;
  cfg.d = 8;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 2;
  cfg.attention_heads = 2;
  cfg.max_source_len = 16;
  cfg.max_target_len = 12;
  cfg.dropout = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    Rng prng(100 + trial);
    ModelParameters params = ModelParameters::init(cfg, prng);
    ParamGraph pg = ParamGraph::bind(params, false);
    std::vector<int> gold = {4, 7, 5};
    Eigen::MatrixXd z0 = rand_means(3, cfg.d);
    ++cases;
    if (!gradcheck::check(
             [&](const auto& in) { return decode_ce_graph(pg, in[0], gold, cfg); }, {z0})
             .empty())
      ++failures;

    Eigen::MatrixXd noise = prng.normal_matrix(3, cfg.d);
    ++cases;
    if (!gradcheck::check(
             [&](const auto& in) {
               ad::Var sigma = ad::sqrt(ad::clamp_min(in[1], kVarianceFloor));
               ad::Var z = ad::add(in[0], ad::cmul(ad::broadcast_rows(sigma, 3),
                                                   ad::constant(noise)));
               return decode_ce_graph(pg, z, gold, cfg);
             },
             {rand_means(3, cfg.d), rand_vars(cfg.d)})
             .empty())
      ++failures;
  }

  std::ostringstream detail;
  detail << cases << " randomized cases, " << failures << " failures";
  report(2, "gradient suite vs central finite differences", cases >= 100 && failures == 0,
         detail.str());
}

// ---- criterion 3: estimator consistency --------------------------------------

void criterion3() {
  KernelConfig kc = KernelConfig::for_dim(8);
  std::vector<double> mmds, priors;
  bool all_small = true;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(9000 + trial);
    std::vector<Eigen::VectorXd> p, q;
    for (int i = 0; i < 2000; ++i) {
      Eigen::VectorXd a(8), b(8);
      for (int j = 0; j < 8; ++j) a(j) = rng.normal();
      for (int j = 0; j < 8; ++j) b(j) = rng.normal();
      p.push_back(a);
      q.push_back(b);
    }
    double m = mmd_unbiased(p, q, kc);
    Rng prior_rng(7700 + trial);
    double r = prior_regularizer(p, 2000, kc, prior_rng);
    mmds.push_back(m);
    priors.push_back(r);
    all_small &= std::abs(m) < 0.05 && std::abs(r) < 0.05;
  }
  auto mean_se = [](const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    double se = std::sqrt(ss / (v.size() - 1.0) / static_cast<double>(v.size()));
    return std::make_pair(mean, se);
  };
  auto [m_mean, m_se] = mean_se(mmds);
  auto [p_mean, p_se] = mean_se(priors);
  bool ok = all_small && std::abs(m_mean) <= 2 * m_se && std::abs(p_mean) <= 2 * p_se;
  std::ostringstream detail;
  detail << "mmd mean=" << m_mean << " se=" << m_se << "; prior mean=" << p_mean
         << " se=" << p_se;
  report(3, "estimator consistency at 2000 vs 2000 in 8-D", ok, detail.str());
}

// ---- criterion 4: reparameterization moments ---------------------------------

void criterion4() {
  GaussianSequence g;
  g.means = Eigen::MatrixXd(1, 4);
  g.means << 0.5, -1.0, 2.0, 0.0;
  g.variance = Eigen::VectorXd(4);
  g.variance << 0.25, 1.0, 4.0, 0.5;

  const int n = 100000;
  Rng rng(31337);
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(4), sq_acc = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd z = reparameterize(g, rng);
    mean_acc += z.row(0).transpose();
    sq_acc += z.row(0).transpose().cwiseAbs2();
  }
  mean_acc /= n;
  Eigen::VectorXd var = sq_acc / n - mean_acc.cwiseAbs2();
  bool ok = true;
  std::ostringstream detail;
  for (int i = 0; i < 4; ++i) {
    double sigma = std::sqrt(g.variance(i));
    ok &= std::abs(mean_acc(i) - g.means(0, i)) < 4 * sigma / std::sqrt(double(n));
    ok &= std::abs(var(i) - g.variance(i)) / g.variance(i) < 0.05;
  }
  detail << "mean err inf-norm=" << (mean_acc - g.means.row(0).transpose()).cwiseAbs().maxCoeff();
  report(4, "reparameterization moments over 1e5 draws", ok, detail.str());
}

// ---- shared desk-run machinery ------------------------------------------------

struct DeskData {
  Corpus train_full, valid_full, test;
  Vocab src, tgt;
  int max_raw = 0;
};

const DeskData& desk_data() {
  static DeskData data = [] {
    DeskData d;
    GeneratorConfig gen = GeneratorConfig::defaults(Task::Tree);
    Corpus corpus = generate_synthetic(gen);
    auto [train, valid, test] = split_corpus(corpus, gen);
    d.train_full = std::move(train);
    d.valid_full = std::move(valid);
    d.test = std::move(test);
    std::tie(d.src, d.tgt) = build_vocab(corpus);
    d.max_raw = max_source_tokens(corpus);
    return d;
  }();
  return data;
}

TrainConfig desk_config(uint64_t seed) {
  const DeskData& d = desk_data();
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.model.source_vocab_size = d.src.size();
  cfg.model.target_vocab_size = d.tgt.size();
  cfg.model.d = 64;
  cfg.model.encoder_layers = 2;
  cfg.model.decoder_layers = 2;
  cfg.model.attention_heads = 4;
  cfg.model.max_source_len = 2 * d.max_raw + 2;
  cfg.model.dropout = 0.1;
  return cfg;
}

struct DeskRun {
  EvalOutput eval;
  PosteriorHealth health;
};

DeskRun desk_run(TrainConfig cfg) {
  const DeskData& d = desk_data();
  Rng srng(1000 + cfg.seed);
  std::vector<Example> sampled;
  for (const auto& lang : d.train_full.languages) {
    if (lang == "en") continue;
    auto s = random_sample(d.train_full, lang, 0.05, srng);
    sampled.insert(sampled.end(), s.begin(), s.end());
  }
  Corpus fewshot = assemble_fewshot(d.train_full, sampled);

  Rng vrng(2000 + cfg.seed);
  std::vector<Example> vsampled;
  for (const auto& lang : d.valid_full.languages) {
    if (lang == "en") continue;
    auto s = random_sample(d.valid_full, lang, 0.05, vrng);
    vsampled.insert(vsampled.end(), s.begin(), s.end());
  }
  Corpus fewvalid = assemble_fewshot(d.valid_full, vsampled);

  Rng prng(cfg.seed);
  ModelParameters init = ModelParameters::init(cfg.model, prng);
  TrainResult r = train(init, fewshot, fewvalid, d.src, d.tgt, cfg);

  DeskRun out;
  out.eval = evaluate_model(r.params, cfg.model, d.src, d.tgt, d.test, nullptr, 5);
  out.health = posterior_health(r.params, cfg.model, d.src, fewshot);
  return out;
}

// ---- criterion 5: schedule and determinism ------------------------------------

void criterion5() {
  GeneratorConfig gen = GeneratorConfig::defaults(Task::Tree);
  gen.num_frames = 120;
  gen.seed = 11;
  Corpus corpus = generate_synthetic(gen);
  auto [train_c, valid_c, test_c] = split_corpus(corpus, gen);
  (void)test_c;
  auto [src, tgt] = build_vocab(corpus);

  TrainConfig cfg;
  cfg.seed = 5;
  cfg.batch_size = 8;
  cfg.max_steps = 500;
  cfg.max_epochs = 1000;
  cfg.episodic_period = 20;
  cfg.model.source_vocab_size = src.size();
  cfg.model.target_vocab_size = tgt.size();
  cfg.model.d = 16;
  cfg.model.encoder_layers = 1;
  cfg.model.decoder_layers = 1;
  cfg.model.attention_heads = 2;
  cfg.model.max_source_len = 2 * max_source_tokens(corpus) + 2;
  cfg.model.dropout = 0.1;

  Rng prng(3);
  ModelParameters init = ModelParameters::init(cfg.model, prng);
  TrainResult r1 = train(init, train_c, valid_c, src, tgt, cfg);
  TrainResult r2 = train(init, train_c, valid_c, src, tgt, cfg);

  int alignment_steps = 0;
  for (const auto& s : r1.steps) alignment_steps += s.is_alignment_step ? 1 : 0;

  bool identical = r1.steps.size() == r2.steps.size();
  if (identical)
    for (size_t i = 0; i < r1.steps.size(); ++i)
      identical = identical && r1.steps[i].to_json().dump() == r2.steps[i].to_json().dump();

  bool ok = r1.total_steps == 500 && alignment_steps == 25 && identical;
  std::ostringstream detail;
  detail << "steps=" << r1.total_steps << " alignment=" << alignment_steps
         << " identical=" << (identical ? "yes" : "no");
  report(5, "episodic schedule and seeded determinism", ok, detail.str());
}

// ---- criterion 6: SPIS property audit -----------------------------------------

void criterion6() {
  const DeskData& d = desk_data();
  Corpus all = d.train_full;  // audit over the training split
  bool ok = true;
  std::ostringstream detail;

  std::map<int, size_t> sizes;
  std::map<int, std::set<std::string>> picked;
  for (const auto& lang : {"l1", "l2"}) {
    std::map<std::string, int> freq;
    for (const auto* e : all.by_lang(lang))
      for (const auto& label : e->labels) ++freq[label];
    for (int rate : {1, 5, 10}) {
      Rng rng(99);
      auto subset = spis_sample(all, lang, rate, rng);
      std::map<std::string, int> count;
      for (const auto& e : subset)
        for (const auto& label : e.labels) ++count[label];
      for (const auto& [label, f] : freq)
        ok &= count[label] >= std::min(rate, f);
      if (std::string(lang) == "l1") {
        sizes[rate] = subset.size();
        for (const auto& e : subset) picked[rate].insert(e.id);
      }
    }
  }
  ok &= sizes[1] <= sizes[5] && sizes[5] <= sizes[10];
  for (const auto& id : picked[1]) ok &= picked[5].count(id) == 1;
  for (const auto& id : picked[5]) ok &= picked[10].count(id) == 1;
  detail << "sizes@1/5/10=" << sizes[1] << "/" << sizes[5] << "/" << sizes[10];
  report(6, "SPIS coverage bound and rate monotonicity", ok, detail.str());
}

// ---- criteria 7 and 8: end-to-end transfer and ablation directions ------------

struct SeedOutcome {
  double baseline_acc = 0, minotaur_acc = 0;
  double baseline_mrr = 0, minotaur_mrr = 0;
  double kl_mmd_acc = 0;
  double det_best_acc = 0;
  double np_dz_acc = 0, np_dzx_acc = 0;
  PosteriorHealth health;
};

SeedOutcome run_seed(uint64_t seed, bool fast) {
  SeedOutcome out;

  TrainConfig base = desk_config(seed);

  TrainConfig off = base;
  off.alignment.alpha_p = 0;
  off.alignment.beta_p = 0;
  DeskRun baseline = desk_run(off);
  out.baseline_acc = baseline.eval.report.target_mean;
  out.baseline_mrr = baseline.eval.report.retrieval.mrr;

  DeskRun minotaur = desk_run(base);  // W2 + MMD, (0.01, 0.5)
  out.minotaur_acc = minotaur.eval.report.target_mean;
  out.minotaur_mrr = minotaur.eval.report.retrieval.mrr;
  out.health = minotaur.health;

  if (fast) return out;

  TrainConfig klmmd = base;
  klmmd.alignment.individual_metric = IndividualMetric::KL;
  out.kl_mmd_acc = desk_run(klmmd).eval.report.target_mean;

  // Non-latent bottleneck rows; the best of the three modes is compared.
  out.det_best_acc = 0;
  for (int mode = 0; mode < 3; ++mode) {
    TrainConfig det = base;
    det.model.deterministic_bottleneck = true;
    if (mode == 0) {
      det.alignment.individual_metric = IndividualMetric::None;
      det.alignment.aggregate_metric = AggregateMetric::MMD;
    } else if (mode == 1) {
      det.alignment.individual_metric = IndividualMetric::KL;
      det.alignment.aggregate_metric = AggregateMetric::None;
    } else {
      det.alignment.individual_metric = IndividualMetric::W2;  // plain L2
      det.alignment.aggregate_metric = AggregateMetric::None;
    }
    out.det_best_acc = std::max(out.det_best_acc, desk_run(det).eval.report.target_mean);
  }

  TrainConfig np_dz = base;
  np_dz.parallel_alignment = false;
  np_dz.alignment.individual_metric = IndividualMetric::None;
  out.np_dz_acc = desk_run(np_dz).eval.report.target_mean;

  TrainConfig np_dzx = base;
  np_dzx.parallel_alignment = false;
  np_dzx.alignment.aggregate_metric = AggregateMetric::None;
  out.np_dzx_acc = desk_run(np_dzx).eval.report.target_mean;

  return out;
}

void criteria78(bool fast_mode) {
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<SeedOutcome> outcomes;
  for (uint64_t s : seeds) {
    outcomes.push_back(run_seed(s, fast_mode));
    const auto& o = outcomes.back();
    std::cout << "  [seed " << s << "] baseline=" << o.baseline_acc
              << " minotaur=" << o.minotaur_acc << " mrr " << o.baseline_mrr << "->"
              << o.minotaur_mrr;
    if (!fast_mode)
      std::cout << " kl+mmd=" << o.kl_mmd_acc << " det_best=" << o.det_best_acc
                << " np_dz=" << o.np_dz_acc << " np_dzx=" << o.np_dzx_acc;
    std::cout << std::endl;
  }

  double mean_gap = 0, mean_mrr_gap = 0;
  bool health_ok = true;
  for (const auto& o : outcomes) {
    mean_gap += (o.minotaur_acc - o.baseline_acc) / outcomes.size();
    mean_mrr_gap += (o.minotaur_mrr - o.baseline_mrr) / outcomes.size();
    health_ok &= o.health.mean_variance > 1e-4 && o.health.mean_token_norm > 1e-2;
  }
  {
    std::ostringstream detail;
    detail << "accuracy gap=" << mean_gap * 100 << " pts, MRR gap=" << mean_mrr_gap
           << ", posterior health " << (health_ok ? "ok" : "collapsed");
    report(7, "few-shot transfer beats the alignment-off baseline",
           mean_gap >= 0.05 && mean_mrr_gap >= 0.10 && health_ok, detail.str());
  }

  if (fast_mode) {
    report(8, "ablation directions (skipped: MINOTAUR_ACCEPTANCE_FAST=1)", false,
           "run without the fast flag for the full grid");
    return;
  }

  int w2_wins = 0, det_losses = 0, np_wins = 0;
  for (const auto& o : outcomes) {
    w2_wins += o.minotaur_acc >= o.kl_mmd_acc ? 1 : 0;
    det_losses += o.det_best_acc < o.minotaur_acc ? 1 : 0;
    np_wins += o.np_dz_acc > o.np_dzx_acc ? 1 : 0;
  }
  std::ostringstream detail;
  detail << "W2+MMD>=KL+MMD in " << w2_wins << "/3; det<latent in " << det_losses
         << "/3; nonparallel DZ>DZX in " << np_wins << "/3";
  report(8, "ablation directions reproduce at desk scale",
         w2_wins >= 2 && det_losses >= 2 && np_wins >= 2, detail.str());
}

// ---- criterion 9: metric unit tests -------------------------------------------

void criterion9() {
  bool ok = true;
  std::ostringstream detail;

  ok &= sciem("[IN:GET [SL:X word3 ]]", "[in:get   [sl:x word3 ]]");
  ok &= !sciem("[SL:X word3 ]", "[SL:X word2 ]");
  ok &= sciem(" a  b ", "A B");

  ToyDatabase db;
  db.tables["airport"] = {{"code", "name"},
                          {{"ORD", "O'Hare"}, {"JFK", "Kennedy"}, {"MDW", "Midway"}}};
  Denotation d = execute_lf("SELECT name FROM airport WHERE code = ORD", db);
  ok &= d.ok && d.values == std::set<std::string>{"O'Hare"};
  ok &= !execute_lf("SELEKT x FROM y", db).ok;
  Denotation all = execute_lf("SELECT name FROM airport", db);
  ok &= all.ok && all.values.size() == 3;

  // Ranks [1, 2, 4] -> MRR = 7/12.
  auto at_angle = [](double deg) {
    Eigen::VectorXd v(2);
    v << std::cos(deg * M_PI / 180), std::sin(deg * M_PI / 180);
    return v;
  };
  std::vector<LabeledRep> reps = {
      {"a-l1", "l1", "a", at_angle(0)},    {"a-en", "en", "a", at_angle(1)},
      {"b-l1", "l1", "b", at_angle(90)},   {"b-en", "en", "b", at_angle(96)},
      {"x1-en", "en", "x1", at_angle(93)}, {"c-l1", "l1", "c", at_angle(200)},
      {"c-en", "en", "c", at_angle(212)},  {"x2-en", "en", "x2", at_angle(203)},
      {"x3-en", "en", "x3", at_angle(206)}, {"x4-en", "en", "x4", at_angle(209)}};
  RetrievalStats rs = retrieval_stats(reps);
  ok &= std::abs(rs.mrr - 7.0 / 12.0) < 1e-12;
  detail << "mrr=" << rs.mrr;

  std::vector<bool> a, b;
  for (int i = 0; i < 9; ++i) {
    a.push_back(true);
    b.push_back(false);
  }
  a.push_back(false);
  b.push_back(true);
  SignTestResult st = sign_test(a, b);
  ok &= std::abs(st.p_value - 22.0 / 1024.0) < 1e-12;
  detail << " sign_p=" << st.p_value;

  report(9, "metric unit tests", ok, detail.str());
}

}  // namespace

int main() {
  bool fast = std::getenv("MINOTAUR_ACCEPTANCE_FAST") != nullptr;
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criteria78(fast);
  criterion9();
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT")
            << " (" << g_failures << " failed)" << std::endl;
  return g_failures;
}
