#include "minotaur/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "minotaur/io_util.hpp"

namespace minotaur {

namespace {

std::vector<int> source_ids(const Example& ex, const Vocab& src) {
  Sentinelized s = sentinelize(ex.tokens);
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const auto& t : s.tokens) ids.push_back(src.id_of(t));
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& tgt) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += tgt.token_of(ids[i]);
  }
  return out;
}

}  // namespace

EvalOutput evaluate_model(const ModelParameters& params, const ModelConfig& cfg,
                          const Vocab& src, const Vocab& tgt, const Corpus& test,
                          const ToyDatabase* db, int beam_width) {
  EvalOutput out;
  out.report.task = task_name(test.task);
  out.report.languages = test.languages;

  std::map<std::string, int> correct, total;
  std::map<std::string, std::vector<std::string>> preds_by_lang, golds_by_lang;

  for (const auto& ex : test.examples) {
    std::vector<int> ids = source_ids(ex, src);
    GaussianSequence posterior = encode(params, ids, cfg);
    // Inference conditions on mu; sampling stays off for reported metrics.
    std::vector<int> pred_ids =
        beam_decode(params, posterior.means, beam_width, cfg.max_target_len - 1, cfg);
    std::string pred = detokenize(pred_ids, tgt);

    bool ok = sciem(pred, ex.lf);
    out.correct_by_id[ex.id] = ok;
    correct[ex.lang] += ok ? 1 : 0;
    total[ex.lang] += 1;
    if (db && !db->empty()) {
      preds_by_lang[ex.lang].push_back(pred);
      golds_by_lang[ex.lang].push_back(ex.lf);
    }

    LabeledRep rep;
    rep.id = ex.id;
    rep.lang = ex.lang;
    rep.parallel_id = ex.parallel_id;
    rep.rep = sentence_representation(posterior);
    out.reps.push_back(std::move(rep));
  }

  for (const auto& [lang, n] : total) {
    out.report.accuracy[lang] = static_cast<double>(correct[lang]) / n;
    out.report.counts[lang] = n;
  }
  if (db && !db->empty()) {
    for (const auto& [lang, preds] : preds_by_lang)
      out.report.denotation[lang] =
          denotation_accuracy(preds, golds_by_lang[lang], *db);
  }

  std::vector<double> target_accs;
  for (const auto& [lang, acc] : out.report.accuracy)
    if (lang != "en") target_accs.push_back(acc);
  if (!target_accs.empty()) {
    double mean = 0;
    for (double a : target_accs) mean += a;
    mean /= static_cast<double>(target_accs.size());
    double ss = 0;
    for (double a : target_accs) ss += (a - mean) * (a - mean);
    out.report.target_mean = mean;
    out.report.target_std =
        target_accs.size() > 1 ? std::sqrt(ss / (target_accs.size() - 1.0)) : 0.0;
  }

  bool has_en = std::find(test.languages.begin(), test.languages.end(), "en") !=
                test.languages.end();
  if (has_en && test.languages.size() > 1) out.report.retrieval = retrieval_stats(out.reps);
  return out;
}

void attach_sign_tests(EvalOutput& run, const EvalOutput& baseline) {
  std::map<std::string, std::pair<std::vector<bool>, std::vector<bool>>> by_lang;
  for (const auto& [id, ok] : run.correct_by_id) {
    auto it = baseline.correct_by_id.find(id);
    if (it == baseline.correct_by_id.end()) continue;
    // id layout is "<group>-<lang>"; recover the language from the suffix.
    auto dash = id.rfind('-');
    std::string lang = dash == std::string::npos ? "" : id.substr(dash + 1);
    by_lang[lang].first.push_back(ok);
    by_lang[lang].second.push_back(it->second);
  }
  for (const auto& [lang, pair] : by_lang)
    run.report.sign_test_vs_baseline[lang] = sign_test(pair.first, pair.second).p_value;
}

void write_representation_dump(const std::string& path,
                               const std::vector<LabeledRep>& reps) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reps) {
    std::vector<std::string> row = {r.id, r.lang, r.parallel_id};
    for (Eigen::Index i = 0; i < r.rep.size(); ++i) row.push_back(std::to_string(r.rep(i)));
    rows.push_back(std::move(row));
  }
  write_tsv(path, rows);
}

void write_pca_dump(const std::string& path, const std::vector<LabeledRep>& reps) {
  std::vector<Eigen::VectorXd> vecs;
  vecs.reserve(reps.size());
  for (const auto& r : reps) vecs.push_back(r.rep);
  std::vector<Eigen::VectorXd> proj = pca_project(vecs, 2);
  std::vector<std::vector<std::string>> rows;
  for (size_t i = 0; i < reps.size(); ++i)
    rows.push_back({reps[i].id, reps[i].lang, std::to_string(proj[i](0)),
                    std::to_string(proj[i](1))});
  write_tsv(path, rows);
}

PosteriorHealth posterior_health(const ModelParameters& params, const ModelConfig& cfg,
                                 const Vocab& src, const Corpus& corpus,
                                 int max_examples) {
  PosteriorHealth h;
  int n = 0;
  double var_sum = 0, norm_sum = 0;
  long tokens = 0;
  for (const auto& ex : corpus.examples) {
    if (n >= max_examples) break;
    GaussianSequence g = encode(params, source_ids(ex, src), cfg);
    var_sum += g.variance.mean();
    for (int i = 0; i < g.length(); ++i) {
      norm_sum += g.means.row(i).norm();
      ++tokens;
    }
    ++n;
  }
  if (n > 0) h.mean_variance = var_sum / n;
  if (tokens > 0) h.mean_token_norm = norm_sum / static_cast<double>(tokens);
  return h;
}

}  // namespace minotaur
