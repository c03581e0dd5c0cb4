#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "minotaur/divergence.hpp"

namespace minotaur {

/// In-memory database the toy SQL dialect executes against.
struct ToyDatabase {
  struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
  };
  std::map<std::string, Table> tables;

  bool empty() const { return tables.empty(); }
  void validate() const;
  nlohmann::json to_json() const;
  static ToyDatabase from_json(const nlohmann::json& j);
};

/// Result of executing a logical form. Malformed queries yield ok=false
/// rather than an exception; a failed execution never equals any denotation.
struct Denotation {
  bool ok = false;
  std::set<std::string> values;
  std::string error;
};

/// Space and Case Invariant Exact-Match: lowercase, collapse whitespace runs,
/// trim, then compare.
bool sciem(const std::string& pred, const std::string& gold);

/// Executes `SELECT [DISTINCT] col FROM table [WHERE col = lit [AND ...]]`
/// by full scan. Every string maps to a denotation or a failure value.
Denotation execute_lf(const std::string& lf, const ToyDatabase& db);

/// Fraction of predictions whose denotation equals the gold denotation as a
/// set. Gold queries must execute; a non-executable gold throws.
double denotation_accuracy(const std::vector<std::string>& preds,
                           const std::vector<std::string>& golds,
                           const ToyDatabase& db);

/// Mean of the posterior mean vectors over unmasked positions.
Eigen::VectorXd sentence_representation(const GaussianSequence& posterior,
                                        const std::vector<int>* mask = nullptr);

struct LabeledRep {
  std::string id, lang, parallel_id;
  Eigen::VectorXd rep;
};

struct RetrievalStats {
  double mean_cosine = 0, top1 = 0, top5 = 0, top10 = 0, mrr = 0;
  int queries = 0;
  nlohmann::json to_json() const;
};

/// For every non-English representation, ranks all other representations by
/// cosine similarity and scores where the English parallel partner lands.
RetrievalStats retrieval_stats(const std::vector<LabeledRep>& reps);

/// Mean-centered projection onto the top-k principal components; component
/// signs are fixed so repeated runs agree.
std::vector<Eigen::VectorXd> pca_project(const std::vector<Eigen::VectorXd>& reps,
                                         int k = 2);

struct EvalReport {
  std::string task;
  std::vector<std::string> languages;
  std::map<std::string, double> accuracy;    // SCIEM per language
  std::map<std::string, double> denotation;  // sql corpora only
  std::map<std::string, int> counts;
  double target_mean = 0, target_std = 0;    // over non-EN languages
  RetrievalStats retrieval;
  std::map<std::string, double> sign_test_vs_baseline;  // per-language p-values
  nlohmann::json to_json() const;
};

}  // namespace minotaur
