#include "minotaur/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace minotaur {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string squeeze_spaces(const std::string& s) {
  std::string out;
  bool in_space = true;  // leading spaces dropped
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      out.push_back(c);
      in_space = false;
    }
  }
  return out;
}

// Splits on whitespace, detaches '=' into its own token, drops trailing ';'.
std::vector<std::string> sql_tokens(const std::string& lf) {
  std::string clean;
  for (char c : lf) {
    if (c == '=') {
      clean += " = ";
    } else if (c == ';') {
      clean += ' ';
    } else {
      clean += c;
    }
  }
  std::vector<std::string> toks;
  std::istringstream in(clean);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

// Strips an optional "table." qualifier.
std::string bare_column(const std::string& ref) {
  auto dot = ref.find('.');
  return dot == std::string::npos ? ref : ref.substr(dot + 1);
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

void ToyDatabase::validate() const {
  for (const auto& [name, table] : tables) {
    std::set<std::string> seen(table.columns.begin(), table.columns.end());
    if (seen.size() != table.columns.size())
      throw std::invalid_argument("ToyDatabase: duplicate column in table " + name);
    for (const auto& row : table.rows)
      if (row.size() != table.columns.size())
        throw std::invalid_argument("ToyDatabase: row width mismatch in table " + name);
  }
}

nlohmann::json ToyDatabase::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, table] : tables)
    j[name] = {{"columns", table.columns}, {"rows", table.rows}};
  return j;
}

ToyDatabase ToyDatabase::from_json(const nlohmann::json& j) {
  ToyDatabase db;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Table t;
    t.columns = it.value().at("columns").get<std::vector<std::string>>();
    t.rows = it.value().at("rows").get<std::vector<std::vector<std::string>>>();
    db.tables[it.key()] = std::move(t);
  }
  db.validate();
  return db;
}

bool sciem(const std::string& pred, const std::string& gold) {
  return squeeze_spaces(lower(pred)) == squeeze_spaces(lower(gold));
}

Denotation execute_lf(const std::string& lf, const ToyDatabase& db) {
  auto fail = [](std::string msg) {
    Denotation d;
    d.ok = false;
    d.error = std::move(msg);
    return d;
  };

  std::vector<std::string> toks = sql_tokens(lf);
  size_t i = 0;
  auto next = [&]() -> std::string { return i < toks.size() ? toks[i++] : std::string(); };

  if (lower(next()) != "select") return fail("expected SELECT");
  std::string col = next();
  if (lower(col) == "distinct") col = next();
  if (col.empty()) return fail("missing column");
  if (lower(next()) != "from") return fail("expected FROM");
  std::string table_name = next();
  if (table_name.empty()) return fail("missing table");

  auto it = db.tables.find(table_name);
  if (it == db.tables.end()) return fail("unknown table " + table_name);
  const auto& table = it->second;

  auto col_index = [&](const std::string& ref) -> int {
    std::string c = bare_column(ref);
    for (size_t k = 0; k < table.columns.size(); ++k)
      if (table.columns[k] == c) return static_cast<int>(k);
    return -1;
  };

  int sel = col_index(col);
  if (sel < 0) return fail("unknown column " + col);

  std::vector<std::pair<int, std::string>> conds;
  if (i < toks.size()) {
    if (lower(next()) != "where") return fail("expected WHERE");
    while (true) {
      std::string c = next();
      if (c.empty()) return fail("missing condition column");
      int ci = col_index(c);
      if (ci < 0) return fail("unknown column " + c);
      if (next() != "=") return fail("expected =");
      std::string lit = next();
      if (lit.empty()) return fail("missing literal");
      if (lit.size() >= 2 && lit.front() == '\'' && lit.back() == '\'')
        lit = lit.substr(1, lit.size() - 2);
      conds.emplace_back(ci, lit);
      if (i >= toks.size()) break;
      if (lower(next()) != "and") return fail("expected AND");
    }
  }

  Denotation out;
  out.ok = true;
  for (const auto& row : table.rows) {
    bool match = true;
    for (const auto& [ci, lit] : conds)
      if (row[static_cast<size_t>(ci)] != lit) {
        match = false;
        break;
      }
    if (match) out.values.insert(row[static_cast<size_t>(sel)]);
  }
  return out;
}

double denotation_accuracy(const std::vector<std::string>& preds,
                           const std::vector<std::string>& golds,
                           const ToyDatabase& db) {
  if (preds.size() != golds.size())
    throw std::invalid_argument("denotation_accuracy: length mismatch");
  if (preds.empty()) return 0.0;
  int correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    Denotation g = execute_lf(golds[i], db);
    if (!g.ok)
      throw std::runtime_error("denotation_accuracy: gold LF not executable at index " +
                               std::to_string(i) + ": " + g.error);
    Denotation p = execute_lf(preds[i], db);
    if (p.ok && p.values == g.values) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

Eigen::VectorXd sentence_representation(const GaussianSequence& posterior,
                                        const std::vector<int>* mask) {
  const int t = posterior.length();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(posterior.dim());
  int n = 0;
  for (int i = 0; i < t; ++i) {
    if (mask && i < static_cast<int>(mask->size()) && (*mask)[static_cast<size_t>(i)] == 0)
      continue;
    acc += posterior.means.row(i).transpose();
    ++n;
  }
  if (n == 0) throw std::invalid_argument("sentence_representation: fully masked input");
  return acc / n;
}

nlohmann::json RetrievalStats::to_json() const {
  return {{"mean_cosine", mean_cosine}, {"top1", top1},  {"top5", top5},
          {"top10", top10},             {"mrr", mrr},    {"queries", queries}};
}

RetrievalStats retrieval_stats(const std::vector<LabeledRep>& reps) {
  std::map<std::string, const LabeledRep*> en_by_group;
  for (const auto& r : reps)
    if (r.lang == "en") en_by_group[r.parallel_id] = &r;

  RetrievalStats stats;
  double sum_cos = 0, sum_rr = 0;
  int hit1 = 0, hit5 = 0, hit10 = 0;
  for (size_t qi = 0; qi < reps.size(); ++qi) {
    const auto& q = reps[qi];
    if (q.lang == "en") continue;
    auto it = en_by_group.find(q.parallel_id);
    if (it == en_by_group.end())
      throw std::invalid_argument("retrieval_stats: no EN partner for group " +
                                  q.parallel_id);
    const LabeledRep* partner = it->second;
    double partner_sim = cosine(q.rep, partner->rep);
    int better = 0;
    for (size_t ci = 0; ci < reps.size(); ++ci) {
      if (ci == qi || &reps[ci] == partner) continue;
      if (cosine(q.rep, reps[ci].rep) > partner_sim) ++better;
    }
    int rank = better + 1;
    sum_cos += partner_sim;
    sum_rr += 1.0 / rank;
    if (rank <= 1) ++hit1;
    if (rank <= 5) ++hit5;
    if (rank <= 10) ++hit10;
    ++stats.queries;
  }
  if (stats.queries == 0) return stats;
  stats.mean_cosine = sum_cos / stats.queries;
  stats.mrr = sum_rr / stats.queries;
  stats.top1 = static_cast<double>(hit1) / stats.queries;
  stats.top5 = static_cast<double>(hit5) / stats.queries;
  stats.top10 = static_cast<double>(hit10) / stats.queries;
  return stats;
}

std::vector<Eigen::VectorXd> pca_project(const std::vector<Eigen::VectorXd>& reps, int k) {
  if (reps.size() < 2) throw std::invalid_argument("pca_project: need >= 2 points");
  const auto n = static_cast<Eigen::Index>(reps.size());
  const Eigen::Index d = reps.front().size();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = reps[static_cast<size_t>(i)].transpose();
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca_project: eigensolver failed");

  // Eigenvalues come back ascending; take the top k and pin each sign by the
  // largest-magnitude coordinate.
  Eigen::MatrixXd basis(d, k);
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(c) = v;
  }

  Eigen::MatrixXd proj = x * basis;
  std::vector<Eigen::VectorXd> out(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<size_t>(i)] = proj.row(i).transpose();
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  j["languages"] = languages;
  j["accuracy"] = accuracy;
  if (!denotation.empty()) j["denotation"] = denotation;
  j["counts"] = counts;
  j["target_mean"] = target_mean;
  j["target_std"] = target_std;
  j["retrieval"] = retrieval.to_json();
  if (!sign_test_vs_baseline.empty()) j["sign_test_vs_baseline"] = sign_test_vs_baseline;
  return j;
}

}  // namespace minotaur
