#pragma once

#include <map>
#include <string>
#include <vector>

#include "minotaur/data.hpp"
#include "minotaur/eval.hpp"
#include "minotaur/model.hpp"
#include "minotaur/training.hpp"

namespace minotaur {

struct EvalOutput {
  EvalReport report;
  std::vector<LabeledRep> reps;              // test-set sentence representations
  std::map<std::string, bool> correct_by_id; // SCIEM outcome per example id
};

/// Beam-decodes the test corpus (z = mu), scores SCIEM per language plus
/// denotation accuracy for sql corpora, and collects sentence representations
/// for the retrieval statistics.
EvalOutput evaluate_model(const ModelParameters& params, const ModelConfig& cfg,
                          const Vocab& src, const Vocab& tgt, const Corpus& test,
                          const ToyDatabase* db = nullptr, int beam_width = 5);

/// Adds per-language sign-test p-values comparing this run with a baseline
/// (paired over shared example ids).
void attach_sign_tests(EvalOutput& run, const EvalOutput& baseline);

/// TSV dumps consumable by any plotting tool.
void write_representation_dump(const std::string& path, const std::vector<LabeledRep>& reps);
void write_pca_dump(const std::string& path, const std::vector<LabeledRep>& reps);

/// Anti-collapse statistics of the trained posterior over a corpus sample.
struct PosteriorHealth {
  double mean_variance = 0;   // batch-mean shared variance
  double mean_token_norm = 0; // mean per-token |mu|
};
PosteriorHealth posterior_health(const ModelParameters& params, const ModelConfig& cfg,
                                 const Vocab& src, const Corpus& corpus,
                                 int max_examples = 64);

}  // namespace minotaur
