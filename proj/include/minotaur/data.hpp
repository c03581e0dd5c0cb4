#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "minotaur/eval.hpp"
#include "minotaur/rng.hpp"

namespace minotaur {

enum class Task { Tree, Sql };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

/// One (utterance, logical form) pair. Examples sharing a parallel_id are
/// translations of each other and carry identical label sets.
struct Example {
  std::string id;
  std::string lang;
  std::vector<std::string> tokens;  // raw surface tokens, pre-sentinel
  std::string lf;
  std::string parallel_id;
  std::set<std::string> labels;     // intent/slot names derived from lf
  nlohmann::json extra;             // unknown JSONL fields, kept for round trips
};

struct Corpus {
  std::vector<Example> examples;
  std::vector<std::string> languages;  // ordered, "en" first when present
  Task task = Task::Tree;

  size_t size() const { return examples.size(); }
  std::vector<const Example*> by_lang(const std::string& lang) const;
  void refresh_languages();
};

/// Intent/slot label set referenced by a logical form.
std::set<std::string> lf_labels(const std::string& lf, Task task);

enum class ReorderRule { None, RotateLeft, Reverse };

/// Deterministic surface transform defining one synthetic language: a
/// token-level lexicon bijection (vowel rotation plus suffix), an optional
/// reorder rule, and a table of one-to-many multi-word expansions.
struct LanguageSpec {
  std::string code;
  int vowel_shift = 0;
  std::string suffix;
  ReorderRule reorder = ReorderRule::None;
  std::map<std::string, std::vector<std::string>> expansions;

  std::string map_token(const std::string& token) const;
  bool is_english() const { return vowel_shift == 0 && suffix.empty(); }
};

struct IntentSpec {
  std::string name;
  double weight = 1.0;
  std::vector<std::vector<std::string>> templates;  // "$SLOT" marks a filler
};

struct GeneratorConfig {
  Task task = Task::Tree;
  int num_frames = 2500;
  double train_frac = 0.8, valid_frac = 0.1, test_frac = 0.1;
  uint64_t seed = 1;
  std::vector<LanguageSpec> languages;
  std::vector<IntentSpec> intents;
  std::map<std::string, std::vector<std::string>> slot_fillers;
  // Slots treated as proper nouns: their fillers keep the same surface form
  // in every language (entity names are rarely translated).
  std::set<std::string> verbatim_slots;
  // Fraction of tree-task frames that join two clauses with a conjunction
  // under a compound intent, giving long nested logical forms.
  double compound_fraction = 0.5;

  static GeneratorConfig defaults(Task task);
  static GeneratorConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Instantiates num_frames semantic frames and realizes each in every
/// configured language. Deterministic given the config seed.
Corpus generate_synthetic(const GeneratorConfig& cfg);

/// The fixture database sql-task logical forms execute against. Deterministic
/// from the same config; empty for the tree task.
ToyDatabase synthetic_database(const GeneratorConfig& cfg);

/// Splits by parallel group so every split keeps whole translation groups.
std::array<Corpus, 3> split_corpus(const Corpus& corpus, const GeneratorConfig& cfg);

/// ["Who","left"] -> ["word1","Who","word2","left"]. index_map[i] is the
/// 1-based sentinel number naming raw token i in logical forms.
struct Sentinelized {
  std::vector<std::string> tokens;
  std::vector<int> index_map;
};
Sentinelized sentinelize(const std::vector<std::string>& tokens);
std::vector<std::string> desentinelize(const std::vector<std::string>& augmented);

/// Samples-per-Intent-and-Slot: walks a seeded permutation keeping an example
/// iff some of its labels is still below the rate; stops once every label
/// reaches min(rate, corpus frequency).
std::vector<Example> spis_sample(const Corpus& corpus, const std::string& lang,
                                 int rate, Rng& rng);

/// Uniform sample of ceil(fraction * N) examples of one language.
std::vector<Example> random_sample(const Corpus& corpus, const std::string& lang,
                                   double fraction, Rng& rng);

/// Few-shot training corpus: the full English split plus the sampled target
/// subsets. English partners of sampled examples stay available for parallel
/// batching because the whole English split is retained.
Corpus assemble_fewshot(const Corpus& corpus, const std::vector<Example>& sampled_targets);

Corpus load_jsonl(const std::string& path);
void save_jsonl(const Corpus& corpus, const std::string& path);

/// Token-id mapping with pad/bos/eos/unk specials at fixed low ids.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> ids;

  static constexpr int kPad = 0, kBos = 1, kEos = 2, kUnk = 3;

  static Vocab with_specials();
  int add(const std::string& token);
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens.size()); }
};

/// Source vocabulary covers every language's surface tokens plus sentinels;
/// the target vocabulary is closed over logical-form symbols and sentinels.
std::pair<Vocab, Vocab> build_vocab(const Corpus& corpus);

/// Largest raw token count over the corpus (bounds the sentinel inventory).
int max_source_tokens(const Corpus& corpus);

}  // namespace minotaur
