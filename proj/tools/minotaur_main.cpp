// Command-line front end: synthetic data generation, few-shot sampling,
// episodic training, evaluation, and the ablation suites, all reproducible
// from (inputs, config, seed).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "minotaur/data.hpp"
#include "minotaur/io_util.hpp"
#include "minotaur/model.hpp"
#include "minotaur/pipeline.hpp"
#include "minotaur/training.hpp"

namespace fs = std::filesystem;
using namespace minotaur;

namespace {

struct Manifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;

  void write(const fs::path& dir) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["input_hashes"] = input_hashes;
    j["outputs"] = outputs;
    j["written_at_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    write_json_file((dir / "manifest.json").string(), j);
  }
};

// Applies a "dotted.path=value" override onto a JSON document.
void apply_set(nlohmann::json& j, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // plain string
  }
  nlohmann::json* node = &j;
  size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? path.npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

Corpus load_split_dir(const fs::path& dir, const std::string& split, Manifest* manifest) {
  std::vector<fs::path> files;
  fs::path single = dir / (split + ".jsonl");
  if (fs::exists(single)) {
    files.push_back(single);
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string name = entry.path().filename().string();
      if (name.rfind(split + ".", 0) == 0 && name.size() > 6 &&
          name.substr(name.size() - 6) == ".jsonl")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty())
    throw std::runtime_error("no " + split + " JSONL files under " + dir.string());

  Corpus merged;
  bool first = true;
  for (const auto& f : files) {
    Corpus c = load_jsonl(f.string());
    if (manifest) manifest->input_hashes[f.string()] = file_hash(f.string());
    if (first) {
      merged = std::move(c);
      first = false;
    } else {
      for (auto& e : c.examples) merged.examples.push_back(std::move(e));
    }
  }
  merged.refresh_languages();
  return merged;
}

nlohmann::json vocab_json(const Vocab& src, const Vocab& tgt) {
  return {{"source", src.tokens}, {"target", tgt.tokens}};
}

std::pair<Vocab, Vocab> vocab_from_json(const nlohmann::json& j) {
  Vocab src, tgt;
  for (const auto& t : j.at("source").get<std::vector<std::string>>()) src.add(t);
  for (const auto& t : j.at("target").get<std::vector<std::string>>()) tgt.add(t);
  return {std::move(src), std::move(tgt)};
}

// Shared by train/ablate: fills vocab sizes and source-length bound so the
// model always covers the corpus it is about to see.
void finalize_model_config(TrainConfig& cfg, const Vocab& src, const Vocab& tgt,
                           int max_raw_tokens) {
  cfg.model.source_vocab_size = src.size();
  cfg.model.target_vocab_size = tgt.size();
  int needed = 2 * max_raw_tokens + 2;
  if (cfg.model.max_source_len < needed) cfg.model.max_source_len = needed;
}

int run_gen_data(const std::string& config_path, const std::string& out,
                 uint64_t seed, bool seed_given, const std::vector<std::string>& sets) {
  nlohmann::json cj = config_path.empty() ? GeneratorConfig::defaults(Task::Tree).to_json()
                                          : read_json_file(config_path);
  for (const auto& s : sets) apply_set(cj, s);
  if (seed_given) cj["seed"] = seed;
  GeneratorConfig cfg = GeneratorConfig::from_json(cj);

  fs::create_directories(out);
  Manifest manifest;
  manifest.command = "gen-data";
  manifest.config = cfg.to_json();
  manifest.seed = cfg.seed;
  if (!config_path.empty())
    manifest.input_hashes[config_path] = file_hash(config_path);

  Corpus corpus = generate_synthetic(cfg);
  auto [train, valid, test] = split_corpus(corpus, cfg);

  const std::array<std::pair<const char*, const Corpus*>, 3> splits = {
      {{"train", &train}, {"valid", &valid}, {"test", &test}}};
  for (const auto& [name, split] : splits) {
    for (const auto& lang : split->languages) {
      Corpus one;
      one.task = split->task;
      for (const auto* e : split->by_lang(lang)) one.examples.push_back(*e);
      one.refresh_languages();
      fs::path path = fs::path(out) / (std::string(name) + "." + lang + ".jsonl");
      save_jsonl(one, path.string());
      manifest.outputs.push_back(path.string());
    }
  }
  if (cfg.task == Task::Sql) {
    ToyDatabase db = synthetic_database(cfg);
    fs::path path = fs::path(out) / "db.json";
    write_json_file(path.string(), db.to_json());
    manifest.outputs.push_back(path.string());
  }
  write_json_file((fs::path(out) / "generator_config.json").string(), cfg.to_json());
  manifest.outputs.push_back((fs::path(out) / "generator_config.json").string());
  manifest.write(out);

  std::cout << "wrote " << manifest.outputs.size() << " files to " << out << "\n";
  return 0;
}

// Few-shot assembly shared between the sample command and ablate.
struct FewshotSplits {
  Corpus train, valid;
  nlohmann::json summary;
};

FewshotSplits make_fewshot(const Corpus& train_full, const Corpus& valid_full,
                           const std::string& method, double rate, uint64_t seed) {
  FewshotSplits out;
  Rng train_rng(seed);
  Rng valid_rng(seed ^ 0x9e3779b9);

  auto sample_lang = [&](const Corpus& corpus, const std::string& lang, Rng& rng) {
    std::vector<Example> picked;
    if (rate <= 0) return picked;
    if (method == "spis")
      picked = spis_sample(corpus, lang, static_cast<int>(rate), rng);
    else
      picked = random_sample(corpus, lang, rate, rng);
    return picked;
  };

  std::vector<Example> train_sampled, valid_sampled;
  for (const auto& lang : train_full.languages) {
    if (lang == "en") continue;
    auto s = sample_lang(train_full, lang, train_rng);
    out.summary["train"][lang] = s.size();
    {
      // Label-coverage audit: minimum count over labels of the full split.
      std::map<std::string, int> count;
      for (const auto& e : s)
        for (const auto& label : e.labels) ++count[label];
      int mn = s.empty() ? 0 : std::numeric_limits<int>::max();
      for (const auto* e : train_full.by_lang(lang))
        for (const auto& label : e->labels) mn = std::min(mn, count[label]);
      out.summary["min_label_count"][lang] = mn == std::numeric_limits<int>::max() ? 0 : mn;
    }
    train_sampled.insert(train_sampled.end(), s.begin(), s.end());
    auto v = sample_lang(valid_full, lang, valid_rng);
    out.summary["valid"][lang] = v.size();
    valid_sampled.insert(valid_sampled.end(), v.begin(), v.end());
  }
  out.train = assemble_fewshot(train_full, train_sampled);
  out.valid = assemble_fewshot(valid_full, valid_sampled);
  out.summary["train"]["en"] = out.train.by_lang("en").size();
  out.summary["valid"]["en"] = out.valid.by_lang("en").size();
  out.summary["method"] = method;
  out.summary["rate"] = rate;
  return out;
}

int run_sample(const std::string& data, const std::string& method, double rate,
               uint64_t seed, const std::string& out) {
  if (method == "spis" && rate != std::floor(rate))
    throw std::invalid_argument("spis rate must be an integer");
  if (method == "random" && (rate < 0 || rate > 1))
    throw std::invalid_argument("random rate must be a fraction in [0, 1]");

  Manifest manifest;
  manifest.command = "sample";
  manifest.seed = seed;
  Corpus train_full = load_split_dir(data, "train", &manifest);
  Corpus valid_full = load_split_dir(data, "valid", &manifest);
  Corpus test_full = load_split_dir(data, "test", &manifest);

  FewshotSplits few = make_fewshot(train_full, valid_full, method, rate, seed);
  manifest.config = few.summary;

  fs::create_directories(out);
  save_jsonl(few.train, (fs::path(out) / "train.jsonl").string());
  save_jsonl(few.valid, (fs::path(out) / "valid.jsonl").string());
  write_json_file((fs::path(out) / "summary.json").string(), few.summary);

  // The vocabulary is built over the whole generated corpus so token ids are
  // stable regardless of which few-shot subset a run trains on.
  Corpus all = train_full;
  for (const auto& e : valid_full.examples) all.examples.push_back(e);
  for (const auto& e : test_full.examples) all.examples.push_back(e);
  all.refresh_languages();
  auto [src, tgt] = build_vocab(all);
  write_json_file((fs::path(out) / "vocab.json").string(), vocab_json(src, tgt));
  nlohmann::json meta = {{"max_raw_tokens", max_source_tokens(all)}};
  write_json_file((fs::path(out) / "corpus_meta.json").string(), meta);

  for (const char* f : {"train.jsonl", "valid.jsonl", "summary.json", "vocab.json",
                        "corpus_meta.json"})
    manifest.outputs.push_back((fs::path(out) / f).string());
  manifest.write(out);

  std::cout << few.summary.dump(2) << "\n";
  return 0;
}

int run_train(const std::string& data, const std::string& config_path, uint64_t seed,
              bool seed_given, const std::string& alignment_flag,
              const std::vector<std::string>& sets, const std::string& out) {
  nlohmann::json cj =
      config_path.empty() ? TrainConfig().to_json() : read_json_file(config_path);
  for (const auto& s : sets) apply_set(cj, s);
  if (seed_given) cj["seed"] = seed;
  if (alignment_flag == "off") {
    cj["alignment"]["alpha_p"] = 0.0;
    cj["alignment"]["beta_p"] = 0.0;
  }
  TrainConfig cfg = TrainConfig::from_json(cj);

  Manifest manifest;
  manifest.command = "train";
  manifest.seed = cfg.seed;
  if (!config_path.empty()) manifest.input_hashes[config_path] = file_hash(config_path);

  Corpus train_corpus = load_split_dir(data, "train", &manifest);
  Corpus valid_corpus = load_split_dir(data, "valid", &manifest);

  Vocab src, tgt;
  fs::path vocab_path = fs::path(data) / "vocab.json";
  int max_raw = 0;
  if (fs::exists(vocab_path)) {
    std::tie(src, tgt) = vocab_from_json(read_json_file(vocab_path.string()));
    manifest.input_hashes[vocab_path.string()] = file_hash(vocab_path.string());
    fs::path meta_path = fs::path(data) / "corpus_meta.json";
    if (fs::exists(meta_path))
      max_raw = read_json_file(meta_path.string()).value("max_raw_tokens", 0);
  } else {
    Corpus all = train_corpus;
    for (const auto& e : valid_corpus.examples) all.examples.push_back(e);
    all.refresh_languages();
    std::tie(src, tgt) = build_vocab(all);
  }
  if (max_raw == 0)
    max_raw = std::max(max_source_tokens(train_corpus), max_source_tokens(valid_corpus));
  finalize_model_config(cfg, src, tgt, max_raw);
  cfg.validate();
  cfg.model.validate();

  fs::create_directories(out);
  manifest.config = cfg.to_json();

  std::ofstream step_log((fs::path(out) / "steps.jsonl").string());
  if (!step_log) throw std::runtime_error("cannot open step log");
  fs::path ckpt_path = fs::path(out) / "checkpoint.ckpt";

  Rng init_rng(cfg.seed);
  ModelParameters init = ModelParameters::init(cfg.model, init_rng);
  TrainResult result = train(
      init, train_corpus, valid_corpus, src, tgt, cfg,
      [&](const StepLog& s) { step_log << s.to_json().dump() << "\n"; },
      [&](const ModelParameters& best, int epoch, double val) {
        (void)epoch;
        (void)val;
        save_checkpoint(ckpt_path.string(), best, cfg.model, src, tgt);
      });
  step_log.close();

  // A run halted before its first validation still leaves a loadable model.
  if (result.best_epoch < 0)
    save_checkpoint(ckpt_path.string(), result.params, cfg.model, src, tgt);

  nlohmann::json vj;
  vj["validation_curve"] = result.validation_curve;
  vj["best_epoch"] = result.best_epoch;
  vj["best_validation"] = result.best_validation;
  vj["total_steps"] = result.total_steps;
  write_json_file((fs::path(out) / "validation.json").string(), vj);
  write_json_file((fs::path(out) / "train_config.json").string(), cfg.to_json());

  for (const char* f :
       {"checkpoint.ckpt", "steps.jsonl", "validation.json", "train_config.json"})
    manifest.outputs.push_back((fs::path(out) / f).string());
  manifest.write(out);

  std::cout << "trained " << result.total_steps << " steps; best validation "
            << result.best_validation << " at epoch " << result.best_epoch << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data,
             const std::string& split, const std::string& db_path,
             const std::string& baseline_path, int beam, const std::string& out) {
  Manifest manifest;
  manifest.command = "eval";
  manifest.input_hashes[checkpoint] = file_hash(checkpoint);

  Checkpoint ck = load_checkpoint(checkpoint);
  Corpus test;
  if (fs::is_directory(data)) {
    test = load_split_dir(data, split, &manifest);
  } else {
    test = load_jsonl(data);
    manifest.input_hashes[data] = file_hash(data);
  }

  ToyDatabase db;
  std::string db_file = db_path;
  if (db_file.empty() && fs::is_directory(data) && fs::exists(fs::path(data) / "db.json"))
    db_file = (fs::path(data) / "db.json").string();
  if (!db_file.empty()) {
    db = ToyDatabase::from_json(read_json_file(db_file));
    manifest.input_hashes[db_file] = file_hash(db_file);
  }
  if (test.task == Task::Sql && db.empty())
    throw std::runtime_error("sql corpus needs a database fixture (--db)");

  EvalOutput eo = evaluate_model(ck.params, ck.config, ck.source_vocab, ck.target_vocab,
                                 test, db.empty() ? nullptr : &db, beam);
  if (!baseline_path.empty()) {
    nlohmann::json bj = read_json_file(baseline_path);
    EvalOutput baseline;
    for (auto it = bj.at("correct_by_id").begin(); it != bj.at("correct_by_id").end(); ++it)
      baseline.correct_by_id[it.key()] = it.value().get<bool>();
    attach_sign_tests(eo, baseline);
    manifest.input_hashes[baseline_path] = file_hash(baseline_path);
  }

  fs::create_directories(out);
  nlohmann::json rj = eo.report.to_json();
  rj["correct_by_id"] = eo.correct_by_id;
  write_json_file((fs::path(out) / "report.json").string(), rj);
  write_representation_dump((fs::path(out) / "reps.tsv").string(), eo.reps);
  write_pca_dump((fs::path(out) / "pca.tsv").string(), eo.reps);

  manifest.config = {{"beam", beam}, {"split", split}};
  for (const char* f : {"report.json", "reps.tsv", "pca.tsv"})
    manifest.outputs.push_back((fs::path(out) / f).string());
  manifest.write(out);

  std::cout << eo.report.to_json().dump(2) << "\n";
  return 0;
}

struct AblationRow {
  std::string name;
  TrainConfig cfg;
};

std::vector<AblationRow> suite_rows(const std::string& suite, const TrainConfig& base) {
  auto with = [&](const std::string& name, IndividualMetric ind, AggregateMetric agg,
                  bool det, bool parallel) {
    AblationRow row{name, base};
    row.cfg.alignment.individual_metric = ind;
    row.cfg.alignment.aggregate_metric = agg;
    row.cfg.model.deterministic_bottleneck = det;
    row.cfg.parallel_alignment = parallel;
    return row;
  };
  if (suite == "table3")
    return {with("kl", IndividualMetric::KL, AggregateMetric::None, false, true),
            with("w2", IndividualMetric::W2, AggregateMetric::None, false, true),
            with("mmd", IndividualMetric::None, AggregateMetric::MMD, false, true),
            with("kl+mmd", IndividualMetric::KL, AggregateMetric::MMD, false, true),
            with("w2+mmd", IndividualMetric::W2, AggregateMetric::MMD, false, true)};
  if (suite == "table4")
    return {with("det-mmd", IndividualMetric::None, AggregateMetric::MMD, true, true),
            with("det-kl", IndividualMetric::KL, AggregateMetric::None, true, true),
            with("det-l2", IndividualMetric::W2, AggregateMetric::None, true, true)};
  if (suite == "nonparallel")
    return {with("dzx-only", IndividualMetric::W2, AggregateMetric::None, false, false),
            with("dz-only", IndividualMetric::None, AggregateMetric::MMD, false, false),
            with("dzx+dz", IndividualMetric::W2, AggregateMetric::MMD, false, false),
            with("parallel-ref", IndividualMetric::W2, AggregateMetric::MMD, false, true)};
  throw std::invalid_argument("unknown suite: " + suite);
}

int run_ablate(const std::string& suite, const std::string& data,
               const std::string& method, double rate, uint64_t seed,
               const std::string& config_path, const std::vector<std::string>& sets,
               const std::string& out) {
  nlohmann::json cj =
      config_path.empty() ? TrainConfig().to_json() : read_json_file(config_path);
  for (const auto& s : sets) apply_set(cj, s);
  cj["seed"] = seed;
  TrainConfig base = TrainConfig::from_json(cj);

  Manifest manifest;
  manifest.command = "ablate";
  manifest.seed = seed;

  Corpus train_full = load_split_dir(data, "train", &manifest);
  Corpus valid_full = load_split_dir(data, "valid", &manifest);
  Corpus test = load_split_dir(data, "test", &manifest);

  Corpus all = train_full;
  for (const auto& e : valid_full.examples) all.examples.push_back(e);
  for (const auto& e : test.examples) all.examples.push_back(e);
  all.refresh_languages();
  auto [src, tgt] = build_vocab(all);
  finalize_model_config(base, src, tgt, max_source_tokens(all));

  // Shared few-shot split and shared init across rows: rows differ only in
  // their alignment configuration.
  FewshotSplits few = make_fewshot(train_full, valid_full, method, rate, seed);
  Rng init_rng(seed);
  ModelParameters init = ModelParameters::init(base.model, init_rng);

  fs::create_directories(out);
  std::vector<AblationRow> rows = suite_rows(suite, base);
  nlohmann::json report;
  report["suite"] = suite;
  report["rows"] = nlohmann::json::array();
  std::vector<std::pair<std::string, EvalOutput>> outputs;

  for (auto& row : rows) {
    row.cfg.validate();
    row.cfg.model.validate();
    TrainResult r = train(init, few.train, few.valid, src, tgt, row.cfg);
    EvalOutput eo = evaluate_model(r.params, row.cfg.model, src, tgt, test, nullptr, 5);
    nlohmann::json rj;
    rj["name"] = row.name;
    rj["accuracy"] = eo.report.accuracy;
    rj["target_mean"] = eo.report.target_mean;
    rj["retrieval"] = eo.report.retrieval.to_json();
    report["rows"].push_back(rj);
    std::cout << suite << " row " << row.name << ": target_mean=" << eo.report.target_mean
              << "\n";
    outputs.emplace_back(row.name, std::move(eo));
  }

  // Pairwise exact sign tests over target-language outcomes.
  report["sign_tests"] = nlohmann::json::array();
  for (size_t i = 0; i < outputs.size(); ++i)
    for (size_t j = i + 1; j < outputs.size(); ++j) {
      std::vector<bool> a, b;
      for (const auto& [id, ok] : outputs[i].second.correct_by_id) {
        if (id.size() >= 3 && id.substr(id.size() - 3) == "-en") continue;
        auto it = outputs[j].second.correct_by_id.find(id);
        if (it == outputs[j].second.correct_by_id.end()) continue;
        a.push_back(ok);
        b.push_back(it->second);
      }
      SignTestResult st = sign_test(a, b);
      report["sign_tests"].push_back({{"a", outputs[i].first},
                                      {"b", outputs[j].first},
                                      {"p", st.p_value},
                                      {"discordant", st.n_discordant}});
    }

  write_json_file((fs::path(out) / "ablation_report.json").string(), report);
  manifest.config = {{"suite", suite}, {"method", method}, {"rate", rate}};
  manifest.outputs.push_back((fs::path(out) / "ablation_report.json").string());
  manifest.write(out);

  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual semantic parsing with explicit latent alignment"};
  app.require_subcommand(1);

  uint64_t seed = 1;
  std::string out, config;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_option("--config", config, "JSON config file");
    cmd->add_option("--set", sets, "dotted-path config overrides key=value");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multilingual corpus");
  add_common(gen);

  auto* sample = app.add_subcommand("sample", "assemble a few-shot training corpus");
  std::string data, method = "random";
  double rate = 0.05;
  sample->add_option("--data", data, "gen-data output directory")->required();
  sample->add_option("--method", method, "spis | random")
      ->check(CLI::IsMember({"spis", "random"}));
  sample->add_option("--rate", rate, "SPIS rate (integer) or random fraction");
  add_common(sample);

  auto* tr = app.add_subcommand("train", "run the episodic training loop");
  std::string alignment_flag = "on";
  tr->add_option("--data", data, "sampled corpus directory")->required();
  tr->add_option("--alignment", alignment_flag, "on | off")
      ->check(CLI::IsMember({"on", "off"}));
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint, db_path, baseline, split = "test";
  int beam = 5;
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--data", data, "corpus directory or JSONL file")->required();
  ev->add_option("--split", split, "split name when --data is a directory");
  ev->add_option("--db", db_path, "database fixture for denotation accuracy");
  ev->add_option("--baseline", baseline, "baseline report.json for sign tests");
  ev->add_option("--beam", beam, "beam width");
  add_common(ev);

  auto* ab = app.add_subcommand("ablate", "run an ablation suite");
  std::string suite;
  ab->add_option("--suite", suite, "table3 | table4 | nonparallel")
      ->required()
      ->check(CLI::IsMember({"table3", "table4", "nonparallel"}));
  ab->add_option("--data", data, "gen-data output directory")->required();
  ab->add_option("--method", method, "spis | random")
      ->check(CLI::IsMember({"spis", "random"}));
  ab->add_option("--rate", rate, "few-shot sampling rate");
  add_common(ab);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return run_gen_data(config, out, seed, gen->count("--seed") > 0, sets);
    if (sample->parsed()) return run_sample(data, method, rate, seed, out);
    if (tr->parsed())
      return run_train(data, config, seed, tr->count("--seed") > 0, alignment_flag, sets,
                       out);
    if (ev->parsed())
      return run_eval(checkpoint, data, split, db_path, baseline, beam, out);
    if (ab->parsed())
      return run_ablate(suite, data, method, rate, seed, config, sets, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
