// Copyright 2026 The mtal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "mtal/cli.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "CLI11.hpp"
#include "mtal/alloop.h"
#include "mtal/corpus.h"
#include "mtal/error.h"
#include "mtal/eval.h"
#include "mtal/query.h"
#include "mtal/service.h"
#include "mtal/synthetic.h"
#include "mtal/tagger.h"

#ifndef MTAL_VERSION
#define MTAL_VERSION "unknown"
#endif

namespace mtal::cli {
namespace fs = std::filesystem;
namespace {

// Thread-safe line logger shared by grid workers.
class Logger {
 public:
  explicit Logger(std::ostream& out) : out_(out) {}
  void Line(const std::string& line) {
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line << std::endl;
  }

 private:
  std::ostream& out_;
  std::mutex mu_;
};

std::string Format(const char* fmt, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), fmt, value);
  return buffer;
}

std::string Timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc;
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

// ---------------------------------------------------------------------------
// Configuration records.

Json ToJson(const al::ALConfig& c) {
  return Json{{"scenario", std::string(al::ScenarioName(c.scenario))},
              {"strategy", std::string(query::StrategyName(c.strategy))},
              {"rounds", c.rounds},
              {"batch_size", c.effective_batch()},
              {"seed_fraction", c.effective_seed_fraction()},
              {"epochs_per_round", c.effective_epochs()},
              {"retrain_from_scratch", c.retrain_from_scratch},
              {"reset_optimizer", c.reset_optimizer},
              {"patience", c.patience},
              {"evaluate_test", c.evaluate_test},
              {"rng_seed", c.rng_seed}};
}

al::ALConfig AlConfigFromJson(const Json& j, const TrainConfig& train) {
  al::ALConfig c;
  c.scenario = al::ParseScenario(j.at("scenario").get<std::string>());
  c.strategy = query::ParseStrategy(j.at("strategy").get<std::string>());
  c.rounds = j.at("rounds");
  c.batch_size = j.at("batch_size");
  c.seed_fraction = j.at("seed_fraction");
  c.epochs_per_round = j.at("epochs_per_round");
  c.retrain_from_scratch = j.at("retrain_from_scratch");
  c.reset_optimizer = j.at("reset_optimizer");
  c.patience = j.at("patience");
  c.evaluate_test = j.at("evaluate_test");
  c.rng_seed = j.at("rng_seed");
  c.train = train;
  return c;
}

bool NeedsEntityHead(query::Strategy s) {
  return s == query::Strategy::kTokenEntropy ||
         s == query::Strategy::kRankCombination ||
         s == query::Strategy::kRandomTask;
}

// ---------------------------------------------------------------------------
// Data preparation.

// Corpus with vocabularies from the train split plus the pretrained word
// table, shared read-only by every model built for one split.
struct Prepared {
  Corpus corpus;
  std::optional<Matrix> embeddings;
};

Prepared Prepare(const Corpus& raw, const Splits& splits,
                 const ModelConfig& model, const EmbeddingConfig& embedding) {
  const std::unordered_set<std::string> train(splits.train.begin(),
                                              splits.train.end());
  Prepared p{BuildVocab(raw, train), std::nullopt};
  if (embedding.enabled) {
    const std::vector<const Sentence*> sentences =
        Select(p.corpus, splits.train);
    p.embeddings = PretrainWordEmbeddings(sentences, p.corpus.word_vocab,
                                          model.word_dim, embedding);
  }
  return p;
}

al::ModelFactory Factory(const Prepared& p, const ModelConfig& model) {
  return [&p, model] {
    TaggerModel m(model, p.corpus.word_vocab, p.corpus.char_vocab);
    if (p.embeddings) m.SetWordEmbeddings(*p.embeddings);
    return m;
  };
}

struct Parts {
  ModelConfig model;
  TrainConfig train;
  EmbeddingConfig embedding;
  SplitSpec split;
};

Parts PartsOf(const Json& config) {
  return Parts{ModelConfigFromJson(config.at("model")),
               TrainConfigFromJson(config.at("train")),
               EmbeddingConfigFromJson(config.at("embedding")),
               SplitSpecFromJson(config.at("split"))};
}

// ---------------------------------------------------------------------------
// Runs.

struct RunSummary {
  std::string name;
  std::vector<al::RoundLog> rounds;  // empty for passive runs
  std::optional<eval::SpanMatchReport> test;
  int labeled = 0;
};

void WriteSummary(const std::string& dir, const RunSummary& s,
                  const Json& extra) {
  Json out = extra;
  out["labeled"] = s.labeled;
  if (s.test) out["test"] = mtal::ToJson(*s.test);
  WriteFileAtomic(dir + "/summary.json", out.dump(1) + "\n");
}

RunSummary RunAlOn(const Corpus& raw, const Splits& splits, const Json& config,
                   const std::string& dir, Logger& log,
                   const std::string& name) {
  const Parts parts = PartsOf(config);
  const al::ALConfig al = AlConfigFromJson(config.at("al"), parts.train);
  const Prepared prepared = Prepare(raw, splits, parts.model, parts.embedding);
  query::ScoreOptions score;
  score.threads = config.value("threads", 1);
  al::TaggerLearner learner(Factory(prepared, parts.model), parts.train, score);
  al::RunOutput output;
  output.dir = dir;
  output.save_scores = config.value("save_scores", false);
  output.on_round = [&](const al::RoundLog& r) {
    log.Line(name + " round " + std::to_string(r.round) + " labeled " +
             std::to_string(r.labeled) + " dev_f1 " +
             Format("%.4f", r.dev.f1) +
             (r.test ? " test_f1 " + Format("%.4f", r.test->f1) : ""));
  };
  const al::ALResult result =
      al::RunAl(prepared.corpus, splits, learner, al, output);
  RunSummary s{name, result.rounds, result.final_test,
               result.rounds.back().labeled};
  std::ostringstream curve;
  al::EmitLearningCurve(curve, {{name, result.rounds}});
  WriteFileAtomic(dir + "/learning_curve.csv", curve.str());
  WriteSummary(dir, s,
               Json{{"kind", "al"},
                    {"rounds", result.rounds.size() - 1},
                    {"best_round", result.best_round},
                    {"early_stopped", result.early_stopped}});
  return s;
}

RunSummary RunPassiveOn(const Corpus& raw, const Splits& splits,
                        const Json& config, const std::string& dir,
                        Logger& log, const std::string& name) {
  const Parts parts = PartsOf(config);
  const Prepared prepared = Prepare(raw, splits, parts.model, parts.embedding);
  const al::PassiveResult result =
      al::RunPassive(prepared.corpus, splits,
                     Factory(prepared, parts.model)(), parts.train, dir);
  for (const EpochLog& e : result.train.log) {
    log.Line(name + " epoch " + std::to_string(e.epoch) + " dev_f1 " +
             Format("%.4f", e.dev.f1));
  }
  RunSummary s{name, {}, result.test, static_cast<int>(splits.train.size())};
  WriteSummary(dir, s,
               Json{{"kind", "passive"},
                    {"best_epoch", result.train.best_epoch},
                    {"early_stopped", result.train.early_stopped}});
  return s;
}

using RunFn = RunSummary (*)(const Corpus&, const Splits&, const Json&,
                             const std::string&, Logger&, const std::string&);

// K-fold cross-validation over train plus test with the dev split fixed.
void RunFolds(const Corpus& raw, const Json& config, const std::string& dir,
              Logger& log, RunFn run) {
  const SplitSpec spec = SplitSpecFromJson(config.at("split"));
  const Splits base = SplitCorpus(raw, spec);
  std::vector<std::string> ids = base.train;
  ids.insert(ids.end(), base.test.begin(), base.test.end());
  const int k = config.at("folds");
  const auto folds = eval::MakeFolds(ids, k, config.at("fold_seed"));
  std::ostringstream cv;
  cv << "fold,precision,recall,f1\n";
  for (int f = 0; f < k; ++f) {
    Splits s;
    s.dev = base.dev;
    s.test = folds[f];
    for (int g = 0; g < k; ++g) {
      if (g != f) s.train.insert(s.train.end(), folds[g].begin(), folds[g].end());
    }
    const int n_seed = SeedLabeledSize(static_cast<int>(s.train.size()),
                                       spec.seed_labeled_fraction);
    s.seed_labeled.assign(s.train.begin(), s.train.begin() + n_seed);
    s.pool.assign(s.train.begin() + n_seed, s.train.end());
    const std::string fold_dir = dir + "/fold_" + std::to_string(f);
    fs::create_directories(fold_dir);
    const RunSummary r =
        run(raw, s, config, fold_dir, log, "fold" + std::to_string(f));
    const eval::Prf prf = r.test ? r.test->overall : eval::Prf{};
    cv << f << ',' << Format("%.10g", prf.precision) << ','
       << Format("%.10g", prf.recall) << ',' << Format("%.10g", prf.f1)
       << '\n';
  }
  WriteFileAtomic(dir + "/cv.csv", cv.str());
}

// Rows of the reference comparison: single-task and multi-task models,
// passive and active, under both initial labeled fractions.
struct Preset {
  std::string name;
  std::string task;
  std::string active;
  std::string data;
  bool multi_task;
  std::optional<al::Scenario> scenario;  // empty for passive rows
  query::Strategy strategy = query::Strategy::kRandom;
};

std::vector<Preset> Table2Presets() {
  using al::Scenario;
  using query::Strategy;
  return {
      {"srl-full", "SRL", "-", "100", false, std::nullopt},
      {"srl-random-50", "SRL", "Random", "50", false, Scenario::k50_50,
       Strategy::kRandom},
      {"srl-random-85", "SRL", "Random", "85", false, Scenario::k85_15,
       Strategy::kRandom},
      {"srl-uncertain-50", "SRL", "Uncertain", "50", false, Scenario::k50_50,
       Strategy::kViterbi},
      {"srl-uncertain-85", "SRL", "Uncertain", "85", false, Scenario::k85_15,
       Strategy::kViterbi},
      {"mt-full", "SRL+ER", "-", "100", true, std::nullopt},
      {"mt-randtask-50", "SRL+ER", "RandTask", "50", true, Scenario::k50_50,
       Strategy::kRandomTask},
      {"mt-randtask-85", "SRL+ER", "RandTask", "85", true, Scenario::k85_15,
       Strategy::kRandomTask},
      {"mt-ranking-50", "SRL+ER", "Ranking", "50", true, Scenario::k50_50,
       Strategy::kRankCombination},
      {"mt-ranking-85", "SRL+ER", "Ranking", "85", true, Scenario::k85_15,
       Strategy::kRankCombination},
  };
}

Json PresetConfig(const Json& base, const Preset& p) {
  Json c = base;
  c.erase("grid");
  c["model"]["multi_task"] = p.multi_task;
  if (p.scenario) {
    al::ALConfig al = AlConfigFromJson(c.at("al"), TrainConfig());
    al.scenario = *p.scenario;
    al.strategy = p.strategy;
    c["al"] = ToJson(al);
    c["split"]["seed_labeled_fraction"] = al.effective_seed_fraction();
  }
  return c;
}

void RunGrid(const Corpus& raw, const Json& config, const std::string& dir,
             Logger& log) {
  const std::vector<Preset> presets = Table2Presets();
  std::vector<std::optional<RunSummary>> results(presets.size());
  std::vector<std::exception_ptr> errors(presets.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < presets.size(); i = next++) {
      const Preset& p = presets[i];
      try {
        const Json c = PresetConfig(config, p);
        const std::string run_dir = dir + "/" + p.name;
        fs::create_directories(run_dir);
        const Splits splits = SplitCorpus(raw, SplitSpecFromJson(c.at("split")));
        results[i] = p.scenario ? RunAlOn(raw, splits, c, run_dir, log, p.name)
                                : RunPassiveOn(raw, splits, c, run_dir, log,
                                               p.name);
        log.Line(p.name + " done");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, config.value("jobs", 1));
  std::vector<std::thread> threads;
  for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ostringstream table;
  table << "run,task,active,data,labeled,precision,recall,f1\n";
  std::vector<std::pair<std::string, std::vector<al::RoundLog>>> curves;
  for (size_t i = 0; i < presets.size(); ++i) {
    const Preset& p = presets[i];
    const RunSummary& r = *results[i];
    const eval::Prf prf = r.test ? r.test->overall : eval::Prf{};
    table << p.name << ',' << p.task << ',' << p.active << ',' << p.data << ','
          << r.labeled << ',' << Format("%.4f", 100 * prf.precision) << ','
          << Format("%.4f", 100 * prf.recall) << ','
          << Format("%.4f", 100 * prf.f1) << '\n';
    if (!r.rounds.empty()) curves.emplace_back(p.name, r.rounds);
  }
  WriteFileAtomic(dir + "/summary.csv", table.str());
  std::ostringstream curve;
  al::EmitLearningCurve(curve, curves);
  WriteFileAtomic(dir + "/learning_curve.csv", curve.str());
  log.Line(table.str());
}

void ExecuteLoaded(const std::string& command, const Json& config,
                   const Corpus& raw, const std::string& out_dir,
                   std::ostream& out) {
  Logger log(out);
  if (command == "train" || command == "al") {
    const RunFn run = command == "train" ? RunPassiveOn : RunAlOn;
    if (config.value("grid", std::string()) == "table2") {
      RunGrid(raw, config, out_dir, log);
    } else if (config.value("folds", 0) >= 2) {
      RunFolds(raw, config, out_dir, log, run);
    } else {
      const Splits splits = SplitCorpus(raw, SplitSpecFromJson(config.at("split")));
      for (const std::string& w : splits.warnings) log.Line("warning: " + w);
      const RunSummary s = run(raw, splits, config, out_dir, log, command);
      if (s.test) log.Line("test f1 " + Format("%.4f", s.test->overall.f1));
    }
    return;
  }
  throw Error(ErrorCode::kInvalidConfig, "cannot execute '" + command + "'");
}

Corpus LoadData(const Json& config) {
  return ParseCorpusFile(config.at("data").get<std::string>(),
                         TagSet::DefaultSrl(), TagSet::DefaultEr());
}

void RunDatagen(const Json& config, const std::string& path) {
  const SyntheticConfig synthetic =
      SyntheticConfigFromJson(config.at("synthetic"));
  const Corpus corpus =
      GenerateSynthetic(synthetic, config.at("seed").get<uint64_t>());
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  WriteFileAtomic(path, SerializeCorpus(corpus, TagSet::DefaultSrl(),
                                        TagSet::DefaultEr()));
}

// ---------------------------------------------------------------------------
// Run directories and manifests.

std::string OutputRoot() {
  const char* root = std::getenv("MTAL_OUT_ROOT");
  return root != nullptr && *root != '\0' ? root : "runs";
}

std::string FreshDir(const std::string& base) {
  std::string dir = base;
  for (int i = 2; fs::exists(dir); ++i) dir = base + "-" + std::to_string(i);
  return dir;
}

void CreateRunDir(const std::string& dir) {
  if (fs::exists(fs::path(dir) / "manifest.json")) {
    throw Error(ErrorCode::kInvalidConfig,
                "refusing to overwrite the run in " + dir);
  }
  fs::create_directories(dir);
}

Json Manifest(const std::string& command, const Json& config,
              const std::string& out_dir, const std::vector<std::string>& argv,
              const std::string& seed_source) {
  return Json{{"command", command},
              {"version", VersionString()},
              {"created", Timestamp()},
              {"argv", argv},
              {"seed", config.at("seed")},
              {"seed_source", seed_source},
              {"out", out_dir},
              {"config", config}};
}

void WriteManifest(const std::string& path, const Json& manifest) {
  WriteFileAtomic(path, manifest.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Flag handling.

struct Seeds {
  uint64_t seed = 0;
  std::string source;  // "flag" or "random"
};

Seeds ResolveSeed(const CLI::Option* flag, uint64_t value) {
  if (flag->count() > 0) return {value, "flag"};
  std::random_device device;
  return {device(), "random"};
}

// Flags shared by the model-training subcommands.
struct ModelFlags {
  std::string data;
  std::string out;
  uint64_t seed = 0;
  CLI::Option* seed_flag = nullptr;
  bool desk = false;
  bool single_task = false;
  bool no_pretrain = false;
  bool freeze = false;
  bool crf_boundaries = false;
  int encoder_layers = 2;
  CLI::Option* layers_flag = nullptr;
  int hidden = 0;
  CLI::Option* hidden_flag = nullptr;
  int epochs = 10;
  int minibatch = 32;
  double dropout = 0;
  CLI::Option* dropout_flag = nullptr;
  int threads = 1;

  void Register(CLI::App* app) {
    app->add_option("--data", data, "Corpus file (4-column TSV)")
        ->required();
    app->add_option("--out", out, "Run directory");
    seed_flag = app->add_option("--seed", seed, "Master random seed");
    app->add_flag("--desk", desk, "Small model for quick runs");
    app->add_flag("--single-task", single_task, "Drop the entity head");
    app->add_flag("--no-pretrain-embeddings", no_pretrain,
                  "Start word vectors from random values");
    app->add_flag("--freeze-embeddings", freeze,
                  "Keep word vectors fixed during training");
    app->add_flag("--crf-boundaries", crf_boundaries,
                  "Learn start and end transition scores");
    layers_flag = app->add_option("--encoder-layers", encoder_layers,
                                  "Highway BiLSTM depth")
                      ->check(CLI::Range(1, 8));
    hidden_flag = app->add_option("--hidden", hidden, "LSTM units per direction")
                      ->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Maximum training epochs")
        ->check(CLI::PositiveNumber);
    app->add_option("--minibatch", minibatch, "Sentences per update")
        ->check(CLI::PositiveNumber);
    dropout_flag = app->add_option("--dropout", dropout)->check(CLI::Range(0.0, 0.95));
    app->add_option("--threads", threads, "Pool scoring threads")
        ->check(CLI::PositiveNumber);
  }

  // Returns the base config shared by train, al and serve.
  Json Resolve(const Seeds& seeds) const {
    Rng root(seeds.seed);
    ModelConfig model = desk ? ModelConfig::Desk() : ModelConfig();
    if (layers_flag->count()) model.encoder_layers = encoder_layers;
    if (hidden_flag->count()) model.hidden_units = hidden;
    if (dropout_flag->count()) model.dropout = dropout;
    model.multi_task = !single_task;
    model.crf_boundaries = crf_boundaries;
    model.rng_seed = root.Fork();
    model.Validate();
    TrainConfig train;
    train.max_epochs = epochs;
    train.batch_size = minibatch;
    train.freeze_word_embeddings = freeze;
    train.rng_seed = root.Fork();
    train.Validate();
    EmbeddingConfig embedding;
    embedding.enabled = !no_pretrain;
    embedding.rng_seed = root.Fork();
    SplitSpec split;
    split.rng_seed = seeds.seed;
    return Json{{"data", fs::absolute(data).string()},
                {"seed", seeds.seed},
                {"model", mtal::ToJson(model)},
                {"train", mtal::ToJson(train)},
                {"embedding", mtal::ToJson(embedding)},
                {"split", mtal::ToJson(split)},
                {"threads", threads},
                {"derived_seed", root.Fork()}};
  }
};

std::vector<double> ReadCvF1(const std::string& dir) {
  const std::string path = dir + "/cv.csv";
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIo, path + " not found; rerun with --folds K");
  }
  std::istringstream in(ReadFile(path));
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> f1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t comma = line.rfind(',');
    f1.push_back(std::stod(line.substr(comma + 1)));
  }
  return f1;
}

int RunEval(const std::string& a, const std::string& b, double alpha,
            std::ostream& out) {
  for (const auto& [name, dir] : {std::pair{"A", a}, std::pair{"B", b}}) {
    out << "== " << name << ": " << dir << " ==\n";
    const std::string report = dir + "/test_report.txt";
    if (fs::exists(report)) out << ReadFile(report);
  }
  const std::vector<double> fa = ReadCvF1(a);
  const std::vector<double> fb = ReadCvF1(b);
  if (fa.size() != fb.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "runs have different fold counts");
  }
  double mean_a = 0, mean_b = 0;
  for (size_t i = 0; i < fa.size(); ++i) {
    out << "fold " << i << " f1 A=" << Format("%.4f", fa[i])
        << " B=" << Format("%.4f", fb[i]) << '\n';
    mean_a += fa[i] / fa.size();
    mean_b += fb[i] / fb.size();
  }
  const eval::TTestResult t = eval::PairedTTest(fa, fb, alpha);
  out << "verdict: mean f1 A=" << Format("%.4f", mean_a)
      << " B=" << Format("%.4f", mean_b) << " t=" << Format("%.4f", t.t_statistic)
      << " df=" << t.degrees_of_freedom << " p=" << Format("%.4g", t.p_value)
      << " -> "
      << (t.degenerate ? "degenerate (constant nonzero differences)"
          : t.significant ? "significant"
                          : "not significant")
      << " at alpha=" << Format("%g", alpha) << '\n';
  return kExitOk;
}

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

}  // namespace

std::string VersionString() { return MTAL_VERSION; }

void Execute(const std::string& command, const Json& config,
             const std::string& out_dir, std::ostream& log) {
  if (command == "datagen") {
    RunDatagen(config, out_dir);
    return;
  }
  const Corpus raw = LoadData(config);
  fs::create_directories(out_dir);
  ExecuteLoaded(command, config, raw, out_dir, log);
}

int Main(const std::vector<std::string>& args, std::ostream& out,
         std::ostream& err) {
  CLI::App app{"Multi-task active learning for semantic role labeling",
               "mtal"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VersionString());

  // datagen
  CLI::App* datagen = app.add_subcommand("datagen", "Write a synthetic corpus");
  int count = 1000;
  double noise = 0.05;
  double multi_clause = 0.15;
  std::string datagen_out;
  uint64_t datagen_seed = 0;
  datagen->add_option("--count", count)->check(CLI::NonNegativeNumber);
  datagen->add_option("--noise", noise, "Per-token typo rate")
      ->check(CLI::Range(0.0, 1.0));
  datagen->add_option("--multi-clause", multi_clause)
      ->check(CLI::Range(0.0, 1.0));
  CLI::Option* datagen_seed_flag = datagen->add_option("--seed", datagen_seed);
  datagen->add_option("--out", datagen_out, "Output corpus file")->required();

  // train
  CLI::App* train = app.add_subcommand("train", "Supervised training");
  ModelFlags train_flags;
  train_flags.Register(train);
  int train_patience = 3;
  int train_folds = 0;
  train->add_option("--patience", train_patience, "Early-stopping patience")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--folds", train_folds, "Cross-validation folds");

  // al
  CLI::App* al_cmd = app.add_subcommand("al", "Simulated active learning");
  ModelFlags al_flags;
  al_flags.Register(al_cmd);
  std::string scenario = "85:15";
  std::string strategy = "rank";
  std::string grid;
  int rounds = 10, batch = 0, patience = 3, epochs_per_round = 0, jobs = 1,
      al_folds = 0;
  double seed_fraction = 0;
  bool from_scratch = false, reset_optimizer = false, save_scores = false,
       no_test = false;
  CLI::Option* scenario_flag =
      al_cmd->add_option("--scenario", scenario, "50:50, 85:15 or custom")
          ->check(CLI::IsMember({"50:50", "85:15", "custom"}));
  CLI::Option* strategy_flag =
      al_cmd->add_option("--strategy", strategy)
          ->check(CLI::IsMember({"random", "te", "ve", "rank", "random-task"}));
  al_cmd->add_option("--rounds", rounds)->check(CLI::PositiveNumber);
  CLI::Option* batch_flag =
      al_cmd->add_option("--batch", batch, "Query size (custom scenario)")
          ->check(CLI::PositiveNumber);
  CLI::Option* fraction_flag =
      al_cmd->add_option("--seed-fraction", seed_fraction,
                         "Initial labeled fraction (custom scenario)")
          ->check(CLI::Range(0.0, 1.0));
  al_cmd->add_option("--patience", patience, "Rounds without dev gain; 0 off")
      ->check(CLI::NonNegativeNumber);
  al_cmd->add_option("--epochs-per-round", epochs_per_round)
      ->check(CLI::NonNegativeNumber);
  al_cmd->add_flag("--retrain-from-scratch", from_scratch);
  al_cmd->add_flag("--reset-optimizer", reset_optimizer);
  al_cmd->add_flag("--save-scores", save_scores,
                   "Write per-round pool scores");
  al_cmd->add_flag("--no-test", no_test, "Skip per-round test evaluation");
  CLI::Option* grid_flag =
      al_cmd->add_option("--grid", grid, "Named scenario grid")
          ->check(CLI::IsMember({"table2"}));
  al_cmd->add_option("--jobs", jobs, "Parallel grid workers")
      ->check(CLI::PositiveNumber);
  al_cmd->add_option("--folds", al_folds, "Cross-validation folds");

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "Compare two run directories");
  std::string run_a, run_b;
  double alpha = 0.05;
  eval_cmd->add_option("--a", run_a)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--b", run_b)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--alpha", alpha)->check(CLI::Range(0.0, 1.0));

  // serve
  CLI::App* serve = app.add_subcommand("serve", "Annotation service");
  ModelFlags serve_flags;
  serve_flags.Register(serve);
  std::string host = "127.0.0.1", ui;
  int port = 8080, serve_batch = 10, epochs_per_retrain = 1, auto_retrain = 0;
  double serve_fraction = 0.5;
  std::string serve_strategy = "rank";
  bool simulated = false, serve_scratch = false;
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--ui", ui, "Directory with the built UI bundle")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--batch", serve_batch)->check(CLI::PositiveNumber);
  serve->add_option("--strategy", serve_strategy)
      ->check(CLI::IsMember({"random", "te", "ve", "rank", "random-task"}));
  serve->add_option("--seed-fraction", serve_fraction)
      ->check(CLI::Range(0.0, 1.0));
  serve->add_option("--epochs-per-retrain", epochs_per_retrain)
      ->check(CLI::PositiveNumber);
  serve->add_option("--auto-retrain", auto_retrain,
                    "Retrain after this many new labels; 0 off")
      ->check(CLI::NonNegativeNumber);
  serve->add_flag("--retrain-from-scratch", serve_scratch);
  serve->add_flag("--simulated", simulated, "Keep gold tags for oracle rounds");

  // replay
  CLI::App* replay = app.add_subcommand("replay", "Re-run a recorded manifest");
  std::string replay_path, replay_out;
  replay->add_option("manifest", replay_path, "Run directory or manifest.json")
      ->required();
  replay->add_option("--out", replay_out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto usage = [&](CLI::App* sub, const std::string& message) {
    err << "error: " << message << "\nrun 'mtal " << sub->get_name()
        << " --help' for usage\n";
    return kExitUsage;
  };

  try {
    if (datagen->parsed()) {
      const Seeds seeds = ResolveSeed(datagen_seed_flag, datagen_seed);
      SyntheticConfig synthetic;
      synthetic.count = count;
      synthetic.noise_rate = noise;
      synthetic.multi_clause_rate = multi_clause;
      const Json config{{"seed", seeds.seed},
                        {"synthetic", mtal::ToJson(synthetic)}};
      RunDatagen(config, datagen_out);
      WriteManifest(datagen_out + ".manifest.json",
                    Manifest("datagen", config, datagen_out, args,
                             seeds.source));
      out << "wrote " << count << " sentences to " << datagen_out << " (seed "
          << seeds.seed << ")\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) return RunEval(run_a, run_b, alpha, out);

    if (replay->parsed()) {
      const fs::path path = fs::is_directory(replay_path)
                                ? fs::path(replay_path) / "manifest.json"
                                : fs::path(replay_path);
      const Json manifest = Json::parse(ReadFile(path.string()));
      const std::string command = manifest.at("command");
      const Json& config = manifest.at("config");
      if (command == "datagen") {
        const std::string target =
            replay_out.empty() ? manifest.at("out").get<std::string>() + ".replay"
                               : replay_out;
        RunDatagen(config, target);
        out << "replayed into " << target << '\n';
        return kExitOk;
      }
      if (command != "train" && command != "al") {
        throw Error(ErrorCode::kInvalidConfig,
                    "'" + command + "' runs cannot be replayed");
      }
      const Corpus raw = LoadData(config);
      const std::string dir =
          replay_out.empty()
              ? FreshDir(manifest.at("out").get<std::string>() + "-replay")
              : replay_out;
      CreateRunDir(dir);
      Json m = Manifest(command, config, dir, args, "replay");
      m["replay_of"] = fs::absolute(path).string();
      WriteManifest(dir + "/manifest.json", m);
      out << "run directory " << dir << '\n';
      ExecuteLoaded(command, config, raw, dir, out);
      return kExitOk;
    }

    if (train->parsed() || al_cmd->parsed()) {
      const bool is_al = al_cmd->parsed();
      CLI::App* sub = is_al ? al_cmd : train;
      ModelFlags& flags = is_al ? al_flags : train_flags;
      const Seeds seeds = ResolveSeed(flags.seed_flag, flags.seed);
      Json config = flags.Resolve(seeds);
      const int folds = is_al ? al_folds : train_folds;
      if (folds == 1 || folds < 0) return usage(sub, "--folds must be >= 2");
      config["folds"] = folds;
      config["fold_seed"] = config["derived_seed"];
      std::string suffix;
      if (!is_al) {
        TrainConfig t = TrainConfigFromJson(config["train"]);
        t.patience = train_patience;
        config["train"] = mtal::ToJson(t);
        suffix = flags.single_task ? "srl" : "mt";
      } else {
        const bool custom_flags = batch_flag->count() || fraction_flag->count();
        if (grid_flag->count()) {
          if (scenario_flag->count() || strategy_flag->count() || custom_flags ||
              al_folds > 0 || flags.single_task) {
            return usage(sub,
                         "--grid fixes scenario, strategy, batch and task; "
                         "drop those flags");
          }
          config["grid"] = grid;
          config["jobs"] = jobs;
        }
        if (custom_flags && !scenario_flag->count()) scenario = "custom";
        if (custom_flags && scenario != "custom") {
          return usage(sub, "--batch and --seed-fraction need --scenario custom");
        }
        if (scenario == "custom" && !(batch_flag->count() && fraction_flag->count())) {
          return usage(sub, "--scenario custom needs --batch and --seed-fraction");
        }
        const query::Strategy s = query::ParseStrategy(strategy);
        if (flags.single_task && NeedsEntityHead(s)) {
          return usage(sub, "--strategy " + strategy +
                                " needs the entity head; drop --single-task");
        }
        al::ALConfig al;
        al.scenario = al::ParseScenario(scenario);
        al.strategy = s;
        al.rounds = rounds;
        al.batch_size = batch;
        al.seed_fraction = seed_fraction;
        al.epochs_per_round = epochs_per_round;
        al.retrain_from_scratch = from_scratch;
        al.reset_optimizer = reset_optimizer;
        al.patience = patience;
        al.evaluate_test = !no_test;
        al.rng_seed = config["derived_seed"];
        al.train = TrainConfigFromJson(config["train"]);
        al.Validate();
        config["al"] = ToJson(al);
        config["split"]["seed_labeled_fraction"] = al.effective_seed_fraction();
        config["save_scores"] = save_scores;
        suffix = grid.empty() ? std::string(al::ScenarioName(al.scenario)) + "-" +
                                    strategy
                              : grid;
        std::replace(suffix.begin(), suffix.end(), ':', '-');
      }
      // Load before creating anything so a bad --data leaves no run behind.
      const Corpus raw = LoadData(config);
      const std::string dir =
          flags.out.empty()
              ? FreshDir(OutputRoot() + "/" + sub->get_name() + "-" + suffix +
                         "-s" + std::to_string(seeds.seed))
              : flags.out;
      CreateRunDir(dir);
      WriteManifest(dir + "/manifest.json",
                    Manifest(sub->get_name(), config, dir, args, seeds.source));
      out << "run directory " << dir << " (seed " << seeds.seed
          << (seeds.source == "random" ? ", chosen at random" : "") << ")\n";
      ExecuteLoaded(sub->get_name(), config, raw, dir, out);
      return kExitOk;
    }

    if (serve->parsed()) {
      const Seeds seeds = ResolveSeed(serve_flags.seed_flag, serve_flags.seed);
      Json config = serve_flags.Resolve(seeds);
      const query::Strategy s = query::ParseStrategy(serve_strategy);
      if (serve_flags.single_task && NeedsEntityHead(s)) {
        return usage(serve, "--strategy " + serve_strategy +
                                " needs the entity head; drop --single-task");
      }
      config["split"]["seed_labeled_fraction"] = serve_fraction;
      config["service"] = {{"strategy", serve_strategy},
                           {"batch", serve_batch},
                           {"epochs_per_retrain", epochs_per_retrain},
                           {"auto_retrain", auto_retrain},
                           {"retrain_from_scratch", serve_scratch},
                           {"simulated", simulated}};
      const Corpus raw = LoadData(config);
      const std::string dir = serve_flags.out.empty()
                                  ? OutputRoot() + "/serve-s" +
                                        std::to_string(seeds.seed)
                                  : serve_flags.out;
      fs::create_directories(dir);
      // A restart reuses the directory and its original manifest.
      if (!fs::exists(dir + "/manifest.json")) {
        WriteManifest(dir + "/manifest.json",
                      Manifest("serve", config, dir, args, seeds.source));
      }
      const Parts parts = PartsOf(config);
      const Splits splits = SplitCorpus(raw, parts.split);
      const Prepared prepared =
          Prepare(raw, splits, parts.model, parts.embedding);
      service::ServiceConfig sc;
      sc.run_dir = dir;
      sc.default_strategy = s;
      sc.default_batch = serve_batch;
      sc.train = parts.train;
      sc.epochs_per_retrain = epochs_per_retrain;
      sc.retrain_from_scratch = serve_scratch;
      sc.auto_retrain_every = auto_retrain;
      sc.simulated = simulated;
      sc.rng_seed = config["derived_seed"];
      service::AnnotationService svc(sc, prepared.corpus, splits,
                                     Factory(prepared, parts.model));
      if (svc.version() == 0) {
        out << "training the initial snapshot on " << svc.labeled_size()
            << " labeled sentences" << std::endl;
        svc.TriggerRetrain();
        svc.WaitForTraining();
        if (auto e = svc.last_training_error()) {
          throw Error(ErrorCode::kIo, "initial training failed: " + *e);
        }
      }
      service::HttpServer server(svc, {host, port, ui});
      const int bound = server.Start();
      out << "listening on http://" << host << ':' << bound << " (run "
          << dir << ", snapshot v" << svc.version() << ")" << std::endl;
      g_stop = false;
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.Stop();
      out << "stopped" << std::endl;
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mtal::cli
