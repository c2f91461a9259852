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

#include "mtal/alloop.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mtal/error.h"
#include "mtal/json_io.h"

namespace mtal::al {
namespace {

std::string Num(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

std::string Na(const std::optional<double>& value) {
  return value ? Num(*value) : "NA";
}

uint64_t Fnv1a(std::string_view s, uint64_t salt) {
  uint64_t h = 1469598103934665603ULL ^ salt;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

double UnitHash(std::string_view s, uint64_t salt) {
  return static_cast<double>(Fnv1a(s, salt) >> 11) * 0x1.0p-53;
}

eval::SpanMatchReport ConstantReport(double f1) {
  eval::SpanMatchReport report;
  report.overall.precision = f1;
  report.overall.recall = f1;
  report.overall.f1 = f1;
  return report;
}

void WriteReports(const std::string& dir, const std::string& prefix,
                  const eval::SpanMatchReport& report) {
  std::ostringstream table, kv, counts, percent;
  eval::WriteReportTable(table, report);
  eval::WriteReportKeyValue(kv, report);
  eval::WriteConfusionCsv(counts, report);
  eval::WriteConfusionPercentCsv(percent, report);
  WriteFileAtomic(dir + "/" + prefix + "_report.txt", table.str());
  WriteFileAtomic(dir + "/" + prefix + "_report.kv", kv.str());
  WriteFileAtomic(dir + "/" + prefix + "_confusion.csv", counts.str());
  WriteFileAtomic(dir + "/" + prefix + "_confusion_percent.csv",
                  percent.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Pool.

Pool::Pool(TagSet srl_tags, TagSet er_tags)
    : srl_tags_(std::move(srl_tags)), er_tags_(std::move(er_tags)) {}

void Pool::Insert(Sentence sentence, State state) {
  if (sentences_.count(sentence.id)) {
    throw Error(ErrorCode::kDuplicateId, sentence.id);
  }
  const std::string id = sentence.id;
  state_[id] = state;
  if (state == State::kLabeled) {
    labeled_order_.push_back(id);
  } else {
    unlabeled_.insert(id);
  }
  sentences_.emplace(id, std::move(sentence));
}

void Pool::AddLabeled(Sentence sentence) {
  if (!sentence.fully_labeled()) {
    throw Error(ErrorCode::kMissingLabels, sentence.id);
  }
  ValidateTags(*sentence.srl, sentence.size(), srl_tags_);
  ValidateTags(*sentence.er, sentence.size(), er_tags_);
  Insert(std::move(sentence), State::kLabeled);
}

void Pool::AddUnlabeled(const Sentence& sentence) {
  Insert(sentence.WithoutLabels(), State::kUnlabeled);
}

bool Pool::IsLabeled(const std::string& id) const {
  auto it = state_.find(id);
  return it != state_.end() && it->second == State::kLabeled;
}

bool Pool::IsUnlabeled(const std::string& id) const {
  auto it = state_.find(id);
  return it != state_.end() && it->second == State::kUnlabeled;
}

bool Pool::IsInFlight(const std::string& id) const {
  auto it = state_.find(id);
  return it != state_.end() && it->second == State::kInFlight;
}

const Sentence& Pool::Get(const std::string& id) const {
  auto it = sentences_.find(id);
  if (it == sentences_.end()) throw Error(ErrorCode::kUnknownId, id);
  return it->second;
}

std::vector<const Sentence*> Pool::Labeled() const {
  std::vector<const Sentence*> out;
  out.reserve(labeled_order_.size());
  for (const std::string& id : labeled_order_) out.push_back(&sentences_.at(id));
  return out;
}

std::vector<const Sentence*> Pool::Unlabeled() const {
  std::vector<const Sentence*> out;
  out.reserve(unlabeled_.size());
  for (const std::string& id : unlabeled_) out.push_back(&sentences_.at(id));
  return out;
}

void Pool::Lease(std::span<const std::string> ids) {
  std::set<std::string> batch;
  for (const std::string& id : ids) {
    if (!state_.count(id)) throw Error(ErrorCode::kUnknownId, id);
    if (!IsUnlabeled(id) || !batch.insert(id).second) {
      throw Error(ErrorCode::kNotInFlight, id + " is not available");
    }
  }
  for (const std::string& id : ids) {
    unlabeled_.erase(id);
    state_[id] = State::kInFlight;
    in_flight_.push_back(id);
  }
}

void Pool::Release(const std::string& id) {
  if (!state_.count(id)) throw Error(ErrorCode::kUnknownId, id);
  if (!IsInFlight(id)) throw Error(ErrorCode::kNotInFlight, id);
  in_flight_.erase(std::find(in_flight_.begin(), in_flight_.end(), id));
  state_[id] = State::kUnlabeled;
  unlabeled_.insert(id);
}

void Pool::Label(const std::string& id, TagSequence srl, TagSequence er,
                 bool require_in_flight) {
  auto it = sentences_.find(id);
  if (it == sentences_.end()) throw Error(ErrorCode::kUnknownId, id);
  const State state = state_.at(id);
  if (state == State::kLabeled ||
      (require_in_flight && state != State::kInFlight)) {
    throw Error(ErrorCode::kNotInFlight, id);
  }
  Sentence& sentence = it->second;
  ValidateTags(srl, sentence.size(), srl_tags_);
  ValidateTags(er, sentence.size(), er_tags_);
  if (state == State::kInFlight) {
    in_flight_.erase(std::find(in_flight_.begin(), in_flight_.end(), id));
  } else {
    unlabeled_.erase(id);
  }
  sentence.srl = std::move(srl);
  sentence.er = std::move(er);
  state_[id] = State::kLabeled;
  labeled_order_.push_back(id);
}

void Pool::CheckInvariants() const {
  const size_t parts =
      labeled_order_.size() + unlabeled_.size() + in_flight_.size();
  if (parts != sentences_.size() || state_.size() != sentences_.size()) {
    throw std::logic_error("pool partition does not cover every sentence");
  }
  for (const std::string& id : labeled_order_) {
    if (!IsLabeled(id) || !sentences_.at(id).fully_labeled()) {
      throw std::logic_error("labeled entry " + id + " is inconsistent");
    }
  }
  for (const std::string& id : unlabeled_) {
    if (!IsUnlabeled(id) || sentences_.at(id).srl || sentences_.at(id).er) {
      throw std::logic_error("unlabeled entry " + id + " is inconsistent");
    }
  }
  for (const std::string& id : in_flight_) {
    if (!IsInFlight(id)) {
      throw std::logic_error("in-flight entry " + id + " is inconsistent");
    }
  }
}

void ValidateTags(const TagSequence& tags, int length, const TagSet& tagset) {
  if (static_cast<int>(tags.size()) != length) {
    throw Error(ErrorCode::kLengthMismatch,
                std::string(TaskName(tagset.task())) + " tags have length " +
                    std::to_string(tags.size()) + ", sentence has " +
                    std::to_string(length));
  }
  for (int tag : tags) {
    if (tag < 0 || tag >= tagset.size()) {
      throw Error(ErrorCode::kTagOutOfRange, std::to_string(tag));
    }
  }
  const int bad = FirstBioViolation(tags);
  if (bad >= 0) {
    throw Error(ErrorCode::kInvalidBio,
                std::string(TaskName(tagset.task())) + " tag " +
                    tagset.tag(tags[bad]) + " at position " +
                    std::to_string(bad) + " does not continue a span");
  }
}

// ---------------------------------------------------------------------------
// Learners.

TaggerLearner::TaggerLearner(ModelFactory factory, TrainConfig train,
                             query::ScoreOptions score_options)
    : factory_(std::move(factory)),
      train_(train),
      score_options_(score_options) {
  Reset();
}

void TaggerLearner::Reset() {
  model_ = std::make_unique<TaggerModel>(factory_());
  trainer_ = std::make_unique<Trainer>(*model_, train_);
}

void TaggerLearner::ResetOptimizer() { trainer_->ResetOptimizer(); }

LossParts TaggerLearner::TrainEpoch(std::span<const Sentence* const> labeled) {
  const EpochStats stats = trainer_->RunEpoch(labeled);
  LossParts mean = stats.loss;
  mean.srl /= stats.sentences;
  mean.er /= stats.sentences;
  return mean;
}

std::vector<query::QueryScore> TaggerLearner::Score(
    std::span<const Sentence* const> pool) const {
  return query::ScorePool(*model_, pool, score_options_);
}

eval::SpanMatchReport TaggerLearner::EvaluateSrl(
    std::span<const Sentence* const> sentences) const {
  return mtal::EvaluateSrl(*model_, sentences);
}

std::optional<eval::SpanMatchReport> TaggerLearner::EvaluateEr(
    std::span<const Sentence* const> sentences) const {
  if (!model_->multi_task()) return std::nullopt;
  return mtal::EvaluateEr(*model_, sentences);
}

bool TaggerLearner::multi_task() const { return model_->multi_task(); }

void TaggerLearner::SaveCheckpoint(const std::string& path) const {
  model_->SaveFile(path);
}

LossParts StubLearner::TrainEpoch(std::span<const Sentence* const> labeled) {
  seen_ = static_cast<int>(labeled.size());
  const double gap = 1.0 - static_cast<double>(seen_) / total_train_;
  return {gap, multi_task_ ? 0.5 * gap : 0.0};
}

std::vector<query::QueryScore> StubLearner::Score(
    std::span<const Sentence* const> pool) const {
  std::vector<query::QueryScore> scores;
  scores.reserve(pool.size());
  for (const Sentence* s : pool) {
    query::QueryScore q;
    q.id = s->id;
    q.te_total = 5.0 * UnitHash(s->id, 1);
    q.ve_log_prob = -5.0 * UnitHash(s->id, 2);
    q.te_available = multi_task_;
    scores.push_back(std::move(q));
  }
  return scores;
}

eval::SpanMatchReport StubLearner::EvaluateSrl(
    std::span<const Sentence* const>) const {
  return ConstantReport(static_cast<double>(seen_) / total_train_);
}

std::optional<eval::SpanMatchReport> StubLearner::EvaluateEr(
    std::span<const Sentence* const>) const {
  if (!multi_task_) return std::nullopt;
  return ConstantReport(0.5 * seen_ / total_train_);
}

void StubLearner::SaveCheckpoint(const std::string& path) const {
  WriteFileAtomic(path, "stub labeled=" + std::to_string(seen_) + "\n");
}

// ---------------------------------------------------------------------------
// Configuration.

Scenario ParseScenario(std::string_view name) {
  if (name == "50:50") return Scenario::k50_50;
  if (name == "85:15") return Scenario::k85_15;
  if (name == "custom") return Scenario::kCustom;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown scenario '" + std::string(name) + "'");
}

std::string_view ScenarioName(Scenario scenario) {
  switch (scenario) {
    case Scenario::k50_50: return "50:50";
    case Scenario::k85_15: return "85:15";
    case Scenario::kCustom: return "custom";
  }
  return "custom";
}

int ALConfig::effective_batch() const {
  switch (scenario) {
    case Scenario::k50_50: return 100;
    case Scenario::k85_15: return 10;
    case Scenario::kCustom: return batch_size;
  }
  return batch_size;
}

double ALConfig::effective_seed_fraction() const {
  switch (scenario) {
    case Scenario::k50_50: return 0.5;
    case Scenario::k85_15: return 0.85;
    case Scenario::kCustom: return seed_fraction;
  }
  return seed_fraction;
}

int ALConfig::effective_epochs() const {
  if (epochs_per_round > 0) return epochs_per_round;
  return retrain_from_scratch ? train.max_epochs : 1;
}

void ALConfig::Validate() const {
  if (rounds < 1) throw Error(ErrorCode::kInvalidConfig, "rounds must be >= 1");
  if (effective_batch() < 1) {
    throw Error(ErrorCode::kInvalidConfig, "batch size must be >= 1");
  }
  const double f = effective_seed_fraction();
  if (!(f > 0 && f <= 1)) {
    throw Error(ErrorCode::kInvalidConfig, "seed fraction must lie in (0, 1]");
  }
  if (patience < 0 || epochs_per_round < 0) {
    throw Error(ErrorCode::kInvalidConfig, "negative patience or epochs");
  }
  train.Validate();
}

int FinalLabeledSize(int train_size, const ALConfig& config) {
  const int seed = SeedLabeledSize(train_size, config.effective_seed_fraction());
  const int64_t budget =
      static_cast<int64_t>(config.rounds) * config.effective_batch();
  return seed + static_cast<int>(std::min<int64_t>(train_size - seed, budget));
}

// ---------------------------------------------------------------------------
// Protocol.

ALResult RunAl(const Corpus& corpus, const Splits& splits, Learner& learner,
               const ALConfig& config, const std::optional<RunOutput>& output) {
  config.Validate();
  if (splits.seed_labeled.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "seed labeled set is empty");
  }
  Pool pool;
  for (const Sentence* s : Select(corpus, splits.seed_labeled)) {
    pool.AddLabeled(*s);
  }
  // The oracle keeps the gold layers the pool never sees.
  std::unordered_map<std::string, const Sentence*> oracle;
  for (const Sentence* s : Select(corpus, splits.pool)) {
    if (!s->fully_labeled()) throw Error(ErrorCode::kMissingLabels, s->id);
    oracle.emplace(s->id, s);
    pool.AddUnlabeled(*s);
  }
  const std::vector<const Sentence*> dev = Select(corpus, splits.dev);
  const std::vector<const Sentence*> test = Select(corpus, splits.test);
  const bool use_test = config.evaluate_test && !test.empty();

  if (output) {
    std::filesystem::create_directories(output->dir);
    if (output->save_scores) {
      std::filesystem::create_directories(output->dir + "/scores");
    }
  }

  Rng rng(config.rng_seed);
  // With no dev data every epoch would tie, so stopping is disabled.
  EarlyStopping stopping(dev.empty() ? 0 : config.patience);
  const int batch = config.effective_batch();
  const int epochs = config.effective_epochs();
  ALResult result;
  std::ostringstream timing;
  timing << "round,seconds\n";

  for (int round = 0; round <= config.rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    RoundLog log;
    log.round = round;
    if (round > 0) {
      const std::vector<const Sentence*> unlabeled = pool.Unlabeled();
      if (unlabeled.empty()) {
        log.pool_exhausted = true;
      } else {
        std::vector<query::QueryScore> scores;
        if (config.strategy == query::Strategy::kRandom) {
          for (const Sentence* s : unlabeled) scores.push_back({s->id, 0, 0});
        } else {
          scores = learner.Score(unlabeled);
        }
        if (output && output->save_scores) {
          std::ostringstream csv;
          query::WriteScoresCsv(csv, scores);
          char name[32];
          std::snprintf(name, sizeof(name), "/scores/round_%03d.csv", round);
          WriteFileAtomic(output->dir + name, csv.str());
        }
        query::Selection selection =
            query::Select(scores, config.strategy, batch, rng);
        for (const std::string& id : selection.ids) {
          const Sentence* gold = oracle.at(id);
          pool.Label(id, *gold->srl, *gold->er, /*require_in_flight=*/false);
        }
        log.queried = std::move(selection.ids);
        log.drawn = selection.drawn;
        if (config.reset_optimizer) learner.ResetOptimizer();
      }
    }
    if (config.retrain_from_scratch) learner.Reset();
    const std::vector<const Sentence*> labeled = pool.Labeled();
    for (int e = 0; e < epochs; ++e) log.loss = learner.TrainEpoch(labeled);
    log.labeled = pool.labeled_size();

    const eval::SpanMatchReport dev_report = learner.EvaluateSrl(dev);
    log.dev = dev_report.overall;
    if (auto er = learner.EvaluateEr(dev)) log.dev_er = er->overall;
    if (use_test) log.test = learner.EvaluateSrl(test).overall;
    log.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    const bool improved = stopping.Update(log.dev.f1);
    if (improved) result.best_round = round;
    result.rounds.push_back(std::move(log));

    if (output) {
      if (improved) learner.SaveCheckpoint(output->dir + "/best.ckpt");
      std::ostringstream rounds, queried;
      WriteRoundsCsv(rounds, result.rounds);
      WriteQueriedCsv(queried, result.rounds);
      timing << round << ',' << Num(result.rounds.back().seconds) << '\n';
      WriteFileAtomic(output->dir + "/rounds.csv", rounds.str());
      WriteFileAtomic(output->dir + "/queried.csv", queried.str());
      WriteFileAtomic(output->dir + "/timing.csv", timing.str());
      if (output->on_round) output->on_round(result.rounds.back());
    }
    if (round < config.rounds && stopping.ShouldStop()) {
      result.early_stopped = true;
      break;
    }
  }
  pool.CheckInvariants();
  result.labeled_ids = pool.labeled_ids();
  if (use_test) result.final_test = learner.EvaluateSrl(test);
  if (output) {
    learner.SaveCheckpoint(output->dir + "/final.ckpt");
    if (result.final_test) WriteReports(output->dir, "test", *result.final_test);
  }
  return result;
}

PassiveResult RunPassive(const Corpus& corpus, const Splits& splits,
                         const TaggerModel& initial, const TrainConfig& config,
                         const std::optional<std::string>& output_dir) {
  const std::vector<const Sentence*> train = Select(corpus, splits.train);
  const std::vector<const Sentence*> dev = Select(corpus, splits.dev);
  const std::vector<const Sentence*> test = Select(corpus, splits.test);
  PassiveResult result{Train(initial, train, dev, config), std::nullopt};
  if (!test.empty()) result.test = EvaluateSrl(result.train.best, test);
  if (output_dir) {
    std::filesystem::create_directories(*output_dir);
    std::ostringstream epochs;
    epochs << "epoch,srl_loss,er_loss,dev_precision,dev_recall,dev_f1\n";
    for (const EpochLog& e : result.train.log) {
      epochs << e.epoch << ',' << Num(e.train_loss.srl / train.size()) << ','
             << Num(e.train_loss.er / train.size()) << ','
             << Num(e.dev.precision) << ',' << Num(e.dev.recall) << ','
             << Num(e.dev.f1) << '\n';
    }
    WriteFileAtomic(*output_dir + "/epochs.csv", epochs.str());
    result.train.best.SaveFile(*output_dir + "/best.ckpt");
    if (result.test) WriteReports(*output_dir, "test", *result.test);
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV output.

void WriteRoundsCsv(std::ostream& out, std::span<const RoundLog> rounds) {
  out << "round,labeled,queried,drawn_task,pool_exhausted,srl_loss,er_loss,"
         "dev_precision,dev_recall,dev_f1,dev_er_f1,test_precision,"
         "test_recall,test_f1\n";
  for (const RoundLog& r : rounds) {
    out << r.round << ',' << r.labeled << ',' << r.queried.size() << ','
        << (r.drawn ? query::StrategyName(*r.drawn) : "NA") << ','
        << (r.pool_exhausted ? 1 : 0) << ',' << Num(r.loss.srl) << ','
        << Num(r.loss.er) << ',' << Num(r.dev.precision) << ','
        << Num(r.dev.recall) << ',' << Num(r.dev.f1) << ','
        << Na(r.dev_er ? std::optional<double>(r.dev_er->f1) : std::nullopt)
        << ','
        << Na(r.test ? std::optional<double>(r.test->precision) : std::nullopt)
        << ','
        << Na(r.test ? std::optional<double>(r.test->recall) : std::nullopt)
        << ',' << Na(r.test ? std::optional<double>(r.test->f1) : std::nullopt)
        << '\n';
  }
}

void WriteQueriedCsv(std::ostream& out, std::span<const RoundLog> rounds) {
  out << "round,position,sentence_id\n";
  for (const RoundLog& r : rounds) {
    for (size_t i = 0; i < r.queried.size(); ++i) {
      out << r.round << ',' << i << ',' << r.queried[i] << '\n';
    }
  }
}

void EmitLearningCurve(
    std::ostream& out,
    const std::vector<std::pair<std::string, std::vector<RoundLog>>>& runs) {
  int max_round = -1;
  out << "round";
  for (const auto& [name, rounds] : runs) {
    out << ',' << name << ":labeled," << name << ":dev_f1," << name
        << ":test_f1";
    for (const RoundLog& r : rounds) max_round = std::max(max_round, r.round);
  }
  out << '\n';
  for (int round = 0; round <= max_round; ++round) {
    out << round;
    for (const auto& [name, rounds] : runs) {
      auto it = std::find_if(rounds.begin(), rounds.end(),
                             [&](const RoundLog& r) { return r.round == round; });
      if (it == rounds.end()) {
        out << ",NA,NA,NA";
        continue;
      }
      out << ',' << it->labeled << ',' << Num(it->dev.f1) << ','
          << Na(it->test ? std::optional<double>(it->test->f1)
                         : std::nullopt);
    }
    out << '\n';
  }
}

}  // namespace mtal::al
