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

// Pool-based active learning with a simulated oracle.
//
// Round 0 trains on the seed set. Every later round scores the unlabeled
// pool with the current model, moves the selected sentences to the labeled
// set with both tag layers revealed, trains for the configured number of
// epochs and logs dev (and test) metrics. After R rounds the labeled set
// holds seed + min(pool, R * B) sentences.

#ifndef MTAL_ALLOOP_H_
#define MTAL_ALLOOP_H_

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtal/corpus.h"
#include "mtal/eval.h"
#include "mtal/query.h"
#include "mtal/tagger.h"

namespace mtal::al {

// Labeled / unlabeled / in-flight partition of a fixed sentence set. Tags of
// unlabeled sentences are never stored, so whoever holds a Pool can only
// learn them through Label().
class Pool {
 public:
  explicit Pool(TagSet srl_tags = TagSet::DefaultSrl(),
                TagSet er_tags = TagSet::DefaultEr());

  // Adds a sentence with its tags (labeled) or stripped (unlabeled).
  // Throws kDuplicateId.
  void AddLabeled(Sentence sentence);
  void AddUnlabeled(const Sentence& sentence);

  int labeled_size() const { return static_cast<int>(labeled_order_.size()); }
  int unlabeled_size() const { return static_cast<int>(unlabeled_.size()); }
  int in_flight_size() const { return static_cast<int>(in_flight_.size()); }
  int total_size() const { return static_cast<int>(sentences_.size()); }

  bool IsLabeled(const std::string& id) const;
  bool IsUnlabeled(const std::string& id) const;
  bool IsInFlight(const std::string& id) const;
  // Any state. Throws kUnknownId.
  const Sentence& Get(const std::string& id) const;

  // Labeled sentences in the order they were labeled.
  std::vector<const Sentence*> Labeled() const;
  const std::vector<std::string>& labeled_ids() const { return labeled_order_; }
  // Unlabeled sentences not in flight, in id order.
  std::vector<const Sentence*> Unlabeled() const;
  // In-flight ids in lease order.
  const std::vector<std::string>& in_flight() const { return in_flight_; }

  // Moves unlabeled ids to in-flight. Throws kUnknownId or kNotInFlight
  // (already labeled or leased); on error nothing changes.
  void Lease(std::span<const std::string> ids);
  void Release(const std::string& id);

  // Validates and stores both tag layers, moving the sentence to labeled.
  // With `require_in_flight` the sentence must be leased; otherwise it may
  // also come straight from unlabeled. Throws kUnknownId, kNotInFlight,
  // kLengthMismatch, kTagOutOfRange or kInvalidBio; on error nothing changes.
  void Label(const std::string& id, TagSequence srl, TagSequence er,
             bool require_in_flight);

  // Checks the partition invariant; throws std::logic_error on violation.
  void CheckInvariants() const;

  const TagSet& srl_tags() const { return srl_tags_; }
  const TagSet& er_tags() const { return er_tags_; }

 private:
  enum class State { kLabeled, kUnlabeled, kInFlight };
  void Insert(Sentence sentence, State state);

  TagSet srl_tags_;
  TagSet er_tags_;
  std::unordered_map<std::string, Sentence> sentences_;
  std::unordered_map<std::string, State> state_;
  std::vector<std::string> labeled_order_;
  std::set<std::string> unlabeled_;
  std::vector<std::string> in_flight_;
};

// Validates a tag sequence for a sentence of length `length`.
void ValidateTags(const TagSequence& tags, int length, const TagSet& tagset);

// The model side of the protocol. Implementations must be deterministic.
class Learner {
 public:
  virtual ~Learner() = default;

  // Discards all learned state (retrain-from-scratch mode).
  virtual void Reset() = 0;
  virtual void ResetOptimizer() = 0;
  // One pass over the labeled set; returns mean per-sentence losses.
  virtual LossParts TrainEpoch(std::span<const Sentence* const> labeled) = 0;
  virtual std::vector<query::QueryScore> Score(
      std::span<const Sentence* const> pool) const = 0;
  virtual eval::SpanMatchReport EvaluateSrl(
      std::span<const Sentence* const> sentences) const = 0;
  // Empty for single-task learners.
  virtual std::optional<eval::SpanMatchReport> EvaluateEr(
      std::span<const Sentence* const> sentences) const = 0;
  virtual bool multi_task() const = 0;
  virtual void SaveCheckpoint(const std::string& path) const = 0;
};

using ModelFactory = std::function<TaggerModel()>;

class TaggerLearner : public Learner {
 public:
  TaggerLearner(ModelFactory factory, TrainConfig train,
                query::ScoreOptions score_options = {});

  void Reset() override;
  void ResetOptimizer() override;
  LossParts TrainEpoch(std::span<const Sentence* const> labeled) override;
  std::vector<query::QueryScore> Score(
      std::span<const Sentence* const> pool) const override;
  eval::SpanMatchReport EvaluateSrl(
      std::span<const Sentence* const> sentences) const override;
  std::optional<eval::SpanMatchReport> EvaluateEr(
      std::span<const Sentence* const> sentences) const override;
  bool multi_task() const override;
  void SaveCheckpoint(const std::string& path) const override;

  const TaggerModel& model() const { return *model_; }

 private:
  ModelFactory factory_;
  TrainConfig train_;
  query::ScoreOptions score_options_;
  std::unique_ptr<TaggerModel> model_;
  std::unique_ptr<Trainer> trainer_;
};

// Model-free learner for protocol tests: scores are fixed pseudo-random
// functions of the sentence id and F1 grows with the labeled-set size.
class StubLearner : public Learner {
 public:
  explicit StubLearner(int total_train, bool multi_task = true)
      : total_train_(total_train), multi_task_(multi_task) {}

  void Reset() override { seen_ = 0; }
  void ResetOptimizer() override {}
  LossParts TrainEpoch(std::span<const Sentence* const> labeled) override;
  std::vector<query::QueryScore> Score(
      std::span<const Sentence* const> pool) const override;
  eval::SpanMatchReport EvaluateSrl(
      std::span<const Sentence* const> sentences) const override;
  std::optional<eval::SpanMatchReport> EvaluateEr(
      std::span<const Sentence* const> sentences) const override;
  bool multi_task() const override { return multi_task_; }
  void SaveCheckpoint(const std::string& path) const override;

 private:
  int total_train_;
  bool multi_task_;
  int seen_ = 0;
};

enum class Scenario { k50_50, k85_15, kCustom };

// "50:50", "85:15", "custom". Throws kInvalidConfig.
Scenario ParseScenario(std::string_view name);
std::string_view ScenarioName(Scenario scenario);

struct ALConfig {
  Scenario scenario = Scenario::k85_15;
  query::Strategy strategy = query::Strategy::kRankCombination;
  int rounds = 10;
  // Only read for the custom scenario; the named scenarios fix both.
  int batch_size = 10;
  double seed_fraction = 0.85;
  // Epochs trained per round; 0 picks 1, or train.max_epochs when
  // retraining from scratch.
  int epochs_per_round = 0;
  bool retrain_from_scratch = false;
  bool reset_optimizer = false;
  int patience = 3;  // rounds without dev F1 gain; 0 disables
  bool evaluate_test = true;
  TrainConfig train;
  uint64_t rng_seed = 0;

  int effective_batch() const;
  double effective_seed_fraction() const;
  int effective_epochs() const;
  void Validate() const;
};

// Labeled-set size after the full protocol when no early stop occurs.
int FinalLabeledSize(int train_size, const ALConfig& config);

struct RoundLog {
  int round = 0;
  int labeled = 0;
  std::vector<std::string> queried;
  std::optional<query::Strategy> drawn;
  bool pool_exhausted = false;
  LossParts loss;  // mean per labeled sentence over the round's last epoch
  eval::Prf dev;
  std::optional<eval::Prf> dev_er;
  std::optional<eval::Prf> test;
  double seconds = 0;  // wall clock; excluded from deterministic outputs
};

struct ALResult {
  std::vector<RoundLog> rounds;
  bool early_stopped = false;
  int best_round = 0;
  std::optional<eval::SpanMatchReport> final_test;
  std::vector<std::string> labeled_ids;
};

// Optional on-disk sink for a run. Files: rounds.csv, queried.csv,
// timing.csv, best.ckpt, final.ckpt, test_report.txt, confusion.csv and,
// when `save_scores` is set, scores/round_NNN.csv.
struct RunOutput {
  std::string dir;
  bool save_scores = false;
  // Called after each round is logged and written.
  std::function<void(const RoundLog&)> on_round;
};

ALResult RunAl(const Corpus& corpus, const Splits& splits, Learner& learner,
               const ALConfig& config,
               const std::optional<RunOutput>& output = std::nullopt);

struct PassiveResult {
  TrainResult train;
  std::optional<eval::SpanMatchReport> test;
};

// Supervised training on the whole train split with early stopping on dev.
// Writes epochs.csv, best.ckpt and test reports when `output_dir` is set.
PassiveResult RunPassive(const Corpus& corpus, const Splits& splits,
                         const TaggerModel& initial, const TrainConfig& config,
                         const std::optional<std::string>& output_dir =
                             std::nullopt);

void WriteRoundsCsv(std::ostream& out, std::span<const RoundLog> rounds);
void WriteQueriedCsv(std::ostream& out, std::span<const RoundLog> rounds);

// Wide table with one row per round index and, per named run, the labeled
// size plus dev and test F1. Missing cells are "NA".
void EmitLearningCurve(
    std::ostream& out,
    const std::vector<std::pair<std::string, std::vector<RoundLog>>>& runs);

}  // namespace mtal::al

#endif  // MTAL_ALLOOP_H_
