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

// Informativeness scores and batch selection over an unlabeled pool.
//
// Two per-sentence scores are computed from one model snapshot:
//   te_total     summed token entropy of the entity softmax head (nats)
//   ve_log_prob  log-probability of the SRL Viterbi path under the CRF
// High entropy and low path probability both mark informative sentences.
// Every ordering breaks ties by ascending sentence id.

#ifndef MTAL_QUERY_H_
#define MTAL_QUERY_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtal/random.h"
#include "mtal/tagger.h"

namespace mtal::query {

enum class Strategy {
  kRandom,
  kTokenEntropy,
  kViterbi,
  kRankCombination,
  kRandomTask,
};

// Accepts the CLI spellings (random, te, ve, rank, random-task) and the
// upper-case enum names (RANDOM, TE, VE, RANK_COMBINATION, RANDOM_TASK).
Strategy ParseStrategy(std::string_view name);
std::string_view StrategyName(Strategy strategy);  // CLI spelling
std::vector<Strategy> AllStrategies();

// Entropy in nats of a log-distribution. Throws kNotNormalized when the
// probabilities do not sum to 1 within 1e-6.
double TokenEntropy(std::span<const double> log_probs);

struct QueryScore {
  std::string id;
  double te_total = 0;
  double ve_log_prob = 0;
  bool te_available = true;  // false for single-task models
};

struct ScoreOptions {
  // Divide both scores by sentence length.
  bool length_normalize = false;
  int threads = 1;
};

QueryScore ScoreFromHeads(std::string id, const TaggerModel::HeadOutputs& heads,
                          const crf::CrfParams& crf,
                          bool length_normalize = false);

// Pure function of (model, pool); the result follows the pool order.
std::vector<QueryScore> ScorePool(const TaggerModel& model,
                                  std::span<const Sentence* const> pool,
                                  const ScoreOptions& options = {});

enum class Direction { kDescending, kAscending };

// Rank 1 goes to the most informative value under `direction`; equal values
// are ordered by ascending id.
std::vector<int> Rank(std::span<const double> values,
                      std::span<const std::string> ids, Direction direction);

struct RankedPool {
  std::vector<QueryScore> scores;
  std::vector<int> te_rank;
  std::vector<int> ve_rank;
  std::vector<int> combined_rank;
};

// Requires te_available on every score.
RankedPool RankPool(std::vector<QueryScore> scores);

struct Selection {
  std::vector<std::string> ids;
  // For kRandomTask: the single-task strategy drawn for this round.
  std::optional<Strategy> drawn;
};

// Returns min(batch_size, |scores|) ids in selection order. Only kRandom and
// kRandomTask consume `rng`.
Selection Select(std::span<const QueryScore> scores, Strategy strategy,
                 int batch_size, Rng& rng);

// sentence_id,te_total,ve_log_prob,te_rank,ve_rank,combined_rank
void WriteScoresCsv(std::ostream& out, std::span<const QueryScore> scores);

}  // namespace mtal::query

#endif  // MTAL_QUERY_H_
