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

#include "mtal/query.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include "mtal/error.h"

namespace mtal::query {
namespace {

constexpr double kNormTolerance = 1e-6;

struct Named {
  std::string_view cli;
  std::string_view upper;
  Strategy strategy;
};

constexpr Named kNames[] = {
    {"random", "RANDOM", Strategy::kRandom},
    {"te", "TE", Strategy::kTokenEntropy},
    {"ve", "VE", Strategy::kViterbi},
    {"rank", "RANK_COMBINATION", Strategy::kRankCombination},
    {"random-task", "RANDOM_TASK", Strategy::kRandomTask},
};

void RequireTe(std::span<const QueryScore> scores) {
  for (const QueryScore& s : scores) {
    if (!s.te_available) {
      throw Error(ErrorCode::kInvalidConfig,
                  "token entropy needs a model with an entity head");
    }
  }
}

// Indices of `scores` ordered most-informative first.
std::vector<size_t> Order(std::span<const double> values,
                          std::span<const std::string> ids,
                          Direction direction) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) {
      return direction == Direction::kDescending ? values[a] > values[b]
                                                 : values[a] < values[b];
    }
    return ids[a] < ids[b];
  });
  return order;
}

std::vector<std::string> Ids(std::span<const QueryScore> scores) {
  std::vector<std::string> ids;
  ids.reserve(scores.size());
  for (const QueryScore& s : scores) ids.push_back(s.id);
  return ids;
}

std::vector<std::string> TopBy(std::span<const QueryScore> scores,
                               const std::vector<double>& values,
                               Direction direction, size_t count) {
  const std::vector<std::string> ids = Ids(scores);
  const std::vector<size_t> order = Order(values, ids, direction);
  std::vector<std::string> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(ids[order[i]]);
  return out;
}

}  // namespace

Strategy ParseStrategy(std::string_view name) {
  for (const Named& n : kNames) {
    if (name == n.cli || name == n.upper) return n.strategy;
  }
  throw Error(ErrorCode::kUnknownStrategy, std::string(name));
}

std::string_view StrategyName(Strategy strategy) {
  for (const Named& n : kNames) {
    if (n.strategy == strategy) return n.cli;
  }
  return "unknown";
}

std::vector<Strategy> AllStrategies() {
  std::vector<Strategy> out;
  for (const Named& n : kNames) out.push_back(n.strategy);
  return out;
}

double TokenEntropy(std::span<const double> log_probs) {
  double total = 0;
  double entropy = 0;
  for (double lp : log_probs) {
    const double p = std::exp(lp);
    total += p;
    if (p > 0) entropy -= p * lp;
  }
  if (!(std::abs(total - 1.0) <= kNormTolerance)) {
    throw Error(ErrorCode::kNotNormalized,
                "probabilities sum to " + std::to_string(total));
  }
  return std::max(0.0, entropy);
}

QueryScore ScoreFromHeads(std::string id, const TaggerModel::HeadOutputs& heads,
                          const crf::CrfParams& crf, bool length_normalize) {
  QueryScore score;
  score.id = std::move(id);
  const Eigen::Index T = heads.srl_emissions.rows();
  score.ve_log_prob = crf::Viterbi(heads.srl_emissions, crf).path_log_prob;
  score.te_available = heads.er_log_probs.size() > 0;
  if (score.te_available) {
    std::vector<double> row(heads.er_log_probs.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index k = 0; k < heads.er_log_probs.cols(); ++k) {
        row[k] = heads.er_log_probs(t, k);
      }
      score.te_total += TokenEntropy(row);
    }
  }
  if (length_normalize && T > 0) {
    score.te_total /= static_cast<double>(T);
    score.ve_log_prob /= static_cast<double>(T);
  }
  return score;
}

std::vector<QueryScore> ScorePool(const TaggerModel& model,
                                  std::span<const Sentence* const> pool,
                                  const ScoreOptions& options) {
  std::vector<QueryScore> scores(pool.size());
  const crf::CrfParams crf = model.Crf();
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      scores[i] = ScoreFromHeads(pool[i]->id, model.Heads(*pool[i]), crf,
                                 options.length_normalize);
    }
  };
  const size_t threads = static_cast<size_t>(std::max(1, options.threads));
  if (threads == 1 || pool.size() < 2 * threads) {
    work(0, pool.size());
    return scores;
  }
  std::vector<std::thread> workers;
  for (size_t w = 0; w < threads; ++w) {
    workers.emplace_back(work, pool.size() * w / threads,
                         pool.size() * (w + 1) / threads);
  }
  for (std::thread& t : workers) t.join();
  return scores;
}

std::vector<int> Rank(std::span<const double> values,
                      std::span<const std::string> ids, Direction direction) {
  if (values.size() != ids.size()) {
    throw Error(ErrorCode::kLengthMismatch, "values and ids differ in length");
  }
  const std::vector<size_t> order = Order(values, ids, direction);
  std::vector<int> ranks(values.size());
  for (size_t r = 0; r < order.size(); ++r) {
    ranks[order[r]] = static_cast<int>(r) + 1;
  }
  return ranks;
}

RankedPool RankPool(std::vector<QueryScore> scores) {
  RequireTe(scores);
  RankedPool pool;
  const std::vector<std::string> ids = Ids(scores);
  std::vector<double> te, ve;
  for (const QueryScore& s : scores) {
    te.push_back(s.te_total);
    ve.push_back(s.ve_log_prob);
  }
  pool.te_rank = Rank(te, ids, Direction::kDescending);
  pool.ve_rank = Rank(ve, ids, Direction::kAscending);
  pool.combined_rank.resize(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    pool.combined_rank[i] = pool.te_rank[i] + pool.ve_rank[i];
  }
  pool.scores = std::move(scores);
  return pool;
}

Selection Select(std::span<const QueryScore> scores, Strategy strategy,
                 int batch_size, Rng& rng) {
  if (batch_size < 0) {
    throw Error(ErrorCode::kInvalidConfig, "batch size must be >= 0");
  }
  const size_t count = std::min(scores.size(), static_cast<size_t>(batch_size));
  Selection selection;
  if (strategy == Strategy::kRandomTask) {
    RequireTe(scores);
    selection.drawn = rng.UniformInt(2) == 0 ? Strategy::kTokenEntropy
                                             : Strategy::kViterbi;
    strategy = *selection.drawn;
  }
  switch (strategy) {
    case Strategy::kRandom: {
      std::vector<std::string> ids = Ids(scores);
      std::sort(ids.begin(), ids.end());
      // Partial Fisher-Yates: the first `count` slots are the sample.
      for (size_t i = 0; i < count; ++i) {
        const size_t j = i + rng.UniformInt(ids.size() - i);
        std::swap(ids[i], ids[j]);
      }
      ids.resize(count);
      selection.ids = std::move(ids);
      break;
    }
    case Strategy::kTokenEntropy: {
      RequireTe(scores);
      std::vector<double> te;
      for (const QueryScore& s : scores) te.push_back(s.te_total);
      selection.ids = TopBy(scores, te, Direction::kDescending, count);
      break;
    }
    case Strategy::kViterbi: {
      std::vector<double> ve;
      for (const QueryScore& s : scores) ve.push_back(s.ve_log_prob);
      selection.ids = TopBy(scores, ve, Direction::kAscending, count);
      break;
    }
    case Strategy::kRankCombination: {
      const RankedPool pool =
          RankPool(std::vector<QueryScore>(scores.begin(), scores.end()));
      std::vector<double> combined(pool.combined_rank.begin(),
                                   pool.combined_rank.end());
      selection.ids = TopBy(scores, combined, Direction::kAscending, count);
      break;
    }
    case Strategy::kRandomTask:
      break;  // resolved above
  }
  return selection;
}

void WriteScoresCsv(std::ostream& out, std::span<const QueryScore> scores) {
  out << "sentence_id,te_total,ve_log_prob,te_rank,ve_rank,combined_rank\n";
  const bool te = std::all_of(scores.begin(), scores.end(),
                              [](const QueryScore& s) { return s.te_available; });
  std::vector<int> te_rank, ve_rank, combined;
  if (te) {
    const RankedPool pool =
        RankPool(std::vector<QueryScore>(scores.begin(), scores.end()));
    te_rank = pool.te_rank;
    ve_rank = pool.ve_rank;
    combined = pool.combined_rank;
  } else {
    std::vector<double> ve;
    for (const QueryScore& s : scores) ve.push_back(s.ve_log_prob);
    ve_rank = Rank(ve, Ids(scores), Direction::kAscending);
  }
  char buffer[64];
  for (size_t i = 0; i < scores.size(); ++i) {
    out << scores[i].id << ',';
    if (te) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", scores[i].te_total);
      out << buffer;
    } else {
      out << "NA";
    }
    std::snprintf(buffer, sizeof(buffer), "%.17g", scores[i].ve_log_prob);
    out << ',' << buffer << ',';
    if (te) {
      out << te_rank[i];
    } else {
      out << "NA";
    }
    out << ',' << ve_rank[i] << ',';
    if (te) {
      out << combined[i];
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

}  // namespace mtal::query
