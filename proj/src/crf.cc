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

#include "mtal/crf.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mtal/error.h"

namespace mtal::crf {
namespace {

// log(sum(exp(v))) with max subtraction.
double LogSumExp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Row vector of initial scores: emissions(0, :) + begin.
Vector Initial(const EmissionScores& emissions, const CrfParams& params) {
  Vector alpha = emissions.row(0).transpose();
  if (params.has_boundaries()) alpha += params.begin;
  return alpha;
}

// alpha(t, j) = log sum over paths ending in tag j at position t.
Matrix ForwardTable(const EmissionScores& emissions, const CrfParams& params) {
  const int T = static_cast<int>(emissions.rows());
  const int K = params.num_tags();
  Matrix alpha(T, K);
  alpha.row(0) = Initial(emissions, params).transpose();
  Vector scratch(K);
  for (int t = 1; t < T; ++t) {
    for (int j = 0; j < K; ++j) {
      scratch = alpha.row(t - 1).transpose() + params.transition.col(j);
      alpha(t, j) = LogSumExp(scratch) + emissions(t, j);
    }
  }
  return alpha;
}

// beta(t, i) = log sum over continuations from tag i at position t.
Matrix BackwardTable(const EmissionScores& emissions, const CrfParams& params) {
  const int T = static_cast<int>(emissions.rows());
  const int K = params.num_tags();
  Matrix beta(T, K);
  if (params.has_boundaries()) {
    beta.row(T - 1) = params.end.transpose();
  } else {
    beta.row(T - 1).setZero();
  }
  Vector scratch(K);
  for (int t = T - 2; t >= 0; --t) {
    for (int i = 0; i < K; ++i) {
      scratch = params.transition.row(i).transpose() +
                emissions.row(t + 1).transpose() + beta.row(t + 1).transpose();
      beta(t, i) = LogSumExp(scratch);
    }
  }
  return beta;
}

double Finish(const Matrix& alpha, const CrfParams& params) {
  Vector last = alpha.row(alpha.rows() - 1).transpose();
  if (params.has_boundaries()) last += params.end;
  return LogSumExp(last);
}

void CheckTags(std::span<const int> tags, const EmissionScores& emissions) {
  if (static_cast<Eigen::Index>(tags.size()) != emissions.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "tag sequence length " + std::to_string(tags.size()) +
                    " != emission rows " + std::to_string(emissions.rows()));
  }
  for (int tag : tags) {
    if (tag < 0 || tag >= emissions.cols()) {
      throw Error(ErrorCode::kTagOutOfRange, "tag " + std::to_string(tag));
    }
  }
}

}  // namespace

CrfParams CrfParams::Zero(int num_tags, bool with_boundaries) {
  CrfParams params;
  params.transition = Matrix::Zero(num_tags, num_tags);
  if (with_boundaries) {
    params.begin = Vector::Zero(num_tags);
    params.end = Vector::Zero(num_tags);
  }
  return params;
}

void CheckShapes(const EmissionScores& emissions, const CrfParams& params) {
  const Eigen::Index K = params.transition.rows();
  if (params.transition.cols() != K) {
    throw Error(ErrorCode::kShapeMismatch, "transition matrix is not square");
  }
  if (emissions.rows() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "emissions have zero rows");
  }
  if (emissions.cols() != K) {
    throw Error(ErrorCode::kShapeMismatch,
                "emissions have " + std::to_string(emissions.cols()) +
                    " columns, transitions " + std::to_string(K));
  }
  if (params.begin.size() != params.end.size() ||
      (params.begin.size() != 0 && params.begin.size() != K)) {
    throw Error(ErrorCode::kShapeMismatch, "boundary vectors must have size K");
  }
}

double PathScore(std::span<const int> tags, const EmissionScores& emissions,
                 const CrfParams& params) {
  CheckShapes(emissions, params);
  CheckTags(tags, emissions);
  double score = 0;
  for (size_t t = 0; t < tags.size(); ++t) {
    score += emissions(t, tags[t]);
    if (t > 0) score += params.transition(tags[t - 1], tags[t]);
  }
  if (params.has_boundaries()) {
    score += params.begin(tags.front()) + params.end(tags.back());
  }
  return score;
}

double LogPartition(const EmissionScores& emissions, const CrfParams& params) {
  CheckShapes(emissions, params);
  return Finish(ForwardTable(emissions, params), params);
}

double SequenceLogProb(std::span<const int> tags,
                       const EmissionScores& emissions,
                       const CrfParams& params) {
  // Rounding can push the difference a hair above zero; probabilities are
  // capped at one.
  return std::min(0.0, PathScore(tags, emissions, params) -
                           LogPartition(emissions, params));
}

DecodeResult Viterbi(const EmissionScores& emissions, const CrfParams& params) {
  CheckShapes(emissions, params);
  const int T = static_cast<int>(emissions.rows());
  const int K = params.num_tags();
  Vector delta = Initial(emissions, params);
  Vector next(K);
  std::vector<int> backpointer(static_cast<size_t>(T) * K, 0);
  for (int t = 1; t < T; ++t) {
    for (int j = 0; j < K; ++j) {
      int best_i = 0;
      double best = delta(0) + params.transition(0, j);
      for (int i = 1; i < K; ++i) {
        const double s = delta(i) + params.transition(i, j);
        if (s > best) {  // strict: the lowest index wins ties
          best = s;
          best_i = i;
        }
      }
      next(j) = best + emissions(t, j);
      backpointer[static_cast<size_t>(t) * K + j] = best_i;
    }
    delta.swap(next);
  }
  if (params.has_boundaries()) delta += params.end;
  int best_last = 0;
  for (int j = 1; j < K; ++j) {
    if (delta(j) > delta(best_last)) best_last = j;
  }

  DecodeResult result;
  result.path.resize(T);
  result.path[T - 1] = best_last;
  for (int t = T - 1; t > 0; --t) {
    result.path[t - 1] =
        backpointer[static_cast<size_t>(t) * K + result.path[t]];
  }
  result.log_partition = LogPartition(emissions, params);
  // Recomputing the score from the path keeps path_log_prob identical to
  // SequenceLogProb(path) rather than merely close to it.
  result.path_log_prob = std::min(
      0.0, PathScore(result.path, emissions, params) - result.log_partition);
  return result;
}

Marginals ForwardBackward(const EmissionScores& emissions,
                          const CrfParams& params) {
  CheckShapes(emissions, params);
  const int T = static_cast<int>(emissions.rows());
  const int K = params.num_tags();
  const Matrix alpha = ForwardTable(emissions, params);
  const Matrix beta = BackwardTable(emissions, params);
  Marginals m;
  m.log_partition = Finish(alpha, params);
  m.unary = ((alpha + beta).array() - m.log_partition).exp().matrix();
  m.pairwise = Matrix::Zero(K, K);
  for (int t = 1; t < T; ++t) {
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) {
        m.pairwise(i, j) +=
            std::exp(alpha(t - 1, i) + params.transition(i, j) +
                     emissions(t, j) + beta(t, j) - m.log_partition);
      }
    }
  }
  return m;
}

double AccumulateNllGradient(std::span<const int> tags,
                             const EmissionScores& emissions,
                             const CrfParams& params, Matrix& emission_grad,
                             CrfGradients& param_grads) {
  CheckShapes(emissions, params);
  CheckTags(tags, emissions);
  const Marginals m = ForwardBackward(emissions, params);
  const double nll = m.log_partition - PathScore(tags, emissions, params);

  emission_grad += m.unary;
  for (size_t t = 0; t < tags.size(); ++t) emission_grad(t, tags[t]) -= 1.0;

  param_grads.transition += m.pairwise;
  for (size_t t = 1; t < tags.size(); ++t) {
    param_grads.transition(tags[t - 1], tags[t]) -= 1.0;
  }
  if (params.has_boundaries()) {
    param_grads.begin += m.unary.row(0).transpose();
    param_grads.begin(tags.front()) -= 1.0;
    param_grads.end += m.unary.row(m.unary.rows() - 1).transpose();
    param_grads.end(tags.back()) -= 1.0;
  }
  return nll;
}

NllResult NllAndGradient(std::span<const LabeledEmissions> batch,
                         const CrfParams& params) {
  const int K = params.num_tags();
  NllResult result;
  result.grads.transition = Matrix::Zero(K, K);
  if (params.has_boundaries()) {
    result.grads.begin = Vector::Zero(K);
    result.grads.end = Vector::Zero(K);
  }
  for (const LabeledEmissions& item : batch) {
    Matrix grad = Matrix::Zero(item.emissions->rows(), item.emissions->cols());
    result.loss += AccumulateNllGradient(item.tags, *item.emissions, params,
                                         grad, result.grads);
    result.grads.emissions.push_back(std::move(grad));
  }
  return result;
}

}  // namespace mtal::crf
