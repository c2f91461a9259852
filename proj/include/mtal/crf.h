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

// Linear-chain CRF over per-token unary scores and a tag-to-tag transition
// matrix. The score of a path y is
//
//   score(y) = begin[y_0] + sum_t emission(t, y_t)
//            + sum_{t>0} transition(y_{t-1}, y_t) + end[y_{T-1}]
//
// and p(y | x) = exp(score(y) - log Z). All recursions run in log space in
// double precision. The first token has no incoming transition; the begin
// and end vectors are empty (disabled) by default.

#ifndef MTAL_CRF_H_
#define MTAL_CRF_H_

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mtal::crf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Emissions are T x K: row t holds the unary scores of token t.
using EmissionScores = Matrix;

struct CrfParams {
  Matrix transition;  // K x K, transition(i, j) scores tag i -> tag j
  Vector begin;       // empty or length K
  Vector end;         // empty or length K

  static CrfParams Zero(int num_tags, bool with_boundaries = false);
  int num_tags() const { return static_cast<int>(transition.rows()); }
  bool has_boundaries() const { return begin.size() > 0; }
};

struct DecodeResult {
  std::vector<int> path;
  double path_log_prob = 0;  // log p(path | x), always <= 0
  double log_partition = 0;
};

// Thrown (as mtal::Error kShapeMismatch) when emission columns, transition
// size and boundary vectors disagree, or T == 0.
void CheckShapes(const EmissionScores& emissions, const CrfParams& params);

double PathScore(std::span<const int> tags, const EmissionScores& emissions,
                 const CrfParams& params);

double LogPartition(const EmissionScores& emissions, const CrfParams& params);

double SequenceLogProb(std::span<const int> tags,
                       const EmissionScores& emissions,
                       const CrfParams& params);

// Highest-scoring path; ties resolve to the lowest tag index.
DecodeResult Viterbi(const EmissionScores& emissions, const CrfParams& params);

// Per-token tag posteriors (T x K) and expected transition counts (K x K).
struct Marginals {
  Matrix unary;
  Matrix pairwise;
  double log_partition = 0;
};

Marginals ForwardBackward(const EmissionScores& emissions,
                          const CrfParams& params);

struct CrfGradients {
  std::vector<Matrix> emissions;  // one T x K matrix per batch item
  Matrix transition;
  Vector begin;
  Vector end;
};

struct LabeledEmissions {
  std::span<const int> tags;
  const EmissionScores* emissions;
};

struct NllResult {
  double loss = 0;
  CrfGradients grads;
};

// Negative log-likelihood summed over the batch together with its gradient
// with respect to every emission score and every CRF parameter.
NllResult NllAndGradient(std::span<const LabeledEmissions> batch,
                         const CrfParams& params);

// Single-sequence variant that adds into caller-provided accumulators.
// Returns the sequence NLL.
double AccumulateNllGradient(std::span<const int> tags,
                             const EmissionScores& emissions,
                             const CrfParams& params, Matrix& emission_grad,
                             CrfGradients& param_grads);

}  // namespace mtal::crf

#endif  // MTAL_CRF_H_
