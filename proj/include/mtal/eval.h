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

// Exact-span evaluation: micro P/R/F1 overall and per label, a span
// confusion matrix, an error taxonomy and paired significance testing.

#ifndef MTAL_EVAL_H_
#define MTAL_EVAL_H_

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtal/corpus.h"

namespace mtal::eval {

struct Span {
  int label = 0;
  int start = 0;
  int end = 0;  // inclusive

  auto operator<=>(const Span&) const = default;
  bool Overlaps(const Span& other) const {
    return start <= other.end && other.start <= end;
  }
  bool SameBoundaries(const Span& other) const {
    return start == other.start && end == other.end;
  }
};

using SpanList = std::vector<Span>;

// Maximal B-x (I-x)* runs. Orphan I-x tags are demoted to B-x first, so the
// function is total over in-range tags. Throws kTagOutOfRange otherwise.
SpanList ExtractSpans(std::span<const int> tags, const TagSet& tagset);

struct Prf {
  int true_positives = 0;
  int predicted = 0;
  int gold = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Precision is tp / predicted; with nothing predicted it is 1 when there is
// also nothing to find and 0 otherwise (recall symmetrically).
Prf MakePrf(int true_positives, int predicted, int gold);

struct Taxonomy {
  int exact = 0;
  int role_confusion = 0;
  int boundary = 0;
  int false_negative = 0;
  int false_positive = 0;
};

// (L + 1) x (L + 1) counts with index L standing for "no span".
// Rows are gold labels, columns predicted labels.
struct ConfusionMatrix {
  int num_labels = 0;
  std::vector<int> counts;

  explicit ConfusionMatrix(int labels = 0)
      : num_labels(labels), counts((labels + 1) * (labels + 1), 0) {}
  int none() const { return num_labels; }
  int& at(int gold, int pred) { return counts[gold * (num_labels + 1) + pred]; }
  int at(int gold, int pred) const {
    return counts[gold * (num_labels + 1) + pred];
  }
};

struct SpanMatchReport {
  std::vector<std::string> label_names;
  Prf overall;
  std::vector<Prf> per_label;
  ConfusionMatrix confusion;
  Taxonomy taxonomy;
};

// Micro-averaged exact-match scores pooled over parallel sentence lists.
// Throws kLengthMismatch when the lists differ in length.
SpanMatchReport SpanPrf(std::span<const SpanList> gold,
                        std::span<const SpanList> pred, int num_labels);

struct ErrorAnalysis {
  Taxonomy taxonomy;
  ConfusionMatrix confusion;
};

// Assigns each gold span to exactly one of exact match, role confusion (same
// boundaries, other label), boundary error (same label, overlapping) or false
// negative, in that order of precedence. Predicted spans that are neither an
// exact match nor a confusion partner count as false positives.
ErrorAnalysis ClassifySentenceErrors(const SpanList& gold, const SpanList& pred,
                                     int num_labels);
ErrorAnalysis ClassifyErrors(std::span<const SpanList> gold,
                             std::span<const SpanList> pred, int num_labels);

// Full report from tag sequences: spans, P/R/F1, taxonomy and confusion.
SpanMatchReport Evaluate(std::span<const TagSequence> gold,
                         std::span<const TagSequence> pred,
                         const TagSet& tagset);

void WriteReportTable(std::ostream& out, const SpanMatchReport& report);
// Stable "key=value" lines, one metric per line.
void WriteReportKeyValue(std::ostream& out, const SpanMatchReport& report);
void WriteConfusionCsv(std::ostream& out, const SpanMatchReport& report);
// Same layout with each row normalized to percentages of its row total.
void WriteConfusionPercentCsv(std::ostream& out, const SpanMatchReport& report);

struct TTestResult {
  double t_statistic = 0;
  double p_value = 1;
  int degrees_of_freedom = 0;
  bool significant = false;  // two-tailed, alpha = 0.05
  bool degenerate = false;   // zero-variance nonzero differences
};

// Two-tailed paired t-test on a[i] - b[i].
TTestResult PairedTTest(std::span<const double> a, std::span<const double> b,
                        double alpha = 0.05);

// Partition of ids into k folds of near-equal size, deterministic in seed.
std::vector<std::vector<std::string>> MakeFolds(std::vector<std::string> ids,
                                                int k, uint64_t seed);

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
  Prf metrics;
};

using FoldRunner = std::function<Prf(const std::vector<std::string>& train,
                                     const std::vector<std::string>& test,
                                     int fold)>;

// Runs `runner` once per fold with that fold held out for testing.
std::vector<FoldResult> RunCrossValidation(const std::vector<std::string>& ids,
                                           int k, uint64_t seed,
                                           const FoldRunner& runner);

}  // namespace mtal::eval

#endif  // MTAL_EVAL_H_
