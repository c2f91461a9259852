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

#include "mtal/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "mtal/error.h"
#include "mtal/random.h"

namespace mtal::eval {

SpanList ExtractSpans(std::span<const int> tags, const TagSet& tagset) {
  for (int tag : tags) {
    if (tag < 0 || tag >= tagset.size()) {
      throw Error(ErrorCode::kTagOutOfRange,
                  "tag index " + std::to_string(tag) + " not in " +
                      std::string(TaskName(tagset.task())) + " tag set");
    }
  }
  const TagSequence repaired = RepairBio(tags);
  SpanList spans;
  for (int t = 0; t < static_cast<int>(repaired.size()); ++t) {
    const int tag = repaired[t];
    if (TagSet::IsBegin(tag)) {
      spans.push_back({TagSet::LabelOf(tag), t, t});
    } else if (TagSet::IsInside(tag)) {
      spans.back().end = t;
    }
  }
  return spans;
}

Prf MakePrf(int true_positives, int predicted, int gold) {
  Prf prf;
  prf.true_positives = true_positives;
  prf.predicted = predicted;
  prf.gold = gold;
  prf.precision = predicted > 0 ? static_cast<double>(true_positives) / predicted
                                : (gold == 0 ? 1.0 : 0.0);
  prf.recall = gold > 0 ? static_cast<double>(true_positives) / gold
                        : (predicted == 0 ? 1.0 : 0.0);
  const double sum = prf.precision + prf.recall;
  prf.f1 = sum > 0 ? 2 * prf.precision * prf.recall / sum : 0.0;
  return prf;
}

namespace {

void CheckParallel(size_t gold, size_t pred) {
  if (gold != pred) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(gold) + " gold vs " + std::to_string(pred) +
                    " predicted sentences");
  }
}

void Add(Taxonomy& into, const Taxonomy& from) {
  into.exact += from.exact;
  into.role_confusion += from.role_confusion;
  into.boundary += from.boundary;
  into.false_negative += from.false_negative;
  into.false_positive += from.false_positive;
}

}  // namespace

ErrorAnalysis ClassifySentenceErrors(const SpanList& gold, const SpanList& pred,
                                     int num_labels) {
  ErrorAnalysis out{Taxonomy{}, ConfusionMatrix(num_labels)};
  std::vector<bool> pred_matched(pred.size(), false);
  const int none = out.confusion.none();

  // Exact matches first so a later gold span cannot steal a partner.
  std::vector<int> category(gold.size(), -1);
  for (size_t g = 0; g < gold.size(); ++g) {
    for (size_t p = 0; p < pred.size(); ++p) {
      if (!pred_matched[p] && pred[p] == gold[g]) {
        pred_matched[p] = true;
        category[g] = 0;
        ++out.taxonomy.exact;
        ++out.confusion.at(gold[g].label, gold[g].label);
        break;
      }
    }
  }
  for (size_t g = 0; g < gold.size(); ++g) {
    if (category[g] >= 0) continue;
    for (size_t p = 0; p < pred.size(); ++p) {
      if (!pred_matched[p] && pred[p].SameBoundaries(gold[g])) {
        pred_matched[p] = true;
        category[g] = 1;
        ++out.taxonomy.role_confusion;
        ++out.confusion.at(gold[g].label, pred[p].label);
        break;
      }
    }
  }
  for (size_t g = 0; g < gold.size(); ++g) {
    if (category[g] >= 0) continue;
    bool boundary = false;
    for (size_t p = 0; p < pred.size(); ++p) {
      if (pred[p].label == gold[g].label && pred[p].Overlaps(gold[g])) {
        boundary = true;
        break;
      }
    }
    if (boundary) {
      ++out.taxonomy.boundary;
    } else {
      ++out.taxonomy.false_negative;
    }
    ++out.confusion.at(gold[g].label, none);
  }
  for (size_t p = 0; p < pred.size(); ++p) {
    if (pred_matched[p]) continue;
    ++out.taxonomy.false_positive;
    ++out.confusion.at(none, pred[p].label);
  }
  return out;
}

ErrorAnalysis ClassifyErrors(std::span<const SpanList> gold,
                             std::span<const SpanList> pred, int num_labels) {
  CheckParallel(gold.size(), pred.size());
  ErrorAnalysis total{Taxonomy{}, ConfusionMatrix(num_labels)};
  for (size_t i = 0; i < gold.size(); ++i) {
    const ErrorAnalysis one = ClassifySentenceErrors(gold[i], pred[i], num_labels);
    Add(total.taxonomy, one.taxonomy);
    for (size_t c = 0; c < total.confusion.counts.size(); ++c) {
      total.confusion.counts[c] += one.confusion.counts[c];
    }
  }
  return total;
}

SpanMatchReport SpanPrf(std::span<const SpanList> gold,
                        std::span<const SpanList> pred, int num_labels) {
  CheckParallel(gold.size(), pred.size());
  std::vector<int> tp(num_labels, 0), n_pred(num_labels, 0),
      n_gold(num_labels, 0);
  for (size_t i = 0; i < gold.size(); ++i) {
    SpanList g = gold[i];
    SpanList p = pred[i];
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    for (const Span& s : g) ++n_gold.at(s.label);
    for (const Span& s : p) ++n_pred.at(s.label);
    // Sorted-merge intersection; spans within one sentence are distinct.
    size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a] == p[b]) {
        ++tp[g[a].label];
        ++a;
        ++b;
      } else if (g[a] < p[b]) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  SpanMatchReport report;
  int total_tp = 0, total_pred = 0, total_gold = 0;
  for (int l = 0; l < num_labels; ++l) {
    report.per_label.push_back(MakePrf(tp[l], n_pred[l], n_gold[l]));
    total_tp += tp[l];
    total_pred += n_pred[l];
    total_gold += n_gold[l];
  }
  report.overall = MakePrf(total_tp, total_pred, total_gold);
  const ErrorAnalysis errors = ClassifyErrors(gold, pred, num_labels);
  report.confusion = errors.confusion;
  report.taxonomy = errors.taxonomy;
  for (int l = 0; l < num_labels; ++l) {
    report.label_names.push_back("L" + std::to_string(l));
  }
  return report;
}

SpanMatchReport Evaluate(std::span<const TagSequence> gold,
                         std::span<const TagSequence> pred,
                         const TagSet& tagset) {
  CheckParallel(gold.size(), pred.size());
  std::vector<SpanList> gold_spans, pred_spans;
  gold_spans.reserve(gold.size());
  pred_spans.reserve(pred.size());
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw Error(ErrorCode::kLengthMismatch,
                  "sentence " + std::to_string(i) + " tag lengths differ");
    }
    gold_spans.push_back(ExtractSpans(gold[i], tagset));
    pred_spans.push_back(ExtractSpans(pred[i], tagset));
  }
  SpanMatchReport report =
      SpanPrf(gold_spans, pred_spans, tagset.num_labels());
  report.label_names.clear();
  for (const SpanLabel& label : tagset.labels()) {
    report.label_names.push_back(label.name);
  }
  return report;
}

namespace {

std::string Fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::string Exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void WritePrfRow(std::ostream& out, const std::string& name, const Prf& prf) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %8.2f %8.2f %8.2f %6d %6d %6d\n",
                name.c_str(), 100 * prf.precision, 100 * prf.recall,
                100 * prf.f1, prf.true_positives, prf.predicted, prf.gold);
  out << buf;
}

void WriteKv(std::ostream& out, const std::string& prefix, const Prf& prf) {
  out << prefix << ".precision=" << Exact(prf.precision) << '\n'
      << prefix << ".recall=" << Exact(prf.recall) << '\n'
      << prefix << ".f1=" << Exact(prf.f1) << '\n'
      << prefix << ".tp=" << prf.true_positives << '\n'
      << prefix << ".predicted=" << prf.predicted << '\n'
      << prefix << ".gold=" << prf.gold << '\n';
}

void WriteConfusionHeader(std::ostream& out, const SpanMatchReport& report) {
  out << "gold\\pred";
  for (const std::string& name : report.label_names) out << ',' << name;
  out << ",NONE\n";
}

std::string RowName(const SpanMatchReport& report, int row) {
  return row < static_cast<int>(report.label_names.size())
             ? report.label_names[row]
             : "NONE";
}

}  // namespace

void WriteReportTable(std::ostream& out, const SpanMatchReport& report) {
  out << "label              P(%)     R(%)    F1(%)     tp   pred   gold\n";
  for (size_t l = 0; l < report.per_label.size(); ++l) {
    WritePrfRow(out, report.label_names.at(l), report.per_label[l]);
  }
  WritePrfRow(out, "overall", report.overall);
  const Taxonomy& tx = report.taxonomy;
  out << "errors: role-confusion=" << tx.role_confusion
      << " boundary=" << tx.boundary << " false-negative=" << tx.false_negative
      << " false-positive=" << tx.false_positive << '\n';
}

void WriteReportKeyValue(std::ostream& out, const SpanMatchReport& report) {
  WriteKv(out, "overall", report.overall);
  for (size_t l = 0; l < report.per_label.size(); ++l) {
    WriteKv(out, "label." + report.label_names.at(l), report.per_label[l]);
  }
  const Taxonomy& tx = report.taxonomy;
  out << "taxonomy.exact=" << tx.exact << '\n'
      << "taxonomy.role_confusion=" << tx.role_confusion << '\n'
      << "taxonomy.boundary=" << tx.boundary << '\n'
      << "taxonomy.false_negative=" << tx.false_negative << '\n'
      << "taxonomy.false_positive=" << tx.false_positive << '\n';
}

void WriteConfusionCsv(std::ostream& out, const SpanMatchReport& report) {
  WriteConfusionHeader(out, report);
  const ConfusionMatrix& m = report.confusion;
  for (int g = 0; g <= m.num_labels; ++g) {
    out << RowName(report, g);
    for (int p = 0; p <= m.num_labels; ++p) out << ',' << m.at(g, p);
    out << '\n';
  }
}

void WriteConfusionPercentCsv(std::ostream& out,
                              const SpanMatchReport& report) {
  WriteConfusionHeader(out, report);
  const ConfusionMatrix& m = report.confusion;
  for (int g = 0; g <= m.num_labels; ++g) {
    int total = 0;
    for (int p = 0; p <= m.num_labels; ++p) total += m.at(g, p);
    out << RowName(report, g);
    for (int p = 0; p <= m.num_labels; ++p) {
      out << ',' << (total > 0 ? Fixed(100.0 * m.at(g, p) / total, 2) : "NA");
    }
    out << '\n';
  }
}

TTestResult PairedTTest(std::span<const double> a, std::span<const double> b,
                        double alpha) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch, "paired samples differ in length");
  }
  const int n = static_cast<int>(a.size());
  if (n < 2) {
    throw Error(ErrorCode::kInvalidConfig, "paired t-test needs n >= 2");
  }
  std::vector<double> d(n);
  double mean = 0;
  for (int i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    mean += d[i];
  }
  mean /= n;
  double ss = 0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double variance = ss / (n - 1);

  TTestResult result;
  result.degrees_of_freedom = n - 1;
  const bool all_zero =
      std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; });
  if (all_zero) {
    result.t_statistic = 0;
    result.p_value = 1;
    return result;
  }
  // Relative threshold: five copies of a decimal difference are rarely
  // bitwise equal after subtraction.
  if (variance <= 1e-24 * std::max(1.0, mean * mean)) {
    result.degenerate = true;
    result.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
    result.p_value = 0;
    return result;
  }
  result.t_statistic = mean / std::sqrt(variance / n);
  const boost::math::students_t dist(n - 1);
  result.p_value = 2 * boost::math::cdf(
                           boost::math::complement(dist,
                                                   std::abs(result.t_statistic)));
  result.significant = result.p_value < alpha;
  return result;
}

std::vector<std::vector<std::string>> MakeFolds(std::vector<std::string> ids,
                                                int k, uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidConfig, "k must be >= 2");
  if (static_cast<int>(ids.size()) < k) {
    throw Error(ErrorCode::kInvalidConfig, "fewer sentences than folds");
  }
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.Shuffle(ids);
  std::vector<std::vector<std::string>> folds(k);
  const size_t n = ids.size();
  for (int f = 0; f < k; ++f) {
    const size_t begin = n * f / k;
    const size_t end = n * (f + 1) / k;
    folds[f].assign(ids.begin() + begin, ids.begin() + end);
  }
  return folds;
}

std::vector<FoldResult> RunCrossValidation(const std::vector<std::string>& ids,
                                           int k, uint64_t seed,
                                           const FoldRunner& runner) {
  const auto folds = MakeFolds(ids, k, seed);
  std::vector<FoldResult> results;
  for (int f = 0; f < k; ++f) {
    FoldResult r;
    r.fold = f;
    r.test = folds[f];
    for (int g = 0; g < k; ++g) {
      if (g != f) r.train.insert(r.train.end(), folds[g].begin(), folds[g].end());
    }
    r.metrics = runner(r.train, r.test, f);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mtal::eval
