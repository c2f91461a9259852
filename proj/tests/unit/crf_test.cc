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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "../test_util.h"
#include "mtal/crf.h"
#include "mtal/error.h"

namespace mtal::crf {
namespace {

using testing::Enumerate;
using testing::ForEachPath;
using testing::NaivePathScore;
using testing::RandomCrf;
using testing::RandomMatrix;

TEST_CASE("partition and decoding agree with enumeration") {
  Rng rng(1);
  for (int trial = 0; trial < 150; ++trial) {
    const int k = 2 + static_cast<int>(rng.UniformInt(3));
    const int t = 1 + static_cast<int>(rng.UniformInt(5));
    const bool boundaries = trial % 2 == 1;
    const CrfParams p = RandomCrf(k, boundaries, rng);
    const Matrix e = RandomMatrix(t, k, rng);
    const testing::Enumeration truth = Enumerate(e, p);
    CHECK(LogPartition(e, p) == doctest::Approx(truth.log_partition).epsilon(1e-12));
    const DecodeResult d = Viterbi(e, p);
    CHECK(d.path == truth.best);
    CHECK(d.path_log_prob ==
          doctest::Approx(truth.best_score - truth.log_partition));
    CHECK(d.path_log_prob <= 0.0);
    CHECK(d.path_log_prob == SequenceLogProb(d.path, e, p));
    CHECK(PathScore(truth.best, e, p) ==
          doctest::Approx(NaivePathScore(truth.best, e, p)));
  }
}

TEST_CASE("sequence probabilities sum to one") {
  Rng rng(2);
  const CrfParams p = RandomCrf(3, true, rng);
  const Matrix e = RandomMatrix(4, 3, rng);
  double total = 0;
  ForEachPath(4, 3, [&](const std::vector<int>& path) {
    total += std::exp(SequenceLogProb(path, e, p));
  });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("marginals match enumerated expectations") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + static_cast<int>(rng.UniformInt(3));
    const int t = 1 + static_cast<int>(rng.UniformInt(4));
    const CrfParams p = RandomCrf(k, trial % 2 == 0, rng);
    const Matrix e = RandomMatrix(t, k, rng);
    const double log_z = Enumerate(e, p).log_partition;
    Matrix unary = Matrix::Zero(t, k);
    Matrix pairwise = Matrix::Zero(k, k);
    ForEachPath(t, k, [&](const std::vector<int>& path) {
      const double prob = std::exp(NaivePathScore(path, e, p) - log_z);
      for (int i = 0; i < t; ++i) unary(i, path[i]) += prob;
      for (int i = 1; i < t; ++i) pairwise(path[i - 1], path[i]) += prob;
    });
    const Marginals m = ForwardBackward(e, p);
    CHECK((m.unary - unary).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.pairwise - pairwise).cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 0; i < t; ++i) {
      CHECK(m.unary.row(i).sum() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("negative log likelihood gradient matches finite differences") {
  Rng rng(4);
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 3 + static_cast<int>(rng.UniformInt(2));
    const int t = 1 + static_cast<int>(rng.UniformInt(5));
    CrfParams p = RandomCrf(k, trial % 2 == 1, rng);
    Matrix e = RandomMatrix(t, k, rng);
    std::vector<int> tags(t);
    for (int& tag : tags) tag = static_cast<int>(rng.UniformInt(k));
    const LabeledEmissions item{tags, &e};
    const NllResult r = NllAndGradient({&item, 1}, p);
    CHECK(r.loss == doctest::Approx(-SequenceLogProb(tags, e, p)));
    auto nll = [&]() { return -SequenceLogProb(tags, e, p); };
    auto check = [&](double& x, double analytic) {
      const double saved = x;
      x = saved + h;
      const double up = nll();
      x = saved - h;
      const double down = nll();
      x = saved;
      CHECK(std::abs((up - down) / (2 * h) - analytic) < 1e-6);
    };
    for (int i = 0; i < t; ++i) {
      for (int j = 0; j < k; ++j) check(e(i, j), r.grads.emissions[0](i, j));
    }
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) check(p.transition(i, j), r.grads.transition(i, j));
    }
    if (p.has_boundaries()) {
      for (int j = 0; j < k; ++j) {
        check(p.begin(j), r.grads.begin(j));
        check(p.end(j), r.grads.end(j));
      }
    }
  }
}

TEST_CASE("batch gradients are sums of per-sentence gradients") {
  Rng rng(5);
  const CrfParams p = RandomCrf(3, false, rng);
  const Matrix e1 = RandomMatrix(3, 3, rng);
  const Matrix e2 = RandomMatrix(5, 3, rng);
  const std::vector<int> t1 = {0, 1, 2};
  const std::vector<int> t2 = {2, 2, 0, 1, 1};
  const LabeledEmissions batch[] = {{t1, &e1}, {t2, &e2}};
  const NllResult both = NllAndGradient(batch, p);
  const NllResult a = NllAndGradient({&batch[0], 1}, p);
  const NllResult b = NllAndGradient({&batch[1], 1}, p);
  CHECK(both.loss == doctest::Approx(a.loss + b.loss));
  CHECK((both.grads.transition - a.grads.transition - b.grads.transition)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK(both.grads.emissions.size() == 2);
}

TEST_CASE("ties decode to the lowest tag indices") {
  const CrfParams p = CrfParams::Zero(4);
  const Matrix e = Matrix::Zero(5, 4);
  const DecodeResult d = Viterbi(e, p);
  CHECK(d.path == std::vector<int>(5, 0));
  CHECK(d.log_partition == doctest::Approx(5 * std::log(4.0)));
}

TEST_CASE("large scores stay finite") {
  Rng rng(6);
  const CrfParams p = RandomCrf(5, true, rng);
  const Matrix e = RandomMatrix(30, 5, rng, 800.0);
  const double log_z = LogPartition(e, p);
  CHECK(std::isfinite(log_z));
  const DecodeResult d = Viterbi(e, p);
  CHECK(std::isfinite(d.path_log_prob));
  CHECK(d.path_log_prob <= 0);
  const Marginals m = ForwardBackward(e, p);
  CHECK(m.unary.allFinite());
}

TEST_CASE("shape and tag errors are reported") {
  const CrfParams p = CrfParams::Zero(3, true);
  CHECK_THROWS_AS(LogPartition(Matrix::Zero(2, 4), p), Error);
  CHECK_THROWS_AS(LogPartition(Matrix::Zero(0, 3), p), Error);
  const std::vector<int> bad = {0, 3};
  CHECK_THROWS_AS(SequenceLogProb(bad, Matrix::Zero(2, 3), p), Error);
  const std::vector<int> short_tags = {0};
  CHECK_THROWS_AS(SequenceLogProb(short_tags, Matrix::Zero(2, 3), p), Error);
  CrfParams broken = p;
  broken.end = Vector::Zero(2);
  CHECK_THROWS_AS(Viterbi(Matrix::Zero(2, 3), broken), Error);
}

}  // namespace
}  // namespace mtal::crf
