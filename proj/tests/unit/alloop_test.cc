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

#include <filesystem>
#include <set>
#include <sstream>

#include "../test_util.h"
#include "mtal/alloop.h"
#include "mtal/error.h"
#include "mtal/json_io.h"

namespace mtal::al {
namespace {

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

struct Fixture {
  Corpus corpus;
  Splits splits;
};

Fixture MakeFixture(int count, double seed_fraction, uint64_t seed = 1) {
  Fixture f;
  f.corpus = testing::SmallCorpus(count, seed);
  SplitSpec spec;
  spec.seed_labeled_fraction = seed_fraction;
  spec.rng_seed = seed;
  f.splits = SplitCorpus(f.corpus, spec);
  return f;
}

ALConfig Custom(query::Strategy strategy, int batch, int rounds) {
  ALConfig c;
  c.scenario = Scenario::kCustom;
  c.strategy = strategy;
  c.batch_size = batch;
  c.rounds = rounds;
  c.rng_seed = 7;
  return c;
}

TEST_CASE("scenario configuration") {
  ALConfig c;
  c.scenario = ParseScenario("85:15");
  CHECK(c.effective_batch() == 10);
  CHECK(c.effective_seed_fraction() == 0.85);
  CHECK(FinalLabeledSize(4845, c) == 4218);
  c.scenario = ParseScenario("50:50");
  CHECK(c.effective_batch() == 100);
  CHECK(FinalLabeledSize(4845, c) == 2423 + 1000);
  CHECK(ScenarioName(Scenario::k50_50) == "50:50");
  CHECK_THROWS_AS(ParseScenario("70:30"), Error);

  ALConfig custom = Custom(query::Strategy::kViterbi, 50, 3);
  custom.seed_fraction = 0.1;
  CHECK(FinalLabeledSize(100, custom) == 100);
  CHECK(custom.effective_epochs() == 1);
  custom.retrain_from_scratch = true;
  CHECK(custom.effective_epochs() == custom.train.max_epochs);
  custom.epochs_per_round = 2;
  CHECK(custom.effective_epochs() == 2);

  custom.rounds = 0;
  CHECK(CodeOf([&] { custom.Validate(); }) == ErrorCode::kInvalidConfig);
  custom.rounds = 1;
  custom.batch_size = 0;
  CHECK(CodeOf([&] { custom.Validate(); }) == ErrorCode::kInvalidConfig);
  custom.batch_size = 1;
  custom.seed_fraction = 0;
  CHECK(CodeOf([&] { custom.Validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("pool state transitions") {
  const Corpus corpus = testing::SmallCorpus(6, 3);
  Pool pool;
  pool.AddLabeled(corpus.sentences[0]);
  for (int i = 1; i < 6; ++i) pool.AddUnlabeled(corpus.sentences[i]);
  const std::string a = corpus.sentences[1].id;
  const std::string b = corpus.sentences[2].id;
  pool.CheckInvariants();
  CHECK(pool.labeled_size() == 1);
  CHECK(pool.unlabeled_size() == 5);
  CHECK_FALSE(pool.Get(a).srl.has_value());
  CHECK(CodeOf([&] { pool.AddUnlabeled(corpus.sentences[1]); }) ==
        ErrorCode::kDuplicateId);
  CHECK(CodeOf([&] { pool.AddLabeled(corpus.sentences[1].WithoutLabels()); }) ==
        ErrorCode::kMissingLabels);

  const std::vector<std::string> lease = {a, b};
  pool.Lease(lease);
  CHECK(pool.in_flight() == lease);
  CHECK(pool.unlabeled_size() == 3);
  CHECK(CodeOf([&] { pool.Lease(lease); }) == ErrorCode::kNotInFlight);
  const std::vector<std::string> unknown = {"nope"};
  CHECK(CodeOf([&] { pool.Lease(unknown); }) == ErrorCode::kUnknownId);
  pool.CheckInvariants();

  const Sentence& gold = corpus.sentences[1];
  TagSequence short_tags(gold.size() - 1, 0);
  CHECK(CodeOf([&] { pool.Label(a, short_tags, *gold.er, true); }) ==
        ErrorCode::kLengthMismatch);
  TagSequence orphan(gold.size(), 0);
  orphan[0] = TagSet::InsideOf(0);
  CHECK(CodeOf([&] { pool.Label(a, orphan, *gold.er, true); }) ==
        ErrorCode::kInvalidBio);
  TagSequence out_of_range(gold.size(), 99);
  CHECK(CodeOf([&] { pool.Label(a, out_of_range, *gold.er, true); }) ==
        ErrorCode::kTagOutOfRange);
  CHECK(pool.IsInFlight(a));

  pool.Label(a, *gold.srl, *gold.er, true);
  CHECK(pool.IsLabeled(a));
  CHECK(pool.Get(a).srl == gold.srl);
  CHECK(CodeOf([&] { pool.Label(a, *gold.srl, *gold.er, true); }) ==
        ErrorCode::kNotInFlight);
  const Sentence& third = corpus.sentences[3];
  CHECK(CodeOf([&] { pool.Label(third.id, *third.srl, *third.er, true); }) ==
        ErrorCode::kNotInFlight);
  pool.Label(third.id, *third.srl, *third.er, false);

  pool.Release(b);
  CHECK(pool.IsUnlabeled(b));
  CHECK(CodeOf([&] { pool.Release(b); }) == ErrorCode::kNotInFlight);
  CHECK(CodeOf([&] { pool.Release("nope"); }) == ErrorCode::kUnknownId);
  CHECK(pool.labeled_ids() ==
        std::vector<std::string>{corpus.sentences[0].id, a, third.id});
  pool.CheckInvariants();
}

TEST_CASE("protocol moves B sentences per round") {
  const Fixture f = MakeFixture(300, 0.2);
  for (query::Strategy strategy : query::AllStrategies()) {
    CAPTURE(query::StrategyName(strategy));
    StubLearner learner(static_cast<int>(f.splits.train.size()));
    ALConfig config = Custom(strategy, 15, 5);
    config.seed_fraction = 0.2;
    const ALResult r = RunAl(f.corpus, f.splits, learner, config);
    REQUIRE(r.rounds.size() == 6);
    const int seed = static_cast<int>(f.splits.seed_labeled.size());
    std::set<std::string> queried;
    const std::set<std::string> pool(f.splits.pool.begin(), f.splits.pool.end());
    for (const RoundLog& log : r.rounds) {
      CHECK(log.labeled == seed + 15 * log.round);
      CHECK(log.queried.size() == (log.round == 0 ? 0u : 15u));
      for (const std::string& id : log.queried) {
        CHECK(queried.insert(id).second);
        CHECK(pool.count(id) == 1);
      }
      CHECK(log.drawn.has_value() ==
            (log.round > 0 && strategy == query::Strategy::kRandomTask));
      CHECK(log.dev_er.has_value());
      CHECK(log.test.has_value());
    }
    CHECK(r.labeled_ids.size() == static_cast<size_t>(seed + 75));
    CHECK(r.rounds.back().labeled ==
          FinalLabeledSize(static_cast<int>(f.splits.train.size()), config));
  }
}

TEST_CASE("uncertainty strategies follow the learner scores") {
  const Fixture f = MakeFixture(200, 0.3);
  StubLearner learner(static_cast<int>(f.splits.train.size()));
  const ALResult r =
      RunAl(f.corpus, f.splits, learner, Custom(query::Strategy::kViterbi, 5, 1));
  Pool before;
  for (const Sentence* s : Select(f.corpus, f.splits.pool)) before.AddUnlabeled(*s);
  Rng rng(0);
  const auto expected =
      query::Select(learner.Score(before.Unlabeled()), query::Strategy::kViterbi,
                    5, rng);
  CHECK(r.rounds[1].queried == expected.ids);
}

TEST_CASE("a single full batch labels the whole train split") {
  const Fixture f = MakeFixture(120, 0.25);
  StubLearner learner(static_cast<int>(f.splits.train.size()));
  const ALResult r =
      RunAl(f.corpus, f.splits, learner,
            Custom(query::Strategy::kRandom,
                   static_cast<int>(f.splits.pool.size()), 1));
  const std::set<std::string> labeled(r.labeled_ids.begin(), r.labeled_ids.end());
  const std::set<std::string> train(f.splits.train.begin(), f.splits.train.end());
  CHECK(labeled == train);
  CHECK(r.rounds.back().dev.f1 == 1.0);
}

TEST_CASE("pool exhaustion and early stopping") {
  const Fixture f = MakeFixture(100, 0.5);
  const int pool_size = static_cast<int>(f.splits.pool.size());
  StubLearner learner(static_cast<int>(f.splits.train.size()));
  ALConfig config = Custom(query::Strategy::kTokenEntropy, 30, 6);
  config.patience = 0;
  ALResult r = RunAl(f.corpus, f.splits, learner, config);
  REQUIRE(r.rounds.size() == 7);
  CHECK(r.rounds.back().labeled == static_cast<int>(f.splits.train.size()));
  int exhausted = 0;
  for (const RoundLog& log : r.rounds) exhausted += log.pool_exhausted;
  CHECK(exhausted == 6 - (pool_size + 29) / 30);
  CHECK_FALSE(r.early_stopped);

  // With patience the flat tail after exhaustion ends the run.
  config.patience = 2;
  StubLearner again(static_cast<int>(f.splits.train.size()));
  r = RunAl(f.corpus, f.splits, again, config);
  CHECK(r.early_stopped);
  CHECK(r.best_round == (pool_size + 29) / 30);
  CHECK(static_cast<int>(r.rounds.size()) == r.best_round + 3);

  // Without dev data stopping is disabled.
  Fixture no_dev = f;
  no_dev.splits.dev.clear();
  StubLearner third(static_cast<int>(f.splits.train.size()));
  r = RunAl(no_dev.corpus, no_dev.splits, third, config);
  CHECK_FALSE(r.early_stopped);
  CHECK(r.rounds.size() == 7);
}

TEST_CASE("protocol errors") {
  Fixture f = MakeFixture(60, 0.5);
  StubLearner single(static_cast<int>(f.splits.train.size()), false);
  CHECK(CodeOf([&] {
          RunAl(f.corpus, f.splits, single,
                Custom(query::Strategy::kRankCombination, 5, 2));
        }) == ErrorCode::kInvalidConfig);
  StubLearner ok(static_cast<int>(f.splits.train.size()), false);
  const ALResult r = RunAl(f.corpus, f.splits, ok,
                           Custom(query::Strategy::kViterbi, 5, 2));
  CHECK_FALSE(r.rounds[0].dev_er.has_value());
  f.splits.seed_labeled.clear();
  CHECK(CodeOf([&] {
          RunAl(f.corpus, f.splits, ok, Custom(query::Strategy::kViterbi, 5, 2));
        }) == ErrorCode::kEmptyTrainingSet);
}

TEST_CASE("stub runs write identical logs") {
  const Fixture f = MakeFixture(150, 0.2);
  const auto dir = testing::TempDir("alloop_stub");
  std::string first[2];
  for (int run = 0; run < 2; ++run) {
    StubLearner learner(static_cast<int>(f.splits.train.size()));
    RunOutput out{(dir / std::to_string(run)).string(), true};
    RunAl(f.corpus, f.splits, learner,
          Custom(query::Strategy::kRandomTask, 8, 4), out);
    first[run] = ReadFile(out.dir + "/rounds.csv") +
                 ReadFile(out.dir + "/queried.csv") +
                 ReadFile(out.dir + "/scores/round_002.csv");
    CHECK(std::filesystem::exists(out.dir + "/timing.csv"));
    CHECK(std::filesystem::exists(out.dir + "/best.ckpt"));
    CHECK(std::filesystem::exists(out.dir + "/final.ckpt"));
    CHECK(std::filesystem::exists(out.dir + "/test_report.txt"));
    CHECK(std::filesystem::exists(out.dir + "/test_confusion_percent.csv"));
  }
  CHECK(first[0] == first[1]);
  const std::string rounds = ReadFile((dir / "0" / "rounds.csv").string());
  CHECK(rounds.rfind("round,labeled,queried,drawn_task,pool_exhausted,srl_loss,"
                     "er_loss,dev_precision",
                     0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("learning curve table") {
  RoundLog a0, a1, b0;
  a0.labeled = 10;
  a0.dev.f1 = 0.5;
  a1.round = 1;
  a1.labeled = 20;
  a1.dev.f1 = 0.75;
  a1.test = eval::MakePrf(1, 2, 2);
  b0.labeled = 5;
  b0.dev.f1 = 0.25;
  std::ostringstream out;
  EmitLearningCurve(out, {{"ve", {a0, a1}}, {"random", {b0}}});
  CHECK(out.str() ==
        "round,ve:labeled,ve:dev_f1,ve:test_f1,random:labeled,random:dev_f1,"
        "random:test_f1\n"
        "0,10,0.5,NA,5,0.25,NA\n"
        "1,20,0.75,0.5,NA,NA,NA\n");
}

TEST_CASE("tagger learner runs the protocol and improves on its seed") {
  const Fixture f = MakeFixture(600, 0.05, 4);
  ModelConfig model = ModelConfig::Desk();
  const Corpus& corpus = f.corpus;
  TrainConfig train;
  train.batch_size = 16;
  TaggerLearner learner(
      [&] { return TaggerModel(model, corpus.word_vocab, corpus.char_vocab); },
      train);
  ALConfig config = Custom(query::Strategy::kRankCombination, 40, 4);
  config.patience = 0;
  config.epochs_per_round = 2;
  const ALResult r = RunAl(f.corpus, f.splits, learner, config);
  REQUIRE(r.rounds.size() == 5);
  CHECK(r.rounds.back().dev.f1 > r.rounds.front().dev.f1);
  CHECK(r.rounds.back().loss.srl > 0);
  CHECK(r.rounds.back().loss.er > 0);
  REQUIRE(r.final_test.has_value());
  CHECK(r.final_test->overall.f1 == r.rounds.back().test->f1);
}

TEST_CASE("passive training writes its artifacts") {
  const Fixture f = MakeFixture(200, 0.5, 6);
  const TaggerModel model(ModelConfig::Desk(), f.corpus.word_vocab,
                          f.corpus.char_vocab);
  TrainConfig train;
  train.max_epochs = 2;
  const auto dir = testing::TempDir("alloop_passive");
  const PassiveResult r =
      RunPassive(f.corpus, f.splits, model, train, dir.string());
  CHECK(r.train.log.size() == 2);
  REQUIRE(r.test.has_value());
  const std::string epochs = ReadFile((dir / "epochs.csv").string());
  CHECK(epochs.rfind("epoch,srl_loss,er_loss,dev_precision,dev_recall,dev_f1\n",
                     0) == 0);
  CHECK(TaggerModel::LoadFile((dir / "best.ckpt").string()).num_parameters() ==
        model.num_parameters());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mtal::al
