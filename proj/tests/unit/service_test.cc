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

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <set>

// Eigen (through the service header) must precede httplib; see src/http.cc.
#include "../test_util.h"
#include "mtal/service.h"

#include "httplib.h"

namespace mtal::service {
namespace {

namespace fs = std::filesystem;

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

struct World {
  Corpus corpus;
  Splits splits;
  fs::path dir;

  explicit World(const std::string& name, int count = 160) {
    corpus = testing::SmallCorpus(count, 21);
    SplitSpec spec;
    spec.seed_labeled_fraction = 0.2;
    spec.rng_seed = 5;
    splits = SplitCorpus(corpus, spec);
    dir = testing::TempDir(name);
  }
  ~World() { fs::remove_all(dir); }

  ServiceConfig Config() const {
    ServiceConfig c;
    c.run_dir = dir.string();
    c.default_batch = 4;
    c.simulated = true;
    c.train.max_epochs = 2;
    c.train.batch_size = 8;
    c.rng_seed = 3;
    return c;
  }

  al::ModelFactory Factory() const {
    return [this] {
      return TaggerModel(ModelConfig::Desk(), corpus.word_vocab,
                         corpus.char_vocab);
    };
  }

  std::unique_ptr<AnnotationService> Start(ServiceConfig config) const {
    return std::make_unique<AnnotationService>(std::move(config), corpus,
                                               splits, Factory());
  }

  std::unique_ptr<AnnotationService> Start() const { return Start(Config()); }

  std::vector<std::string> Gold(const std::string& id, Task task) const {
    const Sentence& s = corpus.Get(id);
    const TagSet tags = task == Task::kSrl ? TagSet::DefaultSrl()
                                           : TagSet::DefaultEr();
    std::vector<std::string> out;
    for (int t : task == Task::kSrl ? *s.srl : *s.er) out.push_back(tags.tag(t));
    return out;
  }

  int Submit(AnnotationService& service, const std::string& id) const {
    return service.SubmitLabels(id, Gold(id, Task::kSrl), Gold(id, Task::kEr),
                                "tester");
  }
};

void Bootstrap(AnnotationService& service) {
  const RetrainStatus status = service.TriggerRetrain();
  CHECK(status.started);
  service.WaitForTraining();
  REQUIRE(service.version() == 1);
}

TEST_CASE("no batch before the first snapshot") {
  World w("svc_nomodel");
  auto service = w.Start();
  CHECK(CodeOf([&] { service->NextBatch(); }) == ErrorCode::kNoModel);
  CHECK(service->Metrics()["metrics_available"] == false);
}

TEST_CASE("batches are idempotent until submitted") {
  World w("svc_batch");
  auto service = w.Start();
  Bootstrap(*service);
  const auto first = service->NextBatch();
  REQUIRE(first.size() == 4);
  const auto again = service->NextBatch(query::Strategy::kViterbi, 9);
  REQUIRE(again.size() == 4);
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(again[i].sentence_id == first[i].sentence_id);
    CHECK(first[i].status == "assigned");
    REQUIRE(first[i].pre.has_value());
    CHECK(first[i].pre->snapshot_version == 1);
    CHECK(first[i].pre->srl_tags.size() == first[i].tokens.size());
    CHECK(first[i].pre->er_confidence.size() == first[i].tokens.size());
    CHECK(first[i].pre->srl_path_probability > 0);
    CHECK(first[i].pre->srl_path_probability <= 1);
  }
  CHECK(service->in_flight_size() == 4);

  const int seed = static_cast<int>(w.splits.seed_labeled.size());
  std::set<std::string> submitted;
  for (const auto& task : first) {
    CHECK(w.Submit(*service, task.sentence_id) ==
          seed + static_cast<int>(submitted.size()) + 1);
    submitted.insert(task.sentence_id);
  }
  CHECK(service->GetSentence(first[0].sentence_id).status == "submitted");
  const auto next = service->NextBatch();
  for (const auto& task : next) CHECK(submitted.count(task.sentence_id) == 0);
}

TEST_CASE("submissions are validated and the pool is unchanged on error") {
  World w("svc_validate");
  auto service = w.Start();
  Bootstrap(*service);
  const auto tasks = service->NextBatch();
  const std::string id = tasks[0].sentence_id;
  const auto srl = w.Gold(id, Task::kSrl);
  const auto er = w.Gold(id, Task::kEr);
  const int labeled = service->labeled_size();

  auto shorter = srl;
  shorter.pop_back();
  CHECK(CodeOf([&] { service->SubmitLabels(id, shorter, er, "x"); }) ==
        ErrorCode::kLengthMismatch);
  auto orphan = srl;
  orphan[0] = "I-A";
  CHECK(CodeOf([&] { service->SubmitLabels(id, orphan, er, "x"); }) ==
        ErrorCode::kInvalidBio);
  auto unknown = er;
  unknown[0] = "B-ANIMAL";
  CHECK(CodeOf([&] { service->SubmitLabels(id, srl, unknown, "x"); }) ==
        ErrorCode::kUnknownLabel);
  CHECK(CodeOf([&] { service->SubmitLabels("nope", srl, er, "x"); }) ==
        ErrorCode::kUnknownId);
  CHECK(service->labeled_size() == labeled);
  CHECK(service->in_flight_size() == 4);

  w.Submit(*service, id);
  CHECK(CodeOf([&] { w.Submit(*service, id); }) == ErrorCode::kNotInFlight);
  const std::string pending = w.splits.seed_labeled[0];
  CHECK(CodeOf([&] { w.Submit(*service, pending); }) == ErrorCode::kNotInFlight);

  service->Release(tasks[1].sentence_id);
  CHECK(service->in_flight_size() == 2);
  CHECK(service->GetSentence(tasks[1].sentence_id).status == "pending");
}

TEST_CASE("batch size clamps to the remaining pool") {
  World w("svc_clamp", 60);
  auto service = w.Start();
  Bootstrap(*service);
  const int remaining = service->unlabeled_size();
  const auto tasks = service->NextBatch(query::Strategy::kRandom, remaining + 3);
  CHECK(static_cast<int>(tasks.size()) == remaining);
  for (const auto& t : tasks) w.Submit(*service, t.sentence_id);
  CHECK(CodeOf([&] { service->NextBatch(); }) == ErrorCode::kEmptyPool);
}

TEST_CASE("retraining publishes new versions and records history") {
  World w("svc_retrain");
  auto service = w.Start();
  Bootstrap(*service);
  CHECK(service->TriggerRetrain().started == false);
  CHECK(service->version() == 1);
  CHECK(service->SimulateRound() == 4);
  CHECK(service->version() == 2);
  const auto tasks = service->NextBatch();
  CHECK(tasks[0].pre->snapshot_version == 2);
  const Json metrics = service->Metrics();
  CHECK(metrics["version"] == 2);
  CHECK(metrics["history"].size() == 2);
  CHECK(metrics["history"][1]["labeled"] ==
        static_cast<int>(w.splits.seed_labeled.size()) + 4);
  CHECK(metrics.contains("dev"));
  CHECK(metrics["in_flight"] == 4);
  CHECK(fs::exists(w.dir / "snapshots" / "v2.ckpt"));
  CHECK(ReadFile((w.dir / "CURRENT").string()) == "2\n");
}

TEST_CASE("a second trigger during training is queued") {
  World w("svc_queue");
  std::mutex mu;
  std::condition_variable cv;
  bool paused = false, resume = false;
  ServiceConfig config = w.Config();
  config.before_publish = [&](int version) {
    if (version != 2) return;
    std::unique_lock<std::mutex> lock(mu);
    paused = true;
    cv.notify_all();
    cv.wait(lock, [&] { return resume; });
  };
  auto service = w.Start(config);
  Bootstrap(*service);
  for (const auto& t : service->NextBatch()) w.Submit(*service, t.sentence_id);
  CHECK(service->TriggerRetrain().started);
  {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return paused; });
  }
  // Training is blocked before publishing version 2.
  for (const auto& t : service->NextBatch()) {
    CHECK(t.pre->snapshot_version == 1);
    w.Submit(*service, t.sentence_id);
  }
  CHECK(CodeOf([&] { service->TriggerRetrain(); }) ==
        ErrorCode::kTrainingInProgress);
  CHECK(service->training());
  {
    std::lock_guard<std::mutex> lock(mu);
    resume = true;
  }
  cv.notify_all();
  service->WaitForTraining();
  CHECK(service->version() == 3);
  CHECK(service->Metrics()["history"][2]["labeled"] == service->labeled_size());
}

TEST_CASE("labels and snapshots survive a restart") {
  World w("svc_restart");
  std::vector<std::string> submitted;
  {
    auto service = w.Start();
    Bootstrap(*service);
    for (const auto& t : service->NextBatch()) {
      w.Submit(*service, t.sentence_id);
      submitted.push_back(t.sentence_id);
    }
    // A lease that is never submitted does not survive.
    service->NextBatch();
  }
  // Simulate a crash in the middle of appending one more record.
  {
    std::ofstream log(w.dir / "labels.jsonl", std::ios::app);
    log << "{\"sentence_id\": \"" << w.splits.pool.back() << "\", \"srl";
  }
  auto service = w.Start();
  CHECK(service->version() == 1);
  CHECK(service->labeled_size() ==
        static_cast<int>(w.splits.seed_labeled.size() + submitted.size()));
  CHECK(service->in_flight_size() == 0);
  for (const auto& id : submitted) {
    const AnnotationTask t = service->GetSentence(id);
    CHECK(t.status == "submitted");
    CHECK(t.srl_tags == w.Gold(id, Task::kSrl));
  }
  CHECK(service->Metrics()["history"].size() == 1);
  CHECK(service->NextBatch().size() == 4);
}

TEST_CASE("a crash before publication keeps the old snapshot") {
  World w("svc_crash");
  {
    ServiceConfig config = w.Config();
    config.before_publish = [](int version) {
      if (version == 2) throw std::runtime_error("killed before publish");
    };
    auto service = w.Start(config);
    Bootstrap(*service);
    for (const auto& t : service->NextBatch()) w.Submit(*service, t.sentence_id);
    CHECK(service->TriggerRetrain().started);
    service->WaitForTraining();
    CHECK(service->version() == 1);
    REQUIRE(service->last_training_error().has_value());
    CHECK(service->last_training_error()->find("killed") != std::string::npos);
    CHECK(service->NextBatch()[0].pre->snapshot_version == 1);
  }
  CHECK(ReadFile((w.dir / "CURRENT").string()) == "1\n");
  auto service = w.Start();
  CHECK(service->version() == 1);
  CHECK(service->NextBatch()[0].pre->snapshot_version == 1);
}

TEST_CASE("error codes map to HTTP statuses") {
  CHECK(StatusFor(ErrorCode::kUnknownId) == 404);
  CHECK(StatusFor(ErrorCode::kNotInFlight) == 409);
  CHECK(StatusFor(ErrorCode::kNoModel) == 409);
  CHECK(StatusFor(ErrorCode::kInvalidBio) == 400);
  CHECK(StatusFor(ErrorCode::kIo) == 500);
}

TEST_CASE("HTTP API and static UI") {
  World w("svc_http");
  const fs::path ui = w.dir / "ui";
  fs::create_directories(ui);
  {
    std::ofstream index(ui / "index.html");
    index << "<!doctype html><title>mtal</title>\n";
  }
  auto service = w.Start();
  HttpServer server(*service, HttpOptions{"127.0.0.1", 0, ui.string()});
  const int port = server.Start();
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto page = client.Get("/");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body.find("<title>mtal</title>") != std::string::npos);

  auto none = client.Get("/api/batch");
  REQUIRE(none);
  CHECK(none->status == 409);
  CHECK(Json::parse(none->body)["error"] == "no-model");

  auto retrain = client.Post("/api/retrain", "", "application/json");
  REQUIRE(retrain);
  CHECK(retrain->status == 200);
  service->WaitForTraining();

  auto batch = client.Get("/api/batch?strategy=rank&size=3");
  REQUIRE(batch);
  REQUIRE(batch->status == 200);
  const Json body = Json::parse(batch->body);
  CHECK(body["snapshot_version"] == 1);
  REQUIRE(body["tasks"].size() == 3);
  const Json task = body["tasks"][0];
  CHECK(task["status"] == "assigned");
  CHECK(task["pre_annotation"]["srl_tags"].size() == task["tokens"].size());
  const std::string id = task["sentence_id"];

  auto again = client.Get("/api/batch");
  REQUIRE(again);
  CHECK(Json::parse(again->body)["tasks"] == body["tasks"]);

  auto bad_strategy = client.Get("/api/batch?strategy=bogus");
  REQUIRE(bad_strategy);
  CHECK(bad_strategy->status == 400);
  CHECK(Json::parse(bad_strategy->body)["error"] == "unknown-strategy");

  Json submission{{"sentence_id", id},
                  {"srl_tags", w.Gold(id, Task::kSrl)},
                  {"er_tags", w.Gold(id, Task::kEr)},
                  {"annotator", "http"}};
  auto ok = client.Post("/api/labels", submission.dump(), "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(Json::parse(ok->body)["status"] == "accepted");

  auto duplicate =
      client.Post("/api/labels", submission.dump(), "application/json");
  REQUIRE(duplicate);
  CHECK(duplicate->status == 409);
  CHECK(Json::parse(duplicate->body)["error"] == "not-in-flight");

  const std::string other = body["tasks"][1]["sentence_id"];
  Json wrong = submission;
  wrong["sentence_id"] = other;
  wrong["srl_tags"] = std::vector<std::string>{"O"};
  auto rejected = client.Post("/api/labels", wrong.dump(), "application/json");
  REQUIRE(rejected);
  CHECK(rejected->status == 400);
  CHECK(Json::parse(rejected->body)["error"] == "length-mismatch");

  auto malformed = client.Post("/api/labels", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);

  Json unknown = submission;
  unknown["sentence_id"] = "does-not-exist";
  auto missing = client.Post("/api/labels", unknown.dump(), "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto release = client.Post("/api/release",
                             Json{{"sentence_id", other}}.dump(),
                             "application/json");
  REQUIRE(release);
  CHECK(release->status == 200);

  auto sentence = client.Get(("/api/sentence/" + id).c_str());
  REQUIRE(sentence);
  CHECK(sentence->status == 200);
  CHECK(Json::parse(sentence->body)["status"] == "submitted");
  auto absent = client.Get("/api/sentence/zzz");
  REQUIRE(absent);
  CHECK(absent->status == 404);

  auto metrics = client.Get("/api/metrics");
  REQUIRE(metrics);
  const Json m = Json::parse(metrics->body);
  CHECK(m["labeled"] == service->labeled_size());
  CHECK(m["in_flight"] == 1);
  CHECK(m["version"] == 1);

  auto noop = client.Post("/api/retrain", "", "application/json");
  REQUIRE(noop);
  CHECK(noop->status == 200);
  service->WaitForTraining();
  CHECK(service->version() == 2);
  server.Stop();
}

}  // namespace
}  // namespace mtal::service
