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

#include "mtal/service.h"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mtal::service {
namespace fs = std::filesystem;
namespace {

std::string Timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc;
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

std::vector<std::string> TagNames(const TagSequence& tags,
                                  const TagSet& tagset) {
  std::vector<std::string> names;
  names.reserve(tags.size());
  for (int t : tags) names.push_back(tagset.tag(t));
  return names;
}

TagSequence ParseTags(const std::vector<std::string>& names,
                      const TagSet& tagset) {
  TagSequence tags;
  tags.reserve(names.size());
  for (const std::string& name : names) {
    const std::optional<int> tag = tagset.Find(name);
    if (!tag) {
      throw Error(ErrorCode::kUnknownLabel,
                  std::string(TaskName(tagset.task())) + " tag '" + name +
                      "'");
    }
    tags.push_back(*tag);
  }
  return tags;
}

std::string SnapshotPath(const std::string& run_dir, int version,
                         const char* ext) {
  return run_dir + "/snapshots/v" + std::to_string(version) + ext;
}

}  // namespace

AnnotationService::AnnotationService(ServiceConfig config, const Corpus& corpus,
                                     const Splits& splits,
                                     al::ModelFactory factory)
    : config_(std::move(config)),
      factory_(std::move(factory)),
      rng_(config_.rng_seed) {
  if (config_.run_dir.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "service needs a run directory");
  }
  if (config_.default_batch < 1 || config_.epochs_per_retrain < 1 ||
      config_.auto_retrain_every < 0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid service configuration");
  }
  config_.train.Validate();
  Restore(corpus, splits);
}

AnnotationService::~AnnotationService() {
  WaitForTraining();
  if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationService::Restore(const Corpus& corpus, const Splits& splits) {
  fs::create_directories(config_.run_dir + "/snapshots");
  const std::string pool_path = config_.run_dir + "/pool.json";
  Json layout;
  if (fs::exists(pool_path)) {
    layout = Json::parse(ReadFile(pool_path));
  } else {
    layout = Json{{"seed_labeled", splits.seed_labeled},
                  {"pool", splits.pool},
                  {"dev", splits.dev},
                  {"test", splits.test}};
    WriteFileAtomic(pool_path, layout.dump(1) + "\n");
  }
  auto ids = [&](const char* key) {
    return layout.at(key).get<std::vector<std::string>>();
  };
  for (const Sentence* s : Select(corpus, ids("seed_labeled"))) {
    pool_.AddLabeled(*s);
  }
  for (const Sentence* s : Select(corpus, ids("pool"))) {
    pool_.AddUnlabeled(*s);
    if (config_.simulated) {
      if (!s->fully_labeled()) throw Error(ErrorCode::kMissingLabels, s->id);
      oracle_.emplace(s->id, *s);
    }
  }
  for (const Sentence* s : Select(corpus, ids("dev"))) {
    dev_sentences_.push_back(*s);
  }
  for (const Sentence* s : Select(corpus, ids("test"))) {
    test_sentences_.push_back(*s);
  }
  for (const Sentence& s : dev_sentences_) dev_.push_back(&s);
  for (const Sentence& s : test_sentences_) test_.push_back(&s);

  // Replay accepted labels. A torn final line (crash mid-append) is dropped;
  // it was never acknowledged.
  const std::string log_path = config_.run_dir + "/labels.jsonl";
  if (fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      Json record;
      try {
        record = Json::parse(lines[i]);
      } catch (const Json::exception&) {
        if (i + 1 == lines.size()) break;
        throw Error(ErrorCode::kIo, "corrupt label log at line " +
                                        std::to_string(i + 1));
      }
      const std::string id = record.at("sentence_id");
      pool_.Label(id,
                  ParseTags(record.at("srl_tags"), pool_.srl_tags()),
                  ParseTags(record.at("er_tags"), pool_.er_tags()),
                  /*require_in_flight=*/false);
    }
  }
  log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (log_fd_ < 0) throw Error(ErrorCode::kIo, "cannot open " + log_path);

  const std::string current = config_.run_dir + "/CURRENT";
  if (fs::exists(current)) {
    const int version = std::stoi(ReadFile(current));
    auto model = std::make_shared<TaggerModel>(
        TaggerModel::LoadFile(SnapshotPath(config_.run_dir, version, ".ckpt")));
    for (int v = 1; v <= version; ++v) {
      const std::string meta = SnapshotPath(config_.run_dir, v, ".json");
      if (!fs::exists(meta)) continue;
      latest_meta_ = Json::parse(ReadFile(meta));
      history_.push_back(latest_meta_.at("point"));
    }
    labeled_at_snapshot_ = latest_meta_.value("labeled", 0);
    train_model_ = std::make_unique<TaggerModel>(*model);
    trainer_ = std::make_unique<Trainer>(*train_model_, config_.train);
    live_ = {version, std::move(model)};
  }
  pool_.CheckInvariants();
}

AnnotationTask AnnotationService::MakeTask(const Sentence& s,
                                           const TaggerModel* model,
                                           int version) const {
  AnnotationTask task;
  task.sentence_id = s.id;
  task.tokens = s.tokens;
  task.predicate = s.predicate;
  if (pool_.IsLabeled(s.id)) {
    task.status = "submitted";
    task.srl_tags = TagNames(*s.srl, pool_.srl_tags());
    task.er_tags = TagNames(*s.er, pool_.er_tags());
  } else {
    task.status = pool_.IsInFlight(s.id) ? "assigned" : "pending";
  }
  if (model != nullptr) {
    const Prediction p = model->Predict(s);
    PreAnnotation pre;
    pre.snapshot_version = version;
    pre.srl_tags = TagNames(p.srl, pool_.srl_tags());
    for (const eval::Span& span : eval::ExtractSpans(p.srl, pool_.srl_tags())) {
      pre.srl_spans.push_back(
          {pool_.srl_tags().labels()[span.label].code, span.start, span.end});
    }
    pre.srl_path_probability = std::exp(p.srl_path_log_prob);
    pre.er_tags = TagNames(p.er, pool_.er_tags());
    pre.er_confidence = p.er_confidence;
    task.pre = std::move(pre);
  }
  return task;
}

std::vector<AnnotationTask> AnnotationService::NextBatch(
    std::optional<query::Strategy> strategy, std::optional<int> size) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!leased_tasks_.empty()) {
    std::vector<AnnotationTask> tasks;
    for (const std::string& id : pool_.in_flight()) {
      tasks.push_back(leased_tasks_.at(id));
    }
    return tasks;
  }
  if (!live_.model) throw Error(ErrorCode::kNoModel, "no trained snapshot yet");
  const std::vector<const Sentence*> unlabeled = pool_.Unlabeled();
  if (unlabeled.empty()) throw Error(ErrorCode::kEmptyPool, "pool exhausted");
  const int batch = size.value_or(config_.default_batch);
  if (batch < 1) throw Error(ErrorCode::kInvalidConfig, "size must be >= 1");
  const query::Strategy chosen = strategy.value_or(config_.default_strategy);
  std::vector<query::QueryScore> scores;
  if (chosen == query::Strategy::kRandom) {
    for (const Sentence* s : unlabeled) scores.push_back({s->id, 0, 0});
  } else {
    scores = query::ScorePool(*live_.model, unlabeled);
  }
  const query::Selection selection =
      query::Select(scores, chosen, batch, rng_);
  pool_.Lease(selection.ids);
  std::vector<AnnotationTask> tasks;
  for (const std::string& id : selection.ids) {
    AnnotationTask task =
        MakeTask(pool_.Get(id), live_.model.get(), live_.version);
    leased_tasks_.emplace(id, task);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void AnnotationService::AppendLabelRecord(const Json& record) {
  const std::string line = record.dump() + "\n";
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n =
        ::write(log_fd_, line.data() + written, line.size() - written);
    if (n <= 0) throw Error(ErrorCode::kIo, "label log write failed");
    written += static_cast<size_t>(n);
  }
  if (::fsync(log_fd_) != 0) throw Error(ErrorCode::kIo, "label log fsync");
}

int AnnotationService::SubmitLabels(const std::string& sentence_id,
                                    const std::vector<std::string>& srl_tags,
                                    const std::vector<std::string>& er_tags,
                                    const std::string& annotator) {
  std::lock_guard<std::mutex> lock(mu_);
  const Sentence& sentence = pool_.Get(sentence_id);
  if (!pool_.IsInFlight(sentence_id)) {
    throw Error(ErrorCode::kNotInFlight, sentence_id);
  }
  TagSequence srl = ParseTags(srl_tags, pool_.srl_tags());
  TagSequence er = ParseTags(er_tags, pool_.er_tags());
  al::ValidateTags(srl, sentence.size(), pool_.srl_tags());
  al::ValidateTags(er, sentence.size(), pool_.er_tags());

  Json record{{"sentence_id", sentence_id},
              {"srl_tags", TagNames(srl, pool_.srl_tags())},
              {"er_tags", TagNames(er, pool_.er_tags())},
              {"annotator", annotator},
              {"timestamp", Timestamp()}};
  const AnnotationTask& leased = leased_tasks_.at(sentence_id);
  if (leased.pre) {
    record["pre_annotation"] = {{"snapshot_version", leased.pre->snapshot_version},
                                {"srl_tags", leased.pre->srl_tags},
                                {"er_tags", leased.pre->er_tags}};
  }
  AppendLabelRecord(record);
  pool_.Label(sentence_id, std::move(srl), std::move(er),
              /*require_in_flight=*/true);
  leased_tasks_.erase(sentence_id);

  const int fresh = pool_.labeled_size() - labeled_at_snapshot_;
  if (config_.auto_retrain_every > 0 && fresh >= config_.auto_retrain_every) {
    if (training_) {
      queued_ = true;
    } else {
      StartTrainingLocked();
    }
  }
  return pool_.labeled_size();
}

void AnnotationService::Release(const std::string& sentence_id) {
  std::lock_guard<std::mutex> lock(mu_);
  pool_.Release(sentence_id);
  leased_tasks_.erase(sentence_id);
}

RetrainStatus AnnotationService::TriggerRetrain() {
  std::lock_guard<std::mutex> lock(mu_);
  if (training_) {
    queued_ = true;
    throw Error(ErrorCode::kTrainingInProgress, "retrain queued");
  }
  if (pool_.labeled_size() == 0) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no labeled sentences");
  }
  if (live_.model && pool_.labeled_size() == labeled_at_snapshot_) {
    return {live_.version, false};
  }
  StartTrainingLocked();
  return {live_.version, true};
}

void AnnotationService::StartTrainingLocked() {
  training_ = true;
  training_error_.reset();
  // The previous worker cleared training_ as its last action under the
  // lock, so this join cannot wait on the lock we hold.
  if (trainer_thread_.joinable()) trainer_thread_.join();
  trainer_thread_ = std::thread(&AnnotationService::TrainingLoop, this);
}

void AnnotationService::TrainingLoop() {
  while (true) {
    std::vector<Sentence> labeled;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const Sentence* s : pool_.Labeled()) labeled.push_back(*s);
    }
    std::vector<const Sentence*> batch;
    for (const Sentence& s : labeled) batch.push_back(&s);
    try {
      if (config_.retrain_from_scratch || !train_model_) {
        train_model_ = std::make_unique<TaggerModel>(factory_());
        trainer_ = std::make_unique<Trainer>(*train_model_, config_.train);
      }
      if (config_.retrain_from_scratch) {
        *train_model_ = Train(*train_model_, batch, dev_, config_.train).best;
      } else {
        for (int e = 0; e < config_.epochs_per_retrain; ++e) {
          trainer_->RunEpoch(batch);
        }
      }
      Publish(*train_model_, static_cast<int>(labeled.size()));
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mu_);
      training_error_ = e.what();
    }
    std::lock_guard<std::mutex> lock(mu_);
    const bool again =
        queued_ && pool_.labeled_size() > labeled_at_snapshot_;
    queued_ = false;
    if (again) continue;
    training_ = false;
    training_done_.notify_all();
    return;
  }
}

void AnnotationService::Publish(const TaggerModel& model, int labeled) {
  int next;
  {
    std::lock_guard<std::mutex> lock(mu_);
    next = live_.version + 1;
  }
  Json meta{{"version", next},
            {"labeled", labeled},
            {"timestamp", Timestamp()}};
  Json point{{"version", next}, {"labeled", labeled}};
  if (!dev_.empty()) {
    const eval::SpanMatchReport dev = EvaluateSrl(model, dev_);
    meta["dev"] = mtal::ToJson(dev);
    point["dev_f1"] = dev.overall.f1;
  }
  if (!test_.empty()) {
    const eval::SpanMatchReport test = EvaluateSrl(model, test_);
    meta["test"] = mtal::ToJson(test);
    point["test_f1"] = test.overall.f1;
  }
  meta["point"] = point;
  model.SaveFile(SnapshotPath(config_.run_dir, next, ".ckpt"));
  WriteFileAtomic(SnapshotPath(config_.run_dir, next, ".json"),
                  meta.dump(1) + "\n");
  if (config_.before_publish) config_.before_publish(next);
  // The rename inside WriteFileAtomic is the publication point.
  WriteFileAtomic(config_.run_dir + "/CURRENT", std::to_string(next) + "\n");
  auto snapshot = std::make_shared<const TaggerModel>(model);
  std::lock_guard<std::mutex> lock(mu_);
  live_ = {next, std::move(snapshot)};
  labeled_at_snapshot_ = labeled;
  history_.push_back(point);
  latest_meta_ = std::move(meta);
}

void AnnotationService::WaitForTraining() {
  std::thread worker;
  {
    std::unique_lock<std::mutex> lock(mu_);
    training_done_.wait(lock, [&] { return !training_; });
    worker = std::move(trainer_thread_);
  }
  if (worker.joinable()) worker.join();
}

bool AnnotationService::training() const {
  std::lock_guard<std::mutex> lock(mu_);
  return training_;
}

int AnnotationService::SimulateRound(std::optional<query::Strategy> strategy,
                                     std::optional<int> size) {
  if (!config_.simulated) {
    throw Error(ErrorCode::kInvalidConfig, "service is not in simulated mode");
  }
  const std::vector<AnnotationTask> tasks = NextBatch(strategy, size);
  for (const AnnotationTask& task : tasks) {
    const Sentence& gold = oracle_.at(task.sentence_id);
    SubmitLabels(task.sentence_id, TagNames(*gold.srl, pool_.srl_tags()),
                 TagNames(*gold.er, pool_.er_tags()), "oracle");
  }
  WaitForTraining();
  TriggerRetrain();
  WaitForTraining();
  return static_cast<int>(tasks.size());
}

Json AnnotationService::Metrics() const {
  std::lock_guard<std::mutex> lock(mu_);
  Json out{{"labeled", pool_.labeled_size()},
           {"unlabeled", pool_.unlabeled_size()},
           {"in_flight", pool_.in_flight_size()},
           {"total", pool_.total_size()},
           {"version", live_.version},
           {"training", training_},
           {"metrics_available", live_.model != nullptr},
           {"history", history_}};
  if (latest_meta_.contains("dev")) out["dev"] = latest_meta_["dev"];
  if (latest_meta_.contains("test")) out["test"] = latest_meta_["test"];
  if (training_error_) out["last_training_error"] = *training_error_;
  return out;
}

AnnotationTask AnnotationService::GetSentence(
    const std::string& sentence_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto leased = leased_tasks_.find(sentence_id);
  if (leased != leased_tasks_.end()) return leased->second;
  const Sentence& s = pool_.Get(sentence_id);
  return MakeTask(s, live_.model.get(), live_.version);
}

int AnnotationService::version() const {
  std::lock_guard<std::mutex> lock(mu_);
  return live_.version;
}

int AnnotationService::labeled_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pool_.labeled_size();
}

int AnnotationService::unlabeled_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pool_.unlabeled_size();
}

int AnnotationService::in_flight_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pool_.in_flight_size();
}

std::optional<std::string> AnnotationService::last_training_error() const {
  std::lock_guard<std::mutex> lock(mu_);
  return training_error_;
}

Json ToJson(const AnnotationTask& task) {
  Json out{{"sentence_id", task.sentence_id},
           {"tokens", task.tokens},
           {"predicate", task.predicate},
           {"status", task.status}};
  if (task.status == "submitted") {
    out["srl_tags"] = task.srl_tags;
    out["er_tags"] = task.er_tags;
  }
  if (task.pre) {
    Json spans = Json::array();
    for (const LabeledSpan& span : task.pre->srl_spans) {
      spans.push_back(
          {{"label", span.label}, {"start", span.start}, {"end", span.end}});
    }
    out["pre_annotation"] = {
        {"snapshot_version", task.pre->snapshot_version},
        {"srl_tags", task.pre->srl_tags},
        {"srl_spans", spans},
        {"srl_path_probability", task.pre->srl_path_probability},
        {"er_tags", task.pre->er_tags},
        {"er_confidence", task.pre->er_confidence}};
  }
  return out;
}

}  // namespace mtal::service
