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

// Human-in-the-loop annotation backend and its HTTP front.
//
// State lives in a run directory:
//   pool.json             initial seed / pool partition
//   labels.jsonl          one fsynced record per accepted submission
//   snapshots/v<N>.ckpt   published models
//   snapshots/v<N>.json   metrics recorded at publication
//   CURRENT               version number of the live snapshot
// On restart the pool is rebuilt from pool.json plus the label log and the
// model named by CURRENT is loaded. Leases are not persisted.

#ifndef MTAL_SERVICE_H_
#define MTAL_SERVICE_H_

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mtal/alloop.h"
#include "mtal/error.h"
#include "mtal/json_io.h"
#include "mtal/query.h"
#include "mtal/tagger.h"

namespace httplib {
class Server;
}

namespace mtal::service {

struct ServiceConfig {
  std::string run_dir;
  query::Strategy default_strategy = query::Strategy::kRankCombination;
  int default_batch = 10;
  TrainConfig train;
  // Epochs per retrain when continuing the previous model.
  int epochs_per_retrain = 1;
  // Fresh model trained with early stopping on dev at every retrain.
  bool retrain_from_scratch = false;
  // Retrain automatically once this many labels arrived since the last
  // snapshot; 0 means explicit triggers only.
  int auto_retrain_every = 0;
  // Keep gold tags of pool sentences so SimulateRound can act as oracle.
  bool simulated = false;
  uint64_t rng_seed = 0;
  // Test hook run after training and before publication; throwing from it
  // simulates a crash at that point.
  std::function<void(int version)> before_publish;
};

struct LabeledSpan {
  std::string label;  // role code
  int start = 0;
  int end = 0;  // inclusive
};

struct PreAnnotation {
  int snapshot_version = 0;
  std::vector<std::string> srl_tags;
  std::vector<LabeledSpan> srl_spans;
  double srl_path_probability = 0;
  std::vector<std::string> er_tags;
  std::vector<double> er_confidence;
};

struct AnnotationTask {
  std::string sentence_id;
  std::vector<std::string> tokens;
  int predicate = 0;
  std::optional<PreAnnotation> pre;
  std::string status;  // pending, assigned or submitted
  // Stored labels once submitted.
  std::vector<std::string> srl_tags;
  std::vector<std::string> er_tags;
};

struct RetrainStatus {
  int version = 0;      // live version when the call returned
  bool started = false;  // false when there was nothing new to learn
};

class AnnotationService {
 public:
  // `corpus` provides tokens (and, in simulated mode, gold tags); `splits`
  // seeds the pool on first start and is ignored when the run directory
  // already holds state.
  AnnotationService(ServiceConfig config, const Corpus& corpus,
                    const Splits& splits, al::ModelFactory factory);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Returns the in-flight batch if there is one, otherwise leases a new one
  // ranked by the live snapshot. Throws kNoModel or kEmptyPool.
  std::vector<AnnotationTask> NextBatch(
      std::optional<query::Strategy> strategy = std::nullopt,
      std::optional<int> size = std::nullopt);

  // Validates, persists and applies one submission. Returns the new labeled
  // count. Throws kUnknownId, kNotInFlight, kUnknownLabel, kLengthMismatch,
  // kInvalidBio or kIo; the pool is unchanged on error.
  int SubmitLabels(const std::string& sentence_id,
                   const std::vector<std::string>& srl_tags,
                   const std::vector<std::string>& er_tags,
                   const std::string& annotator);

  void Release(const std::string& sentence_id);

  // Starts background training. Throws kTrainingInProgress (after queuing
  // one follow-up run) while a run is active, or kEmptyTrainingSet.
  RetrainStatus TriggerRetrain();
  void WaitForTraining();
  bool training() const;

  // Oracle round for simulated mode: fetch, submit gold, retrain, wait.
  // Returns the number of sentences labeled.
  int SimulateRound(std::optional<query::Strategy> strategy = std::nullopt,
                    std::optional<int> size = std::nullopt);

  Json Metrics() const;
  AnnotationTask GetSentence(const std::string& sentence_id) const;

  int version() const;
  int labeled_size() const;
  int unlabeled_size() const;
  int in_flight_size() const;
  // Message of the last failed training run, if any.
  std::optional<std::string> last_training_error() const;
  const TagSet& srl_tags() const { return pool_.srl_tags(); }
  const TagSet& er_tags() const { return pool_.er_tags(); }

 private:
  struct Snapshot {
    int version = 0;
    std::shared_ptr<const TaggerModel> model;
  };

  void Restore(const Corpus& corpus, const Splits& splits);
  void StartTrainingLocked();
  void TrainingLoop();
  void Publish(const TaggerModel& model, int labeled);
  AnnotationTask MakeTask(const Sentence& s, const TaggerModel* model,
                          int version) const;
  void AppendLabelRecord(const Json& record);

  ServiceConfig config_;
  al::ModelFactory factory_;
  std::vector<Sentence> dev_sentences_;
  std::vector<Sentence> test_sentences_;
  std::vector<const Sentence*> dev_;
  std::vector<const Sentence*> test_;
  std::unordered_map<std::string, Sentence> oracle_;

  mutable std::mutex mu_;
  al::Pool pool_;
  Snapshot live_;
  int labeled_at_snapshot_ = 0;
  std::vector<Json> history_;
  Json latest_meta_;
  std::map<std::string, AnnotationTask> leased_tasks_;
  Rng rng_;
  int log_fd_ = -1;

  bool training_ = false;
  bool queued_ = false;
  std::optional<std::string> training_error_;
  std::thread trainer_thread_;
  std::condition_variable training_done_;
  // Touched only by the training thread.
  std::unique_ptr<TaggerModel> train_model_;
  std::unique_ptr<Trainer> trainer_;
};

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds any free port
  std::string ui_dir;  // served at "/" when non-empty
};

// Maps library error codes to HTTP status codes.
int StatusFor(ErrorCode code);

class HttpServer {
 public:
  HttpServer(AnnotationService& service, HttpOptions options);
  ~HttpServer();

  // Binds and starts serving on a background thread; returns the port.
  int Start();
  // Blocks until Stop() is called from another thread or a signal handler.
  void Wait();
  void Stop();

 private:
  AnnotationService& service_;
  HttpOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

Json ToJson(const AnnotationTask& task);

}  // namespace mtal::service

#endif  // MTAL_SERVICE_H_
