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

#include "mtal/json_io.h"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtal/error.h"

namespace mtal {
namespace {

template <typename T>
void Read(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

Json ToJson(const ModelConfig& c) {
  return Json{{"word_dim", c.word_dim},
              {"char_dim", c.char_dim},
              {"char_embedding_dim", c.char_embedding_dim},
              {"predicate_dim", c.predicate_dim},
              {"hidden_units", c.hidden_units},
              {"encoder_layers", c.encoder_layers},
              {"char_window", c.char_window},
              {"dropout", c.dropout},
              {"multi_task", c.multi_task},
              {"crf_boundaries", c.crf_boundaries},
              {"rng_seed", c.rng_seed}};
}

ModelConfig ModelConfigFromJson(const Json& j) {
  ModelConfig c;
  Read(j, "word_dim", c.word_dim);
  Read(j, "char_dim", c.char_dim);
  Read(j, "char_embedding_dim", c.char_embedding_dim);
  Read(j, "predicate_dim", c.predicate_dim);
  Read(j, "hidden_units", c.hidden_units);
  Read(j, "encoder_layers", c.encoder_layers);
  Read(j, "char_window", c.char_window);
  Read(j, "dropout", c.dropout);
  Read(j, "multi_task", c.multi_task);
  Read(j, "crf_boundaries", c.crf_boundaries);
  Read(j, "rng_seed", c.rng_seed);
  return c;
}

Json ToJson(const TrainConfig& c) {
  return Json{{"optimizer", "adadelta"},
              {"rho", c.rho},
              {"epsilon", c.epsilon},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"batch_size", c.batch_size},
              {"clip_norm", c.clip_norm},
              {"freeze_word_embeddings", c.freeze_word_embeddings},
              {"rng_seed", c.rng_seed}};
}

TrainConfig TrainConfigFromJson(const Json& j) {
  TrainConfig c;
  Read(j, "rho", c.rho);
  Read(j, "epsilon", c.epsilon);
  Read(j, "max_epochs", c.max_epochs);
  Read(j, "patience", c.patience);
  Read(j, "batch_size", c.batch_size);
  Read(j, "clip_norm", c.clip_norm);
  Read(j, "freeze_word_embeddings", c.freeze_word_embeddings);
  Read(j, "rng_seed", c.rng_seed);
  return c;
}

Json ToJson(const EmbeddingConfig& c) {
  return Json{{"enabled", c.enabled},
              {"window", c.window},
              {"negatives", c.negatives},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"rng_seed", c.rng_seed}};
}

EmbeddingConfig EmbeddingConfigFromJson(const Json& j) {
  EmbeddingConfig c;
  Read(j, "enabled", c.enabled);
  Read(j, "window", c.window);
  Read(j, "negatives", c.negatives);
  Read(j, "epochs", c.epochs);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "rng_seed", c.rng_seed);
  return c;
}

Json ToJson(const SyntheticConfig& c) {
  return Json{{"count", c.count},
              {"role_weights", c.role_weights},
              {"max_role_probability", c.max_role_probability},
              {"noise_rate", c.noise_rate},
              {"multi_clause_rate", c.multi_clause_rate}};
}

SyntheticConfig SyntheticConfigFromJson(const Json& j) {
  SyntheticConfig c;
  Read(j, "count", c.count);
  Read(j, "role_weights", c.role_weights);
  Read(j, "max_role_probability", c.max_role_probability);
  Read(j, "noise_rate", c.noise_rate);
  Read(j, "multi_clause_rate", c.multi_clause_rate);
  return c;
}

Json ToJson(const SplitSpec& s) {
  return Json{{"train_fraction", s.train_fraction},
              {"dev_fraction", s.dev_fraction},
              {"test_fraction", s.test_fraction},
              {"seed_labeled_fraction", s.seed_labeled_fraction},
              {"rng_seed", s.rng_seed}};
}

SplitSpec SplitSpecFromJson(const Json& j) {
  SplitSpec s;
  Read(j, "train_fraction", s.train_fraction);
  Read(j, "dev_fraction", s.dev_fraction);
  Read(j, "test_fraction", s.test_fraction);
  Read(j, "seed_labeled_fraction", s.seed_labeled_fraction);
  Read(j, "rng_seed", s.rng_seed);
  return s;
}

Json ToJson(const eval::Prf& prf) {
  return Json{{"precision", prf.precision}, {"recall", prf.recall},
              {"f1", prf.f1},               {"tp", prf.true_positives},
              {"predicted", prf.predicted}, {"gold", prf.gold}};
}

Json ToJson(const eval::SpanMatchReport& report) {
  Json per_label = Json::object();
  for (size_t l = 0; l < report.per_label.size(); ++l) {
    per_label[report.label_names.at(l)] = ToJson(report.per_label[l]);
  }
  const eval::Taxonomy& tx = report.taxonomy;
  return Json{{"overall", ToJson(report.overall)},
              {"per_label", per_label},
              {"taxonomy",
               {{"exact", tx.exact},
                {"role_confusion", tx.role_confusion},
                {"boundary", tx.boundary},
                {"false_negative", tx.false_negative},
                {"false_positive", tx.false_positive}}},
              {"confusion", report.confusion.counts}};
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot write " + tmp);
  size_t written = 0;
  while (written < contents.size()) {
    const ssize_t n =
        ::write(fd, contents.data() + written, contents.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::kIo, "short write to " + tmp);
    }
    written += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorCode::kIo, "cannot rename " + tmp + " to " + path);
  }
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mtal
