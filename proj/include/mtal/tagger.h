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

// Shared-encoder multi-task sequence tagger.
//
// Each token is represented by the concatenation of a lowercased word
// embedding, a max-pooled character convolution over the raw-cased spelling
// and a predicate-indicator embedding. A stack of bidirectional LSTM layers
// with highway connections contextualizes the tokens. Two heads read the
// final states: a linear-chain CRF for semantic roles and a per-token softmax
// for entities. Training minimizes CRF negative log-likelihood plus entity
// cross-entropy with AdaDelta.

#ifndef MTAL_TAGGER_H_
#define MTAL_TAGGER_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtal/corpus.h"
#include "mtal/crf.h"
#include "mtal/eval.h"
#include "mtal/random.h"

namespace mtal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int word_dim = 50;
  int char_dim = 50;  // number of convolution filters
  int char_embedding_dim = 16;
  int predicate_dim = 100;
  int hidden_units = 300;
  int encoder_layers = 2;
  int char_window = 5;
  double dropout = 0.1;
  bool multi_task = true;
  bool crf_boundaries = false;
  uint64_t rng_seed = 1;

  int input_dim() const { return word_dim + char_dim + predicate_dim; }
  int state_dim() const { return 2 * hidden_units; }
  // Small dimensions for tests and quick experiments.
  static ModelConfig Desk();
  void Validate() const;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

struct LossParts {
  double srl = 0;
  double er = 0;
  double total() const { return srl + er; }
};

struct Prediction {
  TagSequence srl;  // repaired to well-formed BIO
  TagSequence er;   // per-token argmax, repaired
  double srl_path_log_prob = 0;
  std::vector<double> er_confidence;  // max softmax probability per token
};

class TaggerModel {
 public:
  TaggerModel(ModelConfig config, Vocab word_vocab, Vocab char_vocab,
              TagSet srl_tags = TagSet::DefaultSrl(),
              TagSet er_tags = TagSet::DefaultEr());

  const ModelConfig& config() const { return config_; }
  const Vocab& word_vocab() const { return word_vocab_; }
  const Vocab& char_vocab() const { return char_vocab_; }
  const TagSet& srl_tags() const { return srl_tags_; }
  const TagSet& er_tags() const { return er_tags_; }
  bool multi_task() const { return config_.multi_task; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;
  int64_t num_parameters() const;

  // Contextual states, one column per token (2 * hidden_units rows).
  Matrix Encode(const Sentence& sentence) const;
  // T x K_er log-probabilities; requires the entity head.
  Matrix ErLogProbs(const Sentence& sentence) const;
  // T x K_srl unary scores for the CRF.
  crf::EmissionScores SrlEmissions(const Sentence& sentence) const;
  crf::CrfParams Crf() const;

  Prediction Predict(const Sentence& sentence) const;

  // Both heads from one encoder pass.
  struct HeadOutputs {
    crf::EmissionScores srl_emissions;
    Matrix er_log_probs;  // empty in single-task mode
  };
  HeadOutputs Heads(const Sentence& sentence) const;

  // Joint loss of one labeled sentence (no dropout, no gradients).
  LossParts JointLoss(const Sentence& sentence) const;

  // Adds d(loss)/d(param) into every Parameter::grad and returns the loss.
  // `rng` drives dropout; pass nullptr for a deterministic pass. With
  // `include_er` false only the SRL part contributes.
  LossParts AccumulateGradients(const Sentence& sentence, Rng* rng,
                                bool include_er = true);
  void ZeroGradients();

  // Replaces the word embedding table (|vocab| x word_dim rows).
  void SetWordEmbeddings(const Matrix& table);

  void Save(std::ostream& out) const;
  void SaveFile(const std::string& path) const;
  static TaggerModel Load(std::istream& in);
  static TaggerModel LoadFile(const std::string& path);

 private:
  struct LayerIds {
    int fw_w, fw_u, fw_b, bw_w, bw_u, bw_b, gate_w, gate_b, proj_w;
  };
  struct Ids {
    int word, char_emb, conv_w, conv_b, predicate;
    std::vector<LayerIds> layers;
    int er_w = -1, er_b = -1, srl_w, srl_b, transition;
    int begin = -1, end = -1;
  };
  struct Forward;

  int Add(const std::string& name, int rows, int cols);
  void Initialize();
  void RunForward(const Sentence& sentence, Rng* dropout_rng,
                  Forward& fw) const;

  ModelConfig config_;
  Vocab word_vocab_;
  Vocab char_vocab_;
  TagSet srl_tags_;
  TagSet er_tags_;
  std::vector<Parameter> params_;
  Ids ids_;
};

struct TrainConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  int max_epochs = 10;
  int patience = 3;
  int batch_size = 32;
  double clip_norm = 5.0;  // <= 0 disables clipping
  bool freeze_word_embeddings = false;
  uint64_t rng_seed = 1;

  void Validate() const;
};

struct EpochStats {
  int epoch = 0;
  int sentences = 0;
  LossParts loss;  // summed over the epoch
};

// Owns the optimizer state for one model. Successive RunEpoch calls continue
// the same AdaDelta trajectory, which is how the active-learning loop
// interleaves querying with training.
class Trainer {
 public:
  Trainer(TaggerModel& model, TrainConfig config);

  EpochStats RunEpoch(std::span<const Sentence* const> labeled);
  void ResetOptimizer();
  int epochs_run() const { return epochs_; }
  const TrainConfig& config() const { return config_; }

 private:
  void Step(int batch_items);

  TaggerModel* model_;
  TrainConfig config_;
  Rng rng_;
  std::vector<Matrix> mean_sq_grad_;
  std::vector<Matrix> mean_sq_update_;
  int epochs_ = 0;
};

// Best-so-far tracking on a monitored metric with a patience counter.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when the value is a strict improvement.
  bool Update(double value);
  bool ShouldStop() const { return patience_ > 0 && bad_epochs_ >= patience_; }
  double best() const { return best_; }
  int best_index() const { return best_index_; }

 private:
  int patience_;
  double best_ = -1;
  int best_index_ = -1;
  int seen_ = 0;
  int bad_epochs_ = 0;
};

// Dev-set SRL evaluation with repaired Viterbi paths.
eval::SpanMatchReport EvaluateSrl(const TaggerModel& model,
                                  std::span<const Sentence* const> sentences);
eval::SpanMatchReport EvaluateEr(const TaggerModel& model,
                                 std::span<const Sentence* const> sentences);

struct EpochLog {
  int epoch = 0;
  LossParts train_loss;
  eval::Prf dev;
};

struct TrainResult {
  TaggerModel best;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  bool early_stopped = false;
};

// Supervised training with early stopping on dev SRL F1. Returns the
// parameters of the best dev epoch.
TrainResult Train(TaggerModel model, std::span<const Sentence* const> labeled,
                  std::span<const Sentence* const> dev,
                  const TrainConfig& config);

struct EmbeddingConfig {
  bool enabled = true;
  int window = 2;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  uint64_t rng_seed = 1;
};

// Skip-gram with negative sampling over lowercased training sentences.
// Returns a |vocab| x dim table; with `enabled` false the table is drawn
// uniformly from [-0.5 / dim, 0.5 / dim].
Matrix PretrainWordEmbeddings(std::span<const Sentence* const> sentences,
                              const Vocab& vocab, int dim,
                              const EmbeddingConfig& config);

// Collects pointers to the sentences with the given ids, in the given order.
std::vector<const Sentence*> Select(const Corpus& corpus,
                                    std::span<const std::string> ids);

}  // namespace mtal

#endif  // MTAL_TAGGER_H_
