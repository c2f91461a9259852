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

#include "mtal/tagger.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mtal/error.h"

namespace mtal {
namespace {

Matrix Sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

void FillUniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m(r, c) = rng.Uniform(-bound, bound);
    }
  }
}

void FillGlorot(Matrix& m, Rng& rng) {
  FillUniform(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())),
              rng);
}

// Column-wise log-softmax.
Matrix LogSoftmaxColumns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const double m = logits.col(t).maxCoeff();
    const double lse = m + std::log((logits.col(t).array() - m).exp().sum());
    out.col(t) = logits.col(t).array() - lse;
  }
  return out;
}

struct LstmCache {
  Matrix gates;   // 4H x T, post-activation [i; f; o; g]
  Matrix cell;    // H x T
  Matrix tanh_cell;
  Matrix hidden;  // H x T
};

void LstmForward(const Matrix& w, const Matrix& u, const Matrix& b,
                 const Matrix& x, bool reverse, LstmCache& cache) {
  const Eigen::Index H = u.cols();
  const Eigen::Index T = x.cols();
  Matrix z = w * x;
  z.colwise() += b.col(0);
  cache.gates.resize(4 * H, T);
  cache.cell.resize(H, T);
  cache.tanh_cell.resize(H, T);
  cache.hidden.resize(H, T);
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  Vector pre(4 * H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    pre.noalias() = z.col(t) + u * h;
    auto gates = cache.gates.col(t);
    gates.head(3 * H) =
        (1.0 / (1.0 + (-pre.head(3 * H).array()).exp())).matrix();
    gates.tail(H) = pre.tail(H).array().tanh().matrix();
    c = gates.segment(H, H).cwiseProduct(c) +
        gates.head(H).cwiseProduct(gates.tail(H));
    cache.cell.col(t) = c;
    cache.tanh_cell.col(t) = c.array().tanh().matrix();
    h = gates.segment(2 * H, H).cwiseProduct(cache.tanh_cell.col(t));
    cache.hidden.col(t) = h;
  }
}

// Backpropagation through time. Adds parameter gradients into dw/du/db and
// the input gradient into dx.
void LstmBackward(const Matrix& w, const Matrix& u, const Matrix& x,
                  bool reverse, const LstmCache& cache, const Matrix& dh_in,
                  Matrix& dw, Matrix& du, Matrix& db, Matrix& dx) {
  const Eigen::Index H = u.cols();
  const Eigen::Index T = x.cols();
  Matrix dz(4 * H, T);
  Matrix h_prev = Matrix::Zero(H, T);
  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);
  Vector dh(H), dc(H);
  for (Eigen::Index s = T - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    const Eigen::Index prev = reverse ? t + 1 : t - 1;
    const bool has_prev = s > 0;
    const auto gates = cache.gates.col(t);
    const auto i = gates.head(H).array();
    const auto f = gates.segment(H, H).array();
    const auto o = gates.segment(2 * H, H).array();
    const auto g = gates.tail(H).array();
    const auto tc = cache.tanh_cell.col(t).array();

    dh = dh_in.col(t) + dh_next;
    dc = (dh.array() * o * (1 - tc * tc)).matrix() + dc_next;
    auto dzt = dz.col(t);
    dzt.head(H) = (dc.array() * g * i * (1 - i)).matrix();
    if (has_prev) {
      dzt.segment(H, H) =
          (dc.array() * cache.cell.col(prev).array() * f * (1 - f)).matrix();
      h_prev.col(t) = cache.hidden.col(prev);
    } else {
      dzt.segment(H, H).setZero();
    }
    dzt.segment(2 * H, H) = (dh.array() * tc * o * (1 - o)).matrix();
    dzt.tail(H) = (dc.array() * i * (1 - g * g)).matrix();
    dh_next.noalias() = u.transpose() * dzt;
    dc_next = (dc.array() * f).matrix();
  }
  dw.noalias() += dz * x.transpose();
  du.noalias() += dz * h_prev.transpose();
  db += dz.rowwise().sum();
  dx.noalias() += w.transpose() * dz;
}

}  // namespace

ModelConfig ModelConfig::Desk() {
  ModelConfig c;
  c.word_dim = 8;
  c.char_dim = 8;
  c.char_embedding_dim = 8;
  c.predicate_dim = 8;
  c.hidden_units = 16;
  c.encoder_layers = 2;
  c.dropout = 0.0;
  return c;
}

void ModelConfig::Validate() const {
  for (int dim : {word_dim, char_dim, char_embedding_dim, predicate_dim,
                  hidden_units, encoder_layers, char_window}) {
    if (dim <= 0) {
      throw Error(ErrorCode::kInvalidConfig, "model dimensions must be > 0");
    }
  }
  if (dropout < 0 || dropout >= 1) {
    throw Error(ErrorCode::kInvalidConfig, "dropout must lie in [0, 1)");
  }
}

void TrainConfig::Validate() const {
  if (max_epochs < 1 || batch_size < 1 || rho <= 0 || rho >= 1 ||
      epsilon <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid training configuration");
  }
  if (patience < 0) {
    throw Error(ErrorCode::kInvalidConfig, "patience must be >= 0");
  }
}

struct TaggerModel::Forward {
  struct Chars {
    std::vector<int> ids;
    Matrix windows;           // (window * char_embedding_dim) x L
    std::vector<int> argmax;  // per filter
  };
  struct Layer {
    const Matrix* input = nullptr;
    LstmCache fw, bw;
    Matrix hcat;      // 2H x T
    Matrix gate;      // 2H x T
    Matrix residual;  // 2H x T
    Matrix output;
  };
  std::vector<int> words;
  std::vector<Chars> chars;
  Matrix input;  // D x T
  std::vector<Layer> layers;
  Matrix dropout_mask;
  Matrix states;
};

TaggerModel::TaggerModel(ModelConfig config, Vocab word_vocab,
                         Vocab char_vocab, TagSet srl_tags, TagSet er_tags)
    : config_(config),
      word_vocab_(std::move(word_vocab)),
      char_vocab_(std::move(char_vocab)),
      srl_tags_(std::move(srl_tags)),
      er_tags_(std::move(er_tags)) {
  config_.Validate();
  const int H = config_.hidden_units;
  const int S = config_.state_dim();
  ids_.word = Add("embed.word", config_.word_dim, word_vocab_.size());
  ids_.char_emb =
      Add("embed.char", config_.char_embedding_dim, char_vocab_.size());
  ids_.conv_w = Add("char.conv.w", config_.char_dim,
                    config_.char_window * config_.char_embedding_dim);
  ids_.conv_b = Add("char.conv.b", config_.char_dim, 1);
  ids_.predicate = Add("embed.predicate", config_.predicate_dim, 2);
  int in = config_.input_dim();
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l) + ".";
    LayerIds layer;
    layer.fw_w = Add(p + "fw.w", 4 * H, in);
    layer.fw_u = Add(p + "fw.u", 4 * H, H);
    layer.fw_b = Add(p + "fw.b", 4 * H, 1);
    layer.bw_w = Add(p + "bw.w", 4 * H, in);
    layer.bw_u = Add(p + "bw.u", 4 * H, H);
    layer.bw_b = Add(p + "bw.b", 4 * H, 1);
    layer.gate_w = Add(p + "highway.w", S, in);
    layer.gate_b = Add(p + "highway.b", S, 1);
    layer.proj_w = in == S ? -1 : Add(p + "highway.proj", S, in);
    ids_.layers.push_back(layer);
    in = S;
  }
  if (config_.multi_task) {
    ids_.er_w = Add("er.w", er_tags_.size(), S);
    ids_.er_b = Add("er.b", er_tags_.size(), 1);
  }
  ids_.srl_w = Add("srl.w", srl_tags_.size(), S);
  ids_.srl_b = Add("srl.b", srl_tags_.size(), 1);
  ids_.transition = Add("crf.transition", srl_tags_.size(), srl_tags_.size());
  if (config_.crf_boundaries) {
    ids_.begin = Add("crf.begin", srl_tags_.size(), 1);
    ids_.end = Add("crf.end", srl_tags_.size(), 1);
  }
  Initialize();
}

int TaggerModel::Add(const std::string& name, int rows, int cols) {
  params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return static_cast<int>(params_.size()) - 1;
}

void TaggerModel::Initialize() {
  Rng rng(config_.rng_seed);
  FillUniform(params_[ids_.word].value, 0.5 / config_.word_dim, rng);
  FillUniform(params_[ids_.char_emb].value,
              std::sqrt(3.0 / config_.char_embedding_dim), rng);
  FillUniform(params_[ids_.predicate].value,
              std::sqrt(3.0 / config_.predicate_dim), rng);
  FillGlorot(params_[ids_.conv_w].value, rng);
  const int H = config_.hidden_units;
  for (const LayerIds& layer : ids_.layers) {
    for (int id : {layer.fw_w, layer.fw_u, layer.bw_w, layer.bw_u,
                   layer.gate_w}) {
      FillGlorot(params_[id].value, rng);
    }
    if (layer.proj_w >= 0) FillGlorot(params_[layer.proj_w].value, rng);
    // Forget gates start open.
    params_[layer.fw_b].value.block(H, 0, H, 1).setOnes();
    params_[layer.bw_b].value.block(H, 0, H, 1).setOnes();
  }
  if (ids_.er_w >= 0) FillGlorot(params_[ids_.er_w].value, rng);
  FillGlorot(params_[ids_.srl_w].value, rng);
}

Parameter& TaggerModel::parameter(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kBadCheckpoint, "no parameter " + name);
}

const Parameter& TaggerModel::parameter(const std::string& name) const {
  return const_cast<TaggerModel*>(this)->parameter(name);
}

int64_t TaggerModel::num_parameters() const {
  int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void TaggerModel::ZeroGradients() {
  for (Parameter& p : params_) p.grad.setZero();
}

void TaggerModel::SetWordEmbeddings(const Matrix& table) {
  Matrix& word = params_[ids_.word].value;
  if (table.rows() != word.cols() || table.cols() != word.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "word embedding table shape");
  }
  word = table.transpose();
}

void TaggerModel::RunForward(const Sentence& sentence, Rng* dropout_rng,
                             Forward& fw) const {
  const int T = sentence.size();
  if (T == 0) throw Error(ErrorCode::kEmptySentence, sentence.id);
  if (sentence.predicate < 0 || sentence.predicate >= T) {
    throw Error(ErrorCode::kMissingPredicate, sentence.id);
  }
  const int dw = config_.word_dim;
  const int dc = config_.char_dim;
  const int de = config_.char_embedding_dim;
  const int window = config_.char_window;
  const int pad = (window - 1) / 2;
  const Matrix& word_emb = params_[ids_.word].value;
  const Matrix& char_emb = params_[ids_.char_emb].value;
  const Matrix& conv_w = params_[ids_.conv_w].value;
  const Matrix& conv_b = params_[ids_.conv_b].value;
  const Matrix& pred_emb = params_[ids_.predicate].value;

  fw.input.resize(config_.input_dim(), T);
  fw.words.resize(T);
  fw.chars.resize(T);
  for (int t = 0; t < T; ++t) {
    const std::string& token = sentence.tokens[t];
    fw.words[t] = word_vocab_.Lookup(LowercaseAscii(token));
    fw.input.block(0, t, dw, 1) = word_emb.col(fw.words[t]);

    Forward::Chars& ch = fw.chars[t];
    ch.ids.clear();
    for (const std::string& c : Utf8Chars(token)) {
      ch.ids.push_back(char_vocab_.Lookup(c));
    }
    const int L = static_cast<int>(ch.ids.size());
    ch.windows = Matrix::Zero(window * de, L);
    for (int p = 0; p < L; ++p) {
      for (int k = 0; k < window; ++k) {
        const int pos = p + k - pad;
        if (pos >= 0 && pos < L) {
          ch.windows.block(k * de, p, de, 1) = char_emb.col(ch.ids[pos]);
        }
      }
    }
    Matrix conv = conv_w * ch.windows;
    conv.colwise() += conv_b.col(0);
    ch.argmax.resize(dc);
    for (int f = 0; f < dc; ++f) {
      Eigen::Index best;
      fw.input(dw + f, t) = conv.row(f).maxCoeff(&best);
      ch.argmax[f] = static_cast<int>(best);
    }
    fw.input.block(dw + dc, t, config_.predicate_dim, 1) =
        pred_emb.col(t == sentence.predicate ? 1 : 0);
  }

  const int S = config_.state_dim();
  const int H = config_.hidden_units;
  fw.layers.resize(ids_.layers.size());
  const Matrix* x = &fw.input;
  for (size_t l = 0; l < ids_.layers.size(); ++l) {
    const LayerIds& id = ids_.layers[l];
    Forward::Layer& layer = fw.layers[l];
    layer.input = x;
    LstmForward(params_[id.fw_w].value, params_[id.fw_u].value,
                params_[id.fw_b].value, *x, /*reverse=*/false, layer.fw);
    LstmForward(params_[id.bw_w].value, params_[id.bw_u].value,
                params_[id.bw_b].value, *x, /*reverse=*/true, layer.bw);
    layer.hcat.resize(S, T);
    layer.hcat.topRows(H) = layer.fw.hidden;
    layer.hcat.bottomRows(H) = layer.bw.hidden;
    Matrix gate_pre = params_[id.gate_w].value * *x;
    gate_pre.colwise() += params_[id.gate_b].value.col(0);
    layer.gate = Sigmoid(gate_pre);
    layer.residual = id.proj_w >= 0 ? Matrix(params_[id.proj_w].value * *x)
                                    : *x;
    layer.output =
        (layer.gate.array() * layer.hcat.array() +
         (1 - layer.gate.array()) * layer.residual.array())
            .matrix();
    x = &layer.output;
  }
  fw.states = *x;
  if (dropout_rng != nullptr && config_.dropout > 0) {
    const double keep = 1 - config_.dropout;
    fw.dropout_mask.resize(S, T);
    for (int t = 0; t < T; ++t) {
      for (int r = 0; r < S; ++r) {
        fw.dropout_mask(r, t) = dropout_rng->Uniform() < keep ? 1 / keep : 0;
      }
    }
    fw.states.array() *= fw.dropout_mask.array();
  } else {
    fw.dropout_mask.resize(0, 0);
  }
}

Matrix TaggerModel::Encode(const Sentence& sentence) const {
  Forward fw;
  RunForward(sentence, nullptr, fw);
  return fw.states;
}

TaggerModel::HeadOutputs TaggerModel::Heads(const Sentence& sentence) const {
  Forward fw;
  RunForward(sentence, nullptr, fw);
  HeadOutputs out;
  Matrix srl = params_[ids_.srl_w].value * fw.states;
  srl.colwise() += params_[ids_.srl_b].value.col(0);
  out.srl_emissions = srl.transpose();
  if (config_.multi_task) {
    Matrix er = params_[ids_.er_w].value * fw.states;
    er.colwise() += params_[ids_.er_b].value.col(0);
    out.er_log_probs = LogSoftmaxColumns(er).transpose();
  }
  return out;
}

Matrix TaggerModel::ErLogProbs(const Sentence& sentence) const {
  if (!config_.multi_task) {
    throw Error(ErrorCode::kInvalidConfig, "single-task model has no ER head");
  }
  return Heads(sentence).er_log_probs;
}

crf::EmissionScores TaggerModel::SrlEmissions(const Sentence& sentence) const {
  return Heads(sentence).srl_emissions;
}

crf::CrfParams TaggerModel::Crf() const {
  crf::CrfParams p;
  p.transition = params_[ids_.transition].value;
  if (ids_.begin >= 0) {
    p.begin = params_[ids_.begin].value.col(0);
    p.end = params_[ids_.end].value.col(0);
  }
  return p;
}

Prediction TaggerModel::Predict(const Sentence& sentence) const {
  const HeadOutputs heads = Heads(sentence);
  const crf::DecodeResult decoded = crf::Viterbi(heads.srl_emissions, Crf());
  Prediction out;
  out.srl = RepairBio(decoded.path);
  out.srl_path_log_prob = decoded.path_log_prob;
  if (config_.multi_task) {
    TagSequence er(sentence.size());
    out.er_confidence.resize(sentence.size());
    for (int t = 0; t < sentence.size(); ++t) {
      Eigen::Index best;
      out.er_confidence[t] = std::exp(heads.er_log_probs.row(t).maxCoeff(&best));
      er[t] = static_cast<int>(best);
    }
    out.er = RepairBio(er);
  } else {
    out.er.assign(sentence.size(), TagSet::kOutside);
    out.er_confidence.assign(sentence.size(), 0.0);
  }
  return out;
}

LossParts TaggerModel::JointLoss(const Sentence& sentence) const {
  if (!sentence.srl || (config_.multi_task && !sentence.er)) {
    throw Error(ErrorCode::kMissingLabels, sentence.id);
  }
  const HeadOutputs heads = Heads(sentence);
  LossParts loss;
  loss.srl = -crf::SequenceLogProb(*sentence.srl, heads.srl_emissions, Crf());
  if (config_.multi_task) {
    for (int t = 0; t < sentence.size(); ++t) {
      loss.er -= heads.er_log_probs(t, (*sentence.er)[t]);
    }
  }
  return loss;
}

LossParts TaggerModel::AccumulateGradients(const Sentence& sentence, Rng* rng,
                                           bool include_er) {
  if (!sentence.srl || (config_.multi_task && include_er && !sentence.er)) {
    throw Error(ErrorCode::kMissingLabels, sentence.id);
  }
  const bool with_er = config_.multi_task && include_er;
  Forward fw;
  RunForward(sentence, rng, fw);
  const int T = sentence.size();
  LossParts loss;

  // SRL head.
  const Matrix& srl_w = params_[ids_.srl_w].value;
  Matrix srl = srl_w * fw.states;
  srl.colwise() += params_[ids_.srl_b].value.col(0);
  const crf::EmissionScores emissions = srl.transpose();
  const crf::CrfParams crf_params = Crf();
  Matrix d_emissions = Matrix::Zero(T, srl_tags_.size());
  crf::CrfGradients crf_grads;
  crf_grads.transition = Matrix::Zero(srl_tags_.size(), srl_tags_.size());
  if (crf_params.has_boundaries()) {
    crf_grads.begin = Vector::Zero(srl_tags_.size());
    crf_grads.end = Vector::Zero(srl_tags_.size());
  }
  loss.srl = crf::AccumulateNllGradient(*sentence.srl, emissions, crf_params,
                                        d_emissions, crf_grads);
  params_[ids_.transition].grad += crf_grads.transition;
  if (ids_.begin >= 0) {
    params_[ids_.begin].grad += crf_grads.begin;
    params_[ids_.end].grad += crf_grads.end;
  }
  const Matrix d_srl = d_emissions.transpose();
  params_[ids_.srl_w].grad.noalias() += d_srl * fw.states.transpose();
  params_[ids_.srl_b].grad += d_srl.rowwise().sum();
  Matrix d_states = srl_w.transpose() * d_srl;

  // Entity head.
  if (with_er) {
    const Matrix& er_w = params_[ids_.er_w].value;
    Matrix er = er_w * fw.states;
    er.colwise() += params_[ids_.er_b].value.col(0);
    const Matrix log_probs = LogSoftmaxColumns(er);
    Matrix d_er = log_probs.array().exp().matrix();
    for (int t = 0; t < T; ++t) {
      const int gold = (*sentence.er)[t];
      loss.er -= log_probs(gold, t);
      d_er(gold, t) -= 1.0;
    }
    params_[ids_.er_w].grad.noalias() += d_er * fw.states.transpose();
    params_[ids_.er_b].grad += d_er.rowwise().sum();
    d_states.noalias() += er_w.transpose() * d_er;
  }
  if (fw.dropout_mask.size() > 0) d_states.array() *= fw.dropout_mask.array();

  // Encoder, top layer first.
  const int H = config_.hidden_units;
  Matrix d_out = std::move(d_states);
  for (int l = static_cast<int>(ids_.layers.size()) - 1; l >= 0; --l) {
    const LayerIds& id = ids_.layers[l];
    const Forward::Layer& layer = fw.layers[l];
    const Matrix& x = *layer.input;
    const Matrix d_hcat = (d_out.array() * layer.gate.array()).matrix();
    const Matrix d_gate_pre =
        (d_out.array() * (layer.hcat.array() - layer.residual.array()) *
         layer.gate.array() * (1 - layer.gate.array()))
            .matrix();
    const Matrix d_residual =
        (d_out.array() * (1 - layer.gate.array())).matrix();
    Matrix d_x = params_[id.gate_w].value.transpose() * d_gate_pre;
    params_[id.gate_w].grad.noalias() += d_gate_pre * x.transpose();
    params_[id.gate_b].grad += d_gate_pre.rowwise().sum();
    if (id.proj_w >= 0) {
      params_[id.proj_w].grad.noalias() += d_residual * x.transpose();
      d_x.noalias() += params_[id.proj_w].value.transpose() * d_residual;
    } else {
      d_x += d_residual;
    }
    LstmBackward(params_[id.fw_w].value, params_[id.fw_u].value, x, false,
                 layer.fw, d_hcat.topRows(H), params_[id.fw_w].grad,
                 params_[id.fw_u].grad, params_[id.fw_b].grad, d_x);
    LstmBackward(params_[id.bw_w].value, params_[id.bw_u].value, x, true,
                 layer.bw, d_hcat.bottomRows(H), params_[id.bw_w].grad,
                 params_[id.bw_u].grad, params_[id.bw_b].grad, d_x);
    d_out = std::move(d_x);
  }

  // Input features.
  const int dw = config_.word_dim;
  const int dc = config_.char_dim;
  const int de = config_.char_embedding_dim;
  const int window = config_.char_window;
  const int pad = (window - 1) / 2;
  const Matrix& conv_w = params_[ids_.conv_w].value;
  Matrix& d_word = params_[ids_.word].grad;
  Matrix& d_char = params_[ids_.char_emb].grad;
  Matrix& d_pred = params_[ids_.predicate].grad;
  for (int t = 0; t < T; ++t) {
    d_word.col(fw.words[t]) += d_out.block(0, t, dw, 1);
    d_pred.col(t == sentence.predicate ? 1 : 0) +=
        d_out.block(dw + dc, t, config_.predicate_dim, 1);
    const Forward::Chars& ch = fw.chars[t];
    const int L = static_cast<int>(ch.ids.size());
    Matrix d_conv = Matrix::Zero(dc, L);
    for (int f = 0; f < dc; ++f) d_conv(f, ch.argmax[f]) = d_out(dw + f, t);
    params_[ids_.conv_w].grad.noalias() += d_conv * ch.windows.transpose();
    params_[ids_.conv_b].grad += d_conv.rowwise().sum();
    const Matrix d_windows = conv_w.transpose() * d_conv;
    for (int p = 0; p < L; ++p) {
      for (int k = 0; k < window; ++k) {
        const int pos = p + k - pad;
        if (pos >= 0 && pos < L) {
          d_char.col(ch.ids[pos]) += d_windows.block(k * de, p, de, 1);
        }
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training.

Trainer::Trainer(TaggerModel& model, TrainConfig config)
    : model_(&model), config_(config), rng_(config.rng_seed) {
  config_.Validate();
  ResetOptimizer();
}

void Trainer::ResetOptimizer() {
  mean_sq_grad_.clear();
  mean_sq_update_.clear();
  for (const Parameter& p : model_->parameters()) {
    mean_sq_grad_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    mean_sq_update_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Trainer::Step(int batch_items) {
  std::vector<Parameter>& params = model_->parameters();
  const double scale = 1.0 / batch_items;
  double norm_sq = 0;
  for (Parameter& p : params) {
    p.grad *= scale;
    norm_sq += p.grad.squaredNorm();
  }
  if (config_.clip_norm > 0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > config_.clip_norm) {
      for (Parameter& p : params) p.grad *= config_.clip_norm / norm;
    }
  }
  const double rho = config_.rho;
  const double eps = config_.epsilon;
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (config_.freeze_word_embeddings && p.name == "embed.word") continue;
    auto g = p.grad.array();
    auto eg2 = mean_sq_grad_[i].array();
    auto edx2 = mean_sq_update_[i].array();
    eg2 = rho * eg2 + (1 - rho) * g * g;
    const Eigen::ArrayXXd update = -((edx2 + eps).sqrt() / (eg2 + eps).sqrt()) * g;
    edx2 = rho * edx2 + (1 - rho) * update * update;
    p.value.array() += update;
  }
}

EpochStats Trainer::RunEpoch(std::span<const Sentence* const> labeled) {
  if (labeled.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no labeled sentences");
  }
  std::vector<const Sentence*> order(labeled.begin(), labeled.end());
  rng_.Shuffle(order);
  EpochStats stats;
  stats.epoch = ++epochs_;
  const size_t batch = static_cast<size_t>(config_.batch_size);
  for (size_t start = 0; start < order.size(); start += batch) {
    const size_t stop = std::min(order.size(), start + batch);
    model_->ZeroGradients();
    for (size_t i = start; i < stop; ++i) {
      const LossParts loss = model_->AccumulateGradients(*order[i], &rng_);
      stats.loss.srl += loss.srl;
      stats.loss.er += loss.er;
    }
    Step(static_cast<int>(stop - start));
  }
  stats.sentences = static_cast<int>(order.size());
  return stats;
}

bool EarlyStopping::Update(double value) {
  const int index = seen_++;
  if (best_index_ < 0 || value > best_) {
    best_ = value;
    best_index_ = index;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

namespace {

eval::SpanMatchReport EvaluateTask(const TaggerModel& model,
                                   std::span<const Sentence* const> sentences,
                                   Task task) {
  std::vector<TagSequence> gold, pred;
  gold.reserve(sentences.size());
  pred.reserve(sentences.size());
  for (const Sentence* s : sentences) {
    const std::optional<TagSequence>& tags = task == Task::kSrl ? s->srl : s->er;
    if (!tags) throw Error(ErrorCode::kMissingLabels, s->id);
    const Prediction p = model.Predict(*s);
    gold.push_back(*tags);
    pred.push_back(task == Task::kSrl ? p.srl : p.er);
  }
  return eval::Evaluate(gold, pred,
                        task == Task::kSrl ? model.srl_tags() : model.er_tags());
}

}  // namespace

eval::SpanMatchReport EvaluateSrl(const TaggerModel& model,
                                  std::span<const Sentence* const> sentences) {
  return EvaluateTask(model, sentences, Task::kSrl);
}

eval::SpanMatchReport EvaluateEr(const TaggerModel& model,
                                 std::span<const Sentence* const> sentences) {
  return EvaluateTask(model, sentences, Task::kEr);
}

TrainResult Train(TaggerModel model, std::span<const Sentence* const> labeled,
                  std::span<const Sentence* const> dev,
                  const TrainConfig& config) {
  if (labeled.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no labeled sentences");
  }
  Trainer trainer(model, config);
  EarlyStopping stopping(config.patience);
  TrainResult result{model, {}, 0, false};
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const EpochStats stats = trainer.RunEpoch(labeled);
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = stats.loss;
    double monitored;
    if (dev.empty()) {
      monitored = -stats.loss.total();
    } else {
      entry.dev = EvaluateSrl(model, dev).overall;
      monitored = entry.dev.f1;
    }
    result.log.push_back(entry);
    if (stopping.Update(monitored)) {
      result.best = model;
      result.best_epoch = epoch;
    }
    if (stopping.ShouldStop()) {
      result.early_stopped = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Skip-gram pretraining.

Matrix PretrainWordEmbeddings(std::span<const Sentence* const> sentences,
                              const Vocab& vocab, int dim,
                              const EmbeddingConfig& config) {
  Rng rng(config.rng_seed);
  const int V = vocab.size();
  Matrix in(dim, V);
  FillUniform(in, 0.5 / dim, rng);
  if (!config.enabled) return in.transpose();

  std::vector<std::vector<int>> corpus;
  std::vector<double> counts(V, 0.0);
  int64_t total_tokens = 0;
  for (const Sentence* s : sentences) {
    std::vector<int> ids;
    for (const std::string& token : s->tokens) {
      ids.push_back(vocab.Lookup(LowercaseAscii(token)));
      counts[ids.back()] += 1;
    }
    total_tokens += static_cast<int64_t>(ids.size());
    corpus.push_back(std::move(ids));
  }
  if (total_tokens == 0) return in.transpose();

  // Cumulative unigram^0.75 distribution for negative sampling.
  std::vector<double> cumulative(V);
  double acc = 0;
  for (int w = 0; w < V; ++w) {
    acc += std::pow(counts[w], 0.75);
    cumulative[w] = acc;
  }
  auto sample_negative = [&]() {
    const double u = rng.Uniform() * acc;
    return static_cast<int>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
  };

  Matrix out = Matrix::Zero(dim, V);
  Vector grad_in(dim);
  const int64_t steps = total_tokens * config.epochs;
  int64_t step = 0;
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t si : order) {
      const std::vector<int>& ids = corpus[si];
      const int T = static_cast<int>(ids.size());
      for (int t = 0; t < T; ++t, ++step) {
        const double lr = std::max(
            config.learning_rate * 1e-4,
            config.learning_rate * (1.0 - static_cast<double>(step) / steps));
        const int reach = 1 + static_cast<int>(rng.UniformInt(config.window));
        for (int c = std::max(0, t - reach); c <= std::min(T - 1, t + reach);
             ++c) {
          if (c == t) continue;
          const int center = ids[t];
          grad_in.setZero();
          for (int n = 0; n <= config.negatives; ++n) {
            const int target = n == 0 ? ids[c] : sample_negative();
            if (n > 0 && target == ids[c]) continue;
            const double label = n == 0 ? 1.0 : 0.0;
            const double score = in.col(center).dot(out.col(target));
            const double sig = 1.0 / (1.0 + std::exp(-score));
            const double g = lr * (label - sig);
            grad_in += g * out.col(target);
            out.col(target) += g * in.col(center);
          }
          in.col(center) += grad_in;
        }
      }
    }
  }
  return in.transpose();
}

std::vector<const Sentence*> Select(const Corpus& corpus,
                                    std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const Sentence*> index;
  index.reserve(corpus.sentences.size());
  for (const Sentence& s : corpus.sentences) index.emplace(s.id, &s);
  std::vector<const Sentence*> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::kUnknownId, id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace mtal
