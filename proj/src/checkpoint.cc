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

// Checkpoint layout:
//
//   "MTALCKPT"            8 bytes
//   version               uint32, little endian
//   header length         uint64, little endian
//   header                JSON: configs, vocabularies, tag sets and a tensor
//                         directory of {name, rows, cols, offset}
//   tensor data           float64 little endian, column major, concatenated
//
// Values are stored as raw IEEE doubles so a reload is bit-exact.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtal/error.h"
#include "mtal/json_io.h"
#include "mtal/tagger.h"

namespace mtal {
namespace {

constexpr char kMagic[8] = {'M', 'T', 'A', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void WritePod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::kBadCheckpoint, "truncated checkpoint header");
  }
  return value;
}

Json TagSetJson(const TagSet& tags) {
  Json labels = Json::array();
  for (const SpanLabel& l : tags.labels()) {
    labels.push_back({{"name", l.name}, {"code", l.code}});
  }
  return labels;
}

TagSet TagSetFromJson(Task task, const Json& j) {
  std::vector<SpanLabel> labels;
  for (const Json& l : j) {
    labels.push_back({l.at("name").get<std::string>(),
                      l.at("code").get<std::string>()});
  }
  return TagSet(task, std::move(labels));
}

Json VocabJson(const Vocab& vocab) {
  return Json(std::vector<std::string>(vocab.entries().begin() + 1,
                                       vocab.entries().end()));
}

}  // namespace

void TaggerModel::Save(std::ostream& out) const {
  Json tensors = Json::array();
  uint64_t offset = 0;
  for (const Parameter& p : params_) {
    tensors.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"offset", offset}});
    offset += static_cast<uint64_t>(p.value.size());
  }
  const Json header{{"model", ToJson(config_)},
                    {"word_vocab", VocabJson(word_vocab_)},
                    {"char_vocab", VocabJson(char_vocab_)},
                    {"srl_labels", TagSetJson(srl_tags_)},
                    {"er_labels", TagSetJson(er_tags_)},
                    {"tensors", tensors}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  WritePod<uint32_t>(out, kVersion);
  WritePod<uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter& p : params_) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::kIo, "checkpoint write failed");
}

void TaggerModel::SaveFile(const std::string& path) const {
  std::ostringstream buffer;
  Save(buffer);
  WriteFileAtomic(path, buffer.str());
}

TaggerModel TaggerModel::Load(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kBadCheckpoint, "not a checkpoint");
  }
  const uint32_t version = ReadPod<uint32_t>(in);
  if (version != kVersion) {
    throw Error(ErrorCode::kBadCheckpoint,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const uint64_t header_size = ReadPod<uint64_t>(in);
  std::string text(header_size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_size))) {
    throw Error(ErrorCode::kBadCheckpoint, "truncated checkpoint header");
  }
  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadCheckpoint, e.what());
  }
  TaggerModel model(
      ModelConfigFromJson(header.at("model")),
      Vocab(header.at("word_vocab").get<std::vector<std::string>>()),
      Vocab(header.at("char_vocab").get<std::vector<std::string>>()),
      TagSetFromJson(Task::kSrl, header.at("srl_labels")),
      TagSetFromJson(Task::kEr, header.at("er_labels")));
  const Json& tensors = header.at("tensors");
  if (tensors.size() != model.params_.size()) {
    throw Error(ErrorCode::kBadCheckpoint, "tensor count mismatch");
  }
  for (size_t i = 0; i < tensors.size(); ++i) {
    Parameter& p = model.params_[i];
    const Json& t = tensors[i];
    if (t.at("name").get<std::string>() != p.name ||
        t.at("rows").get<int64_t>() != p.value.rows() ||
        t.at("cols").get<int64_t>() != p.value.cols()) {
      throw Error(ErrorCode::kBadCheckpoint, "tensor mismatch at " + p.name);
    }
    if (!in.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(p.value.size() *
                                              sizeof(double)))) {
      throw Error(ErrorCode::kBadCheckpoint, "truncated tensor " + p.name);
    }
  }
  return model;
}

TaggerModel TaggerModel::LoadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return Load(in);
}

}  // namespace mtal
