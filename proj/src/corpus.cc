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

#include "mtal/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "mtal/error.h"
#include "mtal/random.h"

namespace mtal {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "malformed-line";
    case ErrorCode::kInvalidBio: return "invalid-bio";
    case ErrorCode::kMissingPredicate: return "missing-predicate";
    case ErrorCode::kUnknownLabel: return "unknown-label";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kTagOutOfRange: return "tag-out-of-range";
    case ErrorCode::kEmptySentence: return "empty-sentence";
    case ErrorCode::kMissingLabels: return "missing-labels";
    case ErrorCode::kEmptyTrainingSet: return "empty-training-set";
    case ErrorCode::kNotNormalized: return "not-normalized";
    case ErrorCode::kUnknownStrategy: return "unknown-strategy";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kUnknownId: return "unknown-id";
    case ErrorCode::kNotInFlight: return "not-in-flight";
    case ErrorCode::kNoModel: return "no-model";
    case ErrorCode::kEmptyPool: return "empty-pool";
    case ErrorCode::kTrainingInProgress: return "training-in-progress";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadCheckpoint: return "bad-checkpoint";
  }
  return "unknown";
}

std::string_view TaskName(Task task) {
  return task == Task::kSrl ? "srl" : "er";
}

TagSet::TagSet(Task task, std::vector<SpanLabel> labels)
    : task_(task), labels_(std::move(labels)) {
  tags_.push_back("O");
  index_["O"] = kOutside;
  for (int i = 0; i < num_labels(); ++i) {
    const SpanLabel& label = labels_[i];
    if (label.code.empty() || label.name.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "empty span label");
    }
    if (label_index_.count(label.code) || label_index_.count(label.name)) {
      throw Error(ErrorCode::kInvalidConfig,
                  "duplicate span label " + label.name);
    }
    tags_.push_back("B-" + label.code);
    tags_.push_back("I-" + label.code);
    label_index_[label.code] = i;
    label_index_[label.name] = i;
    for (const std::string* key : {&label.code, &label.name}) {
      index_["B-" + *key] = BeginOf(i);
      index_["I-" + *key] = InsideOf(i);
    }
  }
}

TagSet TagSet::DefaultSrl() {
  return TagSet(Task::kSrl, {{"AGENT", "A"},
                             {"PATIENT", "PS"},
                             {"BENEFACTOR", "BN"},
                             {"GREET", "G"},
                             {"LOCATION", "L"},
                             {"TIME", "T"}});
}

TagSet TagSet::DefaultEr() {
  return TagSet(Task::kEr, {{"PERSON", "PER"},
                            {"LOCATION", "LOC"},
                            {"ORGANIZATION", "ORG"},
                            {"MISC", "MISC"}});
}

std::optional<int> TagSet::Find(std::string_view tag) const {
  auto it = index_.find(std::string(tag));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> TagSet::FindLabel(std::string_view name_or_code) const {
  auto it = label_index_.find(std::string(name_or_code));
  if (it == label_index_.end()) return std::nullopt;
  return it->second;
}

int FirstBioViolation(std::span<const int> tags) {
  int previous = TagSet::kOutside;
  for (size_t t = 0; t < tags.size(); ++t) {
    const int tag = tags[t];
    if (TagSet::IsInside(tag) &&
        (previous == TagSet::kOutside ||
         TagSet::LabelOf(previous) != TagSet::LabelOf(tag))) {
      return static_cast<int>(t);
    }
    previous = tag;
  }
  return -1;
}

bool IsWellFormedBio(std::span<const int> tags) {
  return FirstBioViolation(tags) < 0;
}

TagSequence RepairBio(std::span<const int> tags) {
  TagSequence repaired(tags.begin(), tags.end());
  int previous = TagSet::kOutside;
  for (int& tag : repaired) {
    if (TagSet::IsInside(tag) &&
        (previous == TagSet::kOutside ||
         TagSet::LabelOf(previous) != TagSet::LabelOf(tag))) {
      tag = TagSet::BeginOf(TagSet::LabelOf(tag));
    }
    previous = tag;
  }
  return repaired;
}

Sentence Sentence::WithoutLabels() const {
  Sentence copy;
  copy.id = id;
  copy.tokens = tokens;
  copy.predicate = predicate;
  return copy;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> sorted_entries) {
  entries_.reserve(sorted_entries.size() + 1);
  entries_.emplace_back(kUnkToken);
  for (std::string& entry : sorted_entries) {
    index_.emplace(entry, static_cast<int>(entries_.size()));
    entries_.push_back(std::move(entry));
  }
}

int Vocab::Lookup(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::Contains(std::string_view key) const {
  return index_.count(std::string(key)) > 0;
}

const Sentence* Corpus::Find(std::string_view id) const {
  for (const Sentence& s : sentences) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const Sentence& Corpus::Get(std::string_view id) const {
  const Sentence* s = Find(id);
  if (s == nullptr) {
    throw Error(ErrorCode::kUnknownId, "no sentence " + std::string(id));
  }
  return *s;
}

std::vector<std::string> Corpus::Ids() const {
  std::vector<std::string> ids;
  ids.reserve(sentences.size());
  for (const Sentence& s : sentences) ids.push_back(s.id);
  return ids;
}

std::string LowercaseAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> Utf8Chars(std::string_view s) {
  std::vector<std::string> chars;
  size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, s.size() - i);
    chars.emplace_back(s.substr(i, len));
    i += len;
  }
  return chars;
}

namespace {

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string Where(int line_number) {
  return "line " + std::to_string(line_number);
}

// Accumulates token lines of one sentence and validates it on Finish().
class SentenceBuilder {
 public:
  SentenceBuilder(const TagSet& srl, const TagSet& er) : srl_(&srl), er_(&er) {}

  bool empty() const { return tokens_.empty() && !id_.has_value(); }

  void SetId(std::string id, int line_number) {
    if (!tokens_.empty() || id_.has_value()) {
      throw Error(ErrorCode::kMalformedLine,
                  Where(line_number) + ": id comment inside a sentence");
    }
    id_ = std::move(id);
    start_line_ = line_number;
  }

  void AddToken(const std::vector<std::string>& fields, int line_number) {
    if (fields.size() != 4) {
      throw Error(ErrorCode::kMalformedLine,
                  Where(line_number) + ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    }
    if (tokens_.empty() && !id_.has_value()) start_line_ = line_number;
    if (fields[0].empty()) {
      throw Error(ErrorCode::kMalformedLine,
                  Where(line_number) + ": empty token");
    }
    tokens_.push_back(fields[0]);
    if (fields[1] == "1") {
      predicates_.push_back(static_cast<int>(tokens_.size()) - 1);
    } else if (fields[1] != "0") {
      throw Error(ErrorCode::kMalformedLine,
                  Where(line_number) + ": predicate flag must be 0 or 1");
    }
    AddTag(*srl_, fields[2], srl_tags_, srl_unlabeled_, line_number);
    AddTag(*er_, fields[3], er_tags_, er_unlabeled_, line_number);
  }

  Sentence Finish(int index) {
    Sentence s;
    s.id = id_.value_or("s" + std::to_string(index));
    if (tokens_.empty()) {
      throw Error(ErrorCode::kEmptySentence,
                  Where(start_line_) + ": sentence " + s.id + " has no tokens");
    }
    if (predicates_.empty()) {
      throw Error(ErrorCode::kMissingPredicate,
                  Where(start_line_) + ": sentence " + s.id +
                      " has no predicate");
    }
    if (predicates_.size() > 1) {
      throw Error(ErrorCode::kMissingPredicate,
                  Where(start_line_) + ": sentence " + s.id +
                      " marks more than one predicate");
    }
    s.tokens = std::move(tokens_);
    s.predicate = predicates_.front();
    s.srl = Layer(srl_tags_, srl_unlabeled_, s.id);
    s.er = Layer(er_tags_, er_unlabeled_, s.id);
    *this = SentenceBuilder(*srl_, *er_);
    return s;
  }

 private:
  void AddTag(const TagSet& tagset, const std::string& field,
              TagSequence& tags, int& unlabeled, int line_number) {
    if (field == "_") {
      ++unlabeled;
      tags.push_back(TagSet::kOutside);
      return;
    }
    const std::optional<int> tag = tagset.Find(field);
    if (!tag) {
      throw Error(ErrorCode::kUnknownLabel,
                  Where(line_number) + ": unknown " +
                      std::string(TaskName(tagset.task())) + " tag '" + field +
                      "'");
    }
    if (TagSet::IsInside(*tag) &&
        (tags.empty() || tags.back() == TagSet::kOutside ||
         TagSet::LabelOf(tags.back()) != TagSet::LabelOf(*tag))) {
      throw Error(ErrorCode::kInvalidBio,
                  Where(line_number) + ": '" + field +
                      "' does not continue a span of the same label");
    }
    tags.push_back(*tag);
  }

  std::optional<TagSequence> Layer(TagSequence& tags, int unlabeled,
                                   const std::string& id) const {
    if (unlabeled == static_cast<int>(tags.size())) return std::nullopt;
    if (unlabeled != 0) {
      throw Error(ErrorCode::kMalformedLine,
                  "sentence " + id + " mixes '_' with tags in one column");
    }
    return std::move(tags);
  }

  const TagSet* srl_;
  const TagSet* er_;
  std::optional<std::string> id_;
  int start_line_ = 0;
  std::vector<std::string> tokens_;
  std::vector<int> predicates_;
  TagSequence srl_tags_;
  TagSequence er_tags_;
  int srl_unlabeled_ = 0;
  int er_unlabeled_ = 0;
};

constexpr std::string_view kIdPrefix = "# id = ";

}  // namespace

Corpus ParseCorpus(std::istream& in, const TagSet& srl, const TagSet& er) {
  Corpus corpus;
  std::set<std::string> seen;
  SentenceBuilder builder(srl, er);
  std::string line;
  int line_number = 0;
  auto flush = [&]() {
    if (builder.empty()) return;
    Sentence s = builder.Finish(static_cast<int>(corpus.sentences.size()));
    if (!seen.insert(s.id).second) {
      throw Error(ErrorCode::kDuplicateId, "sentence id " + s.id);
    }
    corpus.sentences.push_back(std::move(s));
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    // Comment lines never contain tabs; a token line may start with '#'.
    if (line[0] == '#' && line.find('\t') == std::string::npos) {
      if (line.rfind(kIdPrefix, 0) == 0) {
        builder.SetId(line.substr(kIdPrefix.size()), line_number);
      }
      continue;
    }
    builder.AddToken(SplitTabs(line), line_number);
  }
  flush();
  return corpus;
}

Corpus ParseCorpusFile(const std::string& path, const TagSet& srl,
                       const TagSet& er) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return ParseCorpus(in, srl, er);
}

void WriteCorpus(std::ostream& out, const Corpus& corpus, const TagSet& srl,
                 const TagSet& er) {
  for (const Sentence& s : corpus.sentences) {
    out << kIdPrefix << s.id << '\n';
    for (int t = 0; t < s.size(); ++t) {
      out << s.tokens[t] << '\t' << (t == s.predicate ? '1' : '0') << '\t'
          << (s.srl ? srl.tag((*s.srl)[t]) : "_") << '\t'
          << (s.er ? er.tag((*s.er)[t]) : "_") << '\n';
    }
    out << '\n';
  }
}

std::string SerializeCorpus(const Corpus& corpus, const TagSet& srl,
                            const TagSet& er) {
  std::ostringstream out;
  WriteCorpus(out, corpus, srl, er);
  return out.str();
}

Corpus BuildVocab(const Corpus& corpus,
                  const std::unordered_set<std::string>& train_ids,
                  const VocabOptions& options) {
  std::map<std::string, int> word_counts;
  std::set<std::string> chars;
  for (const Sentence& s : corpus.sentences) {
    if (!train_ids.count(s.id)) continue;
    for (const std::string& token : s.tokens) {
      ++word_counts[LowercaseAscii(token)];
      for (std::string& c : Utf8Chars(token)) chars.insert(std::move(c));
    }
  }
  std::vector<std::string> words;
  for (const auto& [word, count] : word_counts) {
    if (count >= options.min_count && word != Vocab::kUnkToken) {
      words.push_back(word);
    }
  }
  chars.erase(std::string(Vocab::kUnkToken));
  Corpus out;
  out.sentences = corpus.sentences;
  out.word_vocab = Vocab(std::move(words));
  out.char_vocab = Vocab(std::vector<std::string>(chars.begin(), chars.end()));
  return out;
}

int TrainSplitSize(int num_sentences, double train_fraction) {
  // A small epsilon keeps exact products such as 0.8 * 10 from flooring to 7.
  return static_cast<int>(std::floor(train_fraction * num_sentences + 1e-9));
}

int SeedLabeledSize(int train_size, double seed_fraction) {
  return static_cast<int>(std::lround(seed_fraction * train_size));
}

Splits SplitCorpus(const Corpus& corpus, const SplitSpec& spec) {
  for (double f : {spec.train_fraction, spec.dev_fraction, spec.test_fraction,
                   spec.seed_labeled_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "split fraction outside [0, 1]");
    }
  }
  if (std::abs(spec.train_fraction + spec.dev_fraction + spec.test_fraction -
               1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "split fractions must sum to 1");
  }
  std::vector<std::string> ids = corpus.Ids();
  Rng rng(spec.rng_seed);
  rng.Shuffle(ids);
  const int n = static_cast<int>(ids.size());
  const int n_train = TrainSplitSize(n, spec.train_fraction);
  int n_dev = std::min(n - n_train, TrainSplitSize(n, spec.dev_fraction));
  if (spec.test_fraction == 0.0) n_dev = n - n_train;

  Splits splits;
  splits.train.assign(ids.begin(), ids.begin() + n_train);
  splits.dev.assign(ids.begin() + n_train, ids.begin() + n_train + n_dev);
  splits.test.assign(ids.begin() + n_train + n_dev, ids.end());
  const int n_seed = SeedLabeledSize(n_train, spec.seed_labeled_fraction);
  splits.seed_labeled.assign(splits.train.begin(),
                             splits.train.begin() + n_seed);
  splits.pool.assign(splits.train.begin() + n_seed, splits.train.end());

  auto warn_if_empty = [&](const std::vector<std::string>& part,
                           const char* name) {
    if (part.empty()) {
      splits.warnings.push_back(std::string("degenerate split: ") + name +
                                " is empty");
    }
  };
  warn_if_empty(splits.train, "train");
  warn_if_empty(splits.dev, "dev");
  warn_if_empty(splits.test, "test");
  warn_if_empty(splits.seed_labeled, "seed-labeled");
  warn_if_empty(splits.pool, "pool");
  return splits;
}

}  // namespace mtal
