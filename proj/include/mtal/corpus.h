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

// Data model for predicate-centred sentences labeled with two BIO tag layers
// (semantic roles and entities), the canonical four-column TSV format,
// vocabularies and dataset splits.

#ifndef MTAL_CORPUS_H_
#define MTAL_CORPUS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mtal {

enum class Task { kSrl, kEr };

std::string_view TaskName(Task task);

struct SpanLabel {
  std::string name;  // e.g. "AGENT"
  std::string code;  // short form used inside BIO tags, e.g. "A"
};

// Ordered BIO inventory for one task. Index 0 is always "O"; label i owns
// B-<code> at 1 + 2i and I-<code> at 2 + 2i.
class TagSet {
 public:
  TagSet(Task task, std::vector<SpanLabel> labels);

  static TagSet DefaultSrl();
  static TagSet DefaultEr();

  static constexpr int kOutside = 0;

  Task task() const { return task_; }
  const std::vector<SpanLabel>& labels() const { return labels_; }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  int size() const { return static_cast<int>(tags_.size()); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::string& tag(int index) const { return tags_.at(index); }

  // Accepts canonical codes ("B-PS") as well as full names ("B-PATIENT").
  std::optional<int> Find(std::string_view tag) const;
  std::optional<int> FindLabel(std::string_view name_or_code) const;

  static int BeginOf(int label) { return 1 + 2 * label; }
  static int InsideOf(int label) { return 2 + 2 * label; }
  static bool IsBegin(int tag) { return tag > 0 && tag % 2 == 1; }
  static bool IsInside(int tag) { return tag > 0 && tag % 2 == 0; }
  // Label index of a B-/I- tag; -1 for O.
  static int LabelOf(int tag) { return tag == 0 ? -1 : (tag - 1) / 2; }

 private:
  Task task_;
  std::vector<SpanLabel> labels_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> label_index_;
};

using TagSequence = std::vector<int>;

// True when every I-x directly follows B-x or I-x.
bool IsWellFormedBio(std::span<const int> tags);
// Position of the first orphan I-x, or -1.
int FirstBioViolation(std::span<const int> tags);
// Demotes orphan I-x tags to B-x so any sequence becomes well formed.
TagSequence RepairBio(std::span<const int> tags);

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  int predicate = 0;
  std::optional<TagSequence> srl;
  std::optional<TagSequence> er;

  int size() const { return static_cast<int>(tokens.size()); }
  bool fully_labeled() const { return srl.has_value() && er.has_value(); }
  // Copy with both tag layers removed, as seen by a learner before querying.
  Sentence WithoutLabels() const;
};

// Surface-form index with a reserved UNK entry at index 0. Entries are stored
// in sorted order so the index assignment depends only on the key set.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  explicit Vocab(std::vector<std::string> sorted_entries);

  int Lookup(std::string_view key) const;
  bool Contains(std::string_view key) const;
  int size() const { return static_cast<int>(entries_.size()); }
  // entries()[0] is the UNK placeholder.
  const std::vector<std::string>& entries() const { return entries_; }

  bool operator==(const Vocab& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, int> index_;
};

struct Corpus {
  std::vector<Sentence> sentences;
  Vocab word_vocab;
  Vocab char_vocab;

  const Sentence& Get(std::string_view id) const;
  const Sentence* Find(std::string_view id) const;
  std::vector<std::string> Ids() const;
};

std::string LowercaseAscii(std::string_view s);
// Splits a UTF-8 string into code points (each as its byte sequence).
std::vector<std::string> Utf8Chars(std::string_view s);

// Parses the four-column format: token, predicate flag, SRL tag, ER tag,
// with "# id = <string>" comment lines and blank lines between sentences.
// Throws mtal::Error on malformed input.
Corpus ParseCorpus(std::istream& in, const TagSet& srl, const TagSet& er);
Corpus ParseCorpusFile(const std::string& path, const TagSet& srl,
                       const TagSet& er);
// Writes the canonical form; ParseCorpus(WriteCorpus(c)) reproduces c.
void WriteCorpus(std::ostream& out, const Corpus& corpus, const TagSet& srl,
                 const TagSet& er);
std::string SerializeCorpus(const Corpus& corpus, const TagSet& srl,
                            const TagSet& er);

struct VocabOptions {
  int min_count = 1;
};

// Returns a copy of the corpus whose vocabularies are built from the given
// sentence ids only. Words are lowercased; characters keep their case.
Corpus BuildVocab(const Corpus& corpus,
                  const std::unordered_set<std::string>& train_ids,
                  const VocabOptions& options = {});

struct SplitSpec {
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  double seed_labeled_fraction = 0.5;
  uint64_t rng_seed = 0;
};

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
  std::vector<std::string> seed_labeled;
  std::vector<std::string> pool;
  std::vector<std::string> warnings;
};

// Size of the training part for n sentences: floor(train_fraction * n).
int TrainSplitSize(int num_sentences, double train_fraction);
// Size of the initially labeled part: round(seed_fraction * train_size).
int SeedLabeledSize(int train_size, double seed_fraction);

Splits SplitCorpus(const Corpus& corpus, const SplitSpec& spec);

}  // namespace mtal

#endif  // MTAL_CORPUS_H_
