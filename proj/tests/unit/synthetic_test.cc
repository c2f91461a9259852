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

#include <map>
#include <set>
#include <sstream>

#include "mtal/corpus.h"
#include "mtal/error.h"
#include "mtal/eval.h"
#include "mtal/synthetic.h"

namespace mtal {
namespace {

TEST_CASE("generator emits the requested count of valid sentences") {
  SyntheticConfig config;
  config.count = 500;
  const Corpus c = GenerateSynthetic(config, 1);
  REQUIRE(c.sentences.size() == 500);
  std::set<std::string> ids;
  for (const Sentence& s : c.sentences) {
    CHECK(ids.insert(s.id).second);
    REQUIRE(s.fully_labeled());
    CHECK(s.size() == static_cast<int>(s.srl->size()));
    CHECK(s.size() == static_cast<int>(s.er->size()));
    CHECK(s.predicate >= 0);
    CHECK(s.predicate < s.size());
    CHECK(IsWellFormedBio(*s.srl));
    CHECK(IsWellFormedBio(*s.er));
    CHECK((*s.srl)[s.predicate] == TagSet::kOutside);
  }
}

TEST_CASE("generator is deterministic in its seed") {
  SyntheticConfig config;
  config.count = 200;
  const TagSet srl = TagSet::DefaultSrl();
  const TagSet er = TagSet::DefaultEr();
  const std::string a = SerializeCorpus(GenerateSynthetic(config, 7), srl, er);
  const std::string b = SerializeCorpus(GenerateSynthetic(config, 7), srl, er);
  const std::string c = SerializeCorpus(GenerateSynthetic(config, 8), srl, er);
  CHECK(a == b);
  CHECK(a != c);
  // The serialized form parses back with the default tag sets.
  std::istringstream in(a);
  CHECK(ParseCorpus(in, srl, er).sentences.size() == 200);
}

TEST_CASE("role frequencies follow the configured weights") {
  SyntheticConfig config;
  config.count = 4000;
  const Corpus c = GenerateSynthetic(config, 3);
  const TagSet srl = TagSet::DefaultSrl();
  std::map<std::string, int> counts;
  for (const Sentence& s : c.sentences) {
    for (const eval::Span& span : eval::ExtractSpans(*s.srl, srl)) {
      ++counts[srl.labels()[span.label].code];
    }
  }
  const double patient = counts["PS"];
  REQUIRE(patient > 0);
  for (const auto& [code, weight] : config.role_weights) {
    const double expected = weight / config.role_weights.at("PS");
    CHECK(counts[code] / patient == doctest::Approx(expected).epsilon(0.1));
  }
}

TEST_CASE("noise free output stays inside the lexicon") {
  SyntheticConfig config;
  config.count = 300;
  config.noise_rate = 0;
  const std::set<std::string>& lexicon = SyntheticLexicon();
  for (const Sentence& s : GenerateSynthetic(config, 5).sentences) {
    for (const std::string& token : s.tokens) CHECK(lexicon.count(token) == 1);
  }
  config.noise_rate = 1;
  int outside = 0;
  for (const Sentence& s : GenerateSynthetic(config, 5).sentences) {
    for (const std::string& token : s.tokens) outside += !lexicon.count(token);
  }
  CHECK(outside > 0);
}

TEST_CASE("multi clause sentences repeat tokens once per predicate") {
  SyntheticConfig config;
  config.count = 400;
  config.multi_clause_rate = 1.0;
  const Corpus c = GenerateSynthetic(config, 2);
  int shared = 0;
  for (size_t i = 0; i + 1 < c.sentences.size(); ++i) {
    const Sentence& a = c.sentences[i];
    const Sentence& b = c.sentences[i + 1];
    if (a.tokens == b.tokens && a.predicate != b.predicate) {
      ++shared;
      CHECK(*a.er == *b.er);
    }
  }
  CHECK(shared > 50);
}

TEST_CASE("invalid generator configs are rejected") {
  SyntheticConfig config;
  config.count = -1;
  CHECK_THROWS_AS(GenerateSynthetic(config, 0), Error);
  config = SyntheticConfig();
  config.noise_rate = 1.5;
  CHECK_THROWS_AS(GenerateSynthetic(config, 0), Error);
  config = SyntheticConfig();
  config.role_weights["Z"] = 1;
  CHECK_THROWS_AS(GenerateSynthetic(config, 0), Error);
  config = SyntheticConfig();
  config.count = 0;
  CHECK(GenerateSynthetic(config, 0).sentences.empty());
}

}  // namespace
}  // namespace mtal
