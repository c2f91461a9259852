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

// Templated generator of informal chat-style sentences with consistent role
// and entity annotations.

#ifndef MTAL_SYNTHETIC_H_
#define MTAL_SYNTHETIC_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "mtal/corpus.h"

namespace mtal {

struct SyntheticConfig {
  int count = 1000;
  // Relative frequency of each SRL role, keyed by role code. The defaults are
  // the per-role span counts of the reference conversational dataset.
  std::map<std::string, double> role_weights = {
      {"A", 2843}, {"PS", 3040}, {"BN", 293},
      {"G", 572},  {"L", 183},   {"T", 399}};
  // Inclusion probability of the most frequent role; the others scale by
  // weight.
  double max_role_probability = 0.5;
  // Per-token probability of a character-level misspelling.
  double noise_rate = 0.05;
  // Probability that a clause is joined with the next one into a
  // two-predicate sentence (emitted once per predicate).
  double multi_clause_rate = 0.15;
};

// All tokens the generator can emit before noise is applied.
const std::set<std::string>& SyntheticLexicon();

Corpus GenerateSynthetic(const SyntheticConfig& config, uint64_t seed);

}  // namespace mtal

#endif  // MTAL_SYNTHETIC_H_
