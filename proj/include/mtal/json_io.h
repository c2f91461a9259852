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

// JSON mappings for configuration structs. Missing keys keep their defaults.

#ifndef MTAL_JSON_IO_H_
#define MTAL_JSON_IO_H_

#include <string>

#include "json.hpp"
#include "mtal/corpus.h"
#include "mtal/eval.h"
#include "mtal/synthetic.h"
#include "mtal/tagger.h"

namespace mtal {

using Json = nlohmann::json;

Json ToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const Json& j);
Json ToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const Json& j);
Json ToJson(const EmbeddingConfig& config);
EmbeddingConfig EmbeddingConfigFromJson(const Json& j);
Json ToJson(const SyntheticConfig& config);
SyntheticConfig SyntheticConfigFromJson(const Json& j);
Json ToJson(const SplitSpec& spec);
SplitSpec SplitSpecFromJson(const Json& j);
Json ToJson(const eval::Prf& prf);
Json ToJson(const eval::SpanMatchReport& report);

// Writes `contents` to a sibling temp file, flushes it to disk and renames
// it over `path`, so readers only ever see the old or the new contents.
void WriteFileAtomic(const std::string& path, const std::string& contents);
std::string ReadFile(const std::string& path);

}  // namespace mtal

#endif  // MTAL_JSON_IO_H_
