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


// The `mtal` command line.
//
//   mtal datagen --count N --seed S --out FILE
//   mtal train   --data FILE [--folds K]
//   mtal al      --data FILE --scenario 85:15 --strategy rank [--grid table2]
//   mtal eval    --a RUN_DIR --b RUN_DIR
//   mtal serve   --data FILE --port P --ui DIR
//   mtal replay  RUN_DIR
//
// Every run directory starts with manifest.json holding the resolved
// configuration, so `replay` can reproduce it. Without --out, run
// directories go under $MTAL_OUT_ROOT (default "runs").

#ifndef MTAL_CLI_H_
#define MTAL_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "mtal/json_io.h"

namespace mtal::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name.
int Main(const std::vector<std::string>& args, std::ostream& out,
         std::ostream& err);

// Runs a resolved configuration as recorded in a manifest.
void Execute(const std::string& command, const Json& config,
             const std::string& out_dir, std::ostream& log);

std::string VersionString();

}  // namespace mtal::cli

#endif  // MTAL_CLI_H_
