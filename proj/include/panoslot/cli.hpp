/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef PANOSLOT_CLI_HPP_
#define PANOSLOT_CLI_HPP_

#include <string>
#include <vector>

namespace panoslot {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

// Entry point of the `panoslot` tool. Subcommands: datagen, train, eval,
// ablate, dump-attention. Errors are reported on stderr and mapped to the
// exit codes above.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace panoslot

#endif  // PANOSLOT_CLI_HPP_
