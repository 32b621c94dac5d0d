/*
 * Copyright 2026 The cimcall Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end. `run` is the whole program minus process setup,
// so tests can drive it with an argument vector and capture both streams.
//
// Exit codes:
//   0  success
//   1  any other failure
//   2  invalid configuration or command line
//   3  the network cannot be mapped onto the architecture
//   4  unreadable or malformed input data
//   5  a requested sweep axis is empty
//
// Files go to --out-dir, else $CIMCALL_OUT_DIR, else the working directory.

#ifndef CIMCALL_CLI_HPP
#define CIMCALL_CLI_HPP

#include <iosfwd>

namespace cimcall::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitMapping = 3,
    kExitInput = 4,
    kExitEmptyAxis = 5,
};

inline constexpr const char* kOutDirEnv = "CIMCALL_OUT_DIR";

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cimcall::cli

#endif  // CIMCALL_CLI_HPP
