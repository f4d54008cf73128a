/*
   Copyright 2026 The hclm Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Command-line front end: train, eval, sample, decode and gradcheck.
//
// Every option can come from a flat key=value config file (--config) and be
// overridden on the command line with the flag of the same name. Return
// values are process exit codes: 0 success, 1 usage or configuration error,
// 2 data or format error, 3 numeric failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace hclm {

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace hclm
