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

#include <stdexcept>
#include <string>

namespace hclm {

// Every error raised by the library derives from Error. The category decides
// the process exit code of the command-line tool.
enum class ErrorCategory
{
    usage = 1,
    data = 2,
    numeric = 3,
};

class Error : public std::runtime_error
{
public:
    Error(ErrorCategory category, const std::string &what)
        : std::runtime_error(what), category_(category)
    {
    }

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

// Bad argument to a function (fraction out of range, length mismatch, ...).
struct ArgumentError : Error
{
    explicit ArgumentError(const std::string &what) : Error(ErrorCategory::usage, what) {}
};

// Matrix/vector shapes do not line up.
struct DimensionError : Error
{
    explicit DimensionError(const std::string &what) : Error(ErrorCategory::usage, what) {}
};

// Inconsistent network, training or decoding configuration.
struct ConfigError : Error
{
    explicit ConfigError(const std::string &what) : Error(ErrorCategory::usage, what) {}
};

// Unreadable or malformed input data: empty corpus, OOV symbol, corrupt file.
struct DataError : Error
{
    explicit DataError(const std::string &what) : Error(ErrorCategory::data, what) {}
};

// NaN/Inf encountered, divergence.
struct NumericError : Error
{
    explicit NumericError(const std::string &what) : Error(ErrorCategory::numeric, what) {}
};

} // namespace hclm
