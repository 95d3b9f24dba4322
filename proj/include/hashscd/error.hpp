// Copyright 2026 the hashscd authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hashscd {

enum class ErrorCode {
    invalid_input,
    dimension_mismatch,
    bad_magic,
    unsupported_version,
    truncated_payload,
    io,
    conflict,
    not_found,
    undefined_metric,
    invalid_batch,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::unsupported_version: return "unsupported version";
    case ErrorCode::truncated_payload: return "truncated payload";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::undefined_metric: return "undefined metric";
    case ErrorCode::invalid_batch: return "invalid batch";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

    [[nodiscard]] bool is_format_error() const noexcept
    {
        return code_ == ErrorCode::bad_magic || code_ == ErrorCode::unsupported_version ||
               code_ == ErrorCode::truncated_payload;
    }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const char* what)
{
    if (!condition) {
        throw Error(code, what);
    }
}

} // namespace detail
} // namespace hashscd
