// Copyright 2026 The XBusNet Authors
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

namespace xbus {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or inconsistent setup.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse (wrong call order, out-of-range argument).
class UsageError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced by a forward or backward pass.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV row; the message names row and column.
class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row), column_(column)
    { }

    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Unsupported or corrupt image file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Statistical test with no usable observations.
class UndefinedTestError : public Error {
public:
    using Error::Error;
};

} // namespace xbus
