// Copyright (C) 2026 The fusionsearch Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace fusion {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

// Malformed arguments that are not covered by a more specific error.
class ValidationError : public Error {
 public:
    using Error::Error;
};

// Vector norm at or below the zero threshold (for fusion: the weighted inputs cancel).
class ZeroNormError : public Error {
 public:
    using Error::Error;
};

class EmptyQueryError : public Error {
 public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
    using Error::Error;
};

class DuplicateRecordError : public Error {
 public:
    using Error::Error;
};

class UnknownCollectionError : public Error {
 public:
    using Error::Error;
};

// Catalog errors.
class NormalizationError : public Error {
 public:
    using Error::Error;
};

class IoError : public Error {
 public:
    using Error::Error;
};

class FormatVersionError : public Error {
 public:
    using Error::Error;
};

class CorruptFileError : public Error {
 public:
    using Error::Error;
};

// Encoder errors.
class EncoderUnavailableError : public Error {
 public:
    using Error::Error;
};

class EncoderProtocolError : public Error {
 public:
    using Error::Error;
};

class InputTooLargeError : public Error {
 public:
    using Error::Error;
};

/// Raised by batch encoding: wraps the first failure together with the position of the
/// offending input. `rethrow_cause()` rethrows the original typed error.
class BatchEncodeError : public Error {
 public:
    BatchEncodeError(std::size_t index, std::exception_ptr cause, const std::string& what)
        : Error("input " + std::to_string(index) + ": " + what), index_(index), cause_(std::move(cause)) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }
    [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

 private:
    std::size_t index_;
    std::exception_ptr cause_;
};

}  // namespace fusion
