/* Copyright 2026 The IGBP Authors. All Rights Reserved.
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
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace igbp {

// Root of every exception thrown by the library. The CLI maps the two
// branches below onto exit codes: InputError-derived -> 2, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something unusable: bad shapes, bad files, bad labels.
class InputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class ModeError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateDataError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class HeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

class RowLengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class PayloadLengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// Numerical failure during optimization (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t batch)
      : Error(what + " (batch " + std::to_string(batch) + ")"), batch_(batch) {}
  explicit TrainingError(const std::string& what) : Error(what) {}

  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_ = 0;
};

// Undefined statistic (zero variance and friends).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace igbp
