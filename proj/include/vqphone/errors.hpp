// Copyright 2026 The vqphone Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vqphone {

// Base for every error the library raises. Callers that only care about
// "input was bad" vs "something broke" can catch this and InternalError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A tensor or matrix argument had the wrong extent along `axis`.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& op, int axis, long expected, long actual)
      : Error(op + ": dimension mismatch on axis " + std::to_string(axis) +
              " (expected " + std::to_string(expected) + ", got " +
              std::to_string(actual) + ")"),
        axis_(axis) {}
  DimensionError(const std::string& op, const std::string& what)
      : Error(op + ": " + what), axis_(-1) {}

  int axis() const { return axis_; }

 private:
  int axis_;
};

// Malformed or incompatible on-disk data (features, checkpoints, configs).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Configuration problems: unknown keys, invalid values, mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace vqphone
