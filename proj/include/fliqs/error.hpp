/* Copyright 2026 The fliqs Authors. All Rights Reserved.

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

#ifndef FLIQS_ERROR_HPP_
#define FLIQS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace fliqs {

// Every error raised by the library derives from Error. The CLI maps
// ConfigError (and its subclasses) to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& token, const std::string& why)
      : ConfigError("cannot parse '" + token + "': " + why), token_(token) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ManifestError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParamError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int layer) : Error(what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class DegenerateThresholdError : public Error {
 public:
  explicit DegenerateThresholdError(const std::string& layer)
      : Error("degenerate clipping threshold: activations feeding layer '" + layer +
              "' have zero variance"),
        layer_(layer) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace fliqs

#endif  // FLIQS_ERROR_HPP_
