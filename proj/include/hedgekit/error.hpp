/*
 * Copyright 2026 The hedgekit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace hedgekit {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A span or partition does not satisfy its structural invariants.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive routine was asked to enumerate more than its configured limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, model file, or dataset.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The predictor backend could not be reached or died mid-request.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int retries)
      : Error(what + " (after " + std::to_string(retries) + " retries)"), retries_(retries) {}

  int retries() const noexcept { return retries_; }

 private:
  int retries_;
};

/// The backend answered, but not in the wire format.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The backend answered with a probability vector that violates the Prediction contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace hedgekit
