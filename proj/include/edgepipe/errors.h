// Copyright 2026 The edgepipe Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace edgepipe {

// Base for every error the library reports. Callers that only care about
// "user input was bad / no answer exists" catch this; internal invariant
// violations derive from InternalError instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// A profile or plan violated a documented invariant. `invariant` is a short
// machine-friendly tag ("monotonicity", "symmetry", ...).
class ValidationError : public Error {
 public:
  ValidationError(std::string invariant, std::string message,
                  std::optional<std::size_t> device = std::nullopt,
                  std::optional<std::size_t> layer = std::nullopt);

  const std::string& invariant() const { return invariant_; }
  std::optional<std::size_t> device() const { return device_; }
  std::optional<std::size_t> layer() const { return layer_; }

 private:
  std::string invariant_;
  std::optional<std::size_t> device_;
  std::optional<std::size_t> layer_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class DegenerateCapacity : public Error {
 public:
  using Error::Error;
};

class InfeasibleAllocation : public Error {
 public:
  using Error::Error;
};

class NoFeasiblePlan : public Error {
 public:
  using Error::Error;
};

class NoBackupTarget : public Error {
 public:
  using Error::Error;
};

class NoSurvivingDevices : public Error {
 public:
  using Error::Error;
};

// Raised when a cross-check between two independent computations disagrees.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EstimateExceedsSimulation : public InternalError {
 public:
  using InternalError::InternalError;
};

}  // namespace edgepipe
