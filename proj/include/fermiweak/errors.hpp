// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fermiweak {

/// Invalid grid, parameter set or configuration document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A grid node sits at |p| = 0, where the massless dispersions and the
/// infrared weights 1/|p|^2 are singular.
class InfraredGridError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Mode count or basis size beyond the configured hard cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Spectral window touching the threshold set.
class ThresholdCollisionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Dilation derivative requested for a kernel that has none on this grid.
class NonDifferentiableKernelError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Iterative eigensolver failed to reach the requested residual.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace fermiweak
