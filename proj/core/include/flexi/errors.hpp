// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flexi {

/// Base of every error the engine throws. Callers that only need a
/// diagnostic can catch this; the subclasses exist so tests and the CLI
/// can tell failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPartitionError : public Error { using Error::Error; };
class UnsupportedModeError : public Error { using Error::Error; };
class InvalidGenomeError : public Error { using Error::Error; };
class InvalidSpaceError : public Error { using Error::Error; };

class ProfileMissError : public Error { using Error::Error; };
class InfeasibleProfileError : public Error { using Error::Error; };
class InvalidProfileError : public Error { using Error::Error; };

class InsufficientSamplesError : public Error { using Error::Error; };
class DimensionMismatchError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class PairedGenerationError : public Error { using Error::Error; };
class UndefinedTauError : public Error { using Error::Error; };

class CacheMissError : public Error { using Error::Error; };
class InvalidConfigError : public Error { using Error::Error; };

class BackendError : public Error { using Error::Error; };
class InfeasibleBudgetError : public Error { using Error::Error; };

class ChecksumError : public Error { using Error::Error; };
class FormatVersionError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace flexi
