#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefsteer {

/// Base of every error raised by the library. Catch this to handle all of them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// core_model
class SimplexViolation : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class EmptySupport : public Error { using Error::Error; };
class InvalidArgument : public Error { using Error::Error; };

// lm_backend / reward
class BackendUnavailable : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class BatchEmpty : public Error { using Error::Error; };
class ScorerUnavailable : public Error { using Error::Error; };

// decoder
class VocabMismatch : public Error { using Error::Error; };

// prompt_forge
class OddCapacity : public Error { using Error::Error; };
class AugmentationFailed : public Error { using Error::Error; };
class InductionFailed : public Error { using Error::Error; };
class DegeneratePool : public Error { using Error::Error; };
class InsufficientQueries : public Error { using Error::Error; };

// eval
class DegenerateSample : public Error { using Error::Error; };

// cli
class ConfigError : public Error { using Error::Error; };

/// Rethrows the in-flight exception with the same type and a message prefixed by
/// `"<what> <index>: "`. Must be called from inside a catch block.
[[noreturn]] void rethrow_with_index(const char* what, std::size_t index);

}  // namespace prefsteer
