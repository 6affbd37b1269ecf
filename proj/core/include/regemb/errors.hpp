#pragma once

#include <stdexcept>
#include <string>

namespace regemb {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible tensor shapes or invalid axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Class label outside [0, n).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Token index outside the vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Corpus with no documents where at least one is required.
class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

/// Document with zero unpadded tokens.
class EmptyDocumentError : public Error {
 public:
  using Error::Error;
};

/// Batch-norm over a channel with zero elements.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint/cache file with bad magic or truncated contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint/cache file written by an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Stored tensor shapes disagree with the embedded model spec.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace regemb
