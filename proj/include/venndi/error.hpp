#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace venndi {

// Root of the library's exception hierarchy. Everything thrown on purpose
// derives from this so callers can catch venndi::Error at the boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed textual input (set notation, JSONL lines, structured model
// output). Carries the position most useful for the given format: a byte
// offset for notation strings, a line number for line-oriented input.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : Error(msg), position_(position) {}
  explicit ParseError(const std::string& msg) : Error(msg), position_(0) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Structurally valid input that violates a semantic rule. Lists the
// offending items (labels, fields) so messages stay actionable.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& msg, std::vector<std::string> offenders)
      : Error(msg), offenders_(std::move(offenders)) {}
  explicit ValidationError(const std::string& msg) : Error(msg) {}
  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

// A document label that is not part of the universe in play.
class UnknownLabelError : public Error {
 public:
  UnknownLabelError(const std::string& msg, std::string label)
      : Error(msg), label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

// A caller broke an API precondition (empty input, bad range, wrong rubric).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Exhaustive truth-table machinery refuses universes past its hard bound.
class LimitError : public Error {
 public:
  using Error::Error;
};

// Strict replay was asked for a request that was never recorded.
class CacheMissError : public Error {
 public:
  CacheMissError(const std::string& msg, std::string key)
      : Error(msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Network / endpoint failure, including malformed wire responses.
class TransportError : public Error {
 public:
  using Error::Error;
};

// HTTP 429 and friends; the client retries these with backoff.
class RateLimitError : public TransportError {
 public:
  using TransportError::TransportError;
};

// HTTP 5xx; also retried, since these are usually transient.
class ServerError : public TransportError {
 public:
  using TransportError::TransportError;
};

// Free-form model output that could not be coerced into the expected
// structure even after a repair attempt. Keeps the raw text for forensics.
class UnparseableResponseError : public Error {
 public:
  UnparseableResponseError(const std::string& msg, std::string raw_text)
      : Error(msg), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

}  // namespace venndi
