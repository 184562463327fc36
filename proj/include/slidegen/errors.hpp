#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slidegen {

// Exit codes reported by the CLI, one per error family.
enum class ErrorCode : int {
  other = 1,
  parse = 2,
  validation = 3,
  gateway = 4,
  schema = 5,
};

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what, ErrorCode code = ErrorCode::other)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Malformed input file or response body; the message names the offending path/field.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(what, ErrorCode::parse) {}
};

/// Structurally well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(what, ErrorCode::validation) {}
};

class DimensionMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class ZeroVector : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DegenerateBox : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class UnknownTarget : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Generated layout kept failing hard invariants after the repair reprompt.
class LayoutValidationError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class GatewayError : public Error {
public:
  explicit GatewayError(const std::string& what) : Error(what, ErrorCode::gateway) {}
};

class TransportError : public GatewayError {
public:
  TransportError(const std::string& what, bool retryable)
      : GatewayError(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

private:
  bool retryable_;
};

/// Embedding provider failure; carries whether a retry could help.
class ProviderError : public GatewayError {
public:
  ProviderError(const std::string& what, bool retryable)
      : GatewayError(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

private:
  bool retryable_;
};

/// Reply violated its schema even after one repair reprompt. Keeps the raw
/// replies so callers can log what the model actually said.
class SchemaError : public Error {
public:
  explicit SchemaError(const std::string& what, std::vector<std::string> raw_replies = {})
      : Error(what, ErrorCode::schema), raw_replies_(std::move(raw_replies)) {}
  const std::vector<std::string>& raw_replies() const noexcept { return raw_replies_; }

private:
  std::vector<std::string> raw_replies_;
};

class AssetError : public Error {
public:
  using Error::Error;
};

class RasterBackendUnavailable : public Error {
public:
  using Error::Error;
};

}  // namespace slidegen
