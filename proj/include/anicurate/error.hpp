#pragma once

#include <stdexcept>
#include <string>

namespace anicurate {

// Root of every error thrown by the library. `kind()` is the stable,
// machine-readable class name used in the CLI's JSON error output.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse_error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape_error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

// Transport-level provider failure (timeout, peer exited, connection reset).
// The request may succeed when retried on a fresh connection.
class TransportError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "transport_error"; }
};

// The peer violated the wire protocol (malformed JSON, id mismatch, schema).
// Never retried.
class ProtocolError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "protocol_error"; }
};

// The provider answered {"ok": false, "error": ...}.
class ProviderError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "provider_error"; }
};

}  // namespace anicurate
