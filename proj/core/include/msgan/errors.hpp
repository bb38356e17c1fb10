// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace msgan {

enum class ErrorKind { Shape, Argument, Bounds, Lookup, Numeric, Integrity, Io, Config };

/// Base of every exception thrown by the library. The kind maps onto the
/// four machine-parseable classes reported by the command line tool.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define MSGAN_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

MSGAN_DEFINE_ERROR(ShapeError, Shape)
MSGAN_DEFINE_ERROR(ArgumentError, Argument)
MSGAN_DEFINE_ERROR(BoundsError, Bounds)
MSGAN_DEFINE_ERROR(LookupError, Lookup)
MSGAN_DEFINE_ERROR(NumericError, Numeric)
MSGAN_DEFINE_ERROR(IntegrityError, Integrity)
MSGAN_DEFINE_ERROR(IoError, Io)
MSGAN_DEFINE_ERROR(ConfigError, Config)

#undef MSGAN_DEFINE_ERROR

/// One of "config", "io", "numeric", "integrity".
const char* error_class(ErrorKind kind) noexcept;

}  // namespace msgan
