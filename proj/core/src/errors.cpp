// SPDX-License-Identifier: Apache-2.0
#include "msgan/errors.hpp"

namespace msgan {

const char* error_class(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Numeric:
      return "numeric";
    case ErrorKind::Integrity:
      return "integrity";
    case ErrorKind::Io:
      return "io";
    case ErrorKind::Shape:
    case ErrorKind::Argument:
    case ErrorKind::Bounds:
    case ErrorKind::Lookup:
    case ErrorKind::Config:
      break;
  }
  return "config";
}

}  // namespace msgan
