// SPDX-License-Identifier: Apache-2.0
#include "lead/error.hpp"

namespace lead {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kLength: return "length";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace lead
