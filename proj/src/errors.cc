// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/errors.h"

namespace a2w {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return 1;
    case ErrorKind::kFormat:
    case ErrorKind::kData:
    case ErrorKind::kIo:
    case ErrorKind::kDomain:
    case ErrorKind::kDimension:
      return 2;
    case ErrorKind::kNumeric:
    case ErrorKind::kTraining:
      return 3;
  }
  return 2;
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace a2w
