// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#ifndef A2W_ERRORS_H_
#define A2W_ERRORS_H_

#include <stdexcept>
#include <string>

namespace a2w {

enum class ErrorKind {
  kDimension,  // shape mismatch between operands
  kNumeric,    // NaN/Inf, failed numeric search, zero-norm vector
  kConfig,     // invalid configuration value or unknown key
  kFormat,     // bad magic, version, truncation in a binary/text file
  kDomain,     // argument outside the function's domain
  kData,       // inconsistent data (missing reference, bad alignment)
  kIo,         // filesystem failure
  kTraining,   // divergence during optimization
  kUsage,      // bad command-line usage
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 1 usage/config, 2 data/format/io,
// 3 numeric/training.
int exit_code_for(ErrorKind kind);

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace a2w

#endif  // A2W_ERRORS_H_
