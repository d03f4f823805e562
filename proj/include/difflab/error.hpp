#pragma once

#include <stdexcept>
#include <string>

namespace difflab {

/// Failure category; the CLI maps these onto its exit codes.
enum class ErrorKind {
  kInvalid,          // bad input, failed precondition, malformed file
  kMissingArtifact,  // an upstream file or stage output is absent
  kRuntime,          // numerical failure during a computation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::kInvalid, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace difflab
