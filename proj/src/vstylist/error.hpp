#pragma once

#include <stdexcept>
#include <string>

namespace vstylist {

enum class ErrorKind {
  Invalid,     // precondition or invariant violated by the caller's input
  Io,          // filesystem problem
  Parse,       // malformed document (JSON, TOML, PNG)
  Transport,   // backend unreachable, timeout or non-2xx after retries
  Protocol,    // backend answered but broke the wire contract
  Checksum,    // checkpoint artifact does not match its recorded digest
  SearchFailed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace vstylist
