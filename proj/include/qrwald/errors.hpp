#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace qrwald {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error {
  using Error::Error;
};
struct SingularMatrix : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  using Error::Error;
};
struct SingularG : Error {
  using Error::Error;
};
struct SingularW : Error {
  using Error::Error;
};
struct DegenerateSparsity : Error {
  using Error::Error;
};
struct UnknownColumn : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct EmptyGrid : Error {
  using Error::Error;
};
struct IOError : Error {
  using Error::Error;
};

// printf-style message builder for error strings and report lines.
inline std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

}  // namespace qrwald
