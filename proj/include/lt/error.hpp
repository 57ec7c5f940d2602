#ifndef LT_ERROR_HPP
#define LT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lt {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// The label cannot be aligned to the given number of frames
// (T < U + number of adjacent equal label pairs). Distinct from
// numeric underflow: this is a structural impossibility.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& msg) : Error(msg) {}
  InfeasibleError(const std::string& msg, long item) : Error(msg), item_(item) {}
  // Batch item that failed, or -1 when not batched.
  long item() const { return item_; }

 private:
  long item_ = -1;
};

// A brute-force oracle was asked for an instance beyond its size bound.
class OracleLimitError : public Error {
 public:
  explicit OracleLimitError(const std::string& msg) : Error(msg) {}
};

}  // namespace lt

#endif  // LT_ERROR_HPP
