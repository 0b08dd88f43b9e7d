#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace xcnn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension violations.
struct ShapeError : Error {
  using Error::Error;
};
// Malformed files (dataset payloads, checkpoints).
struct FormatError : Error {
  using Error::Error;
};
// Unknown kinds, unsupported layer configurations, bad run configs.
struct ConfigError : Error {
  using Error::Error;
};
// Broken call contracts (non-scalar loss, out-of-range label, ...).
struct ContractError : Error {
  using Error::Error;
};
// Non-finite values detected during training.
struct NumericalError : Error {
  using Error::Error;
};

namespace detail {
inline void msg_append(std::ostringstream&) {}
template <typename A, typename... Rest>
void msg_append(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  msg_append(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string msg(const Args&... args) {
  std::ostringstream os;
  detail::msg_append(os, args...);
  return os.str();
}

}  // namespace xcnn
