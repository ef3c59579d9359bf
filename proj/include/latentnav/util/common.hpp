#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace latentnav {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw Error(cat(args...));
}

}  // namespace latentnav

#define LN_CHECK(cond, ...)                                               \
  do {                                                                    \
    if (!(cond)) ::latentnav::fail("check failed (", #cond, "): ", __VA_ARGS__); \
  } while (0)
