#pragma once

#include <stdexcept>
#include <string>

namespace menn {

/// Raised for malformed or inconsistent caller input: dimension mismatches,
/// parse failures, out-of-range indices, invalid configuration values.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace menn
