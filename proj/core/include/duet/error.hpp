#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace duet {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining failure classes.

/// Malformed or inconsistent file contents. `offset` is the byte position at
/// which decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A component received inputs that violate its calling contract (for
/// example a denoiser returning the wrong shape).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN/Inf or an ill-conditioned numerical state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace duet
