#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace snrforge {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or parameter outside its domain (negative scale, t > 1, n = 0, ...).
class domain_error : public error {
public:
  using error::error;
};

/// Malformed JSON spec/config (unknown family, missing or unknown field).
class parse_error : public domain_error {
public:
  using domain_error::domain_error;
};

/// A weight or effective coefficient whose denominator density underflowed.
class degenerate_weight_error : public error {
public:
  using error::error;
};

/// sigma (or alpha) too small to invert a prediction into an epsilon estimate.
class degenerate_conversion_error : public error {
public:
  using error::error;
};

/// Non-finite loss or state during training or sampling.
class divergence_error : public error {
public:
  divergence_error(const std::string &what, std::int64_t step)
      : error(what + " at step " + std::to_string(step)), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

private:
  std::int64_t step_;
};

} // namespace snrforge
