// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mgs {

enum class Err {
  ambiguous_base,
  length_mismatch,
  prefix_too_long,
  empty_sample,
  bad_range,
  budget_too_small,
  empty_input,
  inconsistent_levels,
  unsorted_input,
  bad_threshold,
  capacity_exceeded,
  unknown_scenario,
  k_mismatch,
  missing_manifest,
  io,
  parse,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& msg) { throw Error(code, msg); }

}  // namespace mgs
