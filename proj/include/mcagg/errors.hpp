#pragma once

#include <stdexcept>
#include <string>

namespace mcagg {

enum class errc {
  non_square,
  negative_entry,
  row_sum_violation,
  no_convergence,
  epsilon_too_large,
  length_mismatch,
  invalid_distribution,
  empty_group,
  dimension_mismatch,
  infinite_divergence,
  numeric_underflow,
  group_cap_reached,
  empty_hierarchy,
  parse_error,
};

// Single exception type carrying a machine-checkable code plus optional
// index/value context (row, column, offending sum, ...).
class error : public std::runtime_error {
public:
  error(errc code, std::string what, long i = -1, long j = -1,
        double value = 0.0)
      : std::runtime_error(std::move(what)), code_(code), i_(i), j_(j),
        value_(value) {}

  errc code() const noexcept { return code_; }
  long index_i() const noexcept { return i_; }
  long index_j() const noexcept { return j_; }
  double value() const noexcept { return value_; }

private:
  errc code_;
  long i_;
  long j_;
  double value_;
};

} // namespace mcagg
