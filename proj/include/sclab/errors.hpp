#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sclab {

// Precondition violation (dimension mismatch, bad argument ranges).
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Zero feature vector: the constraint hyperplane is undefined.
struct singular_geometry_error : std::domain_error {
  using std::domain_error::domain_error;
};

// w_t == optimum: the polar frame has no axis.
struct frame_undefined_error : std::domain_error {
  using std::domain_error::domain_error;
};

struct not_implemented_error : std::logic_error {
  using std::logic_error::logic_error;
};

// All four region densities vanish.
struct undefined_statistic_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Evaluation grid leaves the density support.
struct boundary_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed binary input; carries the offset of the first bad byte.
struct format_error : std::runtime_error {
  format_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

}  // namespace sclab
