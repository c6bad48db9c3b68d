#pragma once

#include <stdexcept>
#include <string>

namespace sparseids {

// error categories map 1:1 onto CLI exit codes
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct checkpoint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// stored artifact disagrees with what the caller requires (topology, alpha mode)
struct mismatch_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sparseids
