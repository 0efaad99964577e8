#pragma once

#include <stdexcept>

namespace wtopo {

// Error taxonomy mirrors the CLI exit codes: io_error -> 1,
// config_error -> 2, invariant_error -> 3.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invariant_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace wtopo
