#pragma once

#include <stdexcept>
#include <string>

namespace reason_iad {

// Base class for every failure raised by the engine. Messages carry the
// failing condition ("degenerate embedding", "empty text", ...) so callers
// can surface them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reason_iad
