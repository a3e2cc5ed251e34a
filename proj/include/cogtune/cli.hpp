#pragma once

#include <iosfwd>
#include <memory>

#include "cogtune/gateway.hpp"

namespace cogtune::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

/// Test seams; unset members fall back to real implementations.
struct Hooks {
  std::shared_ptr<Transport> transport;
  ModelGateway::Sleeper sleeper;
};

/// Entry point of the `cogtune` tool. Returns 0 on success, 1 when some items
/// failed but outputs were written, 2 on fatal errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const Hooks& hooks = Hooks{});

}  // namespace cogtune::cli
