#pragma once

namespace rankforge {

/// Routes spdlog's default logger to standard error at the level named by
/// RANKFORGE_LOG (error, warn, info, debug; default warn).
void init_logging();

}  // namespace rankforge
