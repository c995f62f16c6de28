#pragma once

namespace ntklab {

// Build-stamped version string, echoed into every CSV header so result files
// record which code produced them.  The build system injects the current
// short git hash; the fallback keeps non-CMake builds compiling.
#ifdef NTKLAB_VERSION_STRING
inline constexpr const char* kVersion = NTKLAB_VERSION_STRING;
#else
inline constexpr const char* kVersion = "0.1.0+unknown";
#endif

}  // namespace ntklab
