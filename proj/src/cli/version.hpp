#pragma once

namespace oppsched::cli {

#ifdef OPPSCHED_VERSION
inline constexpr const char* kVersion = OPPSCHED_VERSION;
#else
inline constexpr const char* kVersion = "dev";
#endif

}  // namespace oppsched::cli
