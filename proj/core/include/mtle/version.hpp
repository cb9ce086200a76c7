#pragma once

#include <cstdint>

namespace mtle {

inline constexpr const char* kEngineVersion = "1.0.0";

// Bumped whenever the checkpoint layout changes incompatibly.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

}  // namespace mtle
