#pragma once

namespace mapcover {

inline constexpr const char* kVersion = "0.1.0";

// Bumped when the on-disk CSV/manifest layout changes.
inline constexpr int kManifestFormat = 1;

}  // namespace mapcover
