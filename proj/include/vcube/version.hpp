#pragma once

namespace vcube {

// Participates in every cache key: bumping it invalidates all cached tiles,
// which is the intended effect of a kernel or planner change.
inline constexpr const char* kEngineVersion = "vcube-0.1.0";

}  // namespace vcube
