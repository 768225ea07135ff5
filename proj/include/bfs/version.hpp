#pragma once

namespace bfs {

inline constexpr const char* kVersion = "0.1.0";

} // namespace bfs
