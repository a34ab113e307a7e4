#pragma once

#define LOTUS_VERSION "0.1.0"

namespace lotus {

inline const char* version() { return LOTUS_VERSION; }

}  // namespace lotus
