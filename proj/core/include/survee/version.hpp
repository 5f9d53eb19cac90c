#pragma once

#define SURVEE_VERSION_MAJOR 0
#define SURVEE_VERSION_MINOR 1
#define SURVEE_VERSION_PATCH 0
#define SURVEE_VERSION "0.1.0"

namespace survee {

inline const char* version() { return SURVEE_VERSION; }

}  // namespace survee
