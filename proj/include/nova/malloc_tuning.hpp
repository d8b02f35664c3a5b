#pragma once

// Keeps per-step Eigen buffers on the heap instead of fresh mmap/munmap pairs.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace nova {

inline void tune_malloc() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

}  // namespace nova
