#pragma once

// Training allocates and frees many multi-megabyte activation buffers per
// step. glibc returns those to the kernel by default, so every step pays
// for fresh page faults. Keeping freed memory in the heap avoids that.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace switchlab {

inline void retain_freed_memory() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, -1);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace switchlab
