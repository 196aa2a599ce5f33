#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace neuroflag {

/// Keeps large activation buffers on the heap instead of fresh mmap regions,
/// which otherwise page-fault on every training step.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace neuroflag
