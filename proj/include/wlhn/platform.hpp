#pragma once

namespace wlhn {

/// Keeps large tape buffers in the heap instead of fresh mmap regions.
/// Training allocates and frees many multi-megabyte matrices per step;
/// with glibc defaults each one is a page-faulting mmap/munmap pair.
/// No-op on other C libraries.
void tune_allocator();

}  // namespace wlhn
