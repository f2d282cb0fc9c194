#pragma once

namespace gaitwave {

/// Tunes glibc malloc so large tensor buffers are recycled from the heap
/// instead of being mapped and unmapped on every training step. No-op on
/// other allocators. Call once at startup, before heavy allocation.
void keep_heap_mapped();

}  // namespace gaitwave
