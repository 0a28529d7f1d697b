#pragma once

namespace dpost {

// Keeps freed activation buffers in the heap instead of returning them to the
// OS after every forward pass. Call once at program start.
void tune_allocator();

}  // namespace dpost
