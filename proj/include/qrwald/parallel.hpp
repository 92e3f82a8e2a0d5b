#pragma once

#include <cstddef>
#include <functional>

namespace qrwald {

// Global cap on worker threads; 0 restores the hardware default.
// The QRWALD_THREADS environment variable is applied by the CLI.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(0..count-1), possibly on several threads. Nested calls run
// serially, so outer loops own the parallelism. Each index is executed
// exactly once; callers that write to index-addressed slots get results
// independent of the schedule.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace qrwald
