#pragma once

#include <cstddef>
#include <functional>

namespace drowsy {

// Runs fn(i) for every i in [0, n) on up to `jobs` worker threads
// (0 = hardware concurrency). Blocks until all tasks finish; the first
// exception thrown by any task is rethrown on the calling thread. Tasks must
// not depend on execution order.
void parallel_for_tasks(std::size_t n, int jobs,
                        const std::function<void(std::size_t)>& fn);

}  // namespace drowsy
