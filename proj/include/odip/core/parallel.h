#ifndef ODIP_CORE_PARALLEL_H_
#define ODIP_CORE_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace odip {

// Worker count: hardware concurrency, capped by ODIP_THREADS when set.
int WorkerCount();

// Runs fn(i) for i in [0, n). Each index must write only to its own output
// slot; reductions happen afterwards in index order, so results do not depend
// on the worker count.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace odip

#endif  // ODIP_CORE_PARALLEL_H_
