#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace muonlab {

/// Worker count: explicit request if given, else MUONLAB_THREADS, else the
/// hardware concurrency. Always at least 1.
int resolve_thread_count(std::optional<int> requested = std::nullopt);

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Work is handed
/// out by index, so callers that write result i into slot i get output that
/// does not depend on scheduling. If any call throws, the exception from the
/// lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

} // namespace muonlab
