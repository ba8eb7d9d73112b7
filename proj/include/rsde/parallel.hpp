#pragma once

#include <cstddef>
#include <functional>

namespace rsde {

/// Execution mode of the replica loops. The serial path is the reference
/// implementation the OpenMP kernels are tested against; both must produce
/// bit-identical results because replicas write into disjoint slots and all
/// reductions run afterwards in fixed order.
enum class ExecMode { serial, parallel };

/// Run body(replica) for replica = 0..count-1. Exceptions thrown by the body
/// are captured and rethrown on the calling thread (first one wins).
void for_each_replica(std::size_t count, ExecMode mode,
                      const std::function<void(std::size_t)>& body);

int max_threads();
void set_threads(int count); ///< forwarded to OpenMP; no-op without it

} // namespace rsde
