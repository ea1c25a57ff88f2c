#pragma once

#include <cstddef>
#include <functional>

namespace mmdyn {

/// 0 means "all hardware threads".
unsigned resolve_threads(unsigned requested) noexcept;

/// Runs fn(0..n-1) on up to `threads` workers. Each index must write only its
/// own output slot. If any call throws, the exception from the lowest failing
/// index is rethrown after all workers finish, so errors do not depend on
/// scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace mmdyn
