#pragma once

#include <functional>

namespace dfn {

/// Process-wide worker cap for the element-parallel loops (Step-2 recovery).
/// Results are bit-identical for any setting: workers write disjoint slots
/// and there are no cross-thread reductions.
void set_max_threads(int n);
int max_threads();

/// Chunked parallel loop over [0, n); f(i) must touch disjoint state per i.
void parallel_for(long n, const std::function<void(long)>& f);

} // namespace dfn
