#pragma once

namespace slq {

/// Thread count for the parallel kernels: SLQ_THREADS when set to a positive
/// integer (capped by the OpenMP default), the OpenMP default otherwise.
int configured_threads();

/// Applies configured_threads() to the OpenMP runtime.
void apply_thread_limit();

}  // namespace slq
