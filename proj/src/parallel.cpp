#include "slq/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace slq {

int configured_threads() {
  const int available = omp_get_max_threads();
  const char* env = std::getenv("SLQ_THREADS");
  if (!env) return available;
  try {
    const int cap = std::stoi(env);
    if (cap > 0) return std::min(cap, std::max(available, 1));
  } catch (const std::exception&) {
  }
  return available;
}

void apply_thread_limit() { omp_set_num_threads(configured_threads()); }

}  // namespace slq
