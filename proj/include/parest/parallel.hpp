#pragma once

#include <omp.h>

namespace parest {

/// Kernels come in two flavours: a plain loop kept as the reference, and an
/// OpenMP loop. Every kernel writes to a per-index slot and reduces serially
/// afterwards, so both produce bitwise-identical results for any thread count.
enum class Execution { serial, parallel };

void set_num_threads(int n);
int num_threads();

template <class F>
void for_each_index(int n, Execution exec, F&& f) {
  if (exec == Execution::serial) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) f(i);
}

}  // namespace parest
