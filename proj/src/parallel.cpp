#include "parest/parallel.hpp"

#include <algorithm>

namespace parest {

void set_num_threads(int n) { omp_set_num_threads(std::max(1, n)); }

int num_threads() { return omp_get_max_threads(); }

}  // namespace parest
