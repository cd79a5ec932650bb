#include "swpdmod/parallel.hpp"

#include <Eigen/Core>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swpdmod {

namespace {
struct EigenThreadGuard {
  EigenThreadGuard() { Eigen::setNbThreads(1); }
};
const EigenThreadGuard eigen_guard;
}  // namespace

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) {
  if (n <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    n = hw ? static_cast<int>(hw) : 1;
  }
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
  Eigen::setNbThreads(1);
}

}  // namespace swpdmod
