#pragma once

namespace swpdmod {

// Effective worker count for the OpenMP kernels.
int worker_count();

// n >= 1 pins the pool size; n <= 0 restores the hardware default.
// Eigen's internal threading stays disabled either way: the loops in this
// library own all parallelism, and nesting the two oversubscribes.
void set_worker_count(int n);

}  // namespace swpdmod
