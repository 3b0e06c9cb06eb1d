#pragma once

#include <cstddef>
#include <functional>

namespace psplat {

/// Runs fn(job) for job in [0, n_jobs). Jobs are claimed dynamically, so
/// each job must write only to its own output slots; reductions over job
/// outputs must happen afterwards in job order to stay deterministic.
void parallel_for(std::size_t n_jobs, int n_threads, const std::function<void(std::size_t)>& fn);

int default_thread_count();

}  // namespace psplat
