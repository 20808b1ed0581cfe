#pragma once

#include <cstddef>
#include <functional>

namespace battctl {

/// Caps the number of worker threads used by the solvers and experiments.
/// Results never depend on this value.
void set_worker_threads(unsigned n);
unsigned worker_threads();

/// Runs body(i) for i in [0, n), split into contiguous chunks across workers.
/// Each index must write only its own outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace battctl
