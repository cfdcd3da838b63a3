#pragma once

#include <functional>

namespace flowdepth {

/// Number of workers used by row-parallel loops: DCPI_THREADS when set to a
/// positive integer, otherwise the hardware concurrency.
int worker_count();

/// Calls fn(row) for every row in [0, rows). Rows are split into contiguous
/// blocks, one per worker; fn must only write state owned by its row.
void parallel_rows(int rows, const std::function<void(int)>& fn);

}  // namespace flowdepth
