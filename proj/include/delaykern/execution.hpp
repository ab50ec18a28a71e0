#pragma once

#include <cstddef>
#include <cstdint>

namespace delaykern {

/// Selects between the OpenMP kernel and its serial reference. Both paths run
/// the same loop body in the same per-index order of writes, so results are
/// bit-identical; the serial path exists for testing and benchmarking.
enum class Execution { serial, parallel };

namespace detail {

// Body must not throw: exceptions cannot cross an OpenMP region.
template <class Body>
void for_each_index(Execution exec, std::size_t n, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
  const bool par = exec == Execution::parallel;
#pragma omp parallel for schedule(dynamic) if (par)
  for (std::int64_t i = 0; i < count; ++i) {
    body(static_cast<std::size_t>(i));
  }
}

}  // namespace detail
}  // namespace delaykern
