#pragma once

// Data-parallel kernels. Each has a serial reference path kept for tests and
// the benchmark; the parallel path must produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace oppsched {

enum class Exec { Serial, Parallel };

/// Caps the OpenMP thread count from OPPSCHED_THREADS when set.
void apply_thread_cap_from_env();

int max_threads();

/// Calls fn(i) for i in [0, n) and collects the results in index order.
/// Iterations must be independent; each owns whatever RNG stream it derives
/// from its index.
template <class Fn>
auto map_indexed(std::size_t n, Fn&& fn, Exec exec) {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<R> out(n);
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    return out;
}

/// Transition kernel stored by target state: row y lists (source, probability)
/// pairs for every transition into y.
struct SparseKernel {
    std::size_t size = 0;
    std::vector<std::size_t> offsets;  // size + 1
    std::vector<std::uint32_t> source;
    std::vector<double> prob;
};

/// One step out = in * P. Returns the L1 distance between `in` and `out`.
double power_step_serial(const SparseKernel& kernel, std::span<const double> in, std::span<double> out);
double power_step_parallel(const SparseKernel& kernel, std::span<const double> in, std::span<double> out);

inline double power_step(const SparseKernel& kernel, std::span<const double> in, std::span<double> out, Exec exec) {
    return exec == Exec::Serial ? power_step_serial(kernel, in, out) : power_step_parallel(kernel, in, out);
}

}  // namespace oppsched
