#include "oppsched/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace oppsched {

void apply_thread_cap_from_env() {
    const char* env = std::getenv("OPPSCHED_THREADS");
    if (env == nullptr) return;
    try {
        const int n = std::stoi(env);
#ifdef _OPENMP
        if (n > 0) omp_set_num_threads(n);
#else
        (void)n;
#endif
    } catch (const std::exception&) {
        // Ignore malformed values and keep the runtime default.
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

double power_step_serial(const SparseKernel& kernel, std::span<const double> in, std::span<double> out) {
    double diff = 0.0;
    for (std::size_t y = 0; y < kernel.size; ++y) {
        double acc = 0.0;
        for (std::size_t e = kernel.offsets[y]; e < kernel.offsets[y + 1]; ++e)
            acc += in[kernel.source[e]] * kernel.prob[e];
        out[y] = acc;
        diff += std::abs(acc - in[y]);
    }
    return diff;
}

double power_step_parallel(const SparseKernel& kernel, std::span<const double> in, std::span<double> out) {
    const auto n = static_cast<std::int64_t>(kernel.size);
    // Per-row sums are formed in the same order as the serial path, so `out`
    // matches bit for bit; only the diff reduction order differs.
    double diff = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : diff)
    for (std::int64_t yi = 0; yi < n; ++yi) {
        const auto y = static_cast<std::size_t>(yi);
        double acc = 0.0;
        for (std::size_t e = kernel.offsets[y]; e < kernel.offsets[y + 1]; ++e)
            acc += in[kernel.source[e]] * kernel.prob[e];
        out[y] = acc;
        diff += std::abs(acc - in[y]);
    }
    return diff;
}

}  // namespace oppsched
