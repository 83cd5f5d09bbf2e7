// Execution policy shared by the OpenMP kernels. Every kernel that takes an
// Execution argument has a serial path kept as the reference; the parallel path
// must produce bit-identical results (work is split over independent outputs
// and any reduction runs serially in index order).
#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#include <omp.h>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace spincat {

enum class Execution { serial, parallel };

/// Sets the OpenMP team size used by Execution::parallel kernels.
inline void set_worker_count(int workers) {
    if (workers > 0) {
        omp_set_num_threads(workers);
    }
}

inline int worker_count() { return omp_get_max_threads(); }

/// Flushes subnormal results and operands to zero on the calling thread while
/// alive. Far-tail matrix elements of long integrations decay into the
/// subnormal range, where x86 arithmetic runs about ten times slower. Every
/// kernel thread and every integrator installs it, so all paths round alike.
class FlushDenormals {
public:
    FlushDenormals() {
#if defined(__SSE2__)
        saved_ = _mm_getcsr();
        _mm_setcsr(saved_ | 0x8040u);  // FTZ | DAZ
#endif
    }
    ~FlushDenormals() {
#if defined(__SSE2__)
        _mm_setcsr(saved_);
#endif
    }
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;

private:
    unsigned saved_ = 0;
};

/// Runs body(i) for i in [0, n). Iterations must be independent. In parallel
/// mode an exception escaping body is rethrown after the loop; if several
/// iterations throw, the one with the lowest index wins, as in serial mode.
template <class Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
    const auto count = static_cast<long long>(n);
    if (exec == Execution::parallel) {
        std::exception_ptr error;
        long long error_index = std::numeric_limits<long long>::max();
#pragma omp parallel
        {
            FlushDenormals ftz;
#pragma omp for schedule(dynamic, 1)
            for (long long i = 0; i < count; ++i) {
                try {
                    body(static_cast<std::size_t>(i));
                } catch (...) {
#pragma omp critical(spincat_for_each_index)
                    if (i < error_index) {
                        error_index = i;
                        error = std::current_exception();
                    }
                }
            }
        }
        if (error) {
            std::rethrow_exception(error);
        }
    } else {
        FlushDenormals ftz;
        for (long long i = 0; i < count; ++i) {
            body(static_cast<std::size_t>(i));
        }
    }
}

} // namespace spincat
