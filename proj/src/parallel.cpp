#include "rsde/parallel.hpp"

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsde {

void for_each_replica(std::size_t count, ExecMode mode,
                      const std::function<void(std::size_t)>& body) {
    if (mode == ExecMode::serial) {
        for (std::size_t r = 0; r < count; ++r) body(r);
        return;
    }
    std::exception_ptr error;
    std::mutex error_lock;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (long long r = 0; r < static_cast<long long>(count); ++r) {
        try {
            body(static_cast<std::size_t>(r));
        } catch (...) {
            std::lock_guard<std::mutex> guard(error_lock);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int count) {
#ifdef _OPENMP
    if (count > 0) omp_set_num_threads(count);
#else
    (void)count;
#endif
}

} // namespace rsde
