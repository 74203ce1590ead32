#include "seasonal_spline/parallel.hpp"

#include <cstdlib>
#include <string>

namespace seasonal_spline {

unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SEASONAL_SPLINE_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        } catch (const std::exception&) {
            // Unparseable values leave the default in place.
        }
    }
    return n;
}

} // namespace seasonal_spline
