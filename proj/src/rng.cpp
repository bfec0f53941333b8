#include "qsense/rng.hpp"

#include <cmath>

namespace qsense {

double RngStream::exponential(double rate) {
    if (rate <= 0.0) {
        throw NonPositiveRate("exponential sample requires rate > 0, got " +
                              std::to_string(rate));
    }
    double u = uniform();
    return -std::log1p(-u) / rate;
}

} // namespace qsense
