#include "vstar/rng.hpp"

#include <cmath>
#include <numbers>

namespace vstar {

double SeededRng::next_normal() {
    // 1-u1 keeps the log argument in (0, 1]; the sine branch is discarded so
    // every normal costs exactly two counter increments.
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

void SeededRng::fill_uniform(Tensor& t, double lo, double hi) {
    for (double& x : t.values()) x = lo + (hi - lo) * next_uniform();
}

void SeededRng::fill_normal(Tensor& t) {
    for (double& x : t.values()) x = next_normal();
}

void SeededRng::fill_normal(Matrix& m) {
    for (double& x : m.values()) x = next_normal();
}

}  // namespace vstar
