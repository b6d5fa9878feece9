#pragma once

#include <vector>

#include "vstar/rng.hpp"
#include "vstar/video.hpp"

namespace vstar {

/// Standard DDPM forward-process schedule: strictly increasing betas in
/// (0,1), cumulative alpha products decreasing in (0,1].
struct DiffusionSchedule {
    int steps = 0;  // T
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    static DiffusionSchedule linear(int t_steps = 1000, double beta_lo = 1e-4,
                                    double beta_hi = 0.02);
};

/// q(x_t | x_0): x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
ToyLatentVideo add_noise(const ToyLatentVideo& clean, int t, const DiffusionSchedule& schedule,
                         SeededRng& rng);

}  // namespace vstar
