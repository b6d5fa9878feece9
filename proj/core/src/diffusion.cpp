#include "vstar/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace vstar {

DiffusionSchedule DiffusionSchedule::linear(int t_steps, double beta_lo, double beta_hi) {
    if (t_steps < 1) throw std::invalid_argument("DiffusionSchedule: need T >= 1");
    if (!(beta_lo > 0.0) || !(beta_hi < 1.0) || !(beta_lo < beta_hi))
        throw std::invalid_argument("DiffusionSchedule: need 0 < beta_lo < beta_hi < 1");
    DiffusionSchedule s;
    s.steps = t_steps;
    s.betas.resize(t_steps);
    s.alphas.resize(t_steps);
    s.alpha_bars.resize(t_steps);
    double abar = 1.0;
    for (int t = 0; t < t_steps; ++t) {
        double beta = t_steps == 1 ? beta_lo
                                   : beta_lo + (beta_hi - beta_lo) * static_cast<double>(t) /
                                                   static_cast<double>(t_steps - 1);
        s.betas[t] = beta;
        s.alphas[t] = 1.0 - beta;
        abar *= s.alphas[t];
        s.alpha_bars[t] = abar;
    }
    return s;
}

ToyLatentVideo add_noise(const ToyLatentVideo& clean, int t, const DiffusionSchedule& schedule,
                         SeededRng& rng) {
    if (t < 0 || t >= schedule.steps) throw std::invalid_argument("add_noise: t out of range");
    const double abar = schedule.alpha_bars[static_cast<std::size_t>(t)];
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    Tensor out = clean.data;
    for (double& x : out.values()) x = signal * x + noise * rng.next_normal();
    return ToyLatentVideo(std::move(out));
}

}  // namespace vstar
