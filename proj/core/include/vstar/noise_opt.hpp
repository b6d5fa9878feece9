#pragma once

#include <vector>

#include "vstar/attention.hpp"
#include "vstar/denoiser.hpp"
#include "vstar/tensor.hpp"

namespace vstar {

/// Initial-noise distribution over the frame axis: mean mu (scalar broadcast),
/// diagonal beta, off-diagonal decay gamma^|i-j|.
struct NoiseDistributionParams {
    double mu = 0.0;
    double beta = 1.0;
    double gamma = 0.0;
};

struct OptConfig {
    double lambda = 1.0;          // KL weight
    int steps = 30;
    double step_size = 0.05;
    std::vector<int> t_ref;       // reference timesteps; empty = schedule default
    int level = 0;                // attention level to match; 0 = model top level
    int sample_steps = 4;         // DDIM steps per loss evaluation
    std::size_t n_frames = 8;
    double fd_step = 1e-3;        // central-difference step for the attention term
};

/// Sigma[i][j] = beta if i == j else gamma^|i-j| (symmetric Toeplitz).
Matrix build_covariance(double beta, double gamma, std::size_t n);

/// KL(N(mu, sigma) || N(0, I)) = (tr(sigma) + mu^T mu - N - log det sigma)/2.
double kl_to_standard(const std::vector<double>& mu, const Matrix& sigma);

/// Analytic gradient of kl_to_standard((mu,...,mu), Sigma(beta,gamma)) with
/// respect to (mu, beta, gamma).
std::vector<double> kl_gradient(double mu, double beta, double gamma, std::size_t n);

double kl_to_standard_params(const NoiseDistributionParams& p, std::size_t n);

/// Frobenius norm of the map difference; 0 iff equal.
double attention_match_loss(const TemporalAttentionMap& a_ref, const TemporalAttentionMap& a);

struct NoiseOptTraceRow {
    int step = 0;
    double l_attn = 0.0;
    double l_kl = 0.0;
    double l_joint = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double mu = 0.0;
};

struct NoiseOptResult {
    NoiseDistributionParams params;
    std::vector<NoiseOptTraceRow> trace;
    bool improved = false;
};

struct NoiseOptProblem {
    const ToyDenoiser* model = nullptr;
    std::vector<Matrix> reference_maps;    // aligned with t_ref
    Matrix cond;                           // N x D conditioning for synthesis
    OptConfig config;
    std::uint64_t seed = 0;

    /// Joint loss at the given params; white noise is fixed per seed.
    double joint_loss(const NoiseDistributionParams& p, double* l_attn = nullptr,
                      double* l_kl = nullptr) const;
    double attention_loss(const NoiseDistributionParams& p) const;
    std::vector<double> joint_gradient(const NoiseDistributionParams& p) const;

    /// Correlated initial noise mu + L eps along the frame axis.
    Tensor make_initial_noise(const NoiseDistributionParams& p) const;

    std::vector<int> resolved_t_ref() const;
    int resolved_level() const;
};

/// Gradient descent over (mu, beta, gamma) on L_attn + lambda * L_KL.
/// Gamma is clamped to (-0.99, 0.99) and beta to [0.1, 10]; a step that
/// breaks positive definiteness is rejected and the step size halved.
/// Returns the best parameters seen (the initialization if nothing improved).
NoiseOptResult optimize_initial_noise(const NoiseOptProblem& problem,
                                      const NoiseDistributionParams& init = {});

}  // namespace vstar
