#include "vstar/noise_opt.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vstar/linalg.hpp"
#include "vstar/rng.hpp"

namespace vstar {

Matrix build_covariance(double beta, double gamma, std::size_t n) {
    if (n == 0) throw std::invalid_argument("build_covariance: n must be >= 1");
    Matrix sigma(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sigma.at(i, j) = (i == j) ? beta : std::pow(gamma, static_cast<double>(i > j ? i - j : j - i));
    return sigma;
}

double kl_to_standard(const std::vector<double>& mu, const Matrix& sigma) {
    const std::size_t n = sigma.rows();
    if (mu.size() != n) throw std::invalid_argument("kl_to_standard: mu size mismatch");
    auto l = cholesky_factor(sigma);
    if (!l) throw std::invalid_argument("kl_to_standard: sigma is not positive definite");
    double mu2 = 0.0;
    for (double m : mu) mu2 += m * m;
    return 0.5 * (trace(sigma) + mu2 - static_cast<double>(n) - log_det_spd(*l));
}

double kl_to_standard_params(const NoiseDistributionParams& p, std::size_t n) {
    return kl_to_standard(std::vector<double>(n, p.mu), build_covariance(p.beta, p.gamma, n));
}

std::vector<double> kl_gradient(double mu, double beta, double gamma, std::size_t n) {
    Matrix sigma = build_covariance(beta, gamma, n);
    auto lopt = cholesky_factor(sigma);
    if (!lopt) throw std::invalid_argument("kl_gradient: sigma is not positive definite");
    const Matrix& l = *lopt;

    // Sigma^-1 column by column via the Cholesky factor.
    Matrix inv(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        std::vector<double> e(n, 0.0);
        e[col] = 1.0;
        auto y = solve_lower(l, e);
        // back substitution with L^T
        std::vector<double> x(n, 0.0);
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k2 = ii + 1; k2 < n; ++k2) s -= l.at(k2, ii) * x[k2];
            x[ii] = s / l.at(ii, ii);
        }
        for (std::size_t r = 0; r < n; ++r) inv.at(r, col) = x[r];
    }

    // dSigma/dgamma: |i-j| * gamma^(|i-j|-1) off the diagonal.
    Matrix dgam(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double k = static_cast<double>(i > j ? i - j : j - i);
            dgam.at(i, j) = k * (k == 1.0 ? 1.0 : std::pow(gamma, k - 1.0));
        }

    // KL = (tr Sigma + N mu^2 - N - log det Sigma)/2
    // d/dmu = N mu; d/dtheta = (tr dSigma - tr(Sigma^-1 dSigma))/2
    const double nd = static_cast<double>(n);
    double tr_inv = trace(inv);
    double tr_inv_dgam = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) tr_inv_dgam += inv.at(i, j) * dgam.at(j, i);
    return {nd * mu, 0.5 * (nd - tr_inv), 0.5 * (0.0 - tr_inv_dgam)};
}

double attention_match_loss(const TemporalAttentionMap& a_ref, const TemporalAttentionMap& a) {
    if (a_ref.values.rows() != a.values.rows() || a_ref.values.cols() != a.values.cols())
        throw std::invalid_argument("attention_match_loss: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.numel(); ++i) {
        const double d = a_ref.values.data()[i] - a.values.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<int> NoiseOptProblem::resolved_t_ref() const {
    if (!config.t_ref.empty()) return config.t_ref;
    return default_extraction_timesteps(model->schedule());
}

int NoiseOptProblem::resolved_level() const {
    return config.level > 0 ? config.level : model->config().top_level();
}

Tensor NoiseOptProblem::make_initial_noise(const NoiseDistributionParams& p) const {
    const auto& cfg = model->config();
    const std::size_t n = config.n_frames;
    const std::size_t fsz = cfg.in_channels * cfg.height * cfg.width;

    Matrix sigma = build_covariance(p.beta, p.gamma, n);
    auto l = cholesky_factor(sigma);
    if (!l) throw std::runtime_error("make_initial_noise: covariance not positive definite");

    Tensor white({n, fsz});
    SeededRng rng(seed);
    rng.fill_normal(white);

    Tensor out({n, cfg.in_channels, cfg.height, cfg.width});
    for (std::size_t f = 0; f < n; ++f)
        for (std::size_t e = 0; e < fsz; ++e) {
            double acc = p.mu;
            for (std::size_t g = 0; g <= f; ++g) acc += l->at(f, g) * white.at2(g, e);
            out.data()[f * fsz + e] = acc;
        }
    return out;
}

double NoiseOptProblem::attention_loss(const NoiseDistributionParams& p) const {
    const auto t_ref = resolved_t_ref();
    const int level = resolved_level();

    SampleOptions opts;
    opts.n_frames = config.n_frames;
    opts.steps = config.sample_steps;
    opts.capture = true;
    opts.initial_noise = make_initial_noise(p);

    FrameConditioningSchedule sched;
    sched.embeddings = cond;
    auto res = sample(*model, sched, opts);

    // Trajectory timesteps nearest to each reference timestep.
    std::vector<int> traj;
    for (const auto& [key, _] : res.attention)
        if (key.first == level) traj.push_back(key.second);
    if (traj.empty()) throw std::runtime_error("attention_loss: no captured maps at level");

    double total = 0.0;
    for (std::size_t r = 0; r < t_ref.size(); ++r) {
        int best = traj[0];
        for (int t : traj)
            if (std::abs(t - t_ref[r]) < std::abs(best - t_ref[r])) best = t;
        const Matrix& a = res.attention.at({level, best});
        TemporalAttentionMap am{level, -1, best, a};
        TemporalAttentionMap rm{level, -1, t_ref[r], reference_maps[r]};
        total += attention_match_loss(rm, am);
    }
    return total;
}

double NoiseOptProblem::joint_loss(const NoiseDistributionParams& p, double* l_attn,
                                   double* l_kl) const {
    const double attn = attention_loss(p);
    const double kl = kl_to_standard_params(p, config.n_frames);
    if (l_attn) *l_attn = attn;
    if (l_kl) *l_kl = kl;
    return attn + config.lambda * kl;
}

std::vector<double> NoiseOptProblem::joint_gradient(const NoiseDistributionParams& p) const {
    // KL part analytic, attention part by central differences.
    auto g = kl_gradient(p.mu, p.beta, p.gamma, config.n_frames);
    for (double& x : g) x *= config.lambda;

    const double h = config.fd_step;
    auto eval = [&](double mu, double beta, double gamma) {
        return attention_loss(NoiseDistributionParams{mu, beta, gamma});
    };
    g[0] += (eval(p.mu + h, p.beta, p.gamma) - eval(p.mu - h, p.beta, p.gamma)) / (2 * h);
    g[1] += (eval(p.mu, p.beta + h, p.gamma) - eval(p.mu, p.beta - h, p.gamma)) / (2 * h);
    g[2] += (eval(p.mu, p.beta, p.gamma + h) - eval(p.mu, p.beta, p.gamma - h)) / (2 * h);
    return g;
}

NoiseOptResult optimize_initial_noise(const NoiseOptProblem& problem,
                                      const NoiseDistributionParams& init) {
    if (!problem.model) throw std::invalid_argument("optimize_initial_noise: no model");
    if (problem.reference_maps.size() != problem.resolved_t_ref().size())
        throw std::invalid_argument("optimize_initial_noise: reference maps / t_ref mismatch");

    NoiseOptResult res;
    res.params = init;

    NoiseDistributionParams cur = init;
    double la = 0.0, lk = 0.0;
    double best = problem.joint_loss(cur, &la, &lk);
    res.trace.push_back({0, la, lk, best, cur.beta, cur.gamma, cur.mu});

    double step_size = problem.config.step_size;
    for (int step = 1; step <= problem.config.steps; ++step) {
        auto g = problem.joint_gradient(cur);
        NoiseDistributionParams cand;
        cand.mu = cur.mu - step_size * g[0];
        cand.beta = std::min(10.0, std::max(0.1, cur.beta - step_size * g[1]));
        cand.gamma = std::min(0.99, std::max(-0.99, cur.gamma - step_size * g[2]));

        if (!cholesky_factor(build_covariance(cand.beta, cand.gamma, problem.config.n_frames))) {
            step_size *= 0.5;
            std::fprintf(stderr,
                         "[vstar] noise_opt: step %d rejected (covariance not PD), "
                         "halving step size to %g\n",
                         step, step_size);
            res.trace.push_back({step, la, lk, res.trace.back().l_joint, cur.beta, cur.gamma, cur.mu});
            continue;
        }

        const double joint = problem.joint_loss(cand, &la, &lk);
        res.trace.push_back({step, la, lk, joint, cand.beta, cand.gamma, cand.mu});
        cur = cand;
        if (joint < best) {
            best = joint;
            res.params = cand;
            res.improved = true;
        }
    }
    if (!res.improved && problem.config.steps > 0)
        std::fprintf(stderr, "[vstar] noise_opt: budget exhausted with no improvement, "
                             "returning initial parameters\n");
    return res;
}

}  // namespace vstar
