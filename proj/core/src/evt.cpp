#include "osdx/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace osdx {

double WeibullTailModel::w_score(double x) const {
    const double z = x - tau;
    if (z <= 0.0) return 0.0;
    return -std::expm1(-std::pow(z / lambda, kappa));
}

std::size_t default_tail_size(std::size_t n_samples) {
    const std::size_t half = (n_samples + 1) / 2;
    return std::min<std::size_t>(20, half);
}

double weibull_tail_log_likelihood(const std::vector<double>& shifted_tail,
                                   double lambda, double kappa) {
    const double n = static_cast<double>(shifted_tail.size());
    double sum_log = 0.0;
    double sum_pow = 0.0;
    for (double z : shifted_tail) {
        sum_log += std::log(z);
        sum_pow += std::pow(z / lambda, kappa);
    }
    return n * std::log(kappa) - n * kappa * std::log(lambda) +
           (kappa - 1.0) * sum_log - sum_pow;
}

namespace {

struct ShapeProfile {
    // Shape equation f(kappa) = 1/kappa + mean(log z) - sum(z^k log z)/sum(z^k)
    // and its derivative. Roots of f are stationary points of the profiled
    // log-likelihood.
    const std::vector<double>& log_z;

    double mean_log() const {
        return std::accumulate(log_z.begin(), log_z.end(), 0.0) /
               static_cast<double>(log_z.size());
    }

    void moments(double kappa, double& s0, double& s1, double& s2) const {
        // z^kappa computed as exp(kappa log z - shift) to keep the ratios
        // stable for large kappa.
        const double max_log = *std::max_element(log_z.begin(), log_z.end());
        s0 = s1 = s2 = 0.0;
        for (double lz : log_z) {
            const double w = std::exp(kappa * (lz - max_log));
            s0 += w;
            s1 += w * lz;
            s2 += w * lz * lz;
        }
    }

    double residual(double kappa) const {
        double s0, s1, s2;
        moments(kappa, s0, s1, s2);
        return 1.0 / kappa + mean_log() - s1 / s0;
    }

    double derivative(double kappa) const {
        double s0, s1, s2;
        moments(kappa, s0, s1, s2);
        const double var = (s2 * s0 - s1 * s1) / (s0 * s0);
        return -1.0 / (kappa * kappa) - var;
    }
};

double profiled_log_likelihood(const std::vector<double>& shifted,
                               const std::vector<double>& log_z, double kappa) {
    // lambda^kappa = mean(z^kappa); plug back into the likelihood.
    const double n = static_cast<double>(shifted.size());
    double sum_pow = 0.0;
    const double max_log = *std::max_element(log_z.begin(), log_z.end());
    for (double lz : log_z) sum_pow += std::exp(kappa * (lz - max_log));
    const double log_lambda = max_log + std::log(sum_pow / n) / kappa;
    double sum_log = std::accumulate(log_z.begin(), log_z.end(), 0.0);
    return n * std::log(kappa) - n * kappa * log_lambda +
           (kappa - 1.0) * sum_log - n;
}

}  // namespace

WeibullTailModel fit_high(const std::vector<double>& samples,
                          std::size_t tail_size, const FitHighOptions& options) {
    if (tail_size < 2) {
        throw EvtError("fit_high: tail_size must be >= 2");
    }
    if (samples.size() < tail_size) {
        throw EvtError("fit_high: fewer samples than tail_size");
    }
    for (double s : samples) {
        if (!std::isfinite(s)) throw EvtError("fit_high: non-finite sample");
    }

    // The tail_size largest samples, ascending.
    std::vector<double> tail(samples);
    std::sort(tail.begin(), tail.end(), std::greater<double>());
    tail.resize(tail_size);
    std::reverse(tail.begin(), tail.end());

    const double lo = tail.front();
    const double hi = tail.back();
    const double range = hi - lo;
    if (range <= 0.0) {
        throw EvtError("fit_high: zero-variance tail");
    }

    // Translate so every tail point has strictly positive support.
    const double tau = lo - options.tau_epsilon_scale * range;
    std::vector<double> shifted(tail_size);
    std::vector<double> log_z(tail_size);
    for (std::size_t i = 0; i < tail_size; ++i) {
        shifted[i] = tail[i] - tau;
        log_z[i] = std::log(shifted[i]);
    }

    const ShapeProfile profile{log_z};

    // Gumbel-moment start: Var(log z) = pi^2 / (6 kappa^2).
    const double mean_log = profile.mean_log();
    double var_log = 0.0;
    for (double lz : log_z) var_log += (lz - mean_log) * (lz - mean_log);
    var_log /= static_cast<double>(tail_size);
    double kappa = var_log > 0.0
                       ? 3.14159265358979323846 / std::sqrt(6.0 * var_log)
                       : 1.0;
    kappa = std::clamp(kappa, 1e-3, 1e3);

    bool converged = false;
    double ll = profiled_log_likelihood(shifted, log_z, kappa);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const double f = profile.residual(kappa);
        if (std::abs(f) < options.tolerance) {
            converged = true;
            break;
        }
        const double fp = profile.derivative(kappa);
        double step = -f / fp;
        // Damped Newton: halve until the profiled likelihood does not drop.
        double next = kappa + step;
        for (int halvings = 0; halvings < 60; ++halvings) {
            if (next > 0.0) {
                const double next_ll =
                    profiled_log_likelihood(shifted, log_z, next);
                if (next_ll >= ll) break;
            }
            step *= 0.5;
            next = kappa + step;
        }
        kappa = next;
        ll = profiled_log_likelihood(shifted, log_z, kappa);
    }
    // lambda from the profile identity at the final kappa.
    double sum_pow = 0.0;
    for (double z : shifted) sum_pow += std::pow(z, kappa);
    const double lambda =
        std::pow(sum_pow / static_cast<double>(tail_size), 1.0 / kappa);

    WeibullTailModel model{tau, lambda, kappa, tail_size};
    if (!converged && std::abs(profile.residual(kappa)) >= options.tolerance) {
        throw EvtConvergenceError("fit_high: Newton iteration did not converge",
                                  model);
    }
    return model;
}

}  // namespace osdx
