#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace osdx {

// Translated two-parameter Weibull fitted to the largest distance samples.
// w_score(x) = 1 - exp(-((x - tau)/lambda)^kappa) for x > tau, else 0.
struct WeibullTailModel {
    double tau = 0.0;     // translation: smallest tail sample minus epsilon
    double lambda = 1.0;  // scale, > 0
    double kappa = 1.0;   // shape, > 0
    std::size_t tail_size = 0;

    double w_score(double x) const;
};

class EvtError : public std::runtime_error {
public:
    explicit EvtError(const std::string& what) : std::runtime_error(what) {}
};

// Non-convergence carries the last iterate so callers can inspect it.
class EvtConvergenceError : public EvtError {
public:
    EvtConvergenceError(const std::string& what, WeibullTailModel last)
        : EvtError(what), last_iterate(last) {}
    WeibullTailModel last_iterate;
};

struct FitHighOptions {
    int max_iterations = 200;
    double tolerance = 1e-10;           // on the shape profile residual
    double tau_epsilon_scale = 1e-6;    // tau = min(tail) - scale * range(tail)
};

// Maximum-likelihood Weibull fit to the tail_size largest samples.
// The scale is profiled out (lambda^kappa = mean(z^kappa)) and the shape
// equation is solved by damped Newton iteration: the step is halved whenever
// the log-likelihood would decrease.
//
// Throws EvtError on fewer than tail_size samples, tail_size < 2, or a
// zero-variance tail; EvtConvergenceError if the residual never falls below
// tolerance.
WeibullTailModel fit_high(const std::vector<double>& samples,
                          std::size_t tail_size,
                          const FitHighOptions& options = {});

// Log-likelihood of the tail data under (lambda, kappa) after translation by
// tau. Exposed so grid-search oracles evaluate the same objective.
double weibull_tail_log_likelihood(const std::vector<double>& shifted_tail,
                                   double lambda, double kappa);

// Default tail size: min(20, ceil(n/2)).
std::size_t default_tail_size(std::size_t n_samples);

}  // namespace osdx
