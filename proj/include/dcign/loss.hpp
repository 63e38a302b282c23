#pragma once

// Variational objective: reconstruction negative log-likelihood plus the KL
// divergence of the diagonal-Gaussian posterior from a standard-normal prior.
// Both terms are summed over pixels / latent dimensions.

#include "dcign/network.hpp"
#include "dcign/tensor.hpp"

#include <vector>

namespace dcign {

enum class Likelihood {
    bernoulli,  // cross-entropy on intensities in [0,1]
    gaussian,   // sum of squared errors
};

struct LossBreakdown {
    double reconstruction = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

struct KlTerm {
    double value = 0.0;
    std::vector<double> grad_mu;
    std::vector<double> grad_logvar;
};

// sum_i 0.5 * (exp(logvar_i) + mu_i^2 - 1 - logvar_i)
KlTerm kl_divergence(const LatentDistribution& dist);

struct ReconstructionTerm {
    double value = 0.0;
    Tensor grad;  // d value / d x_hat
};

// Bernoulli: -sum[x ln x_hat + (1-x) ln(1-x_hat)]; throws DomainError when any
// x_hat sits at exactly 0 or 1. Gaussian: sum (x_hat - x)^2.
ReconstructionTerm reconstruction_loss(const Tensor& x, const Tensor& x_hat,
                                       Likelihood likelihood = Likelihood::bernoulli);

struct TotalLoss {
    LossBreakdown breakdown;
    Tensor grad_x_hat;
    std::vector<double> grad_mu;
    std::vector<double> grad_logvar;
};

TotalLoss total_loss(const Tensor& x, const Tensor& x_hat, const LatentDistribution& dist,
                     Likelihood likelihood = Likelihood::bernoulli);

} // namespace dcign
