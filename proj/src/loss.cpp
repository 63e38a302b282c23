#include "dcign/loss.hpp"

#include "dcign/errors.hpp"

#include <cmath>

namespace dcign {

KlTerm kl_divergence(const LatentDistribution& dist) {
    const std::size_t n = dist.mu.size();
    if (dist.logvar.size() != n) throw DimensionError("mu and logvar lengths differ");
    KlTerm kl{0.0, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double var = std::exp(dist.logvar[i]);
        kl.value += 0.5 * (var + dist.mu[i] * dist.mu[i] - 1.0 - dist.logvar[i]);
        kl.grad_mu[i] = dist.mu[i];
        kl.grad_logvar[i] = 0.5 * (var - 1.0);
    }
    return kl;
}

ReconstructionTerm reconstruction_loss(const Tensor& x, const Tensor& x_hat, Likelihood likelihood) {
    if (x.shape() != x_hat.shape())
        throw DimensionError("reconstruction shape " + to_string(x_hat.shape()) + " differs from target " +
                             to_string(x.shape()));
    ReconstructionTerm term{0.0, Tensor::zeros_like(x_hat)};
    if (likelihood == Likelihood::gaussian) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x_hat[i] - x[i];
            term.value += d * d;
            term.grad[i] = 2.0 * d;
        }
        return term;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = x_hat[i];
        if (!(p > 0.0 && p < 1.0))
            throw DomainError("Bernoulli likelihood needs predictions strictly inside (0,1), got " +
                              std::to_string(p) + " at index " + std::to_string(i));
        const double t = x[i];
        term.value -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
        term.grad[i] = -(t / p - (1.0 - t) / (1.0 - p));
    }
    return term;
}

TotalLoss total_loss(const Tensor& x, const Tensor& x_hat, const LatentDistribution& dist, Likelihood likelihood) {
    auto rec = reconstruction_loss(x, x_hat, likelihood);
    auto kl = kl_divergence(dist);
    return {{rec.value, kl.value, rec.value + kl.value}, std::move(rec.grad), std::move(kl.grad_mu),
            std::move(kl.grad_logvar)};
}

} // namespace dcign
