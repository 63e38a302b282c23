#include "dcign/optimizer.hpp"

#include "dcign/errors.hpp"

#include <cmath>

namespace dcign {

void OptimHyper::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(sq_decay > 0.0 && sq_decay < 1.0)) throw ConfigError("sq_decay must lie in (0,1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
}

OptimState OptimState::zeros_like(std::span<const Tensor> params) {
    OptimState state;
    state.mean_square.reserve(params.size());
    for (const auto& p : params) state.mean_square.push_back(Tensor::zeros_like(p));
    return state;
}

void rmsprop_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimState& state,
                  const OptimHyper& hyper) {
    hyper.validate();
    if (grads.size() != params.size() || state.mean_square.size() != params.size())
        throw ContractError("rmsprop: " + std::to_string(params.size()) + " parameters, " +
                            std::to_string(grads.size()) + " gradients, " +
                            std::to_string(state.mean_square.size()) + " cache tensors");
    for (std::size_t t = 0; t < params.size(); ++t)
        if (grads[t].shape() != params[t].shape() || state.mean_square[t].shape() != params[t].shape())
            throw ContractError("rmsprop: shape mismatch at parameter " + std::to_string(t) + " " +
                                to_string(params[t].shape()));

    const double keep = 1.0 - hyper.sq_decay;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t].values();
        const auto g_in = grads[t].values();
        auto cache = state.mean_square[t].values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = g_in[i] + hyper.weight_decay * p[i];
            cache[i] = keep * cache[i] + hyper.sq_decay * g * g;
            p[i] -= hyper.learning_rate * g / (std::sqrt(cache[i]) + hyper.epsilon);
        }
    }
    ++state.step;
}

} // namespace dcign
