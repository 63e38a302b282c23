#pragma once

#include "dcign/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dcign {

struct OptimHyper {
    double learning_rate = 0.0005;
    double sq_decay = 0.1;  // weight on the newest squared gradient
    double weight_decay = 0.01;
    double epsilon = 1e-8;

    void validate() const;
};

struct OptimState {
    std::vector<Tensor> mean_square;  // one per parameter tensor
    std::uint64_t step = 0;

    static OptimState zeros_like(std::span<const Tensor> params);
};

// One rmsprop update with coupled weight decay:
//   g      = grad + weight_decay * param
//   cache  = (1 - sq_decay) * cache + sq_decay * g^2
//   param -= learning_rate * g / (sqrt(cache) + epsilon)
void rmsprop_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimState& state,
                  const OptimHyper& hyper);

} // namespace dcign
