#include "dcign/errors.hpp"
#include "dcign/optimizer.hpp"
#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dcign;
using namespace dcign::testing;

namespace {

// Scalar reference update.
void scalar_rmsprop(double& p, double& cache, double grad, const OptimHyper& h) {
    const double g = grad + h.weight_decay * p;
    cache = (1.0 - h.sq_decay) * cache + h.sq_decay * g * g;
    p -= h.learning_rate * g / (std::sqrt(cache) + h.epsilon);
}

} // namespace

TEST(Rmsprop, DefaultsFollowTheTrainingRecipe) {
    const OptimHyper h;
    EXPECT_EQ(h.learning_rate, 0.0005);
    EXPECT_EQ(h.sq_decay, 0.1);
    EXPECT_EQ(h.weight_decay, 0.01);
    EXPECT_EQ(h.epsilon, 1e-8);
}

TEST(Rmsprop, FirstStepHandValue) {
    // g = 1 + 0.01*2 = 1.02; cache = 0.1 * 1.02^2; step = lr * 1.02 / (sqrt(cache) + eps).
    std::vector<Tensor> p{Tensor({1}, 2.0)};
    std::vector<Tensor> g{Tensor({1}, 1.0)};
    auto state = OptimState::zeros_like(p);
    rmsprop_step(p, g, state, {});
    const double cache = 0.1 * 1.02 * 1.02;
    EXPECT_NEAR(state.mean_square[0][0], cache, 1e-15);
    EXPECT_NEAR(p[0][0], 2.0 - 0.0005 * 1.02 / (std::sqrt(cache) + 1e-8), 1e-15);
    EXPECT_EQ(state.step, 1u);
}

TEST(Rmsprop, MatchesScalarOracleOverManySteps) {
    Rng rng(9);
    OptimHyper h{0.003, 0.2, 0.05, 1e-7};
    std::vector<Tensor> p{random_tensor(rng, {3, 4}), random_tensor(rng, {5})};
    auto ref_p = p;
    auto state = OptimState::zeros_like(p);
    auto ref_cache = state.mean_square;
    for (int s = 0; s < 50; ++s) {
        std::vector<Tensor> g{random_tensor(rng, {3, 4}, -3, 3), random_tensor(rng, {5}, -3, 3)};
        rmsprop_step(p, g, state, h);
        for (std::size_t t = 0; t < p.size(); ++t)
            for (std::size_t i = 0; i < p[t].size(); ++i) scalar_rmsprop(ref_p[t][i], ref_cache[t][i], g[t][i], h);
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        EXPECT_LE(max_abs_diff(p[t], ref_p[t]), 1e-12);
        EXPECT_LE(max_abs_diff(state.mean_square[t], ref_cache[t]), 1e-12);
    }
}

TEST(Rmsprop, ZeroGradientAndDecayLeaveParametersUnchanged) {
    std::vector<Tensor> p{Tensor({2}, std::vector<double>{1.0, -1.0})};
    std::vector<Tensor> g{Tensor({2})};
    auto state = OptimState::zeros_like(p);
    rmsprop_step(p, g, state, {0.001, 0.1, 0.0, 1e-8});
    EXPECT_EQ(p[0], Tensor({2}, std::vector<double>{1.0, -1.0}));
}

TEST(Rmsprop, RejectsMismatchesAndBadHyperparameters) {
    std::vector<Tensor> p{Tensor({2})};
    auto state = OptimState::zeros_like(p);
    std::vector<Tensor> none;
    EXPECT_THROW(rmsprop_step(p, none, state, {}), ContractError);
    std::vector<Tensor> g{Tensor({2})};
    EXPECT_THROW(rmsprop_step(p, g, state, {-1.0, 0.1, 0.0, 1e-8}), ConfigError);
    EXPECT_THROW(rmsprop_step(p, g, state, {0.1, 1.5, 0.0, 1e-8}), ConfigError);
}
