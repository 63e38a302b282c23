#include "dcign/errors.hpp"
#include "dcign/layers.hpp"
#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dcign;
using namespace dcign::testing;

namespace {

// Direct four-loop cross-correlation.
Tensor naive_conv(const Tensor& in, const Tensor& k, const Tensor& bias, std::size_t stride, std::size_t pad) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), O = k.dim(0), K = k.dim(2);
    const std::size_t OH = (H + 2 * pad - K) / stride + 1, OW = (W + 2 * pad - K) / stride + 1;
    Tensor out({O, OH, OW});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t y = 0; y < OH; ++y)
            for (std::size_t x = 0; x < OW; ++x) {
                double acc = bias[o];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < K; ++ky)
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                            acc += k[((o * C + c) * K + ky) * K + kx] * in.at(c, iy, ix);
                        }
                out.at(o, y, x) = acc;
            }
    return out;
}

} // namespace

TEST(Conv2d, HandComputedValues) {
    // 3x3 ramp, 2x2 ones kernel, no padding: each output is a 2x2 window sum.
    Tensor in({1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k({1, 1, 2, 2}, 1.0);
    Tensor b({1}, std::vector<double>{0.5});
    const Tensor out = conv2d(in, k, b, 1, 0);
    EXPECT_EQ(out, Tensor({1, 2, 2}, std::vector<double>{12.5, 16.5, 24.5, 28.5}));
}

TEST(Conv2d, CrossCorrelationNotConvolution) {
    // A kernel marking its top-left tap picks the top-left input; a flipped
    // (true convolution) kernel would pick the bottom-right one.
    Tensor in({1, 2, 2}, std::vector<double>{1, 10, 100, 1000});
    Tensor k({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0});
    EXPECT_EQ(conv2d(in, k, Tensor({1}), 1, 0)[0], 1.0);
}

TEST(Conv2d, MatchesNaiveLoopsAcrossStridesAndPadding) {
    Rng rng(11);
    for (std::size_t stride : {1u, 2u})
        for (std::size_t pad : {0u, 1u, 2u}) {
            const Tensor in = random_tensor(rng, {3, 7, 6});
            const Tensor k = random_tensor(rng, {4, 3, 3, 3});
            const Tensor b = random_tensor(rng, {4});
            const Tensor got = conv2d(in, k, b, stride, pad);
            const Tensor want = naive_conv(in, k, b, stride, pad);
            ASSERT_EQ(got.shape(), want.shape());
            EXPECT_LT(max_abs_diff(got, want), 1e-12) << "stride " << stride << " pad " << pad;
        }
}

TEST(Conv2d, RejectsMismatchedChannels) {
    EXPECT_THROW(conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 0), DimensionError);
    EXPECT_THROW(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), Tensor({1}), 1, 0), DimensionError);
}

TEST(MaxPool, PicksWindowMaxima) {
    Tensor in({1, 2, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 8, 7});
    const auto [out, cache] = maxpool(in, 2);
    EXPECT_EQ(out, Tensor({1, 1, 2}, std::vector<double>{5, 8}));
    EXPECT_EQ(cache.argmax, (std::vector<std::size_t>{1, 6}));
}

TEST(MaxPool, TiesRouteGradientToFirstRowMajorPosition) {
    Tensor in({1, 2, 2}, 3.0);
    const auto [out, cache] = maxpool(in, 2);
    const Tensor g = maxpool_backward(cache, Tensor({1, 1, 1}, 1.0));
    EXPECT_EQ(g, Tensor({1, 2, 2}, std::vector<double>{1, 0, 0, 0}));
}

TEST(MaxPool, RejectsIndivisibleExtent) { EXPECT_THROW(maxpool(Tensor({1, 3, 4}), 2), DimensionError); }

TEST(Upsample, NearestNeighbourReplication) {
    Tensor in({1, 1, 2}, std::vector<double>{1, 2});
    const Tensor out = upsample_nn(in, 2);
    EXPECT_EQ(out, Tensor({1, 2, 4}, std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2}));
    const Tensor g = upsample_nn_backward(UpsampleCache{in.shape(), 2}, Tensor({1, 2, 4}, 1.0));
    EXPECT_EQ(g, Tensor({1, 1, 2}, 4.0));
}

TEST(Dense, AffineMap) {
    Tensor w({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor b({2}, std::vector<double>{1, -1});
    Tensor x({3}, std::vector<double>{1, 0, -1});
    EXPECT_EQ(dense(x, w, b), Tensor({2}, std::vector<double>{-1, -3}));
    EXPECT_THROW(dense(Tensor({4}), w, b), DimensionError);
}

TEST(Activation, ReluAndStableSigmoid) {
    Tensor x({4}, std::vector<double>{-2, 0, 3, -800});
    EXPECT_EQ(activation(x, Activation::relu), Tensor({4}, std::vector<double>{0, 0, 3, 0}));
    const Tensor s = activation(Tensor({3}, std::vector<double>{800, -800, 0}), Activation::sigmoid);
    EXPECT_EQ(s[0], 1.0);
    EXPECT_EQ(s[1], 0.0);
    EXPECT_FALSE(std::isnan(s[1]));
    EXPECT_EQ(s[2], 0.5);
}

TEST(Backward, DispatchRejectsMismatchedCache) {
    const auto [out, cache] = maxpool(Tensor({1, 2, 2}), 2);
    EXPECT_THROW(backward(LayerKind::dense, cache, {}, out), ContractError);
}

// Every layer's backward pass against central differences of <w, f(x)>.
class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, ConvMatchesFiniteDifferences) {
    Rng rng(static_cast<std::uint64_t>(GetParam()));
    const Tensor x = random_tensor(rng, {2, 5, 5});
    const Tensor k = random_tensor(rng, {3, 2, 3, 3});
    const Tensor b = random_tensor(rng, {3});
    const std::size_t stride = 1 + GetParam() % 2, pad = GetParam() % 3;
    const Tensor probe = random_tensor(rng, conv2d(x, k, b, stride, pad).shape());
    const auto grads = conv2d_backward(Conv2dCache{x, stride, pad, probe.shape()}, k, probe);
    EXPECT_LT(relative_error(grads.input, numeric_gradient([&](const Tensor& v) { return dot(probe, conv2d(v, k, b, stride, pad)); }, x)), 1e-4);
    EXPECT_LT(relative_error(grads.kernels, numeric_gradient([&](const Tensor& v) { return dot(probe, conv2d(x, v, b, stride, pad)); }, k)), 1e-4);
    EXPECT_LT(relative_error(grads.bias, numeric_gradient([&](const Tensor& v) { return dot(probe, conv2d(x, k, v, stride, pad)); }, b)), 1e-4);
}

TEST_P(LayerGradient, DenseMatchesFiniteDifferences) {
    Rng rng(static_cast<std::uint64_t>(GetParam()) + 100);
    const Tensor x = random_tensor(rng, {2, 2, 3});
    const Tensor w = random_tensor(rng, {5, 12});
    const Tensor b = random_tensor(rng, {5});
    const Tensor probe = random_tensor(rng, {5});
    const auto grads = dense_backward(DenseCache{x.reshaped({12}), x.shape()}, w, probe);
    EXPECT_EQ(grads.input.shape(), x.shape());
    EXPECT_LT(relative_error(grads.input, numeric_gradient([&](const Tensor& v) { return dot(probe, dense(v, w, b)); }, x)), 1e-4);
    EXPECT_LT(relative_error(grads.weight, numeric_gradient([&](const Tensor& v) { return dot(probe, dense(x, v, b)); }, w)), 1e-4);
    EXPECT_LT(relative_error(grads.bias, numeric_gradient([&](const Tensor& v) { return dot(probe, dense(x, w, v)); }, b)), 1e-4);
}

TEST_P(LayerGradient, PoolUpsampleActivationsMatchFiniteDifferences) {
    Rng rng(static_cast<std::uint64_t>(GetParam()) + 200);
    const Tensor x = random_tensor(rng, {2, 4, 6});
    {
        const auto [y, cache] = maxpool(x, 2);
        const Tensor probe = random_tensor(rng, y.shape());
        const Tensor g = maxpool_backward(cache, probe);
        EXPECT_LT(relative_error(g, numeric_gradient([&](const Tensor& v) { return dot(probe, maxpool(v, 2).first); }, x)), 1e-4);
    }
    {
        const Tensor probe = random_tensor(rng, upsample_nn(x, 2).shape());
        const Tensor g = upsample_nn_backward(UpsampleCache{x.shape(), 2}, probe);
        EXPECT_LT(relative_error(g, numeric_gradient([&](const Tensor& v) { return dot(probe, upsample_nn(v, 2)); }, x)), 1e-4);
    }
    const Tensor xa = away_from_zero(x);
    for (Activation kind : {Activation::relu, Activation::sigmoid, Activation::none}) {
        const Tensor probe = random_tensor(rng, x.shape());
        const Tensor g = activation_backward(ActivationCache{kind, activation(xa, kind)}, probe);
        EXPECT_LT(relative_error(g, numeric_gradient([&](const Tensor& v) { return dot(probe, activation(v, kind)); }, xa)), 1e-4)
            << to_string(kind);
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradient, ::testing::Range(0, 20));
