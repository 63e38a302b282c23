#pragma once

// Forward and backward kernels for the fixed layer vocabulary the encoder and
// decoder are assembled from. All kernels are pure functions of their inputs.

#include "dcign/tensor.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dcign {

enum class LayerKind { conv2d, maxpool, upsample_nn, dense, activation, reshape };
enum class Activation { none, relu, sigmoid };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation kind);

struct Conv2dCache {
    Tensor input;
    std::size_t stride = 1;
    std::size_t padding = 0;
    Shape output_shape;
};

struct MaxPoolCache {
    Shape input_shape;
    Shape output_shape;
    std::size_t window = 2;
    // Flat index into the forward input of each output cell's maximum.
    std::vector<std::size_t> argmax;
};

struct UpsampleCache {
    Shape input_shape;
    std::size_t factor = 2;
};

struct DenseCache {
    Tensor input;  // flattened to rank 1
    Shape input_shape;
};

struct ActivationCache {
    Activation kind = Activation::none;
    Tensor output;
};

struct ReshapeCache {
    Shape input_shape;
    Shape output_shape;
};

using LayerCache =
    std::variant<Conv2dCache, MaxPoolCache, UpsampleCache, DenseCache, ActivationCache, ReshapeCache>;

LayerKind kind_of(const LayerCache& cache);

// Cross-correlation of a [C_in,H,W] input with [C_out,C_in,k,k] kernels,
// zero padding, plus per-channel bias.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Non-overlapping window max. Ties go to the first position in row-major order.
std::pair<Tensor, MaxPoolCache> maxpool(const Tensor& input, std::size_t window = 2);

Tensor upsample_nn(const Tensor& input, std::size_t factor = 2);

// weight [m,n] times the flattened input plus bias [m]. Returns rank-1 [m].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor activation(const Tensor& input, Activation kind);

struct LayerGrads {
    Tensor input;
    std::vector<Tensor> params;  // same order as the params passed to backward
};

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

struct DenseGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

Conv2dGrads conv2d_backward(const Conv2dCache& cache, const Tensor& kernels, const Tensor& grad_output);
Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& grad_output);
Tensor upsample_nn_backward(const UpsampleCache& cache, const Tensor& grad_output);
DenseGrads dense_backward(const DenseCache& cache, const Tensor& weight, const Tensor& grad_output);
Tensor activation_backward(const ActivationCache& cache, const Tensor& grad_output);
Tensor reshape_backward(const ReshapeCache& cache, const Tensor& grad_output);

// Dispatching form. params is {kernels, bias} for conv2d, {weight, bias} for
// dense, empty otherwise. Throws ContractError if kind does not match cache.
LayerGrads backward(LayerKind kind, const LayerCache& cache, std::span<const Tensor> params,
                    const Tensor& grad_output);

// Accumulating variants used on the training hot path: parameter gradients
// are added into the supplied tensors instead of being returned.
Tensor conv2d_backward_accumulate(const Conv2dCache& cache, const Tensor& kernels,
                                  const Tensor& grad_output, Tensor& grad_kernels, Tensor& grad_bias,
                                  bool need_input_grad = true);
Tensor dense_backward_accumulate(const DenseCache& cache, const Tensor& weight, const Tensor& grad_output,
                                 Tensor& grad_weight, Tensor& grad_bias, bool need_input_grad = true);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

} // namespace dcign
