#include "dcign/layers.hpp"

#include "dcign/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace dcign {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got shape " +
                             to_string(t.shape()));
}

struct ConvGeometry {
    std::size_t in_channels, height, width;
    std::size_t out_channels, kernel;
    std::size_t stride, padding;
    std::size_t out_height, out_width;

    std::size_t patch() const { return in_channels * kernel * kernel; }
    std::size_t positions() const { return out_height * out_width; }
    bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

ConvGeometry conv_geometry(const Shape& input, const Tensor& kernels, std::size_t stride, std::size_t padding) {
    if (input.size() != 3) throw DimensionError("conv2d input must be [C,H,W], got " + to_string(input));
    require_rank(kernels, 4, "conv2d kernels");
    if (kernels.dim(2) != kernels.dim(3))
        throw DimensionError("conv2d kernels must be square, got " + to_string(kernels.shape()));
    if (kernels.dim(1) != input[0])
        throw DimensionError("conv2d kernels expect " + std::to_string(kernels.dim(1)) +
                             " input channels, input has " + std::to_string(input[0]));
    if (stride == 0) throw DimensionError("conv2d stride must be at least 1");
    ConvGeometry g{input[0], input[1], input[2], kernels.dim(0), kernels.dim(2), stride, padding, 0, 0};
    g.out_height = conv_output_extent(g.height, g.kernel, stride, padding);
    g.out_width = conv_output_extent(g.width, g.kernel, stride, padding);
    return g;
}

// Unfolds the padded input into a [C_in*k*k, H'*W'] row-major matrix.
void im2col(const ConvGeometry& g, const double* input, double* columns) {
    const long pad = static_cast<long>(g.padding);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const double* plane = input + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                double* row = columns + ((c * g.kernel + ky) * g.kernel + kx) * g.positions();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - pad;
                    double* out = row + oy * g.out_width;
                    if (iy < 0 || iy >= static_cast<long>(g.height)) {
                        std::fill(out, out + g.out_width, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * g.width;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - pad;
                        out[ox] = (ix < 0 || ix >= static_cast<long>(g.width)) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters column gradients back onto the input.
void col2im(const ConvGeometry& g, const double* columns, double* input) {
    const long pad = static_cast<long>(g.padding);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        double* plane = input + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const double* row = columns + ((c * g.kernel + ky) * g.kernel + kx) * g.positions();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.width;
                    const double* src = row + oy * g.out_width;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - pad;
                        if (ix >= 0 && ix < static_cast<long>(g.width)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample_nn: return "upsample_nn";
    case LayerKind::dense: return "dense";
    case LayerKind::activation: return "activation";
    case LayerKind::reshape: return "reshape";
    }
    return "unknown";
}

std::string_view to_string(Activation kind) {
    switch (kind) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

LayerKind kind_of(const LayerCache& cache) {
    struct Visitor {
        LayerKind operator()(const Conv2dCache&) const { return LayerKind::conv2d; }
        LayerKind operator()(const MaxPoolCache&) const { return LayerKind::maxpool; }
        LayerKind operator()(const UpsampleCache&) const { return LayerKind::upsample_nn; }
        LayerKind operator()(const DenseCache&) const { return LayerKind::dense; }
        LayerKind operator()(const ActivationCache&) const { return LayerKind::activation; }
        LayerKind operator()(const ReshapeCache&) const { return LayerKind::reshape; }
    };
    return std::visit(Visitor{}, cache);
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw DimensionError("stride must be at least 1");
    if (kernel == 0 || kernel > in + 2 * padding)
        throw DimensionError("kernel " + std::to_string(kernel) + " does not fit extent " + std::to_string(in) +
                             " with padding " + std::to_string(padding));
    return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    const auto g = conv_geometry(input.shape(), kernels, stride, padding);
    if (bias.size() != g.out_channels)
        throw DimensionError("conv2d bias needs " + std::to_string(g.out_channels) + " entries, got " +
                             std::to_string(bias.size()));

    Tensor output({g.out_channels, g.out_height, g.out_width});
    ConstMatMap w(kernels.data(), g.out_channels, g.patch());
    MatMap out(output.data(), g.out_channels, g.positions());
    if (g.is_pointwise()) {
        out.noalias() = w * ConstMatMap(input.data(), g.patch(), g.positions());
    } else {
        RowMat columns(g.patch(), g.positions());
        im2col(g, input.data(), columns.data());
        out.noalias() = w * columns;
    }
    out.colwise() += ConstVecMap(bias.data(), g.out_channels);
    return output;
}

std::pair<Tensor, MaxPoolCache> maxpool(const Tensor& input, std::size_t window) {
    require_rank(input, 3, "maxpool input");
    if (window == 0) throw DimensionError("maxpool window must be at least 1");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h % window != 0 || w % window != 0)
        throw DimensionError("maxpool extents " + to_string(input.shape()) + " not divisible by window " +
                             std::to_string(window));
    const std::size_t oh = h / window, ow = w / window;

    MaxPoolCache cache{input.shape(), {c, oh, ow}, window, {}};
    cache.argmax.resize(c * oh * ow);
    Tensor output({c, oh, ow});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (ch * h + oy * window) * w + ox * window;
                double best_value = input[best];
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        const std::size_t idx = (ch * h + oy * window + dy) * w + ox * window + dx;
                        if (input[idx] > best_value) {
                            best_value = input[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t out_idx = (ch * oh + oy) * ow + ox;
                output[out_idx] = best_value;
                cache.argmax[out_idx] = best;
            }
        }
    }
    return {std::move(output), std::move(cache)};
}

Tensor upsample_nn(const Tensor& input, std::size_t factor) {
    require_rank(input, 3, "upsample_nn input");
    if (factor == 0) throw DimensionError("upsample factor must be at least 1");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor output({c, h * factor, w * factor});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h * factor; ++y)
            for (std::size_t x = 0; x < w * factor; ++x) output.at(ch, y, x) = input.at(ch, y / factor, x / factor);
    return output;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "dense weight");
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (input.size() != n)
        throw DimensionError("dense weight expects " + std::to_string(n) + " inputs, got " +
                             std::to_string(input.size()));
    if (bias.size() != m)
        throw DimensionError("dense bias needs " + std::to_string(m) + " entries, got " +
                             std::to_string(bias.size()));
    Tensor output({m});
    VecMap out(output.data(), static_cast<Eigen::Index>(m));
    out.noalias() = ConstMatMap(weight.data(), m, n) * ConstVecMap(input.data(), n);
    out += ConstVecMap(bias.data(), m);
    return output;
}

Tensor activation(const Tensor& input, Activation kind) {
    Tensor output = input;
    switch (kind) {
    case Activation::none: break;
    case Activation::relu:
        for (auto& v : output.values()) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::sigmoid:
        for (auto& v : output.values()) v = sigmoid(v);
        break;
    }
    return output;
}

Tensor conv2d_backward_accumulate(const Conv2dCache& cache, const Tensor& kernels, const Tensor& grad_output,
                                  Tensor& grad_kernels, Tensor& grad_bias, bool need_input_grad) {
    const auto g = conv_geometry(cache.input.shape(), kernels, cache.stride, cache.padding);
    if (grad_output.shape() != cache.output_shape || grad_output.shape() != Shape{g.out_channels, g.out_height, g.out_width})
        throw ContractError("conv2d backward: grad_output shape " + to_string(grad_output.shape()) +
                            " differs from forward output " + to_string(cache.output_shape));
    if (grad_kernels.shape() != kernels.shape() || grad_bias.size() != g.out_channels)
        throw ContractError("conv2d backward: gradient accumulators have the wrong shape");

    ConstMatMap go(grad_output.data(), g.out_channels, g.positions());
    ConstMatMap w(kernels.data(), g.out_channels, g.patch());
    MatMap gw(grad_kernels.data(), g.out_channels, g.patch());
    VecMap(grad_bias.data(), g.out_channels) += go.rowwise().sum();

    Tensor grad_input;
    if (g.is_pointwise()) {
        ConstMatMap columns(cache.input.data(), g.patch(), g.positions());
        gw.noalias() += go * columns.transpose();
        if (need_input_grad) {
            grad_input = Tensor(cache.input.shape());
            MatMap(grad_input.data(), g.patch(), g.positions()).noalias() = w.transpose() * go;
        }
        return grad_input;
    }

    RowMat columns(g.patch(), g.positions());
    im2col(g, cache.input.data(), columns.data());
    gw.noalias() += go * columns.transpose();
    if (need_input_grad) {
        columns.noalias() = w.transpose() * go;
        grad_input = Tensor(cache.input.shape());
        col2im(g, columns.data(), grad_input.data());
    }
    return grad_input;
}

Conv2dGrads conv2d_backward(const Conv2dCache& cache, const Tensor& kernels, const Tensor& grad_output) {
    Conv2dGrads grads{{}, Tensor::zeros_like(kernels), Tensor({kernels.dim(0)})};
    grads.input = conv2d_backward_accumulate(cache, kernels, grad_output, grads.kernels, grads.bias);
    return grads;
}

Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& grad_output) {
    if (grad_output.shape() != cache.output_shape)
        throw ContractError("maxpool backward: grad_output shape " + to_string(grad_output.shape()) +
                            " differs from forward output " + to_string(cache.output_shape));
    Tensor grad_input(cache.input_shape);
    for (std::size_t i = 0; i < cache.argmax.size(); ++i) grad_input[cache.argmax[i]] += grad_output[i];
    return grad_input;
}

Tensor upsample_nn_backward(const UpsampleCache& cache, const Tensor& grad_output) {
    const auto& in = cache.input_shape;
    const std::size_t f = cache.factor;
    if (grad_output.shape() != Shape{in.at(0), in.at(1) * f, in.at(2) * f})
        throw ContractError("upsample_nn backward: grad_output shape " + to_string(grad_output.shape()) +
                            " does not match input " + to_string(in) + " at factor " + std::to_string(f));
    Tensor grad_input(in);
    for (std::size_t c = 0; c < in[0]; ++c)
        for (std::size_t y = 0; y < in[1] * f; ++y)
            for (std::size_t x = 0; x < in[2] * f; ++x) grad_input.at(c, y / f, x / f) += grad_output.at(c, y, x);
    return grad_input;
}

Tensor dense_backward_accumulate(const DenseCache& cache, const Tensor& weight, const Tensor& grad_output,
                                 Tensor& grad_weight, Tensor& grad_bias, bool need_input_grad) {
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (grad_output.size() != m || cache.input.size() != n)
        throw ContractError("dense backward: grad_output of " + std::to_string(grad_output.size()) +
                            " entries does not fit weight " + to_string(weight.shape()));
    if (grad_weight.shape() != weight.shape() || grad_bias.size() != m)
        throw ContractError("dense backward: gradient accumulators have the wrong shape");

    ConstVecMap go(grad_output.data(), m);
    ConstVecMap x(cache.input.data(), n);
    MatMap(grad_weight.data(), m, n).noalias() += go * x.transpose();
    VecMap(grad_bias.data(), m) += go;

    Tensor grad_input;
    if (need_input_grad) {
        grad_input = Tensor(cache.input_shape);
        VecMap(grad_input.data(), n).noalias() = ConstMatMap(weight.data(), m, n).transpose() * go;
    }
    return grad_input;
}

DenseGrads dense_backward(const DenseCache& cache, const Tensor& weight, const Tensor& grad_output) {
    DenseGrads grads{{}, Tensor::zeros_like(weight), Tensor({weight.dim(0)})};
    grads.input = dense_backward_accumulate(cache, weight, grad_output, grads.weight, grads.bias);
    return grads;
}

Tensor activation_backward(const ActivationCache& cache, const Tensor& grad_output) {
    if (grad_output.shape() != cache.output.shape())
        throw ContractError("activation backward: grad_output shape " + to_string(grad_output.shape()) +
                            " differs from forward output " + to_string(cache.output.shape()));
    Tensor grad_input = grad_output;
    const auto y = cache.output.values();
    auto g = grad_input.values();
    switch (cache.kind) {
    case Activation::none: break;
    case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!(y[i] > 0.0)) g[i] = 0.0;
        break;
    case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
        break;
    }
    return grad_input;
}

Tensor reshape_backward(const ReshapeCache& cache, const Tensor& grad_output) {
    if (grad_output.shape() != cache.output_shape)
        throw ContractError("reshape backward: grad_output shape " + to_string(grad_output.shape()) +
                            " differs from forward output " + to_string(cache.output_shape));
    return grad_output.reshaped(cache.input_shape);
}

LayerGrads backward(LayerKind kind, const LayerCache& cache, std::span<const Tensor> params,
                    const Tensor& grad_output) {
    if (kind_of(cache) != kind)
        throw ContractError("backward called as " + std::string(to_string(kind)) + " with a " +
                            std::string(to_string(kind_of(cache))) + " cache");
    auto expect_params = [&](std::size_t n) {
        if (params.size() != n)
            throw ContractError(std::string(to_string(kind)) + " backward expects " + std::to_string(n) +
                                " parameter tensors, got " + std::to_string(params.size()));
    };
    switch (kind) {
    case LayerKind::conv2d: {
        expect_params(2);
        auto g = conv2d_backward(std::get<Conv2dCache>(cache), params[0], grad_output);
        return {std::move(g.input), {std::move(g.kernels), std::move(g.bias)}};
    }
    case LayerKind::dense: {
        expect_params(2);
        auto g = dense_backward(std::get<DenseCache>(cache), params[0], grad_output);
        return {std::move(g.input), {std::move(g.weight), std::move(g.bias)}};
    }
    case LayerKind::maxpool:
        expect_params(0);
        return {maxpool_backward(std::get<MaxPoolCache>(cache), grad_output), {}};
    case LayerKind::upsample_nn:
        expect_params(0);
        return {upsample_nn_backward(std::get<UpsampleCache>(cache), grad_output), {}};
    case LayerKind::activation:
        expect_params(0);
        return {activation_backward(std::get<ActivationCache>(cache), grad_output), {}};
    case LayerKind::reshape:
        expect_params(0);
        return {reshape_backward(std::get<ReshapeCache>(cache), grad_output), {}};
    }
    throw ContractError("unknown layer kind");
}

} // namespace dcign
