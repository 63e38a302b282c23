#include "dcign/network.hpp"

#include "dcign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dcign {

// ---------------------------------------------------------------- layout

LatentLayout::LatentLayout(std::size_t total_dim, std::vector<Slot> extrinsic)
    : total_dim_(total_dim), extrinsic_(std::move(extrinsic)) {
    if (total_dim_ == 0) throw ConfigError("latent layout needs at least one dimension");
    std::set<Factor> seen_factors;
    std::vector<bool> taken(total_dim_, false);
    for (const auto& slot : extrinsic_) {
        if (!is_extrinsic(slot.factor)) throw ConfigError("intrinsic cannot occupy a single extrinsic slot");
        if (!seen_factors.insert(slot.factor).second)
            throw ConfigError("latent layout names " + std::string(factor_name(slot.factor)) + " twice");
        if (slot.index >= total_dim_)
            throw ConfigError("latent index " + std::to_string(slot.index) + " outside [0, " +
                              std::to_string(total_dim_) + ")");
        if (taken[slot.index])
            throw ConfigError("latent index " + std::to_string(slot.index) + " assigned twice");
        taken[slot.index] = true;
    }
    const auto first_free = std::find(taken.begin(), taken.end(), false);
    if (first_free == taken.end()) throw ConfigError("latent layout leaves no intrinsic dimensions");
    const auto after = std::find(first_free, taken.end(), true);
    if (std::find(after, taken.end(), false) != taken.end())
        throw ConfigError("intrinsic latent indices must form one contiguous range");
    intrinsic_begin_ = static_cast<std::size_t>(first_free - taken.begin());
    intrinsic_end_ = static_cast<std::size_t>(after - taken.begin());
}

LatentLayout LatentLayout::standard(std::size_t total_dim) {
    return LatentLayout(total_dim,
                        {{Factor::azimuth, 0}, {Factor::elevation, 1}, {Factor::light_azimuth, 2}});
}

LatentLayout LatentLayout::single_extrinsic(std::size_t total_dim, Factor factor) {
    return LatentLayout(total_dim, {{factor, 0}});
}

bool LatentLayout::has(Factor f) const { return f == Factor::intrinsic || index_of(f).has_value(); }

std::optional<std::size_t> LatentLayout::index_of(Factor f) const {
    for (const auto& slot : extrinsic_)
        if (slot.factor == f) return slot.index;
    return std::nullopt;
}

std::vector<std::size_t> LatentLayout::active_indices(Factor f) const {
    if (f == Factor::intrinsic) {
        std::vector<std::size_t> out;
        for (std::size_t i = intrinsic_begin_; i < intrinsic_end_; ++i) out.push_back(i);
        return out;
    }
    if (auto idx = index_of(f)) return {*idx};
    throw ConfigError("latent layout has no slot for " + std::string(factor_name(f)));
}

// ---------------------------------------------------------------- building

namespace {

struct ShapeWalker {
    const char* section;
    std::size_t index;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(std::string(section) + " layer " + std::to_string(index) + ": " + what);
    }

    Shape operator()(const ConvSpec& s, const Shape& in) const {
        if (in.size() != 3) fail("convolution needs a [C,H,W] input, got " + to_string(in));
        if (s.out_channels == 0 || s.kernel == 0 || s.stride == 0) fail("convolution extents must be positive");
        if (s.kernel > in[1] + 2 * s.padding || s.kernel > in[2] + 2 * s.padding)
            fail("kernel " + std::to_string(s.kernel) + " larger than padded input " + to_string(in));
        return {s.out_channels, (in[1] + 2 * s.padding - s.kernel) / s.stride + 1,
                (in[2] + 2 * s.padding - s.kernel) / s.stride + 1};
    }
    Shape operator()(const PoolSpec& s, const Shape& in) const {
        if (in.size() != 3) fail("pooling needs a [C,H,W] input, got " + to_string(in));
        if (s.window == 0 || in[1] % s.window || in[2] % s.window)
            fail("pool window " + std::to_string(s.window) + " does not divide " + to_string(in));
        return {in[0], in[1] / s.window, in[2] / s.window};
    }
    Shape operator()(const DenseSpec& s, const Shape&) const {
        if (s.out == 0) fail("dense width must be positive");
        return {s.out};
    }
    Shape operator()(const UnpoolSpec& s, const Shape& in) const {
        if (in.size() != 3) fail("unpooling needs a [C,H,W] input, got " + to_string(in));
        if (s.factor == 0) fail("unpool factor must be positive");
        return {in[0], in[1] * s.factor, in[2] * s.factor};
    }
    Shape operator()(const ReshapeSpec& s, const Shape& in) const {
        const Shape out{s.channels, s.height, s.width};
        if (s.channels == 0 || s.height == 0 || s.width == 0) fail("reshape extents must be positive");
        if (element_count(out) != element_count(in))
            fail("reshape to " + to_string(out) + " does not preserve the " + std::to_string(element_count(in)) +
                 " elements of " + to_string(in));
        return out;
    }
};

Activation activation_of(const LayerSpec& spec) {
    if (auto c = std::get_if<ConvSpec>(&spec)) return c->activation;
    if (auto d = std::get_if<DenseSpec>(&spec)) return d->activation;
    return Activation::none;
}

Shape weight_shape(const LayerSpec& spec, const Shape& in) {
    if (auto c = std::get_if<ConvSpec>(&spec)) return {c->out_channels, in[0], c->kernel, c->kernel};
    if (auto d = std::get_if<DenseSpec>(&spec)) return {d->out, element_count(in)};
    return {};
}

} // namespace

Network::Network(NetworkConfig config) : config_(std::move(config)) {
    if (config_.resolution == 0) throw ConfigError("input resolution must be positive");
    if (config_.layout.total_dim() == 0) throw ConfigError("network config has no latent layout");
    if (!(config_.init.scale > 0.0) || !std::isfinite(config_.init.scale))
        throw ConfigError("init scale must be positive");

    auto add_param = [&](Shape shape, std::string name) {
        params_.emplace_back(std::move(shape));
        names_.push_back(std::move(name));
        return static_cast<int>(params_.size() - 1);
    };
    auto plan = [&](const std::vector<LayerSpec>& specs, const char* section, Shape shape,
                    std::vector<Layer>& out) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            Layer layer{specs[i], shape, std::visit([&](const auto& s) { return ShapeWalker{section, i}(s, shape); },
                                                    specs[i]),
                        -1, -1};
            if (auto w = weight_shape(specs[i], shape); !w.empty()) {
                const std::string prefix = std::string(section) + "." + std::to_string(i);
                const std::size_t out_dim = w[0];
                layer.weight = add_param(std::move(w), prefix + ".weight");
                layer.bias = add_param({out_dim}, prefix + ".bias");
            }
            shape = layer.output_shape;
            out.push_back(std::move(layer));
        }
        return shape;
    };

    const Shape features = plan(config_.encoder, "encoder", image_shape(), encoder_);
    const std::size_t latent = config_.layout.total_dim();
    const std::size_t feature_dim = element_count(features);
    mu_head_ = Layer{DenseSpec{latent, Activation::none}, features, {latent}, -1, -1};
    mu_head_.weight = add_param({latent, feature_dim}, "mu_head.weight");
    mu_head_.bias = add_param({latent}, "mu_head.bias");
    logvar_head_ = Layer{DenseSpec{latent, Activation::none}, features, {latent}, -1, -1};
    logvar_head_.weight = add_param({latent, feature_dim}, "logvar_head.weight");
    logvar_head_.bias = add_param({latent}, "logvar_head.bias");

    const Shape out = plan(config_.decoder, "decoder", {latent}, decoder_);
    if (out != image_shape())
        throw ConfigError("decoder layer " + std::to_string(config_.decoder.size() - 1) + ": output " +
                          to_string(out) + " differs from image shape " + to_string(image_shape()));
    const auto last_param = std::find_if(decoder_.rbegin(), decoder_.rend(), [](const Layer& l) { return l.weight >= 0; });
    if (last_param == decoder_.rend() || activation_of(last_param->spec) != Activation::sigmoid)
        throw ConfigError("decoder layer " +
                          std::to_string(last_param == decoder_.rend()
                                             ? 0
                                             : static_cast<std::size_t>(decoder_.rend() - last_param - 1)) +
                          ": final parametric layer must use a sigmoid activation");

    Rng rng(config_.seed);
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& t = params_[p];
        if (t.rank() == 1) continue;  // biases start at zero
        const std::size_t fan_in = t.size() / t.dim(0);
        const double bound = config_.init.scale / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.values())
            v = config_.init.distribution == InitSpec::Distribution::uniform ? uniform(rng, -bound, bound)
                                                                             : bound * standard_normal(rng);
    }
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

void Network::set_parameters(std::vector<Tensor> params) {
    if (params.size() != params_.size())
        throw ContractError("expected " + std::to_string(params_.size()) + " parameter tensors, got " +
                            std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].shape() != params_[i].shape())
            throw ContractError("parameter " + names_[i] + " has shape " + to_string(params[i].shape()) +
                                ", expected " + to_string(params_[i].shape()));
    params_ = std::move(params);
}

Network build_network(const NetworkConfig& config) { return Network(config); }

Gradients zero_gradients(const Network& net) {
    Gradients grads;
    grads.reserve(net.parameters().size());
    for (const auto& p : net.parameters()) grads.push_back(Tensor::zeros_like(p));
    return grads;
}

// ---------------------------------------------------------------- forward

namespace {

Tensor run_layers(const Network& net, const std::vector<Network::Layer>& layers, Tensor x,
                  std::vector<ForwardOp>* trace) {
    const auto& params = net.parameters();
    for (const auto& layer : layers) {
        const Activation act = activation_of(layer.spec);
        if (auto c = std::get_if<ConvSpec>(&layer.spec)) {
            Tensor y = conv2d(x, params[layer.weight], params[layer.bias], c->stride, c->padding);
            if (trace) trace->push_back({Conv2dCache{std::move(x), c->stride, c->padding, y.shape()}, layer.weight, layer.bias});
            x = std::move(y);
        } else if (auto p = std::get_if<PoolSpec>(&layer.spec)) {
            auto [y, cache] = maxpool(x, p->window);
            if (trace) trace->push_back({std::move(cache)});
            x = std::move(y);
        } else if (std::holds_alternative<DenseSpec>(layer.spec)) {
            Tensor y = dense(x, params[layer.weight], params[layer.bias]);
            if (trace) {
                Shape in_shape = x.shape();
                trace->push_back({DenseCache{x.reshaped({x.size()}), std::move(in_shape)}, layer.weight, layer.bias});
            }
            x = std::move(y);
        } else if (auto u = std::get_if<UnpoolSpec>(&layer.spec)) {
            Tensor y = upsample_nn(x, u->factor);
            if (trace) trace->push_back({UpsampleCache{x.shape(), u->factor}});
            x = std::move(y);
        } else if (auto r = std::get_if<ReshapeSpec>(&layer.spec)) {
            Shape out{r->channels, r->height, r->width};
            if (trace) trace->push_back({ReshapeCache{x.shape(), out}});
            x = x.reshaped(std::move(out));
        }
        if (act != Activation::none) {
            x = activation(x, act);
            if (trace) trace->push_back({ActivationCache{act, x}});
        }
    }
    return x;
}

Tensor backprop_ops(const Network& net, const std::vector<ForwardOp>& ops, Tensor grad, Gradients& grads,
                    bool need_input_grad) {
    const auto& params = net.parameters();
    for (std::size_t i = ops.size(); i-- > 0;) {
        const auto& op = ops[i];
        const bool want_input = need_input_grad || i > 0;
        if (auto c = std::get_if<Conv2dCache>(&op.cache)) {
            grad = conv2d_backward_accumulate(*c, params[op.weight], grad, grads[op.weight], grads[op.bias],
                                              want_input);
        } else if (auto d = std::get_if<DenseCache>(&op.cache)) {
            grad = dense_backward_accumulate(*d, params[op.weight], grad, grads[op.weight], grads[op.bias],
                                             want_input);
        } else {
            grad = backward(kind_of(op.cache), op.cache, {}, grad).input;
        }
    }
    return grad;
}

void check_image(const Network& net, const Tensor& image) {
    if (image.shape() != net.image_shape())
        throw DimensionError("image shape " + to_string(image.shape()) + " differs from network input " +
                             to_string(net.image_shape()));
}

void check_latent(const Network& net, std::size_t n, const char* what) {
    if (n != net.latent_dim())
        throw DimensionError(std::string(what) + " has length " + std::to_string(n) + ", latent dimension is " +
                             std::to_string(net.latent_dim()));
}

LatentDistribution heads(const Network& net, const Tensor& features) {
    const auto& p = net.parameters();
    const Tensor mu = dense(features, p[net.mu_head().weight], p[net.mu_head().bias]);
    const Tensor logvar = dense(features, p[net.logvar_head().weight], p[net.logvar_head().bias]);
    return {{mu.values().begin(), mu.values().end()}, {logvar.values().begin(), logvar.values().end()}};
}

} // namespace

std::pair<LatentDistribution, EncoderTrace> encode(const Network& net, const Tensor& image) {
    check_image(net, image);
    EncoderTrace trace;
    Tensor features = run_layers(net, net.encoder_layers(), image, &trace.body);
    LatentDistribution dist = heads(net, features);
    Shape shape = features.shape();
    trace.features = DenseCache{features.reshaped({features.size()}), std::move(shape)};
    return {std::move(dist), std::move(trace)};
}

std::vector<double> encode_mean(const Network& net, const Tensor& image) {
    check_image(net, image);
    const Tensor features = run_layers(net, net.encoder_layers(), image, nullptr);
    const auto& p = net.parameters();
    const Tensor mu = dense(features, p[net.mu_head().weight], p[net.mu_head().bias]);
    return {mu.values().begin(), mu.values().end()};
}

std::pair<Tensor, DecoderTrace> decode(const Network& net, std::span<const double> z) {
    check_latent(net, z.size(), "latent code");
    DecoderTrace trace;
    Tensor image = run_layers(net, net.decoder_layers(), Tensor::vector({z.begin(), z.end()}), &trace.ops);
    return {std::move(image), std::move(trace)};
}

Tensor decode_image(const Network& net, std::span<const double> z) {
    check_latent(net, z.size(), "latent code");
    return run_layers(net, net.decoder_layers(), Tensor::vector({z.begin(), z.end()}), nullptr);
}

std::vector<double> reparameterize(const LatentDistribution& dist, std::span<const double> noise) {
    if (noise.size() != dist.mu.size() || dist.logvar.size() != dist.mu.size())
        throw DimensionError("noise of length " + std::to_string(noise.size()) + " for a latent of length " +
                             std::to_string(dist.mu.size()));
    std::vector<double> z(dist.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = dist.mu[i] + std::exp(0.5 * dist.logvar[i]) * noise[i];
    return z;
}

ReparamGrads reparameterize_backward(const LatentDistribution& dist, std::span<const double> noise,
                                     std::span<const double> grad_z) {
    const std::size_t n = dist.mu.size();
    if (noise.size() != n || grad_z.size() != n || dist.logvar.size() != n)
        throw DimensionError("reparameterize backward: length mismatch");
    ReparamGrads g{{grad_z.begin(), grad_z.end()}, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) g.logvar[i] = grad_z[i] * 0.5 * std::exp(0.5 * dist.logvar[i]) * noise[i];
    return g;
}

std::vector<double> decoder_backward(const Network& net, const DecoderTrace& trace, const Tensor& grad_image,
                                     Gradients& grads) {
    check_image(net, grad_image);
    const Tensor g = backprop_ops(net, trace.ops, grad_image, grads, true);
    return {g.values().begin(), g.values().end()};
}

Tensor encoder_backward(const Network& net, const EncoderTrace& trace, std::span<const double> grad_mu,
                        std::span<const double> grad_logvar, Gradients& grads, bool need_input_grad) {
    check_latent(net, grad_mu.size(), "mu gradient");
    check_latent(net, grad_logvar.size(), "logvar gradient");
    const auto& p = net.parameters();
    const auto& mu = net.mu_head();
    const auto& lv = net.logvar_head();
    Tensor g = dense_backward_accumulate(trace.features, p[mu.weight], Tensor::vector({grad_mu.begin(), grad_mu.end()}),
                                         grads[mu.weight], grads[mu.bias]);
    g += dense_backward_accumulate(trace.features, p[lv.weight],
                                   Tensor::vector({grad_logvar.begin(), grad_logvar.end()}), grads[lv.weight],
                                   grads[lv.bias]);
    return backprop_ops(net, trace.body, std::move(g), grads, need_input_grad);
}

} // namespace dcign
