#pragma once

// Convolutional encoder / decoder pair with a diagonal-Gaussian latent code.
// The encoder ends in two dense heads emitting the posterior mean and the
// log of its diagonal variance; the decoder maps a code back to an image
// whose pixels lie in (0,1).

#include "dcign/factor.hpp"
#include "dcign/layers.hpp"
#include "dcign/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dcign {

/// Partition of the latent vector into single-neuron extrinsic factors and a
/// contiguous intrinsic block holding everything else.
class LatentLayout {
public:
    struct Slot {
        Factor factor;
        std::size_t index;
        friend bool operator==(const Slot&, const Slot&) = default;
    };

    LatentLayout() = default;
    LatentLayout(std::size_t total_dim, std::vector<Slot> extrinsic);

    // azimuth, elevation, light_azimuth at 0, 1, 2; intrinsic 3..total_dim-1.
    static LatentLayout standard(std::size_t total_dim);
    // One extrinsic factor at index 0; intrinsic 1..total_dim-1.
    static LatentLayout single_extrinsic(std::size_t total_dim, Factor factor = Factor::azimuth);

    std::size_t total_dim() const noexcept { return total_dim_; }
    const std::vector<Slot>& extrinsic() const noexcept { return extrinsic_; }
    std::size_t intrinsic_begin() const noexcept { return intrinsic_begin_; }
    std::size_t intrinsic_end() const noexcept { return intrinsic_end_; }

    bool has(Factor f) const;
    std::optional<std::size_t> index_of(Factor f) const;
    // Latent indices a batch varying `f` is allowed to move. Throws
    // ConfigError when the layout has no slot for f.
    std::vector<std::size_t> active_indices(Factor f) const;

    friend bool operator==(const LatentLayout&, const LatentLayout&) = default;

private:
    std::size_t total_dim_ = 0;
    std::vector<Slot> extrinsic_;
    std::size_t intrinsic_begin_ = 0;
    std::size_t intrinsic_end_ = 0;
};

struct ConvSpec {
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    Activation activation = Activation::relu;
    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct PoolSpec {
    std::size_t window = 2;
    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct UnpoolSpec {
    std::size_t factor = 2;
    friend bool operator==(const UnpoolSpec&, const UnpoolSpec&) = default;
};

struct DenseSpec {
    std::size_t out = 1;
    Activation activation = Activation::relu;
    friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

struct ReshapeSpec {
    std::size_t channels = 1, height = 1, width = 1;
    friend bool operator==(const ReshapeSpec&, const ReshapeSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec, DenseSpec, UnpoolSpec, ReshapeSpec>;

inline constexpr double he_uniform_scale = 2.449489742783178;  // sqrt(6)

struct InitSpec {
    enum class Distribution { uniform, normal };
    // Weights ~ U(-scale/sqrt(fan_in), scale/sqrt(fan_in)) or N(0, (scale/sqrt(fan_in))^2); biases 0.
    Distribution distribution = Distribution::uniform;
    double scale = he_uniform_scale;
    friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

struct NetworkConfig {
    std::size_t resolution = 32;  // square grayscale input
    std::vector<LayerSpec> encoder;
    std::vector<LayerSpec> decoder;
    LatentLayout layout;
    InitSpec init;
    std::uint64_t seed = 0;

    // 32x32 default: conv5x5x32, pool, conv5x5x64, pool, dense 256 in the
    // encoder; the decoder mirrors it with dense layers, nearest-neighbour
    // unpooling and 5x5 convolutions ending in a sigmoid.
    static NetworkConfig desk_scale(std::size_t resolution = 32, LatentLayout layout = LatentLayout::standard(16),
                                    std::uint64_t seed = 0);

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct LatentDistribution {
    std::vector<double> mu;
    std::vector<double> logvar;  // natural log of the diagonal covariance
};

using Gradients = std::vector<Tensor>;

class Network {
public:
    struct Layer {
        LayerSpec spec;
        Shape input_shape;
        Shape output_shape;
        int weight = -1;  // index into parameters(), -1 when the layer has none
        int bias = -1;
    };

    explicit Network(NetworkConfig config);

    const NetworkConfig& config() const noexcept { return config_; }
    const LatentLayout& layout() const noexcept { return config_.layout; }
    std::size_t latent_dim() const noexcept { return config_.layout.total_dim(); }
    Shape image_shape() const { return {1, config_.resolution, config_.resolution}; }

    std::vector<Tensor>& parameters() noexcept { return params_; }
    const std::vector<Tensor>& parameters() const noexcept { return params_; }
    const std::vector<std::string>& parameter_names() const noexcept { return names_; }
    std::size_t parameter_count() const;

    const std::vector<Layer>& encoder_layers() const noexcept { return encoder_; }
    const std::vector<Layer>& decoder_layers() const noexcept { return decoder_; }
    const Layer& mu_head() const noexcept { return mu_head_; }
    const Layer& logvar_head() const noexcept { return logvar_head_; }

    // Replaces all parameters; shapes must match the current ones exactly.
    void set_parameters(std::vector<Tensor> params);

private:
    NetworkConfig config_;
    std::vector<Layer> encoder_;
    Layer mu_head_;
    Layer logvar_head_;
    std::vector<Layer> decoder_;
    std::vector<Tensor> params_;
    std::vector<std::string> names_;
};

// Canonical JSON text for a config (sorted keys, full double precision) and
// its inverse. Parsing failures raise FormatError; invalid content ConfigError.
std::string network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(std::string_view text);

// Validates the layer chain and initializes parameters from config.seed.
// Throws ConfigError naming the offending layer when shapes do not chain.
Network build_network(const NetworkConfig& config);

Gradients zero_gradients(const Network& net);

struct ForwardOp {
    LayerCache cache;
    int weight = -1;
    int bias = -1;
};

struct EncoderTrace {
    std::vector<ForwardOp> body;
    DenseCache features;  // input of both heads
};

struct DecoderTrace {
    std::vector<ForwardOp> ops;
};

std::pair<LatentDistribution, EncoderTrace> encode(const Network& net, const Tensor& image);
std::pair<Tensor, DecoderTrace> decode(const Network& net, std::span<const double> z);

// Posterior mean only; no caches retained.
std::vector<double> encode_mean(const Network& net, const Tensor& image);
Tensor decode_image(const Network& net, std::span<const double> z);

// z = mu + exp(logvar / 2) * noise
std::vector<double> reparameterize(const LatentDistribution& dist, std::span<const double> noise);

struct ReparamGrads {
    std::vector<double> mu;
    std::vector<double> logvar;
};
ReparamGrads reparameterize_backward(const LatentDistribution& dist, std::span<const double> noise,
                                     std::span<const double> grad_z);

// Accumulates parameter gradients into grads and returns dLoss/dz.
std::vector<double> decoder_backward(const Network& net, const DecoderTrace& trace, const Tensor& grad_image,
                                     Gradients& grads);

// Accumulates parameter gradients into grads. Returns dLoss/dimage when
// need_input_grad is set, an empty tensor otherwise.
Tensor encoder_backward(const Network& net, const EncoderTrace& trace, std::span<const double> grad_mu,
                        std::span<const double> grad_logvar, Gradients& grads, bool need_input_grad = false);

} // namespace dcign
