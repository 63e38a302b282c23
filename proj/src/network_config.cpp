#include "dcign/network.hpp"

#include "dcign/errors.hpp"

#include <json.hpp>

namespace dcign {

NetworkConfig NetworkConfig::desk_scale(std::size_t resolution, LatentLayout layout, std::uint64_t seed) {
    if (resolution < 4 || resolution % 4 != 0)
        throw ConfigError("desk-scale config needs a resolution divisible by 4, got " + std::to_string(resolution));
    const std::size_t bottleneck = resolution / 4;
    NetworkConfig c;
    c.resolution = resolution;
    c.layout = std::move(layout);
    c.seed = seed;
    c.encoder = {ConvSpec{32, 5, 1, 2, Activation::relu}, PoolSpec{2}, ConvSpec{64, 5, 1, 2, Activation::relu},
                 PoolSpec{2}, DenseSpec{256, Activation::relu}};
    c.decoder = {DenseSpec{256, Activation::relu},
                 DenseSpec{64 * bottleneck * bottleneck, Activation::relu},
                 ReshapeSpec{64, bottleneck, bottleneck},
                 UnpoolSpec{2},
                 ConvSpec{32, 5, 1, 2, Activation::relu},
                 UnpoolSpec{2},
                 ConvSpec{1, 5, 1, 2, Activation::sigmoid}};
    return c;
}

namespace {

using nlohmann::json;

Activation parse_activation(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + s + "'");
}

json layer_to_json(const LayerSpec& spec) {
    struct Visitor {
        json operator()(const ConvSpec& s) const {
            return {{"type", "conv"}, {"out_channels", s.out_channels}, {"kernel", s.kernel}, {"stride", s.stride},
                    {"padding", s.padding}, {"activation", std::string(to_string(s.activation))}};
        }
        json operator()(const PoolSpec& s) const { return {{"type", "pool"}, {"window", s.window}}; }
        json operator()(const DenseSpec& s) const {
            return {{"type", "dense"}, {"out", s.out}, {"activation", std::string(to_string(s.activation))}};
        }
        json operator()(const UnpoolSpec& s) const { return {{"type", "unpool"}, {"factor", s.factor}}; }
        json operator()(const ReshapeSpec& s) const {
            return {{"type", "reshape"}, {"channels", s.channels}, {"height", s.height}, {"width", s.width}};
        }
    };
    return std::visit(Visitor{}, spec);
}

LayerSpec layer_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "conv")
        return ConvSpec{j.at("out_channels").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                        j.value("stride", std::size_t{1}), j.value("padding", std::size_t{0}),
                        parse_activation(j.value("activation", std::string("relu")))};
    if (type == "pool") return PoolSpec{j.value("window", std::size_t{2})};
    if (type == "dense")
        return DenseSpec{j.at("out").get<std::size_t>(), parse_activation(j.value("activation", std::string("relu")))};
    if (type == "unpool") return UnpoolSpec{j.value("factor", std::size_t{2})};
    if (type == "reshape")
        return ReshapeSpec{j.at("channels").get<std::size_t>(), j.at("height").get<std::size_t>(),
                           j.at("width").get<std::size_t>()};
    throw ConfigError("unknown layer type '" + type + "'");
}

} // namespace

std::string network_config_to_json(const NetworkConfig& config) {
    json layout_extrinsic = json::array();
    for (const auto& slot : config.layout.extrinsic())
        layout_extrinsic.push_back({{"factor", std::string(factor_name(slot.factor))}, {"index", slot.index}});
    json enc = json::array(), dec = json::array();
    for (const auto& l : config.encoder) enc.push_back(layer_to_json(l));
    for (const auto& l : config.decoder) dec.push_back(layer_to_json(l));
    json j = {
        {"resolution", config.resolution},
        {"seed", config.seed},
        {"init",
         {{"distribution", config.init.distribution == InitSpec::Distribution::uniform ? "uniform" : "normal"},
          {"scale", config.init.scale}}},
        {"layout", {{"total_dim", config.layout.total_dim()}, {"extrinsic", layout_extrinsic}}},
        {"encoder", enc},
        {"decoder", dec},
    };
    return j.dump();
}

NetworkConfig network_config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("network config is not valid JSON: ") + e.what());
    }
    try {
        NetworkConfig c;
        c.resolution = j.at("resolution").get<std::size_t>();
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("init")) {
            const auto& init = j.at("init");
            const auto dist = init.value("distribution", std::string("uniform"));
            if (dist != "uniform" && dist != "normal") throw ConfigError("unknown init distribution '" + dist + "'");
            c.init.distribution =
                dist == "uniform" ? InitSpec::Distribution::uniform : InitSpec::Distribution::normal;
            c.init.scale = init.value("scale", he_uniform_scale);
        }
        const auto& layout = j.at("layout");
        std::vector<LatentLayout::Slot> slots;
        for (const auto& s : layout.at("extrinsic")) {
            const auto name = s.at("factor").get<std::string>();
            const auto factor = parse_factor(name);
            if (!factor) throw ConfigError("unknown factor '" + name + "'");
            slots.push_back({*factor, s.at("index").get<std::size_t>()});
        }
        c.layout = LatentLayout(layout.at("total_dim").get<std::size_t>(), std::move(slots));
        for (const auto& l : j.at("encoder")) c.encoder.push_back(layer_from_json(l));
        for (const auto& l : j.at("decoder")) c.decoder.push_back(layer_from_json(l));
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("network config has a missing or mistyped field: ") + e.what());
    }
}

} // namespace dcign
