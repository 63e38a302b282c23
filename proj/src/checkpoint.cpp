#include "dcign/checkpoint.hpp"

#include "dcign/binary_io.hpp"
#include "dcign/errors.hpp"

#include <sstream>

namespace dcign {

namespace {

constexpr std::string_view magic{"DCIGNCKP", 8};
constexpr std::string_view end_magic{"DCIGNEND", 8};
constexpr std::uint32_t max_rank = 8;

void write_tensor(BinaryWriter& w, std::string_view name, const Tensor& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) w.u64(e);
    for (double v : t.values()) w.f64(v);
}

std::pair<std::string, Tensor> read_tensor(BinaryReader& r, const Shape& expected, const std::string& what) {
    std::string name = r.str(4096);
    const auto rank = r.u32();
    if (rank == 0 || rank > max_rank) throw CorruptionError(what + " has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) e = r.u64();
    if (shape != expected)
        throw CorruptionError(what + " has shape " + to_string(shape) + ", config implies " + to_string(expected));
    Tensor t(shape);
    for (auto& v : t.values()) v = r.f64();
    return {std::move(name), std::move(t)};
}

} // namespace

Checkpoint make_checkpoint(const Network& net, const OptimState* optimizer, std::uint64_t step, const Rng* rng) {
    Checkpoint c;
    c.config = net.config();
    c.names = net.parameter_names();
    c.parameters = net.parameters();
    if (optimizer) c.optimizer = *optimizer;
    c.step = step;
    if (rng) {
        std::ostringstream s;
        s << *rng;
        c.rng_state = s.str();
    }
    return c;
}

Network restore_network(const Checkpoint& checkpoint) {
    Network net(checkpoint.config);
    net.set_parameters(checkpoint.parameters);
    return net;
}

std::string serialize_checkpoint(const Checkpoint& c) {
    if (c.names.size() != c.parameters.size()) throw ContractError("checkpoint names and parameters differ in count");
    std::ostringstream out(std::ios::binary);
    BinaryWriter w(out);
    w.raw(magic);
    w.u32(checkpoint_version);
    w.str(network_config_to_json(c.config));
    w.u64(c.step);
    w.str(c.rng_state);
    w.u32(static_cast<std::uint32_t>(c.parameters.size()));
    for (std::size_t i = 0; i < c.parameters.size(); ++i) write_tensor(w, c.names[i], c.parameters[i]);
    w.u8(c.optimizer ? 1 : 0);
    if (c.optimizer) {
        w.u64(c.optimizer->step);
        w.u32(static_cast<std::uint32_t>(c.optimizer->mean_square.size()));
        for (const auto& t : c.optimizer->mean_square) write_tensor(w, "", t);
    }
    w.raw(end_magic);
    return std::move(out).str();
}

Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& origin) {
    std::istringstream in{std::string(bytes), std::ios::binary};
    BinaryReader r(in, origin);
    if (bytes.size() < magic.size() || r.raw(magic.size()) != magic)
        throw FormatError(origin + " is not a checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != checkpoint_version)
        throw VersionError(origin + " has checkpoint version " + std::to_string(version) +
                           ", this build reads version " + std::to_string(checkpoint_version));

    Checkpoint c;
    const std::string config_text = r.str();
    try {
        c.config = network_config_from_json(config_text);
    } catch (const Error& e) {
        throw CorruptionError(origin + ": embedded network config is invalid: " + e.what());
    }
    // The config determines every tensor shape that may follow.
    const Network skeleton(c.config);
    c.step = r.u64();
    c.rng_state = r.str(1u << 20);

    const auto count = r.u32();
    if (count != skeleton.parameters().size())
        throw CorruptionError(origin + " holds " + std::to_string(count) + " tensors, config implies " +
                              std::to_string(skeleton.parameters().size()));
    for (std::size_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(r, skeleton.parameters()[i].shape(), origin + " tensor " + std::to_string(i));
        if (name != skeleton.parameter_names()[i])
            throw CorruptionError(origin + " tensor " + std::to_string(i) + " is named '" + name + "', expected '" +
                                  skeleton.parameter_names()[i] + "'");
        c.names.push_back(std::move(name));
        c.parameters.push_back(std::move(t));
    }
    const auto has_optim = r.u8();
    if (has_optim > 1) throw CorruptionError(origin + " has an invalid optimizer flag");
    if (has_optim) {
        OptimState state;
        state.step = r.u64();
        const auto n = r.u32();
        if (n != count) throw CorruptionError(origin + " optimizer state does not match the parameter count");
        for (std::size_t i = 0; i < n; ++i)
            state.mean_square.push_back(
                read_tensor(r, skeleton.parameters()[i].shape(), origin + " optimizer tensor " + std::to_string(i)).second);
        c.optimizer = std::move(state);
    }
    if (r.raw(end_magic.size()) != end_magic) throw CorruptionError(origin + " is missing its end marker");
    if (!r.at_end()) throw CorruptionError(origin + " has trailing bytes");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path), path.string());
}

} // namespace dcign
