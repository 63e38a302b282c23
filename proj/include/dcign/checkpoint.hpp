#pragma once

// Versioned checkpoint container:
//
//   magic "DCIGNCKP" | u32 version
//   str network config (canonical JSON) | u64 training step | str rng state
//   u32 tensor count, per tensor: str name | u32 rank | u64 x rank extents | f64 values
//   u8 has optimizer state; if 1: u64 optimizer step, u32 count, tensors as above (unnamed: empty name)
//   magic "DCIGNEND"
//
// Strings are u32 length + bytes; integers and doubles little-endian.

#include "dcign/network.hpp"
#include "dcign/optimizer.hpp"
#include "dcign/random.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dcign {

inline constexpr std::uint32_t checkpoint_version = 1;

struct Checkpoint {
    NetworkConfig config;  // carries the latent layout
    std::vector<std::string> names;
    std::vector<Tensor> parameters;
    std::optional<OptimState> optimizer;
    std::uint64_t step = 0;
    std::string rng_state;  // textual engine state, empty when not recorded
};

Checkpoint make_checkpoint(const Network& net, const OptimState* optimizer = nullptr, std::uint64_t step = 0,
                           const Rng* rng = nullptr);
Network restore_network(const Checkpoint& checkpoint);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws FormatError (magic), VersionError (version), CorruptionError
// (truncation, trailing bytes, shapes inconsistent with the config).
Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace dcign
