#pragma once

// Scene factors and the stochastic batch-type schedule shared by the scene
// generator and the trainer.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dcign/random.hpp"

namespace dcign {

enum class Factor : std::uint8_t { azimuth = 0, elevation = 1, light_azimuth = 2, intrinsic = 3 };

inline constexpr std::array<Factor, 4> all_factors{Factor::azimuth, Factor::elevation, Factor::light_azimuth,
                                                   Factor::intrinsic};
inline constexpr std::array<Factor, 3> extrinsic_factors{Factor::azimuth, Factor::elevation,
                                                         Factor::light_azimuth};

std::string_view factor_name(Factor f);
std::optional<Factor> parse_factor(std::string_view name);
bool is_extrinsic(Factor f);

/// Relative frequency of each batch type, indexed by Factor.
struct BatchRatio {
    std::array<double, 4> weights{1.0, 1.0, 1.0, 10.0};

    double weight(Factor f) const { return weights[static_cast<std::size_t>(f)]; }
    double total() const { return weights[0] + weights[1] + weights[2] + weights[3]; }
    double probability(Factor f) const { return weight(f) / total(); }

    // Weights must be finite and non-negative with a positive sum.
    void validate() const;

    // "a:e:l:i", e.g. "1:1:1:10".
    static BatchRatio parse(std::string_view text);
    std::string to_string() const;
};

// Draws a batch type with probability proportional to its ratio entry.
// Consumes exactly one uniform draw from rng.
Factor select_batch_type(Rng& rng, const BatchRatio& ratio);

} // namespace dcign
