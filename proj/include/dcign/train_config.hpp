#pragma once

// Flat "key = value" training configuration. Blank lines and lines starting
// with '#' are ignored. Keys:
//
//   mode              disentangled | baseline
//   ratio             a:e:l:i batch-type weights
//   invariance_scale  > 0
//   learning_rate, sq_decay, weight_decay, epsilon
//   total_batches     training steps
//   seed              seeds initialization, batch rendering and sampling
//   likelihood        bernoulli | gaussian
//   checkpoint_every  0 disables intermediate checkpoints
//   latent_dim        total latent size
//   extrinsic         comma-separated factors given single latents, in order
//                     (e.g. "azimuth,elevation,light_azimuth" or "azimuth")

#include "dcign/trainer.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dcign {

struct TrainSettings {
    TrainConfig config;
    std::size_t latent_dim = 16;
    std::vector<Factor> extrinsic{Factor::azimuth, Factor::elevation, Factor::light_azimuth};

    // Throws ConfigError naming the key on an unknown key or bad value.
    void set(std::string_view key, std::string_view value);

    // Config with its layout built from latent_dim and extrinsic, validated.
    TrainConfig resolve() const;
};

// `origin` prefixes error messages ("file:line: ...").
TrainSettings parse_train_settings(std::string_view text, std::string_view origin = "config");
std::string format_train_settings(const TrainSettings& settings);

} // namespace dcign
