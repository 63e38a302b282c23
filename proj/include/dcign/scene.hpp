#pragma once

// Deterministic procedural renderer for factored synthetic scenes. A "head"
// is a Lambertian ellipsoid with a nose protrusion, darker eye discs and a
// mouth band; a "chair" is a union of boxes. The camera orbits the object
// orthographically; the light is a directional source fixed in the object
// frame.

#include "dcign/factor.hpp"
#include "dcign/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dcign {

enum class SceneKind : std::uint8_t { head = 0, chair = 1 };

inline constexpr std::size_t intrinsic_dim = 4;

inline constexpr double azimuth_limit = 90.0;
inline constexpr double elevation_limit = 30.0;
inline constexpr double light_azimuth_limit = 90.0;

// Chair scenes keep elevation and light fixed; only azimuth is extrinsic.
inline constexpr double chair_elevation = 20.0;
inline constexpr double chair_light_azimuth = 30.0;

struct SceneParams {
    SceneKind kind = SceneKind::head;
    double azimuth = 0.0;        // degrees, positive moves the camera to the viewer's right
    double elevation = 0.0;      // degrees, positive looks down from above
    double light_azimuth = 0.0;  // degrees, same frame as azimuth
    // head: axis ratio, nose length, eye spacing, base albedo
    // chair: seat width, back height, leg length, arms (> 0 means present)
    std::array<double, intrinsic_dim> intrinsic{};

    // Throws DomainError when a field leaves its range.
    void validate() const;

    double factor_value(Factor f) const;
    friend bool operator==(const SceneParams&, const SceneParams&) = default;
};

// [1,resolution,resolution] image with values in [0,1], background 0.
// Values are rounded to float precision so they persist losslessly.
Tensor render(const SceneParams& params, std::size_t resolution);

struct TransformBatch {
    std::vector<Tensor> images;
    std::vector<SceneParams> params;
    Factor active = Factor::intrinsic;

    std::size_t size() const noexcept { return images.size(); }
    // Throws ContractError unless the batch has >= 2 examples and only the
    // active factor's fields differ between them.
    void validate() const;
};

// Inactive factors are drawn once per batch; the active one per example.
TransformBatch make_batch(Rng& rng, Factor active, std::size_t batch_size = 20, std::size_t resolution = 32,
                          SceneKind kind = SceneKind::head);

// Uniform draw of every field within its range.
SceneParams random_scene(Rng& rng, SceneKind kind = SceneKind::head);

struct DatasetSpec {
    std::size_t n_batches = 0;
    BatchRatio ratio;
    std::size_t resolution = 32;
    std::size_t batch_size = 20;
    SceneKind kind = SceneKind::head;
    std::uint64_t seed = 0;
};

// Batch b is generated from its own stream mix_seed(seed, b): one batch-type
// draw followed by make_batch. Writes a dataset file (see dataset.hpp).
void make_dataset(const std::filesystem::path& path, const DatasetSpec& spec);

// The b-th batch make_dataset would write.
TransformBatch dataset_batch(const DatasetSpec& spec, std::uint64_t b);

} // namespace dcign
