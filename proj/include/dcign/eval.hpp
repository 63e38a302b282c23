#pragma once

// Disentanglement analyses on a trained encoder/decoder: how faithfully the
// designated latents track their scene factors, how quiet the other
// extrinsic latents stay, latent sweeps, and novel-view re-rendering
// against an entangled baseline.

#include "dcign/network.hpp"
#include "dcign/scene.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcign {

// Image -> posterior mean. Lets the analyses run on stub encoders.
using MeanEncoder = std::function<std::vector<double>(const Tensor&)>;
MeanEncoder mean_encoder(const Network& net);

struct Correlation {
    double pearson = 0.0;
    double spearman = 0.0;
    bool degenerate = false;  // one side constant; both coefficients reported as 0
};

// Spearman uses average ranks for ties. Throws ContractError on a length
// mismatch or fewer than two points.
Correlation correlate(std::span<const double> x, std::span<const double> y);

struct EquivariancePoint {
    double truth = 0.0;
    double inferred = 0.0;
};

struct EquivarianceReport {
    Factor factor = Factor::azimuth;
    std::size_t latent_index = 0;
    std::vector<EquivariancePoint> points;
    Correlation correlation;
};

// Renders each scene, encodes it and pairs the factor's ground truth with
// mu at the factor's latent. The sweep may only vary `factor`.
EquivarianceReport equivariance_curve(const MeanEncoder& encoder, const LatentLayout& layout, Factor factor,
                                      std::span<const SceneParams> sweep, std::size_t resolution);

// Pools every batch tagged with `factor` whose ground truth lies in
// [lo, hi] into one scatter and correlates it.
EquivarianceReport equivariance_pooled(const MeanEncoder& encoder, const LatentLayout& layout, Factor factor,
                                       std::span<const TransformBatch> batches, double lo, double hi);

struct InvarianceEntry {
    Factor factor = Factor::azimuth;
    std::size_t batches = 0;
    double active_variance = 0.0;    // mean over batches (and over the block for intrinsic)
    double inactive_variance = 0.0;  // mean over batches and inactive extrinsic latents
    double ratio = 0.0;              // inactive / active, 0 when active is 0
};

struct InvarianceReport {
    std::vector<InvarianceEntry> entries;  // one per factor present, in factor order
    double ratio = 0.0;                    // pooled over extrinsic-factor batches
};

// Latents are standardized by their standard deviation over all encoded
// images first (a constant latent stays 0). Variances are population
// variances within each batch.
InvarianceReport invariance_score(const MeanEncoder& encoder, const LatentLayout& layout,
                                  std::span<const TransformBatch> batches);

// `steps` codes equal to `base` except at `index`, linearly spaced from
// `from` to `to`; steps == 1 yields `from` alone.
std::vector<std::vector<double>> sweep_codes(std::span<const double> base, std::size_t index, double from, double to,
                                             std::size_t steps);

std::vector<Tensor> latent_sweep_render(const Network& net, const Tensor& image, std::size_t index, double from,
                                        double to, std::size_t steps);

// Latent with the largest variance of mu across the batch, lowest index on
// ties. Throws ContractError for fewer than two images.
std::size_t identify_entangled_latent(const MeanEncoder& encoder, std::span<const Tensor> images);

double mean_squared_error(const Tensor& a, const Tensor& b);

struct NovelViewResult {
    double dcign_mse = 0.0;
    double baseline_mse = 0.0;
    std::size_t pairs = 0;
};

// For every source scene and target azimuth: encode the source, overwrite
// the azimuth latent with the value the same model infers for the scene
// rendered at the target azimuth, decode, and compare with that render. Only
// the one azimuth latent is transferred, so a model that keeps pose out of
// its other latents gains the most. The baseline's azimuth latent is
// identified per source scene from a probe sweep of nine azimuths across
// [-60, 60].
NovelViewResult compare_novel_view(const Network& dcign, const Network& baseline, std::span<const SceneParams> sources,
                                   std::span<const double> target_azimuths);

// Per-pixel MSE of decode(encode-mu) against the input, averaged over images.
double reconstruction_mse(const Network& net, std::span<const Tensor> images);

struct EvalOptions {
    double azimuth_window = 60.0;  // azimuth equivariance uses [-w, w]
    std::size_t novel_sources = 20;
    std::vector<double> novel_targets{-60.0, -30.0, 0.0, 30.0, 60.0};
};

struct EvalSummary {
    std::vector<EquivarianceReport> equivariance;  // extrinsic factors with data, azimuth windowed
    std::optional<EquivarianceReport> azimuth_full_range;
    InvarianceReport invariance;
    double reconstruction_mse = 0.0;
    std::size_t images = 0;
    // Fraction of azimuth batches whose highest-variance latent is the
    // layout's azimuth latent.
    std::optional<double> azimuth_identification_rate;
    std::optional<NovelViewResult> novel_view;
};

// Runs every analysis over held-out batches. Novel-view sources are the
// first example of the first `novel_sources` batches; the comparison runs
// only when a baseline is given.
EvalSummary evaluate(const Network& net, std::span<const TransformBatch> data, const Network* baseline = nullptr,
                     const EvalOptions& options = {});

// "key = value" lines, numbers at full precision.
std::string format_summary(const EvalSummary& summary);

void write_equivariance_csv(std::ostream& out, const EquivarianceReport& report);
std::string format_invariance(const InvarianceReport& report);

} // namespace dcign
