#pragma once

// Clamped mini-batch training. Each batch varies a single scene factor; the
// latents not assigned to that factor are replaced by their batch mean before
// decoding, and their reconstruction gradient is replaced by a small pull
// towards that mean. Baseline mode trains the same network with plain SGVB.

#include "dcign/factor.hpp"
#include "dcign/loss.hpp"
#include "dcign/network.hpp"
#include "dcign/optimizer.hpp"
#include "dcign/scene.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dcign {

enum class TrainMode { disentangled, baseline };

std::string_view to_string(TrainMode mode);
std::optional<TrainMode> parse_train_mode(std::string_view text);

struct TrainConfig {
    LatentLayout layout = LatentLayout::standard(16);
    BatchRatio ratio;  // azimuth:elevation:light:intrinsic, default 1:1:1:10
    double invariance_scale = 0.01;
    OptimHyper optim;
    std::size_t total_batches = 3000;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::disentangled;
    Likelihood likelihood = Likelihood::bernoulli;
    std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints

    void validate() const;
};

struct StepMetrics {
    std::uint64_t step = 0;
    Factor factor = Factor::intrinsic;
    LossBreakdown loss;  // mean over the batch
};

struct TrainMetrics {
    std::vector<StepMetrics> steps;

    // Mean reconstruction loss over consecutive windows of `window` steps
    // (a trailing partial window is dropped).
    std::vector<double> smoothed_reconstruction(std::size_t window) const;
};

// Writes "step,factor,reconstruction,kl,total" lines.
void write_metrics_header(std::ostream& out);
void write_metrics_line(std::ostream& out, const StepMetrics& m);

// Every row of each inactive column replaced by that column's batch mean.
// z is [B,D]; throws ContractError for B < 2, an empty active set or an
// out-of-range index.
Tensor clamp_latents(const Tensor& z, std::span<const std::size_t> active);

// Inactive columns: scale * (z - column mean), discarding the decoder
// gradient. Active columns: decoder gradient passed through unchanged.
Tensor invariance_gradients(const Tensor& z, std::span<const std::size_t> active, const Tensor& decoder_grad_z,
                            double scale = 0.01);

// One optimizer step on a transform batch. noise is [B,D] standard-normal.
StepMetrics train_step(Network& net, const TransformBatch& batch, OptimState& optim, const TrainConfig& config,
                       const Tensor& noise);
// Draws the noise from rng (row-major, one draw per example and latent).
StepMetrics train_step(Network& net, const TransformBatch& batch, OptimState& optim, const TrainConfig& config,
                       Rng& rng);

// Produces training batches. Returning nullopt ends training early.
class BatchSource {
public:
    virtual ~BatchSource() = default;
    virtual std::optional<TransformBatch> next() = 0;
};

// Renders batches on the fly: select_batch_type then make_batch, batch b
// drawn from stream mix_seed(seed, b) exactly as make_dataset does.
class GeneratedBatchSource : public BatchSource {
public:
    explicit GeneratedBatchSource(DatasetSpec spec);
    std::optional<TransformBatch> next() override;

private:
    DatasetSpec spec_;
    std::uint64_t index_ = 0;
};

class DatasetBatchSource : public BatchSource {
public:
    explicit DatasetBatchSource(const std::filesystem::path& path);
    std::optional<TransformBatch> next() override;
    std::size_t resolution() const;

private:
    std::unique_ptr<class DatasetReader> reader_;
};

struct TrainResult {
    TrainMetrics metrics;
    std::uint64_t steps_done = 0;
    bool exhausted = false;  // the source ran dry before total_batches
    Rng noise_rng;
};

struct TrainHooks {
    std::function<void(const StepMetrics&)> on_step;
    // Called every checkpoint_every steps except after the last one; the
    // final state is the caller's to persist.
    std::function<void(const Network&, const OptimState&, std::uint64_t step, const Rng&)> on_checkpoint;
};

// Runs config.total_batches steps (fewer if the source is exhausted). The
// sampling noise comes from its own stream mix_seed(config.seed, 0x5eed).
TrainResult train(Network& net, OptimState& optim, const TrainConfig& config, BatchSource& source,
                  const TrainHooks& hooks = {});

} // namespace dcign
