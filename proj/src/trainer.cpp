#include "dcign/trainer.hpp"

#include "dcign/dataset.hpp"
#include "dcign/errors.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace dcign {

std::string_view to_string(TrainMode mode) {
    return mode == TrainMode::disentangled ? "disentangled" : "baseline";
}

std::optional<TrainMode> parse_train_mode(std::string_view text) {
    if (text == "disentangled") return TrainMode::disentangled;
    if (text == "baseline") return TrainMode::baseline;
    return std::nullopt;
}

void TrainConfig::validate() const {
    ratio.validate();
    if (!(invariance_scale > 0.0) || !std::isfinite(invariance_scale))
        throw ConfigError("invariance_scale must be > 0");
    optim.validate();
}

std::vector<double> TrainMetrics::smoothed_reconstruction(std::size_t window) const {
    if (window == 0) throw ContractError("smoothing window must be >= 1");
    std::vector<double> out;
    for (std::size_t start = 0; start + window <= steps.size(); start += window) {
        double acc = 0.0;
        for (std::size_t i = start; i < start + window; ++i) acc += steps[i].loss.reconstruction;
        out.push_back(acc / static_cast<double>(window));
    }
    return out;
}

void write_metrics_header(std::ostream& out) { out << "step,factor,reconstruction,kl,total\n"; }

void write_metrics_line(std::ostream& out, const StepMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%s,%.17g,%.17g,%.17g\n", m.step,
                  std::string(factor_name(m.factor)).c_str(), m.loss.reconstruction, m.loss.kl, m.loss.total);
    out << buf;
}

namespace {

std::vector<bool> active_mask(std::size_t dim, std::span<const std::size_t> active) {
    if (active.empty()) throw ContractError("active latent set is empty");
    std::vector<bool> mask(dim, false);
    for (auto i : active) {
        if (i >= dim)
            throw ContractError("active latent index " + std::to_string(i) + " outside [0, " + std::to_string(dim) +
                                ")");
        mask[i] = true;
    }
    return mask;
}

void require_matrix(const Tensor& z, std::string_view what) {
    if (z.rank() != 2) throw ContractError(std::string(what) + " must be a [B,D] matrix, got " + to_string(z.shape()));
}

double column_mean(const Tensor& z, std::size_t col) {
    const std::size_t rows = z.dim(0), cols = z.dim(1);
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += z[r * cols + col];
    return acc / static_cast<double>(rows);
}

} // namespace

Tensor clamp_latents(const Tensor& z, std::span<const std::size_t> active) {
    require_matrix(z, "latent batch");
    const std::size_t rows = z.dim(0), cols = z.dim(1);
    if (rows < 2) throw ContractError("clamping needs at least 2 examples, got " + std::to_string(rows));
    const auto mask = active_mask(cols, active);
    Tensor out = z;
    for (std::size_t c = 0; c < cols; ++c) {
        if (mask[c]) continue;
        const double mean = column_mean(z, c);
        for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = mean;
    }
    return out;
}

Tensor invariance_gradients(const Tensor& z, std::span<const std::size_t> active, const Tensor& decoder_grad_z,
                            double scale) {
    require_matrix(z, "latent batch");
    if (decoder_grad_z.shape() != z.shape())
        throw ContractError("decoder gradient " + to_string(decoder_grad_z.shape()) + " does not match latents " +
                            to_string(z.shape()));
    const std::size_t rows = z.dim(0), cols = z.dim(1);
    const auto mask = active_mask(cols, active);
    Tensor out = decoder_grad_z;
    for (std::size_t c = 0; c < cols; ++c) {
        if (mask[c]) continue;
        const double mean = column_mean(z, c);
        for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = scale * (z[r * cols + c] - mean);
    }
    return out;
}

StepMetrics train_step(Network& net, const TransformBatch& batch, OptimState& optim, const TrainConfig& config,
                       const Tensor& noise) {
    batch.validate();
    if (!(config.layout == net.layout())) throw ContractError("training layout differs from the network layout");
    const std::size_t B = batch.size();
    const std::size_t D = net.latent_dim();
    if (noise.shape() != Shape{B, D})
        throw ContractError("noise must be " + to_string(Shape{B, D}) + ", got " + to_string(noise.shape()));
    const bool clamp = config.mode == TrainMode::disentangled;
    const auto active = clamp ? net.layout().active_indices(batch.active) : std::vector<std::size_t>{};

    std::vector<LatentDistribution> dists(B);
    std::vector<EncoderTrace> enc(B);
    Tensor z({B, D});
    for (std::size_t b = 0; b < B; ++b) {
        if (batch.images[b].shape() != net.image_shape())
            throw ContractError("batch image " + to_string(batch.images[b].shape()) + " does not fit network input " +
                                to_string(net.image_shape()));
        auto [dist, trace] = encode(net, batch.images[b]);
        const auto sample = reparameterize(dist, {noise.data() + b * D, D});
        std::copy(sample.begin(), sample.end(), z.data() + b * D);
        dists[b] = std::move(dist);
        enc[b] = std::move(trace);
    }
    const Tensor z_dec = clamp ? clamp_latents(z, active) : z;

    Gradients grads = zero_gradients(net);
    Tensor grad_z({B, D});
    std::vector<TotalLoss> losses;
    losses.reserve(B);
    StepMetrics metrics{optim.step + 1, batch.active, {}};
    for (std::size_t b = 0; b < B; ++b) {
        auto [x_hat, trace] = decode(net, {z_dec.data() + b * D, D});
        losses.push_back(total_loss(batch.images[b], x_hat, dists[b], config.likelihood));
        const auto g = decoder_backward(net, trace, losses.back().grad_x_hat, grads);
        std::copy(g.begin(), g.end(), grad_z.data() + b * D);
        metrics.loss.reconstruction += losses.back().breakdown.reconstruction;
        metrics.loss.kl += losses.back().breakdown.kl;
        metrics.loss.total += losses.back().breakdown.total;
    }
    if (clamp) grad_z = invariance_gradients(z, active, grad_z, config.invariance_scale);

    for (std::size_t b = 0; b < B; ++b) {
        auto rg = reparameterize_backward(dists[b], {noise.data() + b * D, D}, {grad_z.data() + b * D, D});
        for (std::size_t i = 0; i < D; ++i) {
            rg.mu[i] += losses[b].grad_mu[i];
            rg.logvar[i] += losses[b].grad_logvar[i];
        }
        encoder_backward(net, enc[b], rg.mu, rg.logvar, grads);
    }

    const double inv_b = 1.0 / static_cast<double>(B);
    for (auto& g : grads) g *= inv_b;
    rmsprop_step(net.parameters(), grads, optim, config.optim);

    metrics.loss.reconstruction *= inv_b;
    metrics.loss.kl *= inv_b;
    metrics.loss.total *= inv_b;
    return metrics;
}

StepMetrics train_step(Network& net, const TransformBatch& batch, OptimState& optim, const TrainConfig& config,
                       Rng& rng) {
    Tensor noise({batch.size(), net.latent_dim()});
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = standard_normal(rng);
    return train_step(net, batch, optim, config, noise);
}

GeneratedBatchSource::GeneratedBatchSource(DatasetSpec spec) : spec_(std::move(spec)) { spec_.ratio.validate(); }

std::optional<TransformBatch> GeneratedBatchSource::next() {
    if (spec_.n_batches != 0 && index_ >= spec_.n_batches) return std::nullopt;
    return dataset_batch(spec_, index_++);
}

DatasetBatchSource::DatasetBatchSource(const std::filesystem::path& path)
    : reader_(std::make_unique<DatasetReader>(path)) {}

std::optional<TransformBatch> DatasetBatchSource::next() { return reader_->next(); }

std::size_t DatasetBatchSource::resolution() const { return reader_->header().resolution; }

TrainResult train(Network& net, OptimState& optim, const TrainConfig& config, BatchSource& source,
                  const TrainHooks& hooks) {
    config.validate();
    if (!(config.layout == net.layout())) throw ContractError("training layout differs from the network layout");
    TrainResult result{{}, 0, false, Rng(mix_seed(config.seed, 0x5eed))};
    while (result.steps_done < config.total_batches) {
        auto batch = source.next();
        if (!batch) {
            result.exhausted = true;
            break;
        }
        auto m = train_step(net, *batch, optim, config, result.noise_rng);
        m.step = optim.step;
        ++result.steps_done;
        if (hooks.on_step) hooks.on_step(m);
        result.metrics.steps.push_back(m);
        if (hooks.on_checkpoint && config.checkpoint_every != 0 && result.steps_done % config.checkpoint_every == 0 &&
            result.steps_done != config.total_batches)
            hooks.on_checkpoint(net, optim, optim.step, result.noise_rng);
    }
    return result;
}

} // namespace dcign
