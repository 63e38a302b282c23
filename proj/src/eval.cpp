#include "dcign/eval.hpp"

#include "dcign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace dcign {

MeanEncoder mean_encoder(const Network& net) {
    return [&net](const Tensor& image) { return encode_mean(net, image); };
}

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance, summed in sorted order so the result does not depend
// on the order of the inputs. Constant input gives exactly 0.
double variance_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    if (v.front() == v.back()) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

double pearson(std::span<const double> x, std::span<const double> y, bool& degenerate) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        degenerate = true;
        return 0.0;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

std::size_t factor_latent(const LatentLayout& layout, Factor factor) {
    if (!is_extrinsic(factor)) throw ConfigError("the intrinsic block has no single latent to correlate");
    const auto idx = layout.index_of(factor);
    if (!idx) throw ConfigError("layout has no latent for " + std::string(factor_name(factor)));
    return *idx;
}

std::vector<std::size_t> inactive_extrinsic(const LatentLayout& layout, Factor factor) {
    std::vector<std::size_t> out;
    for (const auto& slot : layout.extrinsic())
        if (slot.factor != factor) out.push_back(slot.index);
    return out;
}

EquivarianceReport correlate_points(Factor factor, std::size_t index, std::vector<EquivariancePoint> points) {
    EquivarianceReport report{factor, index, std::move(points), {}};
    std::vector<double> truth, inferred;
    for (const auto& p : report.points) {
        truth.push_back(p.truth);
        inferred.push_back(p.inferred);
    }
    report.correlation = correlate(truth, inferred);
    return report;
}

} // namespace

Correlation correlate(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw ContractError("correlation inputs differ in length: " + std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()));
    if (x.size() < 2) throw ContractError("correlation needs at least two points");
    Correlation c;
    c.pearson = pearson(x, y, c.degenerate);
    if (c.degenerate) return c;
    const auto rx = ranks(x), ry = ranks(y);
    bool unused = false;
    c.spearman = pearson(rx, ry, unused);
    return c;
}

EquivarianceReport equivariance_curve(const MeanEncoder& encoder, const LatentLayout& layout, Factor factor,
                                      std::span<const SceneParams> sweep, std::size_t resolution) {
    const std::size_t index = factor_latent(layout, factor);
    std::vector<EquivariancePoint> points;
    points.reserve(sweep.size());
    for (const auto& p : sweep) {
        SceneParams q = p;
        const auto& ref = sweep.front();
        switch (factor) {
        case Factor::azimuth: q.azimuth = ref.azimuth; break;
        case Factor::elevation: q.elevation = ref.elevation; break;
        case Factor::light_azimuth: q.light_azimuth = ref.light_azimuth; break;
        case Factor::intrinsic: break;
        }
        if (!(q == ref))
            throw ContractError("equivariance sweep varies more than " + std::string(factor_name(factor)));
        const auto mu = encoder(render(p, resolution));
        if (index >= mu.size()) throw ContractError("encoder output shorter than the layout");
        points.push_back({p.factor_value(factor), mu[index]});
    }
    return correlate_points(factor, index, std::move(points));
}

EquivarianceReport equivariance_pooled(const MeanEncoder& encoder, const LatentLayout& layout, Factor factor,
                                       std::span<const TransformBatch> batches, double lo, double hi) {
    const std::size_t index = factor_latent(layout, factor);
    std::vector<EquivariancePoint> points;
    for (const auto& batch : batches) {
        if (batch.active != factor) continue;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double truth = batch.params[i].factor_value(factor);
            if (truth < lo || truth > hi) continue;
            const auto mu = encoder(batch.images[i]);
            if (index >= mu.size()) throw ContractError("encoder output shorter than the layout");
            points.push_back({truth, mu[index]});
        }
    }
    return correlate_points(factor, index, std::move(points));
}

InvarianceReport invariance_score(const MeanEncoder& encoder, const LatentLayout& layout,
                                  std::span<const TransformBatch> batches) {
    const std::size_t dim = layout.total_dim();
    std::vector<std::vector<std::vector<double>>> codes;  // [batch][example][latent]
    std::vector<std::vector<double>> columns(dim);
    for (const auto& batch : batches) {
        auto& bc = codes.emplace_back();
        for (const auto& image : batch.images) {
            auto mu = encoder(image);
            if (mu.size() != dim)
                throw ContractError("encoder produced " + std::to_string(mu.size()) + " latents, layout has " +
                                    std::to_string(dim));
            for (std::size_t j = 0; j < dim; ++j) columns[j].push_back(mu[j]);
            bc.push_back(std::move(mu));
        }
    }
    std::vector<double> scale(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        if (columns[j].empty()) continue;
        const double sd = std::sqrt(variance_of(columns[j]));
        scale[j] = sd > 0.0 ? 1.0 / sd : 0.0;
    }
    auto batch_variance = [&](std::size_t b, std::size_t j) {
        std::vector<double> v;
        for (const auto& mu : codes[b]) v.push_back(mu[j] * scale[j]);
        return variance_of(std::move(v));
    };

    InvarianceReport report;
    double pooled_active = 0.0, pooled_inactive = 0.0;
    std::size_t pooled_n = 0;
    for (Factor f : all_factors) {
        if (is_extrinsic(f) && !layout.has(f)) continue;
        const auto active = layout.active_indices(f);
        const auto inactive = inactive_extrinsic(layout, f);
        InvarianceEntry entry{f, 0, 0.0, 0.0, 0.0};
        for (std::size_t b = 0; b < batches.size(); ++b) {
            if (batches[b].active != f || batches[b].size() < 2) continue;
            ++entry.batches;
            double a = 0.0;
            for (auto j : active) a += batch_variance(b, j);
            entry.active_variance += a / static_cast<double>(active.size());
            if (!inactive.empty()) {
                double s = 0.0;
                for (auto j : inactive) s += batch_variance(b, j);
                entry.inactive_variance += s / static_cast<double>(inactive.size());
            }
        }
        if (entry.batches == 0) continue;
        if (is_extrinsic(f)) {
            pooled_active += entry.active_variance;
            pooled_inactive += entry.inactive_variance;
            pooled_n += entry.batches;
        }
        entry.active_variance /= static_cast<double>(entry.batches);
        entry.inactive_variance /= static_cast<double>(entry.batches);
        entry.ratio = entry.active_variance > 0.0 ? entry.inactive_variance / entry.active_variance : 0.0;
        report.entries.push_back(entry);
    }
    if (pooled_n > 0 && pooled_active > 0.0) report.ratio = pooled_inactive / pooled_active;
    return report;
}

std::vector<std::vector<double>> sweep_codes(std::span<const double> base, std::size_t index, double from, double to,
                                             std::size_t steps) {
    if (index >= base.size())
        throw ContractError("latent index " + std::to_string(index) + " outside [0, " + std::to_string(base.size()) +
                            ")");
    if (steps == 0) throw ContractError("a sweep needs at least one step");
    std::vector<std::vector<double>> out;
    out.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<double> code(base.begin(), base.end());
        code[index] = steps == 1 ? from
                                 : from + (to - from) * static_cast<double>(s) / static_cast<double>(steps - 1);
        out.push_back(std::move(code));
    }
    return out;
}

std::vector<Tensor> latent_sweep_render(const Network& net, const Tensor& image, std::size_t index, double from,
                                        double to, std::size_t steps) {
    if (index >= net.latent_dim())
        throw ContractError("latent index " + std::to_string(index) + " outside [0, " +
                            std::to_string(net.latent_dim()) + ")");
    const auto mu = encode_mean(net, image);
    std::vector<Tensor> out;
    for (const auto& code : sweep_codes(mu, index, from, to, steps)) out.push_back(decode_image(net, code));
    return out;
}

std::size_t identify_entangled_latent(const MeanEncoder& encoder, std::span<const Tensor> images) {
    if (images.size() < 2) throw ContractError("identifying a latent needs at least two images");
    std::vector<std::vector<double>> columns;
    for (const auto& image : images) {
        const auto mu = encoder(image);
        if (columns.empty()) columns.resize(mu.size());
        if (mu.size() != columns.size()) throw ContractError("encoder output length changed within a batch");
        for (std::size_t j = 0; j < mu.size(); ++j) columns[j].push_back(mu[j]);
    }
    std::size_t best = 0;
    double best_var = -1.0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const double v = variance_of(columns[j]);
        if (v > best_var) {
            best_var = v;
            best = j;
        }
    }
    return best;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("MSE operands differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

NovelViewResult compare_novel_view(const Network& dcign, const Network& baseline, std::span<const SceneParams> sources,
                                   std::span<const double> target_azimuths) {
    if (dcign.config().resolution != baseline.config().resolution)
        throw ContractError("networks differ in input resolution");
    const std::size_t res = dcign.config().resolution;
    const std::size_t dcign_index = factor_latent(dcign.layout(), Factor::azimuth);
    const auto baseline_encoder = mean_encoder(baseline);

    NovelViewResult result;
    for (const auto& src : sources) {
        std::vector<Tensor> probe;
        for (int k = 0; k < 9; ++k) {
            SceneParams p = src;
            p.azimuth = -60.0 + 15.0 * k;
            probe.push_back(render(p, res));
        }
        const std::size_t baseline_index = identify_entangled_latent(baseline_encoder, probe);
        const Tensor source_image = render(src, res);
        auto dcign_code = encode_mean(dcign, source_image);
        auto baseline_code = encode_mean(baseline, source_image);
        for (double target : target_azimuths) {
            SceneParams truth_params = src;
            truth_params.azimuth = target;
            const Tensor truth = render(truth_params, res);
            auto d = dcign_code;
            d[dcign_index] = encode_mean(dcign, truth)[dcign_index];
            auto b = baseline_code;
            b[baseline_index] = encode_mean(baseline, truth)[baseline_index];
            result.dcign_mse += mean_squared_error(decode_image(dcign, d), truth);
            result.baseline_mse += mean_squared_error(decode_image(baseline, b), truth);
            ++result.pairs;
        }
    }
    if (result.pairs > 0) {
        result.dcign_mse /= static_cast<double>(result.pairs);
        result.baseline_mse /= static_cast<double>(result.pairs);
    }
    return result;
}

double reconstruction_mse(const Network& net, std::span<const Tensor> images) {
    if (images.empty()) throw ContractError("reconstruction MSE needs at least one image");
    double acc = 0.0;
    for (const auto& image : images) acc += mean_squared_error(decode_image(net, encode_mean(net, image)), image);
    return acc / static_cast<double>(images.size());
}

void write_equivariance_csv(std::ostream& out, const EquivarianceReport& report) {
    char buf[96];
    out << "truth,inferred\n";
    for (const auto& p : report.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.truth, p.inferred);
        out << buf;
    }
}

std::string format_invariance(const InvarianceReport& report) {
    std::string out = "factor,batches,active_variance,inactive_variance,ratio\n";
    char buf[192];
    for (const auto& e : report.entries) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g,%.17g\n", std::string(factor_name(e.factor)).c_str(),
                      e.batches, e.active_variance, e.inactive_variance, e.ratio);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "extrinsic,,,,%.17g\n", report.ratio);
    out += buf;
    return out;
}

EvalSummary evaluate(const Network& net, std::span<const TransformBatch> data, const Network* baseline,
                     const EvalOptions& options) {
    if (data.empty()) throw ContractError("evaluation needs at least one batch");
    const auto encoder = mean_encoder(net);
    const auto& layout = net.layout();
    EvalSummary summary;
    auto limit = [](Factor f) {
        return f == Factor::azimuth ? azimuth_limit : f == Factor::elevation ? elevation_limit : light_azimuth_limit;
    };
    auto count_points = [&](Factor f, double lo, double hi) {
        std::size_t n = 0;
        for (const auto& b : data)
            if (b.active == f)
                for (const auto& p : b.params) n += p.factor_value(f) >= lo && p.factor_value(f) <= hi;
        return n;
    };
    for (const auto& slot : layout.extrinsic()) {
        const double hi = slot.factor == Factor::azimuth ? options.azimuth_window : limit(slot.factor);
        if (count_points(slot.factor, -hi, hi) < 2) continue;
        summary.equivariance.push_back(equivariance_pooled(encoder, layout, slot.factor, data, -hi, hi));
        if (slot.factor == Factor::azimuth)
            summary.azimuth_full_range =
                equivariance_pooled(encoder, layout, slot.factor, data, -azimuth_limit, azimuth_limit);
    }
    summary.invariance = invariance_score(encoder, layout, data);

    std::vector<Tensor> images;
    for (const auto& b : data) images.insert(images.end(), b.images.begin(), b.images.end());
    summary.images = images.size();
    summary.reconstruction_mse = reconstruction_mse(net, images);

    if (const auto az = layout.index_of(Factor::azimuth)) {
        std::size_t hits = 0, total = 0;
        for (const auto& b : data) {
            if (b.active != Factor::azimuth) continue;
            ++total;
            hits += identify_entangled_latent(encoder, b.images) == *az;
        }
        if (total > 0) summary.azimuth_identification_rate = static_cast<double>(hits) / static_cast<double>(total);
    }

    if (baseline) {
        std::vector<SceneParams> sources;
        for (std::size_t i = 0; i < data.size() && sources.size() < options.novel_sources; ++i)
            sources.push_back(data[i].params.front());
        summary.novel_view = compare_novel_view(net, *baseline, sources, options.novel_targets);
    }
    return summary;
}

std::string format_summary(const EvalSummary& s) {
    std::string out;
    char buf[160];
    auto line = [&](const std::string& key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key.c_str(), v);
        out += buf;
    };
    auto equivariance = [&](const std::string& prefix, const EquivarianceReport& r) {
        line(prefix + ".points", static_cast<double>(r.points.size()));
        line(prefix + ".pearson", r.correlation.pearson);
        line(prefix + ".spearman", r.correlation.spearman);
        line(prefix + ".degenerate", r.correlation.degenerate ? 1.0 : 0.0);
    };
    for (const auto& r : s.equivariance) equivariance("equivariance." + std::string(factor_name(r.factor)), r);
    if (s.azimuth_full_range) equivariance("equivariance.azimuth_full_range", *s.azimuth_full_range);
    for (const auto& e : s.invariance.entries) {
        const std::string prefix = "invariance." + std::string(factor_name(e.factor));
        line(prefix + ".active_variance", e.active_variance);
        line(prefix + ".inactive_variance", e.inactive_variance);
        line(prefix + ".ratio", e.ratio);
    }
    line("invariance.extrinsic_ratio", s.invariance.ratio);
    line("reconstruction.images", static_cast<double>(s.images));
    line("reconstruction.mse", s.reconstruction_mse);
    if (s.azimuth_identification_rate) line("identification.azimuth_rate", *s.azimuth_identification_rate);
    if (s.novel_view) {
        line("novel_view.pairs", static_cast<double>(s.novel_view->pairs));
        line("novel_view.dcign_mse", s.novel_view->dcign_mse);
        line("novel_view.baseline_mse", s.novel_view->baseline_mse);
    }
    return out;
}

} // namespace dcign
