// Command-line entry points: dataset generation, training, evaluation,
// latent sweeps, scene rendering and the inference service.

#include "dcign/binary_io.hpp"
#include "dcign/checkpoint.hpp"
#include "dcign/dataset.hpp"
#include "dcign/errors.hpp"
#include "dcign/eval.hpp"
#include "dcign/image_io.hpp"
#include "dcign/service.hpp"
#include "dcign/train_config.hpp"
#include "dcign/trainer.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace dcign;

namespace {

SceneKind parse_kind(const std::string& text) {
    if (text == "head") return SceneKind::head;
    if (text == "chair") return SceneKind::chair;
    throw ConfigError("scene kind must be head or chair, got '" + text + "'");
}

struct GenDataArgs {
    fs::path out;
    std::size_t batches = 3000;
    std::string ratio = "1:1:1:10";
    std::size_t resolution = 32;
    std::size_t batch_size = 20;
    std::string kind = "head";
    std::uint64_t seed = 0;
};

int gen_data(const GenDataArgs& a) {
    DatasetSpec spec;
    spec.n_batches = a.batches;
    spec.ratio = BatchRatio::parse(a.ratio);
    spec.resolution = a.resolution;
    spec.batch_size = a.batch_size;
    spec.kind = parse_kind(a.kind);
    spec.seed = a.seed;
    make_dataset(a.out, spec);
    return 0;
}

struct TrainArgs {
    fs::path out;
    std::optional<fs::path> config;
    std::optional<fs::path> data;
    std::optional<fs::path> metrics;
    std::map<std::string, std::string> overrides;
    std::size_t resolution = 32;
    std::size_t batch_size = 20;
    std::string kind = "head";
};

int train_command(const TrainArgs& a) {
    TrainSettings settings;
    if (a.config) settings = parse_train_settings(read_file(*a.config), a.config->string());
    for (const auto& [key, value] : a.overrides) settings.set(key, value);
    const TrainConfig config = settings.resolve();

    std::unique_ptr<BatchSource> source;
    std::size_t resolution = a.resolution;
    if (a.data) {
        auto ds = std::make_unique<DatasetBatchSource>(*a.data);
        resolution = ds->resolution();
        source = std::move(ds);
    } else {
        DatasetSpec spec;
        spec.n_batches = config.total_batches;
        spec.ratio = config.ratio;
        spec.resolution = resolution;
        spec.batch_size = a.batch_size;
        spec.kind = parse_kind(a.kind);
        spec.seed = config.seed;
        source = std::make_unique<GeneratedBatchSource>(spec);
    }

    Network net = build_network(NetworkConfig::desk_scale(resolution, config.layout, config.seed));
    OptimState optim = OptimState::zeros_like(net.parameters());

    std::ofstream metrics;
    if (a.metrics) {
        metrics.open(*a.metrics, std::ios::binary | std::ios::trunc);
        if (!metrics) throw IoError("cannot open metrics log " + a.metrics->string());
        write_metrics_header(metrics);
    }
    TrainHooks hooks;
    hooks.on_step = [&](const StepMetrics& m) {
        if (metrics.is_open()) write_metrics_line(metrics, m);
    };
    hooks.on_checkpoint = [&](const Network& n, const OptimState& o, std::uint64_t step, const Rng& rng) {
        save_checkpoint(fs::path(a.out.string() + ".step" + std::to_string(step)), make_checkpoint(n, &o, step, &rng));
    };
    const auto result = train(net, optim, config, *source, hooks);
    save_checkpoint(a.out, make_checkpoint(net, &optim, optim.step, &result.noise_rng));
    if (metrics.is_open() && !metrics.flush()) throw IoError("failed writing metrics log");
    if (result.exhausted)
        std::fprintf(stderr, "dcign: note: data ran out after %llu of %zu steps; checkpoint holds the partial run\n",
                     static_cast<unsigned long long>(result.steps_done), config.total_batches);
    return 0;
}

struct EvalArgs {
    fs::path checkpoint;
    fs::path data;
    fs::path out;
    std::optional<fs::path> baseline;
    std::size_t novel_sources = 20;
};

int eval_command(const EvalArgs& a) {
    const Network net = restore_network(load_checkpoint(a.checkpoint));
    std::optional<Network> baseline;
    if (a.baseline) baseline.emplace(restore_network(load_checkpoint(*a.baseline)));
    const auto data = read_dataset(a.data);
    if (data.empty()) throw ContractError("dataset " + a.data.string() + " holds no batches");
    if (data.front().images.front().shape() != net.image_shape())
        throw ContractError("dataset resolution does not match the checkpoint");

    EvalOptions options;
    options.novel_sources = a.novel_sources;
    const auto summary = evaluate(net, data, baseline ? &*baseline : nullptr, options);

    fs::create_directories(a.out);
    write_file(a.out / "report.txt", format_summary(summary));
    write_file(a.out / "invariance.csv", format_invariance(summary.invariance));
    auto write_curve = [&](const std::string& name, const EquivarianceReport& r) {
        std::ofstream f(a.out / ("equivariance_" + name + ".csv"), std::ios::binary | std::ios::trunc);
        write_equivariance_csv(f, r);
        if (!f) throw IoError("failed writing equivariance curve " + name);
    };
    for (const auto& r : summary.equivariance) write_curve(std::string(factor_name(r.factor)), r);
    if (summary.azimuth_full_range) write_curve("azimuth_full_range", *summary.azimuth_full_range);
    std::fputs(format_summary(summary).c_str(), stdout);
    return 0;
}

struct SweepArgs {
    fs::path checkpoint;
    fs::path image;
    fs::path out;
    std::size_t index = 0;
    std::optional<double> from;
    double to = 15.0;
    std::size_t steps = 7;
};

int sweep_command(const SweepArgs& a) {
    const Network net = restore_network(load_checkpoint(a.checkpoint));
    const Tensor image = load_png(a.image);
    if (image.shape() != net.image_shape())
        throw ContractError("image " + a.image.string() + " is " + to_string(image.shape()) + ", model expects " +
                            to_string(net.image_shape()));
    if (a.index >= net.latent_dim())
        throw ContractError("latent index " + std::to_string(a.index) + " outside [0, " +
                            std::to_string(net.latent_dim()) + ")");
    // A single step with no explicit start reproduces the plain reconstruction.
    const double from = a.from ? *a.from : a.steps == 1 ? encode_mean(net, image)[a.index] : -15.0;
    const auto frames = latent_sweep_render(net, image, a.index, from, a.to, a.steps);
    save_png(a.out, image_grid(frames, frames.size()));
    return 0;
}

struct RenderArgs {
    fs::path out;
    std::string kind = "head";
    double azimuth = 0.0, elevation = 0.0, light_azimuth = 0.0;
    std::vector<double> intrinsic{0.0, 0.0, 0.0, 0.0};
    std::size_t resolution = 32;
};

int render_command(const RenderArgs& a) {
    SceneParams p;
    p.kind = parse_kind(a.kind);
    p.azimuth = a.azimuth;
    p.elevation = a.elevation;
    p.light_azimuth = a.light_azimuth;
    if (a.intrinsic.size() != intrinsic_dim)
        throw ConfigError("--intrinsic takes " + std::to_string(intrinsic_dim) + " values");
    std::copy(a.intrinsic.begin(), a.intrinsic.end(), p.intrinsic.begin());
    save_png(a.out, render(p, a.resolution));
    return 0;
}

struct ServeArgs {
    fs::path checkpoint;
    std::string host = "127.0.0.1";
    int port = 8080;
};

HttpServer* active_server = nullptr;

int serve_command(const ServeArgs& a) {
    const InferenceService service(restore_network(load_checkpoint(a.checkpoint)));
    HttpServer server(service);
    active_server = &server;
    std::signal(SIGINT, [](int) {
        if (active_server) active_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (active_server) active_server->stop();
    });
    std::fprintf(stderr, "dcign: serving on %s:%d\n", a.host.c_str(), a.port);
    server.run(a.host, a.port);
    active_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train and query a disentangled convolutional autoencoder", "dcign"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "render a dataset of single-factor batches");
    gen_cmd->add_option("--out", gen.out, "dataset file")->required();
    gen_cmd->add_option("--batches", gen.batches, "number of batches");
    gen_cmd->add_option("--ratio", gen.ratio, "azimuth:elevation:light:intrinsic batch weights");
    gen_cmd->add_option("--resolution", gen.resolution, "image side length");
    gen_cmd->add_option("--batch-size", gen.batch_size, "images per batch");
    gen_cmd->add_option("--kind", gen.kind, "head or chair");
    gen_cmd->add_option("--seed", gen.seed, "random seed");

    TrainArgs tr;
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, ratio, likelihood, extrinsic;
    std::optional<double> lr, inv_scale;
    std::optional<std::size_t> latent_dim, checkpoint_every;
    auto* train_cmd = app.add_subcommand("train", "train a network and write a checkpoint");
    train_cmd->add_option("--out", tr.out, "checkpoint file")->required();
    train_cmd->add_option("--config", tr.config, "key = value training config");
    train_cmd->add_option("--data", tr.data, "dataset file; batches are rendered on the fly when absent");
    train_cmd->add_option("--metrics", tr.metrics, "metrics log (CSV)");
    train_cmd->add_option("--steps", steps, "training steps (total_batches)");
    train_cmd->add_option("--seed", seed, "random seed");
    train_cmd->add_option("--mode", mode, "disentangled or baseline");
    train_cmd->add_option("--ratio", ratio, "batch-type weights a:e:l:i");
    train_cmd->add_option("--learning-rate", lr, "rmsprop learning rate");
    train_cmd->add_option("--invariance-scale", inv_scale, "scale of the invariance gradient");
    train_cmd->add_option("--likelihood", likelihood, "bernoulli or gaussian");
    train_cmd->add_option("--latent-dim", latent_dim, "latent size");
    train_cmd->add_option("--extrinsic", extrinsic, "comma-separated extrinsic factors");
    train_cmd->add_option("--checkpoint-every", checkpoint_every, "write <out>.step<N> every N steps");
    train_cmd->add_option("--resolution", tr.resolution, "image side length when rendering on the fly");
    train_cmd->add_option("--batch-size", tr.batch_size, "images per batch when rendering on the fly");
    train_cmd->add_option("--kind", tr.kind, "head or chair when rendering on the fly");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on held-out data");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--data", ev.data, "held-out dataset file")->required();
    eval_cmd->add_option("--out", ev.out, "report directory")->required();
    eval_cmd->add_option("--baseline", ev.baseline, "baseline checkpoint for the novel-view comparison");
    eval_cmd->add_option("--novel-sources", ev.novel_sources, "source scenes in the novel-view comparison");

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "decode a sweep over one latent of an encoded image");
    sweep_cmd->add_option("--checkpoint", sw.checkpoint, "checkpoint file")->required();
    sweep_cmd->add_option("--image", sw.image, "input PNG")->required();
    sweep_cmd->add_option("--out", sw.out, "output PNG grid")->required();
    sweep_cmd->add_option("--index", sw.index, "latent index")->required();
    sweep_cmd->add_option("--from", sw.from, "first latent value (default -15, or the encoded value for one step)");
    sweep_cmd->add_option("--to", sw.to, "last latent value");
    sweep_cmd->add_option("--steps", sw.steps, "number of frames")->check(CLI::PositiveNumber);

    RenderArgs rd;
    auto* render_cmd = app.add_subcommand("render", "render one scene to PNG");
    render_cmd->add_option("--out", rd.out, "output PNG")->required();
    render_cmd->add_option("--kind", rd.kind, "head or chair");
    render_cmd->add_option("--azimuth", rd.azimuth, "degrees");
    render_cmd->add_option("--elevation", rd.elevation, "degrees");
    render_cmd->add_option("--light-azimuth", rd.light_azimuth, "degrees");
    render_cmd->add_option("--intrinsic", rd.intrinsic, "four coefficients in [-1, 1]")->expected(4);
    render_cmd->add_option("--resolution", rd.resolution, "image side length");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP inference API");
    serve_cmd->add_option("--checkpoint", sv.checkpoint, "checkpoint file")->required();
    serve_cmd->add_option("--host", sv.host, "bind address");
    serve_cmd->add_option("--port", sv.port, "TCP port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "dcign: usage error: %s\n", e.what());
        return 2;
    }

    try {
        if (*gen_cmd) return gen_data(gen);
        if (*train_cmd) {
            if (steps) tr.overrides["total_batches"] = std::to_string(*steps);
            if (seed) tr.overrides["seed"] = std::to_string(*seed);
            if (mode) tr.overrides["mode"] = *mode;
            if (ratio) tr.overrides["ratio"] = *ratio;
            if (likelihood) tr.overrides["likelihood"] = *likelihood;
            if (extrinsic) tr.overrides["extrinsic"] = *extrinsic;
            if (latent_dim) tr.overrides["latent_dim"] = std::to_string(*latent_dim);
            if (checkpoint_every) tr.overrides["checkpoint_every"] = std::to_string(*checkpoint_every);
            char buf[32];
            if (lr) {
                std::snprintf(buf, sizeof(buf), "%.17g", *lr);
                tr.overrides["learning_rate"] = buf;
            }
            if (inv_scale) {
                std::snprintf(buf, sizeof(buf), "%.17g", *inv_scale);
                tr.overrides["invariance_scale"] = buf;
            }
            return train_command(tr);
        }
        if (*eval_cmd) return eval_command(ev);
        if (*sweep_cmd) return sweep_command(sw);
        if (*render_cmd) return render_command(rd);
        if (*serve_cmd) return serve_command(sv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "dcign: config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dcign: error: %s\n", e.what());
        return 1;
    }
    return 1;
}
