#include "dcign/binary_io.hpp"
#include "dcign/dataset.hpp"
#include "dcign/errors.hpp"
#include "dcign/scene.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <vector>
#include <cmath>
#include <filesystem>

#include <unistd.h>

using namespace dcign;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() / ("dcign_scene_" + std::to_string(::getpid()) + "_" + name);
}

Tensor mirrored(const Tensor& img) {
    Tensor out = img;
    const std::size_t h = img.dim(1), w = img.dim(2);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(0, y, x) = img.at(0, y, w - 1 - x);
    return out;
}

} // namespace

TEST(Random, UniformAndNormalAreReproducible) {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(uniform01(a), uniform01(b));
        EXPECT_EQ(standard_normal(a), standard_normal(b));
    }
    Rng c(6);
    for (int i = 0; i < 10000; ++i) {
        const double u = uniform01(c);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Random, NormalMomentsWithinSamplingError) {
    Rng rng(7);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = standard_normal(rng);
        s += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(double(n)));
    EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Random, MixSeedSeparatesStreams) {
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(9, 4), mix_seed(9, 4));
}

TEST(BatchRatio, ParseFormatAndValidate) {
    const auto r = BatchRatio::parse("1:2:3:4.5");
    EXPECT_EQ(r.weights, (std::array<double, 4>{1, 2, 3, 4.5}));
    EXPECT_EQ(BatchRatio::parse(r.to_string()).weights, r.weights);
    EXPECT_DOUBLE_EQ(BatchRatio{}.probability(Factor::intrinsic), 10.0 / 13.0);
    EXPECT_THROW(BatchRatio::parse("1:2:3"), ConfigError);
    EXPECT_THROW(BatchRatio::parse("1:2:3:x"), ConfigError);
    EXPECT_THROW(BatchRatio::parse("0:0:0:0"), ConfigError);
    EXPECT_THROW(BatchRatio::parse("1:-1:1:1"), ConfigError);
}

TEST(Scheduler, DegenerateRatioAlwaysPicksTheOnlyFactor) {
    Rng rng(1);
    BatchRatio r;
    r.weights = {1, 0, 0, 0};
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_batch_type(rng, r), Factor::azimuth);
}

TEST(Scheduler, SeededSequenceIsReproducible) {
    Rng a(42), b(42);
    for (int i = 0; i < 500; ++i) EXPECT_EQ(select_batch_type(a, {}), select_batch_type(b, {}));
}

TEST(Scheduler, DefaultRatioCountsWithinThreeSigma) {
    Rng rng(2024);
    std::array<int, 4> counts{};
    const int n = 13000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(select_batch_type(rng, {}))];
    const BatchRatio r;
    for (Factor f : all_factors) {
        const double p = r.probability(f);
        const double sigma = std::sqrt(n * p * (1 - p));
        EXPECT_LE(std::abs(counts[static_cast<std::size_t>(f)] - n * p), 3 * sigma) << factor_name(f);
    }
}

TEST(Render, ShapeRangeAndDeterminism) {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_scene(rng, i % 2 ? SceneKind::chair : SceneKind::head);
        const Tensor a = render(p, 32);
        EXPECT_EQ(a.shape(), (Shape{1, 32, 32}));
        for (double v : a.values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v);
        }
        EXPECT_TRUE(a.identical(render(p, 32)));
        EXPECT_GT(sum(a), 10.0);  // the object covers a visible area
    }
}

TEST(Render, HeadAzimuthMirrorSymmetry) {
    SceneParams p;
    p.azimuth = 35.0;
    p.elevation = 10.0;
    p.light_azimuth = -50.0;
    p.intrinsic = {0.3, -0.2, 0.5, 0.1};
    SceneParams q = p;
    q.azimuth = -35.0;
    q.light_azimuth = 50.0;
    EXPECT_TRUE(render(q, 32).identical(mirrored(render(p, 32))));
}

TEST(Render, EveryFactorChangesTheImage) {
    SceneParams base;
    base.intrinsic = {0.1, 0.2, -0.3, 0.4};
    const Tensor ref = render(base, 32);
    SceneParams p = base;
    p.azimuth = 40;
    EXPECT_GT(max_abs_diff(render(p, 32), ref), 0.05);
    p = base;
    p.elevation = 25;
    EXPECT_GT(max_abs_diff(render(p, 32), ref), 0.05);
    p = base;
    p.light_azimuth = 70;
    EXPECT_GT(max_abs_diff(render(p, 32), ref), 0.05);
    p = base;
    p.intrinsic[1] = -0.9;
    EXPECT_GT(max_abs_diff(render(p, 32), ref), 0.05);
}

TEST(Render, RejectsOutOfRangeParameters) {
    SceneParams p;
    p.azimuth = 95;
    EXPECT_THROW(render(p, 32), DomainError);
    p = SceneParams{};
    p.intrinsic[2] = 1.5;
    EXPECT_THROW(render(p, 32), DomainError);
    EXPECT_THROW(render(SceneParams{}, 0), DomainError);
}

TEST(MakeBatch, OnlyTheActiveFactorVaries) {
    Rng rng(10);
    for (Factor f : all_factors) {
        const auto batch = make_batch(rng, f, 20, 16);
        EXPECT_EQ(batch.size(), 20u);
        EXPECT_EQ(batch.active, f);
        EXPECT_NO_THROW(batch.validate());
        if (f != Factor::intrinsic) {
            double lo = 1e9, hi = -1e9;
            for (const auto& p : batch.params) {
                lo = std::min(lo, p.factor_value(f));
                hi = std::max(hi, p.factor_value(f));
            }
            EXPECT_GT(hi - lo, 0.0);
        }
    }
}

TEST(MakeBatch, ChairBatchesKeepViewAndLightFixed) {
    Rng rng(11);
    const auto batch = make_batch(rng, Factor::azimuth, 5, 16, SceneKind::chair);
    for (const auto& p : batch.params) {
        EXPECT_EQ(p.elevation, chair_elevation);
        EXPECT_EQ(p.light_azimuth, chair_light_azimuth);
    }
    EXPECT_THROW(make_batch(rng, Factor::elevation, 5, 16, SceneKind::chair), ContractError);
    EXPECT_THROW(make_batch(rng, Factor::azimuth, 1, 16), ContractError);
}

TEST(Dataset, RoundTripMatchesGenerator) {
    const auto path = temp_path("roundtrip.bin");
    DatasetSpec spec;
    spec.n_batches = 6;
    spec.resolution = 16;
    spec.batch_size = 4;
    spec.seed = 77;
    make_dataset(path, spec);
    const auto batches = read_dataset(path);
    ASSERT_EQ(batches.size(), 6u);
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto want = dataset_batch(spec, b);
        EXPECT_EQ(batches[b].active, want.active);
        EXPECT_EQ(batches[b].params, want.params);
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_TRUE(batches[b].images[i].identical(want.images[i]));
    }
    const auto size = fs::file_size(path);
    // 30 fixed header bytes plus length-prefixed factor names, then per batch
    // 5 bytes and per example 7 doubles and 256 floats.
    EXPECT_EQ(size, 30u + 4 + 7 + 9 + 13 + 9 + 6 * (5 + 4 * (56 + 1024)));
    fs::remove(path);
}

TEST(Dataset, SameSeedGivesByteIdenticalFiles) {
    const auto a = temp_path("a.bin"), b = temp_path("b.bin");
    DatasetSpec spec;
    spec.n_batches = 3;
    spec.resolution = 8;
    spec.batch_size = 3;
    spec.seed = 5;
    make_dataset(a, spec);
    make_dataset(b, spec);
    EXPECT_EQ(read_file(a), read_file(b));
    fs::remove(a);
    fs::remove(b);
}

TEST(Dataset, RejectsDamagedFiles) {
    const auto path = temp_path("damaged.bin");
    DatasetSpec spec;
    spec.n_batches = 2;
    spec.resolution = 8;
    spec.batch_size = 3;
    make_dataset(path, spec);
    const std::string good = read_file(path);

    std::string bad = good;
    bad[0] = 'X';
    write_file(path, bad);
    EXPECT_THROW(read_dataset(path), FormatError);

    bad = good;
    bad[8] = 2;  // version
    write_file(path, bad);
    EXPECT_THROW(read_dataset(path), VersionError);

    write_file(path, good.substr(0, good.size() - 7));
    EXPECT_THROW(read_dataset(path), CorruptionError);

    EXPECT_THROW(read_dataset(temp_path("missing.bin")), IoError);
    fs::remove(path);
}

TEST(Dataset, ChairSpecNeedsZeroElevationAndLightWeights) {
    DatasetSpec spec;
    spec.n_batches = 1;
    spec.kind = SceneKind::chair;
    EXPECT_THROW(make_dataset(temp_path("chair.bin"), spec), ConfigError);
}

namespace {

std::vector<bool> silhouette(const Tensor& img) {
    std::vector<bool> mask;
    for (double v : img.values()) mask.push_back(v > 0.0);
    return mask;
}

double horizontal_centroid(const Tensor& img) {
    double mass = 0.0, moment = 0.0;
    for (std::size_t y = 0; y < img.dim(1); ++y)
        for (std::size_t x = 0; x < img.dim(2); ++x) {
            mass += img.at(0, y, x);
            moment += img.at(0, y, x) * static_cast<double>(x);
        }
    return moment / mass;
}

} // namespace

TEST(Render, LightOnlyChangeKeepsTheSilhouette) {
    Rng rng(41);
    for (int i = 0; i < 10; ++i) {
        SceneParams p = random_scene(rng, i % 2 ? SceneKind::chair : SceneKind::head);
        const auto mask = silhouette(render(p, 32));
        for (double light : {-90.0, -30.0, 45.0, 90.0}) {
            p.light_azimuth = light;
            EXPECT_EQ(silhouette(render(p, 32)), mask);
        }
    }
}

TEST(Render, ObjectCoversAtLeastFivePercentOfPixels) {
    Rng rng(42);
    for (int i = 0; i < 40; ++i) {
        const Tensor img = render(random_scene(rng, i % 2 ? SceneKind::chair : SceneKind::head), 32);
        const auto mask = silhouette(img);
        const auto lit = std::count(mask.begin(), mask.end(), true);
        EXPECT_GE(static_cast<double>(lit), 0.05 * static_cast<double>(mask.size()));
    }
}

TEST(Render, HorizontalCentroidIsMonotoneInAzimuth) {
    SceneParams p;
    p.intrinsic = {0.2, 0.5, 0.0, 0.0};
    std::vector<double> c;
    for (double az = -90.0; az <= 90.0; az += 15.0) {
        p.azimuth = az;
        p.light_azimuth = az;  // keep shading fixed relative to the camera
        c.push_back(horizontal_centroid(render(p, 32)));
    }
    const bool rising = c.back() > c.front();
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (rising) EXPECT_GT(c[i], c[i - 1]) << "step " << i;
        else EXPECT_LT(c[i], c[i - 1]) << "step " << i;
    }
}
