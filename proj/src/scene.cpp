#include "dcign/scene.hpp"

#include "dcign/dataset.hpp"
#include "dcign/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace dcign {

namespace {

constexpr double view_extent = 1.1;  // half-width of the orthographic frame
constexpr std::size_t supersample = 4;
constexpr double ambient = 0.4;
constexpr double hair_albedo = 0.12;
constexpr double light_elevation_deg = 20.0;

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 normalized(Vec3 a) {
    const double n = std::sqrt(dot(a, a));
    return {a.x / n, a.y / n, a.z / n};
}

// sin/cos of an angle in degrees, computed on |deg| so that mirrored angles
// give exactly negated sines.
struct SinCos {
    double s, c;
};
SinCos sincos_deg(double deg) {
    const double rad = std::abs(deg) * (std::numbers::pi / 180.0);
    const double s = std::sin(rad);
    return {deg < 0 ? -s : s, std::cos(rad)};
}

struct Hit {
    double t;
    Vec3 normal;
    double albedo;
};

struct Ellipsoid {
    Vec3 center;
    Vec3 radii;

    std::optional<double> intersect(Vec3 o, Vec3 d) const {
        const Vec3 oc = o - center;
        const double ax = d.x / radii.x, ay = d.y / radii.y, az = d.z / radii.z;
        const double px = oc.x / radii.x, py = oc.y / radii.y, pz = oc.z / radii.z;
        const double a = ax * ax + ay * ay + az * az;
        const double b = 2.0 * (px * ax + py * ay + pz * az);
        const double c = px * px + py * py + pz * pz - 1.0;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return std::nullopt;
        const double t = (-b - std::sqrt(disc)) / (2.0 * a);
        if (t <= 0.0) return std::nullopt;
        return t;
    }

    Vec3 normal_at(Vec3 p) const {
        const Vec3 q = p - center;
        return normalized({q.x / (radii.x * radii.x), q.y / (radii.y * radii.y), q.z / (radii.z * radii.z)});
    }
};

struct Box {
    Vec3 lo, hi;
    double albedo;

    std::optional<Hit> intersect(Vec3 o, Vec3 d) const {
        double t_near = -1e300, t_far = 1e300;
        int axis = -1;
        double sign = 0.0;
        const double os[3] = {o.x, o.y, o.z}, ds[3] = {d.x, d.y, d.z};
        const double los[3] = {lo.x, lo.y, lo.z}, his[3] = {hi.x, hi.y, hi.z};
        for (int i = 0; i < 3; ++i) {
            if (ds[i] == 0.0) {
                if (os[i] < los[i] || os[i] > his[i]) return std::nullopt;
                continue;
            }
            double t0 = (los[i] - os[i]) / ds[i], t1 = (his[i] - os[i]) / ds[i];
            double entry_sign = -1.0;  // entering through the low face
            if (t0 > t1) {
                std::swap(t0, t1);
                entry_sign = 1.0;
            }
            if (t0 > t_near) {
                t_near = t0;
                axis = i;
                sign = entry_sign;
            }
            t_far = std::min(t_far, t1);
            if (t_near > t_far) return std::nullopt;
        }
        if (axis < 0 || t_near <= 0.0) return std::nullopt;
        Vec3 n{};
        (axis == 0 ? n.x : axis == 1 ? n.y : n.z) = sign;
        return Hit{t_near, n, albedo};
    }
};

struct HeadModel {
    Ellipsoid head;
    Ellipsoid nose;
    double eye_x, eye_y, eye_z, eye_radius;
    double albedo;

    explicit HeadModel(const std::array<double, intrinsic_dim>& k) {
        head = {{0, 0, 0}, {0.52 * (1.0 + 0.15 * k[0]), 0.72, 0.62}};
        nose = {{0, -0.08, 0.56}, {0.12, 0.16, 0.24 + 0.10 * k[1]}};
        eye_x = 0.20 + 0.07 * k[2];
        eye_y = 0.14;
        // Eye centres sit on the head surface.
        const double rx = eye_x / head.radii.x, ry = eye_y / head.radii.y;
        eye_z = head.radii.z * std::sqrt(std::max(0.0, 1.0 - rx * rx - ry * ry));
        eye_radius = 0.10;
        albedo = 0.85 + 0.12 * k[3];
    }

    std::optional<Hit> trace(Vec3 o, Vec3 d) const {
        const auto th = head.intersect(o, d);
        const auto tn = nose.intersect(o, d);
        if (!th && !tn) return std::nullopt;
        if (tn && (!th || *tn < *th)) {
            const Vec3 p = o + *tn * d;
            return Hit{*tn, nose.normal_at(p), albedo};
        }
        const Vec3 p = o + *th * d;
        // Hair covers the back of the head and reaches further forward on top.
        if (p.z / head.radii.z < 0.6 * p.y / head.radii.y - 0.1) return Hit{*th, head.normal_at(p), hair_albedo};
        double a = albedo;
        const double dy = p.y - eye_y, dz = p.z - eye_z;
        const double left = (p.x - eye_x) * (p.x - eye_x) + dy * dy + dz * dz;
        const double right = (p.x + eye_x) * (p.x + eye_x) + dy * dy + dz * dz;
        const double r2 = eye_radius * eye_radius;
        if (left < r2 || right < r2) a *= 0.15;
        if (p.z > 0.0 && std::abs(p.x) < 0.16 && p.y > -0.40 && p.y < -0.32) a *= 0.3;
        return Hit{*th, head.normal_at(p), a};
    }
};

struct ChairModel {
    std::vector<Box> parts;

    explicit ChairModel(const std::array<double, intrinsic_dim>& k) {
        const double w = 0.42 + 0.10 * k[0];
        const double back = 0.55 + 0.20 * k[1];
        const double legs = 0.45 + 0.15 * k[2];
        const double shift = -0.10;
        const double seat = 0.06;
        parts.push_back({{-w, -seat + shift, -w}, {w, seat + shift, w}, 0.80});
        parts.push_back({{-w, seat + shift, -w}, {w, seat + back + shift, -w + 0.10}, 0.70});
        const double inset = w - 0.05;
        for (double sx : {-1.0, 1.0})
            for (double sz : {-1.0, 1.0})
                parts.push_back({{sx * inset - 0.045, -seat - legs + shift, sz * inset - 0.045},
                                 {sx * inset + 0.045, -seat + shift, sz * inset + 0.045},
                                 0.50});
        if (k[3] > 0.0)
            for (double sx : {-1.0, 1.0})
                parts.push_back({{sx * (w - 0.03) - 0.03, 0.22 + shift, -0.8 * w},
                                 {sx * (w - 0.03) + 0.03, 0.28 + shift, 0.8 * w},
                                 0.60});
    }

    std::optional<Hit> trace(Vec3 o, Vec3 d) const {
        std::optional<Hit> best;
        for (const auto& part : parts)
            if (auto h = part.intersect(o, d); h && (!best || h->t < best->t)) best = h;
        return best;
    }
};

void check_range(double v, double limit, const char* name) {
    if (!std::isfinite(v) || v < -limit || v > limit)
        throw DomainError(std::string(name) + " " + std::to_string(v) + " outside [" + std::to_string(-limit) +
                          ", " + std::to_string(limit) + "]");
}

template <class Model>
Tensor render_model(const Model& model, const SceneParams& p, std::size_t res) {
    const auto az = sincos_deg(p.azimuth);
    const auto el = sincos_deg(p.elevation);
    const auto la = sincos_deg(p.light_azimuth);
    const auto le = sincos_deg(light_elevation_deg);

    // Unit vector from the object towards the camera, and the image-plane basis.
    const Vec3 to_camera{az.s * el.c, el.s, az.c * el.c};
    const Vec3 right{az.c, 0.0, -az.s};
    const Vec3 up{-az.s * el.s, el.c, -az.c * el.s};
    const Vec3 dir{-to_camera.x, -to_camera.y, -to_camera.z};
    const Vec3 light{la.s * le.c, le.s, la.c * le.c};

    const std::size_t n = supersample;
    const double grid = static_cast<double>(res * n);
    auto sample = [&](std::size_t gx, std::size_t gy) {
        // Sub-sample centres are symmetric about the frame centre: mirrored
        // indices give exactly negated coordinates.
        const double u = (static_cast<double>(2 * gx + 1) - grid) / grid * view_extent;
        const double v = (grid - static_cast<double>(2 * gy + 1)) / grid * view_extent;
        const Vec3 origin = u * right + v * up + 3.0 * to_camera;
        const auto hit = model.trace(origin, dir);
        if (!hit) return 0.0;
        const double lambert = std::max(0.0, dot(hit->normal, light));
        return hit->albedo * (ambient + (1.0 - ambient) * lambert);
    };

    Tensor image({1, res, res});
    std::array<double, supersample> row{};
    for (std::size_t y = 0; y < res; ++y) {
        for (std::size_t x = 0; x < res; ++x) {
            double acc = 0.0;
            for (std::size_t sy = 0; sy < n; ++sy) {
                for (std::size_t sx = 0; sx < n; ++sx) row[sx] = sample(x * n + sx, y * n + sy);
                // Pair mirrored sub-samples so horizontally mirrored pixels sum identically.
                for (std::size_t j = 0; j < n / 2; ++j) acc += row[j] + row[n - 1 - j];
            }
            image.at(0, y, x) = static_cast<double>(static_cast<float>(acc / static_cast<double>(n * n)));
        }
    }
    return image;
}

} // namespace

void SceneParams::validate() const {
    if (kind != SceneKind::head && kind != SceneKind::chair) throw DomainError("unknown scene kind");
    check_range(azimuth, azimuth_limit, "azimuth");
    check_range(elevation, elevation_limit, "elevation");
    check_range(light_azimuth, light_azimuth_limit, "light_azimuth");
    for (double v : intrinsic) check_range(v, 1.0, "intrinsic coefficient");
}

double SceneParams::factor_value(Factor f) const {
    switch (f) {
    case Factor::azimuth: return azimuth;
    case Factor::elevation: return elevation;
    case Factor::light_azimuth: return light_azimuth;
    case Factor::intrinsic: break;
    }
    throw ContractError("intrinsic factor has no scalar value");
}

Tensor render(const SceneParams& params, std::size_t resolution) {
    params.validate();
    if (resolution == 0) throw DomainError("resolution must be positive");
    if (params.kind == SceneKind::chair) return render_model(ChairModel(params.intrinsic), params, resolution);
    return render_model(HeadModel(params.intrinsic), params, resolution);
}

void TransformBatch::validate() const {
    if (images.size() < 2) throw ContractError("a transform batch needs at least 2 examples");
    if (params.size() != images.size()) throw ContractError("transform batch has mismatched images and params");
    const auto& ref = params.front();
    for (std::size_t k = 1; k < params.size(); ++k) {
        const auto& p = params[k];
        auto differs = [&](Factor f) {
            switch (f) {
            case Factor::azimuth: return p.azimuth != ref.azimuth;
            case Factor::elevation: return p.elevation != ref.elevation;
            case Factor::light_azimuth: return p.light_azimuth != ref.light_azimuth;
            case Factor::intrinsic: return p.intrinsic != ref.intrinsic;
            }
            return true;
        };
        if (p.kind != ref.kind) throw ContractError("transform batch mixes scene kinds");
        for (auto f : all_factors)
            if (f != active && differs(f))
                throw ContractError("transform batch varying " + std::string(factor_name(active)) + " also varies " +
                                    std::string(factor_name(f)) + " at example " + std::to_string(k));
    }
}

SceneParams random_scene(Rng& rng, SceneKind kind) {
    SceneParams p;
    p.kind = kind;
    p.azimuth = uniform(rng, -azimuth_limit, azimuth_limit);
    const double elevation = uniform(rng, -elevation_limit, elevation_limit);
    const double light = uniform(rng, -light_azimuth_limit, light_azimuth_limit);
    p.elevation = kind == SceneKind::chair ? chair_elevation : elevation;
    p.light_azimuth = kind == SceneKind::chair ? chair_light_azimuth : light;
    for (auto& v : p.intrinsic) v = uniform(rng, -1.0, 1.0);
    return p;
}

TransformBatch make_batch(Rng& rng, Factor active, std::size_t batch_size, std::size_t resolution, SceneKind kind) {
    if (batch_size < 2) throw ContractError("batch size must be at least 2");
    if (kind == SceneKind::chair && (active == Factor::elevation || active == Factor::light_azimuth))
        throw ContractError("chair scenes only vary azimuth and intrinsic factors");
    TransformBatch batch;
    batch.active = active;
    const SceneParams base = random_scene(rng, kind);
    for (std::size_t k = 0; k < batch_size; ++k) {
        SceneParams p = base;
        const SceneParams fresh = random_scene(rng, kind);
        switch (active) {
        case Factor::azimuth: p.azimuth = fresh.azimuth; break;
        case Factor::elevation: p.elevation = fresh.elevation; break;
        case Factor::light_azimuth: p.light_azimuth = fresh.light_azimuth; break;
        case Factor::intrinsic: p.intrinsic = fresh.intrinsic; break;
        }
        batch.images.push_back(render(p, resolution));
        batch.params.push_back(p);
    }
    return batch;
}

TransformBatch dataset_batch(const DatasetSpec& spec, std::uint64_t b) {
    Rng rng(mix_seed(spec.seed, b));
    const Factor f = select_batch_type(rng, spec.ratio);
    return make_batch(rng, f, spec.batch_size, spec.resolution, spec.kind);
}

void make_dataset(const std::filesystem::path& path, const DatasetSpec& spec) {
    spec.ratio.validate();
    if (spec.kind == SceneKind::chair &&
        (spec.ratio.weight(Factor::elevation) > 0.0 || spec.ratio.weight(Factor::light_azimuth) > 0.0))
        throw ConfigError("chair datasets need zero elevation and light ratio entries");
    DatasetWriter writer(path, DatasetHeader{spec.resolution, spec.kind, spec.n_batches});
    for (std::uint64_t b = 0; b < spec.n_batches; ++b) writer.write(dataset_batch(spec, b));
    writer.finish();
}

} // namespace dcign
