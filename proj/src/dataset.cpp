#include "dcign/dataset.hpp"

#include "dcign/binary_io.hpp"
#include "dcign/errors.hpp"

namespace dcign {

namespace {

constexpr char magic[8] = {'D', 'C', 'I', 'G', 'N', 'D', 'A', 'T'};
constexpr std::uint32_t max_resolution = 4096;

} // namespace

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetHeader header)
    : path_(path), header_(header), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open dataset " + path.string() + " for writing");
    if (header_.resolution == 0 || header_.resolution > max_resolution)
        throw ContractError("dataset resolution " + std::to_string(header_.resolution) + " out of range");
    BinaryWriter w(out_);
    w.raw({magic, sizeof(magic)});
    w.u32(dataset_version);
    w.u32(static_cast<std::uint32_t>(header_.resolution));
    w.u8(static_cast<std::uint8_t>(header_.kind));
    w.u32(static_cast<std::uint32_t>(intrinsic_dim));
    w.u8(static_cast<std::uint8_t>(all_factors.size()));
    for (auto f : all_factors) {
        const auto name = factor_name(f);
        w.u8(static_cast<std::uint8_t>(name.size()));
        w.raw(name);
    }
    w.u64(header_.n_batches);
    if (!out_) throw IoError("failed writing dataset header to " + path.string());
}

void DatasetWriter::write(const TransformBatch& batch) {
    batch.validate();
    if (written_ >= header_.n_batches)
        throw ContractError("dataset " + path_.string() + " already holds its declared " +
                            std::to_string(header_.n_batches) + " batches");
    BinaryWriter w(out_);
    w.u8(static_cast<std::uint8_t>(batch.active));
    w.u32(static_cast<std::uint32_t>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& p = batch.params[k];
        const auto& img = batch.images[k];
        if (p.kind != header_.kind) throw ContractError("batch scene kind differs from the dataset header");
        if (img.shape() != Shape{1, header_.resolution, header_.resolution})
            throw DimensionError("image shape " + to_string(img.shape()) + " does not match dataset resolution " +
                                 std::to_string(header_.resolution));
        w.f64(p.azimuth);
        w.f64(p.elevation);
        w.f64(p.light_azimuth);
        for (double v : p.intrinsic) w.f64(v);
        for (double v : img.values()) w.f32(static_cast<float>(v));
    }
    if (!out_) throw IoError("failed writing batch " + std::to_string(written_) + " to " + path_.string());
    ++written_;
}

void DatasetWriter::finish() {
    out_.flush();
    if (!out_) throw IoError("failed flushing dataset " + path_.string());
    if (written_ != header_.n_batches)
        throw ContractError("dataset " + path_.string() + " declared " + std::to_string(header_.n_batches) +
                            " batches but " + std::to_string(written_) + " were written");
    out_.close();
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open dataset " + path.string());
    BinaryReader r(in_, "dataset " + path.string());
    if (r.raw(sizeof(magic)) != std::string_view(magic, sizeof(magic)))
        throw FormatError(path.string() + " is not a dataset file (bad magic)");
    const auto version = r.u32();
    if (version != dataset_version)
        throw VersionError("dataset " + path.string() + " has version " + std::to_string(version) +
                           ", this build reads version " + std::to_string(dataset_version));
    const auto res = r.u32();
    if (res == 0 || res > max_resolution) throw CorruptionError("dataset resolution " + std::to_string(res) + " out of range");
    header_.resolution = res;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(SceneKind::chair)) throw CorruptionError("dataset has unknown scene kind");
    header_.kind = static_cast<SceneKind>(kind);
    if (r.u32() != intrinsic_dim) throw CorruptionError("dataset intrinsic dimension differs from this build");
    const auto n_factors = r.u8();
    if (n_factors != all_factors.size()) throw CorruptionError("dataset factor schema differs from this build");
    for (auto f : all_factors) {
        const auto len = r.u8();
        if (r.raw(len) != factor_name(f)) throw CorruptionError("dataset factor schema differs from this build");
    }
    header_.n_batches = r.u64();
}

std::optional<TransformBatch> DatasetReader::next() {
    if (read_ >= header_.n_batches) return std::nullopt;
    BinaryReader r(in_, "dataset " + path_.string() + " batch " + std::to_string(read_));
    TransformBatch batch;
    const auto tag = r.u8();
    if (tag > static_cast<std::uint8_t>(Factor::intrinsic)) throw CorruptionError("dataset batch has unknown factor tag");
    batch.active = static_cast<Factor>(tag);
    const auto count = r.u32();
    if (count < 2 || count > (1u << 20)) throw CorruptionError("dataset batch size " + std::to_string(count) + " implausible");
    const std::size_t res = header_.resolution;
    for (std::uint32_t k = 0; k < count; ++k) {
        SceneParams p;
        p.kind = header_.kind;
        p.azimuth = r.f64();
        p.elevation = r.f64();
        p.light_azimuth = r.f64();
        for (auto& v : p.intrinsic) v = r.f64();
        Tensor img({1, res, res});
        for (auto& v : img.values()) v = static_cast<double>(r.f32());
        batch.params.push_back(p);
        batch.images.push_back(std::move(img));
    }
    try {
        batch.validate();
    } catch (const ContractError& e) {
        throw CorruptionError("dataset " + path_.string() + " batch " + std::to_string(read_) + ": " + e.what());
    }
    ++read_;
    return batch;
}

std::vector<TransformBatch> read_dataset(const std::filesystem::path& path) {
    DatasetReader reader(path);
    std::vector<TransformBatch> out;
    while (auto b = reader.next()) out.push_back(std::move(*b));
    return out;
}

} // namespace dcign
