#pragma once

// Dataset file: a header followed by a sequence of transform batches.
//
//   magic "DCIGNDAT" | u32 version | u32 resolution | u8 scene kind
//   u32 intrinsic dim | u8 factor count, then per factor: u8 length + name
//   u64 batch count
//   per batch: u8 active factor | u32 example count
//     per example: f64 azimuth, f64 elevation, f64 light azimuth,
//                  f64 x intrinsic dim, f32 x resolution^2 pixels (row-major)
//
// All integers little-endian.

#include "dcign/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

namespace dcign {

inline constexpr std::uint32_t dataset_version = 1;

struct DatasetHeader {
    std::size_t resolution = 32;
    SceneKind kind = SceneKind::head;
    std::uint64_t n_batches = 0;
};

class DatasetWriter {
public:
    DatasetWriter(const std::filesystem::path& path, DatasetHeader header);
    // Validates the batch invariant before writing.
    void write(const TransformBatch& batch);
    // Flushes and checks that exactly header.n_batches batches were written.
    void finish();

private:
    std::filesystem::path path_;
    DatasetHeader header_;
    std::ofstream out_;
    std::uint64_t written_ = 0;
};

class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& path);

    const DatasetHeader& header() const noexcept { return header_; }
    // Next batch, or nullopt once header().n_batches have been read.
    std::optional<TransformBatch> next();

private:
    std::filesystem::path path_;
    std::ifstream in_;
    DatasetHeader header_;
    std::uint64_t read_ = 0;
};

std::vector<TransformBatch> read_dataset(const std::filesystem::path& path);

} // namespace dcign
