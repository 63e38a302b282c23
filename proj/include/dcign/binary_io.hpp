#pragma once

// Little-endian primitive encoding shared by the dataset and checkpoint
// formats. Readers raise CorruptionError on truncation.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace dcign {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void raw(std::string_view bytes);
    void str(std::string_view s);  // u32 length + bytes

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string raw(std::size_t n);
    std::string str(std::size_t max_len = 1u << 26);
    bool at_end();

private:
    void read(char* dst, std::size_t n);
    std::istream& in_;
    std::string context_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace dcign
