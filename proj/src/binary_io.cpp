#include "dcign/binary_io.hpp"

#include "dcign/errors.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace dcign {

namespace {

template <class U>
void put_le(std::ostream& out, U v) {
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, sizeof(U));
}

template <class U>
U get_le(const unsigned char* bytes) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

} // namespace

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f32(float v) { put_le(out_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::raw(std::string_view bytes) { out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }
void BinaryWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
}

void BinaryReader::read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CorruptionError(context_ + ": unexpected end of file");
}

std::uint8_t BinaryReader::u8() {
    char c;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
}

std::uint32_t BinaryReader::u32() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return get_le<std::uint32_t>(b);
}

std::uint64_t BinaryReader::u64() {
    unsigned char b[8];
    read(reinterpret_cast<char*>(b), 8);
    return get_le<std::uint64_t>(b);
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::raw(std::size_t n) {
    std::string s(n, '\0');
    if (n) read(s.data(), n);
    return s;
}

std::string BinaryReader::str(std::size_t max_len) {
    const auto n = u32();
    if (n > max_len) throw CorruptionError(context_ + ": string length " + std::to_string(n) + " is implausible");
    return raw(n);
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace dcign
