#include "dcign/image_io.hpp"

#include "dcign/binary_io.hpp"
#include "dcign/errors.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <vector>

namespace dcign {

std::string encode_png(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 1)
        throw DimensionError("PNG export needs a [1,H,W] image, got " + to_string(image.shape()));
    const std::size_t h = image.dim(1), w = image.dim(2);
    std::vector<png_byte> pixels(h * w);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<png_byte>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));

    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + png.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + png.message);
    out.resize(size);
    return out;
}

Tensor decode_png(std::string_view bytes) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throw FormatError(std::string("not a readable PNG: ") + png.message);
    png.format = PNG_FORMAT_GRAY;
    if (png.width == 0 || png.height == 0 || png.width > 4096 || png.height > 4096) {
        png_image_free(&png);
        throw FormatError("PNG dimensions " + std::to_string(png.width) + "x" + std::to_string(png.height) +
                          " out of range");
    }
    std::vector<png_byte> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr))
        throw FormatError(std::string("corrupt PNG: ") + png.message);
    Tensor out({1, png.height, png.width});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] / 255.0;
    return out;
}

void save_png(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_png(image)); }

Tensor load_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

namespace {

constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> decode_table() {
    std::array<int, 256> t{};
    for (auto& v : t) v = -1;
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(alphabet[i])] = i;
    return t;
}

} // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::size_t n = std::min<std::size_t>(3, bytes.size() - i);
        std::uint32_t v = 0;
        for (std::size_t k = 0; k < 3; ++k)
            v = (v << 8) | (k < n ? static_cast<unsigned char>(bytes[i + k]) : 0u);
        for (std::size_t k = 0; k < 4; ++k) out += k <= n ? alphabet[(v >> (18 - 6 * k)) & 63] : '=';
    }
    return out;
}

std::string base64_decode(std::string_view text) {
    static constexpr auto table = decode_table();
    if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        std::size_t pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = table[static_cast<unsigned char>(c)];
            if (d < 0 || pad > 0) throw FormatError("invalid base64 character at offset " + std::to_string(i + k));
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        for (std::size_t k = 0; k < 3 - pad; ++k) out += static_cast<char>((v >> (16 - 8 * k)) & 0xFF);
    }
    return out;
}

Tensor image_grid(std::span<const Tensor> images, std::size_t columns, std::size_t gap) {
    if (images.empty()) throw ContractError("image grid needs at least one image");
    if (columns == 0) throw ContractError("image grid needs at least one column");
    const Shape tile = images.front().shape();
    if (tile.size() != 3 || tile[0] != 1) throw DimensionError("grid tiles must be [1,H,W], got " + to_string(tile));
    const std::size_t cols = std::min(columns, images.size());
    const std::size_t rows = (images.size() + cols - 1) / cols;
    const std::size_t h = tile[1], w = tile[2];
    Tensor out({1, rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap});
    const std::size_t stride = out.dim(2);
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (images[n].shape() != tile)
            throw DimensionError("grid tile " + std::to_string(n) + " is " + to_string(images[n].shape()) +
                                 ", expected " + to_string(tile));
        const std::size_t oy = (n / cols) * (h + gap), ox = (n % cols) * (w + gap);
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(images[n].data() + y * w, w, out.data() + (oy + y) * stride + ox);
    }
    return out;
}

} // namespace dcign
