#pragma once

// 8-bit grayscale PNG and base64 at the service and CLI boundary. Inside
// training and evaluation images stay floating point.

#include "dcign/tensor.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace dcign {

// Pixels are clamped to [0,1] and quantized to round(v * 255).
std::string encode_png(const Tensor& image);
// [1,H,W] with values byte / 255. Colour input is converted to gray; alpha
// is dropped. Throws FormatError on anything that is not a readable PNG.
Tensor decode_png(std::string_view bytes);

void save_png(const std::filesystem::path& path, const Tensor& image);
Tensor load_png(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
// Standard alphabet with '=' padding; throws FormatError otherwise.
std::string base64_decode(std::string_view text);

// Tiles [1,H,W] images row-major into `columns` columns with a `gap`-pixel
// black border between tiles.
Tensor image_grid(std::span<const Tensor> images, std::size_t columns, std::size_t gap = 1);

} // namespace dcign
