// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "msgan/tensor.hpp"

namespace msgan {

// Pixels map linearly between [-1, 1] and [0, 255]:
//   byte = round((v + 1) * 127.5) clamped, v = byte / 127.5 - 1.
std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// Writes an 8-bit RGB (3 channels) or gray (1 channel) PNG.
void write_png(const std::filesystem::path& path, const Image& image);

/// Reads an 8-bit PNG as RGB. Alpha is dropped, gray is replicated.
Image read_png(const std::filesystem::path& path);

/// Row-major contact sheet with `columns` tiles per row and a `pad` pixel
/// gutter filled with white.
Image compose_grid(std::span<const Image> tiles, int columns, int pad = 1);

/// All `*.png` files in `dir`, sorted by filename.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace msgan
