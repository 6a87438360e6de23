// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

#include <filesystem>

namespace dualpix {

/// Little-endian grayscale PFM ("Pf", scale -1). Values are stored as
/// float32, so the round trip is exact for float-representable grids.
void write_pfm(const std::filesystem::path &path, const Grid &grid);
Grid read_pfm(const std::filesystem::path &path);

/// 1- or 3-channel PNG with 8 or 16 bits per sample. Values are clamped to
/// [0, 1] and rounded to the nearest code.
void write_png(const std::filesystem::path &path, const Image &image, int bits = 8);
Image read_png(const std::filesystem::path &path);

} // namespace dualpix
