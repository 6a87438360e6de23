// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/micronet.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dualpix {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Binary blob (`<stem>.bin`): magic "DPXCKPT", u32 version, u32 count, then per
/// tensor u32 name length, name, u32 rank, u64 dims, float64 data; all
/// little-endian. The manifest (`<stem>.json`) lists names, shapes and byte
/// offsets plus free-form metadata (a JSON object serialized as text).
void write_checkpoint(const std::filesystem::path &stem, const std::vector<NamedTensor> &tensors,
                      const std::string &metadata_json = "{}");
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path &stem);

std::vector<NamedTensor> named_parameters(const MicroNet &net);
/// Copies tensors into `net` by name; throws FormatError on missing names or
/// shape mismatches.
void load_parameters(MicroNet &net, const std::vector<NamedTensor> &tensors);

} // namespace dualpix
