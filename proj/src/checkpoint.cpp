// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <algorithm>
#include <fstream>

namespace dualpix {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

constexpr char kMagic[8] = {'D', 'P', 'X', 'C', 'K', 'P', 'T', '\0'};

fs::path with_suffix(const fs::path &stem, const char *ext) {
    fs::path p = stem;
    p += ext;
    return p;
}

template <typename T> void put(std::ofstream &out, T v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T> T get(std::ifstream &in, const fs::path &path) {
    T v{};
    if (!in.read(reinterpret_cast<char *>(&v), sizeof(T))) {
        throw FormatError("truncated checkpoint: " + path.string());
    }
    return v;
}

} // namespace

void write_checkpoint(const fs::path &stem, const std::vector<NamedTensor> &tensors,
                      const std::string &metadata_json) {
    if (!stem.parent_path().empty()) {
        fs::create_directories(stem.parent_path());
    }
    const fs::path bin = with_suffix(stem, ".bin");
    std::ofstream out(bin, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + bin.string());
    }
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    nlohmann::json entries = nlohmann::json::array();
    for (const auto &t : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor.shape.size()));
        for (std::size_t d : t.tensor.shape) {
            put<std::uint64_t>(out, d);
        }
        const auto offset = static_cast<std::uint64_t>(out.tellp());
        out.write(reinterpret_cast<const char *>(t.tensor.data.data()),
                  static_cast<std::streamsize>(t.tensor.data.size() * sizeof(double)));
        entries.push_back({{"name", t.name}, {"shape", t.tensor.shape}, {"offset", offset}});
    }
    if (!out) {
        throw FormatError("failed writing " + bin.string());
    }
    nlohmann::json manifest{{"format", "dualpix-checkpoint"},
                            {"version", kCheckpointVersion},
                            {"dtype", "float64"},
                            {"blob", bin.filename().string()},
                            {"tensors", entries},
                            {"metadata", nlohmann::json::parse(metadata_json)}};
    std::ofstream mf(with_suffix(stem, ".json"));
    mf << manifest.dump(2) << '\n';
    if (!mf) {
        throw FormatError("failed writing checkpoint manifest");
    }
}

std::vector<NamedTensor> read_checkpoint(const fs::path &stem) {
    const fs::path bin = with_suffix(stem, ".bin");
    std::ifstream in(bin, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + bin.string());
    }
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not a checkpoint: " + bin.string());
    }
    const auto version = get<std::uint32_t>(in, bin);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = get<std::uint32_t>(in, bin);
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name.resize(get<std::uint32_t>(in, bin));
        if (!in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()))) {
            throw FormatError("truncated checkpoint: " + bin.string());
        }
        const auto rank = get<std::uint32_t>(in, bin);
        if (rank > 8) {
            throw FormatError("corrupt checkpoint tensor rank");
        }
        std::vector<std::size_t> shape;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(get<std::uint64_t>(in, bin));
        }
        t.tensor = Tensor(shape);
        if (!in.read(reinterpret_cast<char *>(t.tensor.data.data()),
                     static_cast<std::streamsize>(t.tensor.data.size() * sizeof(double)))) {
            throw FormatError("truncated checkpoint: " + bin.string());
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<NamedTensor> named_parameters(const MicroNet &net) {
    std::vector<NamedTensor> out;
    const auto names = net.parameter_names();
    const auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        out.push_back({names[i], *params[i]});
    }
    return out;
}

void load_parameters(MicroNet &net, const std::vector<NamedTensor> &tensors) {
    const auto names = net.parameter_names();
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto it = std::find_if(tensors.begin(), tensors.end(),
                               [&](const NamedTensor &t) { return t.name == names[i]; });
        if (it == tensors.end()) {
            throw FormatError("checkpoint is missing tensor " + names[i]);
        }
        if (!it->tensor.same_shape(*params[i])) {
            throw FormatError("checkpoint tensor " + names[i] + " has the wrong shape");
        }
        params[i]->data = it->tensor.data;
    }
    net.mark_updated();
}

} // namespace dualpix
