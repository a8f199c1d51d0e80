#include "nets/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "core/errors.hpp"

namespace vmd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {
constexpr char kMagic[8] = {'V', 'M', 'D', 'C', 'K', 'P', 'T', '1'};
}

void Checkpoint::add(std::string name, Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("Checkpoint::add: shape/data mismatch for " + name);
    }
    tensors.push_back({std::move(name), std::move(shape), std::move(data)});
}

const Checkpoint::Entry* Checkpoint::find(std::string_view name) const {
    for (const auto& e : tensors) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

const Checkpoint::Entry& Checkpoint::require(std::string_view name) const {
    const Entry* e = find(name);
    if (!e) throw IoError("checkpoint is missing tensor '" + std::string(name) + "'");
    return *e;
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::ordered_json header = meta;
    header["format_version"] = 1;
    auto& list = header["tensors"] = nlohmann::ordered_json::array();
    for (const auto& e : tensors) {
        list.push_back({{"name", e.name}, {"shape", e.shape}});
    }
    std::string json = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint64_t len = json.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
    for (const auto& e : tensors) {
        uint64_t n = e.data.size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        out.write(reinterpret_cast<const char*>(e.data.data()),
                  static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!out) throw IoError("short write while saving checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not a VMD checkpoint: " + path);
    }
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw ParseError("truncated checkpoint header: " + path);
    std::string json(len, '\0');
    in.read(json.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError("truncated checkpoint header: " + path);

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint header: ") + e.what());
    }
    if (header.value("format_version", 0) != 1) {
        throw ParseError("unsupported checkpoint format version in " + path);
    }

    Checkpoint ckpt;
    for (const auto& t : header.at("tensors")) {
        Entry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<Shape>();
        uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        if (!in) throw ParseError("truncated checkpoint data at tensor '" + e.name + "'");
        if (n != shape_numel(e.shape)) {
            throw ParseError("tensor '" + e.name + "' length prefix disagrees with its shape");
        }
        e.data.resize(n);
        in.read(reinterpret_cast<char*>(e.data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw ParseError("truncated checkpoint data at tensor '" + e.name + "'");
        ckpt.tensors.push_back(std::move(e));
    }
    header.erase("tensors");
    header.erase("format_version");
    ckpt.meta = std::move(header);
    return ckpt;
}

}  // namespace vmd
