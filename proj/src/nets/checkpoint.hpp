#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/tensor.hpp"

namespace vmd {

// Self-describing parameter container: 8-byte magic, u64 header length, JSON
// header, then one length-prefixed little-endian f64 array per tensor in
// header order. The header carries each tensor's canonical name and shape
// plus arbitrary metadata (model config, optimizer state, RNG streams).
struct Checkpoint {
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> data;
    };

    nlohmann::ordered_json meta;
    std::vector<Entry> tensors;

    void add(std::string name, Shape shape, std::vector<double> data);
    const Entry* find(std::string_view name) const;
    const Entry& require(std::string_view name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace vmd
