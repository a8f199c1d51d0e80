#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace vmd {

// Flat key=value file with [section] headers; section keys are addressed as
// "section.key". '#' and ';' start comments. Typed getters record which keys
// were read so unknown keys can be rejected after binding.
class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_text(const std::string& text, const std::string& origin = "<config>");

    // Overrides of the form "key=value;section.key=value" (';' or ',' separated).
    void apply_overrides(const std::string& overrides);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    int64_t get_int(const std::string& key, int64_t fallback);
    uint64_t get_u64(const std::string& key, uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<size_t> get_size_list(const std::string& key, std::vector<size_t> fallback);

    // Throws UsageError when any key was never consumed by a getter.
    void reject_unknown_keys() const;

private:
    std::string take(const std::string& key);

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> consumed_;
    std::string origin_ = "<config>";
};

}  // namespace vmd
