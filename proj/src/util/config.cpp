#include "util/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vmd {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    size_t pos = line.find_first_of("#;");
    return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

ConfigMap ConfigMap::parse_text(const std::string& text, const std::string& origin) {
    ConfigMap cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": unterminated section header");
            }
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) {
                throw ParseError(origin + ":" + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!section.empty()) key = section + "." + key;
        cfg.values_[key] = value;
        cfg.consumed_[key] = false;
    }
    return cfg;
}

void ConfigMap::apply_overrides(const std::string& overrides) {
    std::string cur;
    auto flush = [&]() {
        std::string s = trim(cur);
        cur.clear();
        if (s.empty()) return;
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw UsageError("override '" + s + "' is not of the form key=value");
        }
        set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    };
    for (char c : overrides) {
        if (c == ';' || c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    if (key.empty()) throw UsageError("empty config key");
    values_[key] = value;
    consumed_[key] = false;
}

bool ConfigMap::has(const std::string& key) const {
    return values_.count(key) != 0;
}

std::string ConfigMap::take(const std::string& key) {
    consumed_[key] = true;
    return values_.at(key);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? take(key) : fallback;
}

double ConfigMap::get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    std::string v = take(key);
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError(origin_ + ": key '" + key + "' has non-numeric value '" + v + "'");
    }
}

int64_t ConfigMap::get_int(const std::string& key, int64_t fallback) {
    if (!has(key)) return fallback;
    std::string v = take(key);
    try {
        size_t used = 0;
        int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError(origin_ + ": key '" + key + "' has non-integer value '" + v + "'");
    }
}

uint64_t ConfigMap::get_u64(const std::string& key, uint64_t fallback) {
    int64_t v = get_int(key, static_cast<int64_t>(fallback));
    if (v < 0) throw UsageError(origin_ + ": key '" + key + "' must be non-negative");
    return static_cast<uint64_t>(v);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string v = take(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError(origin_ + ": key '" + key + "' has non-boolean value '" + v + "'");
}

std::vector<size_t> ConfigMap::get_size_list(const std::string& key, std::vector<size_t> fallback) {
    if (!has(key)) return fallback;
    std::string v = take(key);
    std::vector<size_t> out;
    std::string cur;
    auto flush = [&]() {
        std::string s = trim(cur);
        cur.clear();
        if (s.empty()) return;
        try {
            size_t used = 0;
            long long x = std::stoll(s, &used);
            if (used != s.size() || x <= 0) throw std::invalid_argument(s);
            out.push_back(static_cast<size_t>(x));
        } catch (const std::exception&) {
            throw UsageError(origin_ + ": key '" + key + "' has a bad list entry '" + s + "'");
        }
    };
    for (char c : v) {
        if (c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    if (out.empty()) throw UsageError(origin_ + ": key '" + key + "' is an empty list");
    return out;
}

void ConfigMap::reject_unknown_keys() const {
    std::string bad;
    for (const auto& [key, used] : consumed_) {
        if (!used) bad += (bad.empty() ? "" : ", ") + key;
    }
    if (!bad.empty()) {
        throw UsageError(origin_ + ": unknown config keys: " + bad);
    }
}

}  // namespace vmd
