#include "core/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vmd {

namespace {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

RngStream::RngStream(uint64_t master_seed, std::string_view name) {
    uint64_t tag = fnv1a64(name);
    std::seed_seq seq{static_cast<uint32_t>(master_seed),
                      static_cast<uint32_t>(master_seed >> 32),
                      static_cast<uint32_t>(tag),
                      static_cast<uint32_t>(tag >> 32)};
    engine_.seed(seq);
}

uint64_t RngStream::next_u64() {
    return engine_();
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<double> RngStream::normal_vector(size_t n) {
    std::vector<double> out(n);
    for (auto& x : out) x = normal();
    return out;
}

uint64_t RngStream::bounded(uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::bounded: n must be > 0");
    uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

std::string RngStream::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void RngStream::restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) throw std::runtime_error("RngStream::restore: malformed engine state");
}

}  // namespace vmd
