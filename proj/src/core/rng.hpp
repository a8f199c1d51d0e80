#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vmd {

// Deterministic named random stream. A master seed fans out into independent
// streams keyed by name ("data.shuffle", "eps.student", ...) so that two runs
// sharing a master seed draw identical values per stream regardless of what
// the other streams consume.
class RngStream {
public:
    RngStream() : RngStream(0, "default") {}
    RngStream(uint64_t master_seed, std::string_view name);

    // Uniform in [0, 1).
    double uniform();

    // Standard normal via Box-Muller. Each call consumes two uniforms and
    // discards the second variate, so the stream carries no hidden state
    // between draws.
    double normal();

    std::vector<double> normal_vector(size_t n);

    uint64_t next_u64();

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t bounded(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(bounded(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Engine state as text, for checkpointing.
    std::string serialize() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace vmd
