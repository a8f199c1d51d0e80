#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace vmd {

// Recipe for the class-conditioned multimodal generator. Image-like features
// carry the class signal on the first `signal_dims` coordinates plus heavy
// distractor noise on the next `mask_noise_dims`; the annotation mask zeroes
// the distractor block, and the report embedding is a low-noise linear view
// of the class factor.
struct GeneratorSpec {
    size_t n_samples = 502;
    size_t feature_dim = 24;
    size_t report_dim = 12;
    size_t signal_dims = 6;
    size_t mask_noise_dims = 14;
    double class_balance = 350.0 / 502.0;  // fraction labeled vulnerable
    double noise_scale = 2.0;
    uint64_t seed = 7;

    void validate() const;
};

struct Sample {
    std::string id;
    std::vector<double> x_s;   // student features
    std::vector<double> mask;  // binary annotation mask
    std::vector<double> x_t;   // x_s * mask
    std::vector<double> x_e;   // report embedding
    int label = 0;             // 0 stable, 1 vulnerable

    bool operator==(const Sample&) const = default;
};

// Held-out test indices plus k folds over the remainder. For fold f the
// validation set is folds[f] and the training set is every other fold.
struct SplitPlan {
    std::vector<size_t> test;
    std::vector<std::vector<size_t>> folds;

    std::vector<size_t> train_indices(size_t fold) const;
    const std::vector<size_t>& val_indices(size_t fold) const;
    size_t n_folds() const { return folds.size(); }
};

struct SplitSpec {
    double test_fraction = 1.0 / 6.0;  // train:test 5:1
    size_t k_folds = 5;
    uint64_t seed = 1234;
};

std::vector<Sample> generate(const GeneratorSpec& spec);

// Label-stratified split: the test fraction is held out per class, then the
// remainder is dealt into k folds round-robin per class. Deterministic in the
// seed; every index lands in exactly one of test or a fold.
SplitPlan split(const std::vector<Sample>& dataset, const SplitSpec& spec);

// JSON Lines, one sample per line with fields id, x_s, mask, x_t, x_e, label.
// save() also writes `<path>.meta.json` with the GeneratorSpec when present.
void save_dataset(const std::vector<Sample>& dataset, const std::string& path,
                  const GeneratorSpec* spec = nullptr);
std::vector<Sample> load_dataset(const std::string& path);

uint64_t dataset_fingerprint(const std::vector<Sample>& dataset);

}  // namespace vmd
