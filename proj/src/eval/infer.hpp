#pragma once

#include <vector>

#include "nets/model.hpp"
#include "synth/synth.hpp"

namespace vmd {

struct InferResult {
    std::array<double, 2> probabilities;
    std::array<double, 2> logits;
};

// Student-only forward pass: encode, take the latent (mean by default, or a
// seeded draw), classify through the shared head. Touches no teacher or
// expert parameters.
InferResult infer_student(VmdModel& model, const std::vector<double>& x_s,
                          LatentMode mode = LatentMode::Mean, RngStream* eps_rng = nullptr);

// Vulnerable-class probability for each indexed sample through one branch.
// The student branch reads x_s; the teacher branch reads the masked view
// x_s * mask. Mean-mode latents, so the result is deterministic.
std::vector<double> branch_scores(VmdModel& model, const std::vector<Sample>& data,
                                  const std::vector<size_t>& indices, Branch branch);

std::vector<int> labels_at(const std::vector<Sample>& data, const std::vector<size_t>& indices);

}  // namespace vmd
