#pragma once

#include <array>
#include <vector>

#include "core/tensor.hpp"
#include "nets/model.hpp"

namespace vmd {

// Probabilities and similarity scores are clamped into this band before any
// log or log(1-x).
inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;

// Which vector of a Prediction feeds the cosine similarity.
enum class SimilarityInput { Logits, Probs };
// How the likelihood expectation of the variational bound is estimated: with
// the expert's drawn latent pushed through the image-branch head, or with the
// image branch's own draw.
enum class ElboExpectation { ExpertZ, StudentZ };

struct LossWeights {
    std::array<double, 4> alpha{1.0, 1.0, 1.0, 1.0};
    std::array<double, 3> lambda{1.0, 1.0, 1.0};
    double tau = 0.5;

    void validate() const;
};

struct LossOptions {
    SimilarityInput similarity_input = SimilarityInput::Logits;
    ElboExpectation elbo_expectation = ElboExpectation::ExpertZ;
};

// Per-sample outputs of one forward pass over a minibatch. Branches that a
// weight configuration never touches may be left empty; the cross-prediction
// lists hold the image-branch heads applied to the expert's latent draw.
struct BatchOutputs {
    std::vector<GaussianLatent> student_z, teacher_z, expert_z;
    std::vector<Prediction> student_pred, teacher_pred, expert_pred;
    std::vector<Prediction> student_pred_from_expert_z, teacher_pred_from_expert_z;
    std::vector<int> labels;

    size_t size() const { return labels.size(); }
};

struct LossReport {
    double total = 0.0;
    double i_st = 0.0;    // teacher-student contrastive mutual information
    double i_se = 0.0;    // student-expert variational bound
    double i_te = 0.0;    // teacher-expert constraint
    double h_cls = 0.0;   // weighted cross-entropy over the three heads
    double kld_se = 0.0;  // batch-mean KLD(expert posterior || student prior)
    double kld_te = 0.0;  // batch-mean KLD(expert posterior || teacher prior)
};

struct ObjectiveResult {
    Tensor total;  // minimized scalar
    LossReport report;
};

// Closed-form KL divergence between diagonal Gaussians, KL(q || p), summed
// over dimensions. Argument order is (expert posterior, image-branch prior).
Tensor gaussian_kld(const GaussianLatent& q, const GaussianLatent& p);

// Single-draw variational bound: log-likelihood of the true label under the
// supplied image-branch prediction minus gaussian_kld(expert_z, image_prior).
Tensor elbo_term(const GaussianLatent& expert_z, const GaussianLatent& image_prior,
                 const Prediction& image_pred_with_expert_z, int label);

// Temperature-scaled softmax over cosine similarities between the anchor and
// every candidate, evaluated at candidate `i`.
Tensor similarity_model(const Prediction& anchor, const std::vector<Prediction>& candidates,
                        size_t i, double tau,
                        SimilarityInput input = SimilarityInput::Logits);

// Class-supervised InfoNCE-style objective: for every anchor j, log-similarity
// to same-class candidates (self included) plus log(1 - similarity) to
// different-class candidates, averaged over anchors.
Tensor contrastive_mi(const std::vector<Prediction>& anchors,
                      const std::vector<Prediction>& candidates,
                      const std::vector<int>& labels, double tau,
                      SimilarityInput input = SimilarityInput::Logits);

// Teacher-expert constraint: batch-mean variational bound against the teacher
// prior plus the teacher-anchored contrastive term over expert predictions.
Tensor teacher_constraint(const std::vector<GaussianLatent>& expert_z,
                          const std::vector<GaussianLatent>& teacher_prior,
                          const std::vector<Prediction>& teacher_pred_with_expert_z,
                          const std::vector<int>& labels,
                          const std::vector<Prediction>& teacher_preds,
                          const std::vector<Prediction>& expert_preds, double tau,
                          SimilarityInput input = SimilarityInput::Logits);

// lambda1*CE(teacher) + lambda2*CE(student) + lambda3*CE(expert); each CE is
// the batch mean of -log p(true class). Branches with zero weight may be
// empty and are not evaluated.
Tensor h_cls(Graph& g, const std::vector<Prediction>& preds_t,
             const std::vector<Prediction>& preds_s,
             const std::vector<Prediction>& preds_e, const std::vector<int>& labels,
             const std::array<double, 3>& lambda);

// Minimized form of the global objective:
//   total = -(a1*I(S,T) + a2*I(S,E) + a3*I(T,E)) + a4*H_cls.
// Zero-weighted terms are skipped entirely (no graph nodes, reported as 0).
ObjectiveResult global_objective(Graph& g, const BatchOutputs& batch, const LossWeights& weights,
                                 const LossOptions& options = {});

}  // namespace vmd
