#include "losses/losses.hpp"

#include <cmath>

namespace vmd {

namespace {

void check_label(int label) {
    if (label != 0 && label != 1) {
        throw InvalidArgument("label must be 0 or 1, got " + std::to_string(label));
    }
}

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidArgument("temperature tau must be positive and finite");
    }
}

const Tensor& similarity_vector(const Prediction& p, SimilarityInput input) {
    return input == SimilarityInput::Logits ? p.logits : p.probabilities;
}

// Clamped log-likelihood of the true class under a prediction.
Tensor log_likelihood(const Prediction& pred, int label) {
    check_label(label);
    if (pred.probabilities.rank() != 1 || pred.probabilities.numel() != 2) {
        throw DimensionError("prediction probabilities must have shape [2], got " +
                             shape_str(pred.probabilities.shape()));
    }
    Tensor p_true = as_scalar(slice(pred.probabilities, static_cast<size_t>(label), 1));
    return log(clamp(p_true, kProbClampLo, kProbClampHi));
}

// Clamped similarity row for one anchor: softmax over cosine/tau against all
// candidates.
Tensor similarity_row(const Prediction& anchor, const std::vector<Prediction>& candidates,
                      double tau, SimilarityInput input) {
    std::vector<Tensor> cells;
    cells.reserve(candidates.size());
    const Tensor& avec = similarity_vector(anchor, input);
    for (const Prediction& cand : candidates) {
        cells.push_back(cosine_similarity(avec, similarity_vector(cand, input)));
    }
    Tensor row = softmax(scale(stack(cells), 1.0 / tau));
    return clamp(row, kProbClampLo, kProbClampHi);
}

Tensor batch_cross_entropy(const std::vector<Prediction>& preds, const std::vector<int>& labels) {
    std::vector<Tensor> nll;
    nll.reserve(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        nll.push_back(neg(log_likelihood(preds[i], labels[i])));
    }
    return mean(stack(nll));
}

struct ElboBatch {
    Tensor elbo;      // mean over samples of (log-likelihood - KLD)
    Tensor kld_mean;  // mean over samples of the KLD alone
};

ElboBatch elbo_batch(const std::vector<GaussianLatent>& expert_z,
                     const std::vector<GaussianLatent>& image_prior,
                     const std::vector<Prediction>& image_pred,
                     const std::vector<int>& labels) {
    size_t n = labels.size();
    if (expert_z.size() != n || image_prior.size() != n || image_pred.size() != n) {
        throw DimensionError("elbo: batch lists disagree in length");
    }
    std::vector<Tensor> terms, klds;
    terms.reserve(n);
    klds.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Tensor kld = gaussian_kld(expert_z[i], image_prior[i]);
        klds.push_back(kld);
        terms.push_back(sub(log_likelihood(image_pred[i], labels[i]), kld));
    }
    return {mean(stack(terms)), mean(stack(klds))};
}

}  // namespace

void LossWeights::validate() const {
    for (double a : alpha) {
        if (!std::isfinite(a) || a < 0.0) {
            throw InvalidArgument("loss weights alpha must be finite and >= 0");
        }
    }
    for (double l : lambda) {
        if (!std::isfinite(l) || l < 0.0) {
            throw InvalidArgument("loss weights lambda must be finite and >= 0");
        }
    }
    check_tau(tau);
}

Tensor gaussian_kld(const GaussianLatent& q, const GaussianLatent& p) {
    if (q.mean.shape() != p.mean.shape()) {
        throw DimensionError("gaussian_kld: latent dims disagree, " + shape_str(q.mean.shape()) +
                             " vs " + shape_str(p.mean.shape()));
    }
    // Per dimension: (lsp - lsq) + 0.5*exp(2*(lsq - lsp)) + 0.5*d^2*exp(-2*lsp) - 0.5,
    // written so identical inputs cancel exactly to zero.
    Tensor ls_diff = sub(q.log_std, p.log_std);
    Tensor var_ratio = exp(scale(ls_diff, 2.0));
    Tensor d = sub(q.mean, p.mean);
    Tensor quad = mul(mul(d, d), exp(scale(p.log_std, -2.0)));
    Tensor per_dim = add(neg(ls_diff), add_scalar(scale(add(var_ratio, quad), 0.5), -0.5));
    return sum(per_dim);
}

Tensor elbo_term(const GaussianLatent& expert_z, const GaussianLatent& image_prior,
                 const Prediction& image_pred_with_expert_z, int label) {
    return sub(log_likelihood(image_pred_with_expert_z, label),
               gaussian_kld(expert_z, image_prior));
}

Tensor similarity_model(const Prediction& anchor, const std::vector<Prediction>& candidates,
                        size_t i, double tau, SimilarityInput input) {
    check_tau(tau);
    if (candidates.empty()) throw InvalidArgument("similarity_model: empty candidate set");
    if (i >= candidates.size()) {
        throw InvalidArgument("similarity_model: index " + std::to_string(i) +
                              " out of range for " + std::to_string(candidates.size()) +
                              " candidates");
    }
    std::vector<Tensor> cells;
    cells.reserve(candidates.size());
    const Tensor& avec = similarity_vector(anchor, input);
    for (const Prediction& cand : candidates) {
        cells.push_back(cosine_similarity(avec, similarity_vector(cand, input)));
    }
    Tensor row = softmax(scale(stack(cells), 1.0 / tau));
    return as_scalar(slice(row, i, 1));
}

Tensor contrastive_mi(const std::vector<Prediction>& anchors,
                      const std::vector<Prediction>& candidates,
                      const std::vector<int>& labels, double tau, SimilarityInput input) {
    check_tau(tau);
    size_t n = labels.size();
    if (n == 0) throw InvalidArgument("contrastive_mi: empty batch");
    if (anchors.size() != n || candidates.size() != n) {
        throw DimensionError("contrastive_mi: anchors/candidates/labels lengths disagree");
    }
    for (int l : labels) check_label(l);

    Graph& g = anchors[0].logits.graph();
    std::vector<Tensor> per_anchor;
    per_anchor.reserve(n);
    for (size_t j = 0; j < n; ++j) {
        Tensor mc = similarity_row(anchors[j], candidates, tau, input);
        std::vector<double> pos_mask(n), neg_mask(n);
        for (size_t k = 0; k < n; ++k) {
            bool same = labels[k] == labels[j];
            pos_mask[k] = same ? 1.0 : 0.0;
            neg_mask[k] = same ? 0.0 : 1.0;
        }
        Tensor pos = sum(mul(log(mc), g.leaf({n}, pos_mask)));
        Tensor one_minus = sub(g.ones({n}), mc);
        Tensor negt = sum(mul(log(one_minus), g.leaf({n}, neg_mask)));
        per_anchor.push_back(add(pos, negt));
    }
    return mean(stack(per_anchor));
}

Tensor teacher_constraint(const std::vector<GaussianLatent>& expert_z,
                          const std::vector<GaussianLatent>& teacher_prior,
                          const std::vector<Prediction>& teacher_pred_with_expert_z,
                          const std::vector<int>& labels,
                          const std::vector<Prediction>& teacher_preds,
                          const std::vector<Prediction>& expert_preds, double tau,
                          SimilarityInput input) {
    ElboBatch eb = elbo_batch(expert_z, teacher_prior, teacher_pred_with_expert_z, labels);
    Tensor mi = contrastive_mi(teacher_preds, expert_preds, labels, tau, input);
    return add(eb.elbo, mi);
}

Tensor h_cls(Graph& g, const std::vector<Prediction>& preds_t,
             const std::vector<Prediction>& preds_s,
             const std::vector<Prediction>& preds_e, const std::vector<int>& labels,
             const std::array<double, 3>& lambda) {
    for (int l : labels) check_label(l);
    const std::vector<Prediction>* branches[3] = {&preds_t, &preds_s, &preds_e};
    Tensor total;
    for (size_t b = 0; b < 3; ++b) {
        if (lambda[b] == 0.0) continue;
        if (branches[b]->size() != labels.size()) {
            throw DimensionError("h_cls: prediction list does not match labels length");
        }
        Tensor term = scale(batch_cross_entropy(*branches[b], labels), lambda[b]);
        total = total.valid() ? add(total, term) : term;
    }
    return total.valid() ? total : g.scalar(0.0);
}

ObjectiveResult global_objective(Graph& g, const BatchOutputs& batch, const LossWeights& weights,
                                 const LossOptions& options) {
    weights.validate();
    size_t n = batch.size();
    if (n == 0) throw InvalidArgument("global_objective: empty batch");
    for (int l : batch.labels) check_label(l);

    ObjectiveResult res;
    Tensor maximized;  // alpha-weighted sum of the mutual-information terms
    auto add_term = [&](Tensor term, double w) {
        Tensor scaled = scale(term, w);
        maximized = maximized.valid() ? add(maximized, scaled) : scaled;
    };

    if (weights.alpha[0] != 0.0) {
        Tensor i_st = contrastive_mi(batch.teacher_pred, batch.student_pred, batch.labels,
                                     weights.tau, options.similarity_input);
        res.report.i_st = i_st.value();
        add_term(i_st, weights.alpha[0]);
    }
    if (weights.alpha[1] != 0.0) {
        ElboBatch eb = elbo_batch(batch.expert_z, batch.student_z,
                                  batch.student_pred_from_expert_z, batch.labels);
        res.report.i_se = eb.elbo.value();
        res.report.kld_se = eb.kld_mean.value();
        add_term(eb.elbo, weights.alpha[1]);
    }
    if (weights.alpha[2] != 0.0) {
        ElboBatch eb = elbo_batch(batch.expert_z, batch.teacher_z,
                                  batch.teacher_pred_from_expert_z, batch.labels);
        Tensor mi = contrastive_mi(batch.teacher_pred, batch.expert_pred, batch.labels,
                                   weights.tau, options.similarity_input);
        Tensor i_te = add(eb.elbo, mi);
        res.report.i_te = i_te.value();
        res.report.kld_te = eb.kld_mean.value();
        add_term(i_te, weights.alpha[2]);
    }

    Tensor total;
    if (maximized.valid()) total = neg(maximized);
    if (weights.alpha[3] != 0.0) {
        Tensor cls = h_cls(g, batch.teacher_pred, batch.student_pred, batch.expert_pred,
                           batch.labels, weights.lambda);
        res.report.h_cls = cls.value();
        Tensor scaled = scale(cls, weights.alpha[3]);
        total = total.valid() ? add(total, scaled) : scaled;
    }
    if (!total.valid()) total = g.scalar(0.0);

    res.total = total;
    res.report.total = total.value();
    return res;
}

}  // namespace vmd
