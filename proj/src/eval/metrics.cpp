#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"

namespace vmd {

double roc_auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("roc_auc: scores/labels lengths disagree");
    }
    if (scores.empty()) throw InvalidArgument("roc_auc: empty input");
    size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InvalidArgument("roc_auc: labels must be 0 or 1");
        n_pos += static_cast<size_t>(l);
    }
    size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw InvalidArgument("roc_auc: undefined with a single class present");
    }

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // 1-based average ranks over tie groups.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold, double beta) {
    if (scores.size() != labels.size()) {
        throw DimensionError("compute_metrics: scores/labels lengths disagree");
    }
    if (scores.empty()) throw InvalidArgument("compute_metrics: empty input");
    if (!(beta > 0.0)) throw InvalidArgument("compute_metrics: beta must be positive");

    MetricReport r;
    r.n = scores.size();
    r.threshold = threshold;
    r.beta = beta;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool truth = labels[i] == 1;
        if (pred && truth) ++r.tp;
        else if (pred && !truth) ++r.fp;
        else if (!pred && truth) ++r.fn;
        else ++r.tn;
    }
    r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.n);
    r.precision = (r.tp + r.fp) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = (r.tp + r.fn) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    double b2 = beta * beta;
    double denom = b2 * r.precision + r.recall;
    r.fbeta = denom > 0.0 ? (1.0 + b2) * r.precision * r.recall / denom : 0.0;
    try {
        r.roc_auc = roc_auc_rank(scores, labels);
    } catch (const InvalidArgument& e) {
        r.roc_error = e.what();
    }
    return r;
}

nlohmann::ordered_json metrics_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    if (r.roc_auc) {
        j["roc_auc"] = *r.roc_auc;
    } else {
        j["roc_auc"] = nullptr;
        j["roc_error"] = r.roc_error;
    }
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["fbeta"] = r.fbeta;
    j["threshold"] = r.threshold;
    j["beta"] = r.beta;
    j["confusion"] = {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"tn", r.tn}};
    return j;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

}  // namespace vmd
