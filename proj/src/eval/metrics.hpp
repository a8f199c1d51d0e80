#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace vmd {

struct MetricReport {
    size_t n = 0;
    std::optional<double> roc_auc;  // empty when only one class is present
    std::string roc_error;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fbeta = 0.0;
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double threshold = 0.5;
    double beta = 0.5;
};

// ROC AUC via the rank statistic with tie-averaged ranks; equal to the
// fraction of (positive, negative) pairs ordered correctly, ties counted 1/2.
// Throws InvalidArgument when only one class is present.
double roc_auc_rank(const std::vector<double>& scores, const std::vector<int>& labels);

// Thresholded confusion counts plus ROC AUC. scores are vulnerable-class
// probabilities; prediction is positive when score >= threshold. A single-
// class label set leaves roc_auc empty with the reason in roc_error.
MetricReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold = 0.5, double beta = 0.5);

nlohmann::ordered_json metrics_to_json(const MetricReport& r);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace vmd
