#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eval/metrics.hpp"
#include "train/train.hpp"

namespace vmd {

// A named weight pattern. Variants differ only in LossWeights: masked copies
// of the base weights, identical data folds, seeds and architecture.
struct AblationVariant {
    std::string name;
    LossWeights weights;
};

// Student-facing variants: "baseline" (cross-entropy only), "w/o teacher"
// (expert guidance only), "w/o expert" (teacher guidance only), "VMD" (all
// terms). Teacher-facing rows are read off the w/o-expert and VMD runs.
std::vector<AblationVariant> ablation_variants(const LossWeights& base);

struct AblationRow {
    std::string setting;
    std::string branch;  // "student" or "teacher"
    std::vector<MetricReport> per_seed;

    MeanStd roc() const;
};

struct TrendCheck {
    bool pass = true;
    std::vector<std::string> lines;
};

struct AblationTable {
    std::vector<uint64_t> seeds;
    std::vector<AblationRow> rows;

    const AblationRow& row(const std::string& setting) const;
    // full VMD beats each single-guidance variant, each beats the baseline,
    // the VMD-baseline gap clears min_gap, and the expert-constrained teacher
    // beats the teacher without it; all on mean test ROC AUC.
    TrendCheck check_trends(double min_gap = 0.02) const;
    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

// Trains every variant for every seed on identical folds and scores the held
// out test split. Seeds rotate through the folds; jobs > 1 fans the runs out
// to a bounded worker pool without affecting results.
AblationTable run_ablation(const std::vector<Sample>& data, const TrainConfig& base,
                           const std::vector<uint64_t>& seeds, size_t jobs = 1,
                           const std::function<void(const std::string&)>& progress = nullptr);

}  // namespace vmd
