#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "eval/metrics.hpp"
#include "losses/losses.hpp"
#include "nets/checkpoint.hpp"
#include "nets/model.hpp"
#include "synth/synth.hpp"
#include "train/adam.hpp"
#include "util/config.hpp"

namespace vmd {

struct TrainConfig {
    size_t epochs = 100;  // 400 under paper_scale
    size_t batch_size = 16;
    double lr = 5e-4;
    double weight_decay = 1e-4;
    uint64_t seed = 7;
    LossWeights weights;
    LossOptions options;
    size_t eval_every = 10;
    std::vector<size_t> hidden_dims{32, 32};
    size_t latent_dim = 32;  // 512 under paper_scale
    SplitSpec split;
    size_t fold = 0;
    bool paper_scale = false;

    void validate() const;
    void apply_paper_scale();
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);
// Binds every addressable key; unknown keys are rejected by the caller via
// ConfigMap::reject_unknown_keys().
TrainConfig train_config_from(ConfigMap& cfg);

struct EpochLog {
    size_t epoch = 0;  // 1-based
    LossReport loss;   // mean over the epoch's batches
    std::optional<MetricReport> val;
    double wall_s = 0.0;
};
using TrainLog = std::vector<EpochLog>;

nlohmann::ordered_json epoch_log_to_json(const EpochLog& e);

// One minibatch forward pass. Branches no active weight touches are skipped;
// the per-branch eps streams advance only for forwarded branches.
struct ForwardBatch {
    Graph graph;
    BoundParams bp{graph};
    BatchOutputs outputs;
};

struct EpsStreams {
    RngStream student, teacher, expert;
};

void forward_batch(ForwardBatch& fb, VmdModel& model, const std::vector<Sample>& data,
                   const std::vector<size_t>& indices, const LossWeights& weights,
                   const LossOptions& options, EpsStreams& eps);

// Owns the model, optimizer and RNG streams of one training run. run() walks
// the remaining epochs; save/restore reproduce the run bit-exactly from the
// cut point (same parameters, moments and stream states).
class Trainer {
public:
    Trainer(TrainConfig cfg, size_t feature_dim, size_t report_dim);

    void run(const std::vector<Sample>& data, const SplitPlan& plan);
    void run_epochs(const std::vector<Sample>& data, const SplitPlan& plan, size_t count);

    VmdModel& model() { return *model_; }
    const TrainConfig& config() const { return cfg_; }
    const TrainLog& log() const { return log_; }
    size_t completed_epochs() const { return completed_epochs_; }
    uint64_t adam_steps() const { return adam_->step_count(); }

    void save_checkpoint(const std::string& path) const;
    static std::unique_ptr<Trainer> restore_checkpoint(const std::string& path);

    // Hooks for logging and tests.
    std::function<void(const EpochLog&)> on_epoch;
    std::function<void(const Trainer&)> after_step;

private:
    void train_epoch(const std::vector<Sample>& data, const SplitPlan& plan, size_t epoch_no);

    TrainConfig cfg_;
    size_t feature_dim_ = 0, report_dim_ = 0;
    std::unique_ptr<VmdModel> model_;
    std::unique_ptr<Adam> adam_;
    RngStream shuffle_rng_;
    EpsStreams eps_;
    size_t completed_epochs_ = 0;
    TrainLog log_;
};

}  // namespace vmd
