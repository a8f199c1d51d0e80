#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace vmd {

struct EncoderConfig {
    size_t input_dim = 0;
    std::vector<size_t> hidden_dims;
    size_t latent_dim = 32;

    void validate() const;
};

// Persistent trainable array; lives across graphs. Forward passes bind it into
// a graph via BoundParams, which routes gradients back into `grad`.
struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    mutable uint64_t access_count = 0;

    size_t numel() const { return value.size(); }
};

enum class Branch { Student, Teacher, Expert };
enum class LatentMode { Sample, Mean };

const char* branch_name(Branch b);
Branch branch_from_name(std::string_view name);

// Amortized diagonal Gaussian: sample = mean + exp(log_std) * eps.
struct GaussianLatent {
    Tensor mean;
    Tensor log_std;
    Tensor sample;
    std::vector<double> eps;
};

struct Prediction {
    Tensor logits;         // [2]
    Tensor probabilities;  // softmax(logits)
};

// One leaf node per (graph, param); repeated use returns the same leaf so the
// tape accumulates all paths into a single gradient. harvest() adds the leaf
// gradients into the persistent Param::grad after Graph::backward.
class BoundParams {
public:
    explicit BoundParams(Graph& g) : graph_(&g) {}

    Tensor use(Param& p);
    void harvest();
    Graph& graph() { return *graph_; }

private:
    Graph* graph_;
    std::vector<std::pair<Param*, Tensor>> bound_;
    std::unordered_map<const Param*, size_t> index_;
};

struct VmdModelConfig {
    size_t feature_dim = 24;  // student and teacher input width
    size_t report_dim = 12;   // expert input width
    std::vector<size_t> hidden_dims = {32, 32};
    size_t latent_dim = 32;

    void validate() const;
    EncoderConfig encoder(Branch b) const;
};

// Student, teacher and expert encoders with variational heads. The student and
// teacher classify through the same Param tensors (aliasing, not copies); the
// expert owns a separate classifier.
class VmdModel {
public:
    VmdModel(VmdModelConfig cfg, uint64_t seed);

    const VmdModelConfig& config() const { return cfg_; }

    // Canonical order: student, teacher, expert (encoder layers then head),
    // shared_classifier, expert_classifier. Shared classifier appears once.
    std::vector<Param*> parameters();
    std::vector<const Param*> parameters() const;
    Param& param(std::string_view name);

    void zero_grad();
    void reset_access_counts();
    uint64_t access_count_with_prefix(std::string_view prefix) const;

    GaussianLatent encode(Branch b, BoundParams& bp, const Tensor& x,
                          const std::vector<double>& eps);
    GaussianLatent encode(Branch b, BoundParams& bp, const Tensor& x, RngStream& eps_rng);

    Prediction classify(Branch b, BoundParams& bp, const GaussianLatent& z,
                        LatentMode mode);
    // Classifies an arbitrary latent vector through a branch's head; used when
    // scoring one branch's likelihood on another branch's draw.
    Prediction classify_latent(Branch b, BoundParams& bp, const Tensor& z);

    static Tensor teacher_input(const Tensor& x_s, const Tensor& mask);

private:
    Param& add_param(std::string name, Shape shape, std::vector<double> value);
    void init_mlp(const std::string& prefix, const EncoderConfig& enc, RngStream& rng);
    Tensor linear(BoundParams& bp, const Tensor& x, Param& w, Param& b);
    Tensor encoder_forward(Branch b, BoundParams& bp, const Tensor& x);

    VmdModelConfig cfg_;
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, Param*> by_name_;
};

}  // namespace vmd
