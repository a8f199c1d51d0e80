#include "eval/infer.hpp"

namespace vmd {

InferResult infer_student(VmdModel& model, const std::vector<double>& x_s, LatentMode mode,
                          RngStream* eps_rng) {
    Graph g;
    BoundParams bp(g);
    Tensor x = g.leaf({x_s.size()}, x_s);
    std::vector<double> eps(model.config().latent_dim, 0.0);
    if (mode == LatentMode::Sample && eps_rng) eps = eps_rng->normal_vector(eps.size());
    GaussianLatent z = model.encode(Branch::Student, bp, x, eps);
    Prediction pred = model.classify(Branch::Student, bp, z, mode);
    InferResult r;
    r.probabilities = {pred.probabilities.at(0), pred.probabilities.at(1)};
    r.logits = {pred.logits.at(0), pred.logits.at(1)};
    return r;
}

std::vector<double> branch_scores(VmdModel& model, const std::vector<Sample>& data,
                                  const std::vector<size_t>& indices, Branch branch) {
    if (branch == Branch::Expert) {
        throw InvalidArgument("branch_scores: expert branch scoring is not supported");
    }
    std::vector<double> scores;
    scores.reserve(indices.size());
    std::vector<double> zero_eps(model.config().latent_dim, 0.0);
    for (size_t idx : indices) {
        const Sample& s = data.at(idx);
        Graph g;
        BoundParams bp(g);
        Tensor x;
        if (branch == Branch::Student) {
            x = g.leaf({s.x_s.size()}, s.x_s);
        } else {
            Tensor xs = g.leaf({s.x_s.size()}, s.x_s);
            Tensor mask = g.leaf({s.mask.size()}, s.mask);
            x = VmdModel::teacher_input(xs, mask);
        }
        GaussianLatent z = model.encode(branch, bp, x, zero_eps);
        Prediction pred = model.classify(branch, bp, z, LatentMode::Mean);
        scores.push_back(pred.probabilities.at(1));
    }
    return scores;
}

std::vector<int> labels_at(const std::vector<Sample>& data, const std::vector<size_t>& indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (size_t idx : indices) out.push_back(data.at(idx).label);
    return out;
}

}  // namespace vmd
