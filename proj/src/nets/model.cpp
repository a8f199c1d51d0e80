#include "nets/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace vmd {

namespace {
constexpr double kLogStdClampLo = -10.0;
constexpr double kLogStdClampHi = 10.0;
}  // namespace

void EncoderConfig::validate() const {
    if (input_dim == 0) throw InvalidArgument("EncoderConfig: input_dim must be positive");
    if (hidden_dims.empty()) throw InvalidArgument("EncoderConfig: hidden_dims must be nonempty");
    for (size_t h : hidden_dims) {
        if (h == 0) throw InvalidArgument("EncoderConfig: hidden dims must be positive");
    }
    if (latent_dim < 2) throw InvalidArgument("EncoderConfig: latent_dim must be >= 2");
}

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::Student: return "student";
        case Branch::Teacher: return "teacher";
        case Branch::Expert: return "expert";
    }
    return "?";
}

Branch branch_from_name(std::string_view name) {
    if (name == "student") return Branch::Student;
    if (name == "teacher") return Branch::Teacher;
    if (name == "expert") return Branch::Expert;
    throw InvalidArgument("unknown branch: " + std::string(name));
}

Tensor BoundParams::use(Param& p) {
    ++p.access_count;
    auto it = index_.find(&p);
    if (it != index_.end()) return bound_[it->second].second;
    Tensor leaf = graph_->leaf(p.shape, p.value, true);
    index_.emplace(&p, bound_.size());
    bound_.emplace_back(&p, leaf);
    return leaf;
}

void BoundParams::harvest() {
    for (auto& [p, leaf] : bound_) {
        const auto& g = leaf.node().grad;
        if (g.empty()) continue;
        for (size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
}

void VmdModelConfig::validate() const {
    encoder(Branch::Student).validate();
    encoder(Branch::Expert).validate();
}

EncoderConfig VmdModelConfig::encoder(Branch b) const {
    EncoderConfig e;
    e.input_dim = (b == Branch::Expert) ? report_dim : feature_dim;
    e.hidden_dims = hidden_dims;
    e.latent_dim = latent_dim;
    return e;
}

VmdModel::VmdModel(VmdModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (Branch b : {Branch::Student, Branch::Teacher, Branch::Expert}) {
        RngStream rng(seed, std::string("init.") + branch_name(b));
        init_mlp(branch_name(b), cfg_.encoder(b), rng);
    }
    size_t latent = cfg_.latent_dim;
    {
        RngStream rng(seed, "init.shared_classifier");
        double s = 1.0 / std::sqrt(static_cast<double>(latent));
        std::vector<double> w(latent * 2);
        for (auto& v : w) v = s * rng.normal();
        add_param("shared_classifier.weight", {latent, 2}, std::move(w));
        add_param("shared_classifier.bias", {2}, std::vector<double>(2, 0.0));
    }
    {
        RngStream rng(seed, "init.expert_classifier");
        double s = 1.0 / std::sqrt(static_cast<double>(latent));
        std::vector<double> w(latent * 2);
        for (auto& v : w) v = s * rng.normal();
        add_param("expert_classifier.weight", {latent, 2}, std::move(w));
        add_param("expert_classifier.bias", {2}, std::vector<double>(2, 0.0));
    }
}

Param& VmdModel::add_param(std::string name, Shape shape, std::vector<double> value) {
    auto p = std::make_unique<Param>();
    p->name = std::move(name);
    p->shape = std::move(shape);
    p->value = std::move(value);
    p->grad.assign(p->value.size(), 0.0);
    Param& ref = *p;
    by_name_.emplace(ref.name, &ref);
    params_.push_back(std::move(p));
    return ref;
}

void VmdModel::init_mlp(const std::string& prefix, const EncoderConfig& enc, RngStream& rng) {
    size_t in = enc.input_dim;
    for (size_t li = 0; li < enc.hidden_dims.size(); ++li) {
        size_t out = enc.hidden_dims[li];
        double s = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(in * out);
        for (auto& v : w) v = s * rng.normal();
        std::string base = prefix + "_encoder.layer" + std::to_string(li);
        add_param(base + ".weight", {in, out}, std::move(w));
        add_param(base + ".bias", {out}, std::vector<double>(out, 0.0));
        in = out;
    }
    // head emits 2*latent values read as (mean, log sigma)
    size_t out = 2 * enc.latent_dim;
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& v : w) v = s * rng.normal();
    add_param(prefix + "_head.weight", {in, out}, std::move(w));
    add_param(prefix + "_head.bias", {out}, std::vector<double>(out, 0.0));
}

std::vector<Param*> VmdModel::parameters() {
    std::vector<Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Param*> VmdModel::parameters() const {
    std::vector<const Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

Param& VmdModel::param(std::string_view name) {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw InvalidArgument("unknown parameter: " + std::string(name));
    return *it->second;
}

void VmdModel::zero_grad() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void VmdModel::reset_access_counts() {
    for (auto& p : params_) p->access_count = 0;
}

uint64_t VmdModel::access_count_with_prefix(std::string_view prefix) const {
    uint64_t total = 0;
    for (const auto& p : params_) {
        if (p->name.rfind(prefix, 0) == 0) total += p->access_count;
    }
    return total;
}

Tensor VmdModel::linear(BoundParams& bp, const Tensor& x, Param& w, Param& b) {
    size_t in = w.shape[0], out = w.shape[1];
    if (x.rank() != 1 || x.numel() != in) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(w.shape));
    }
    Tensor y = matmul(reshape(x, {1, in}), bp.use(w));
    return add(reshape(y, {out}), bp.use(b));
}

Tensor VmdModel::encoder_forward(Branch b, BoundParams& bp, const Tensor& x) {
    const EncoderConfig enc = cfg_.encoder(b);
    if (x.rank() != 1 || x.numel() != enc.input_dim) {
        throw DimensionError(std::string("encode(") + branch_name(b) + "): expected input of " +
                             std::to_string(enc.input_dim) + " features, got " +
                             shape_str(x.shape()));
    }
    std::string prefix = std::string(branch_name(b)) + "_encoder.layer";
    Tensor h = x;
    for (size_t li = 0; li < enc.hidden_dims.size(); ++li) {
        std::string base = prefix + std::to_string(li);
        h = tanh(linear(bp, h, param(base + ".weight"), param(base + ".bias")));
    }
    return h;
}

GaussianLatent VmdModel::encode(Branch b, BoundParams& bp, const Tensor& x,
                                const std::vector<double>& eps) {
    size_t latent = cfg_.latent_dim;
    if (eps.size() != latent) {
        throw DimensionError("encode: eps length " + std::to_string(eps.size()) +
                             " does not match latent_dim " + std::to_string(latent));
    }
    Tensor h = encoder_forward(b, bp, x);
    std::string head = std::string(branch_name(b)) + "_head";
    Tensor out = linear(bp, h, param(head + ".weight"), param(head + ".bias"));
    GaussianLatent z;
    z.mean = slice(out, 0, latent);
    z.log_std = clamp(slice(out, latent, latent), kLogStdClampLo, kLogStdClampHi);
    z.eps = eps;
    Tensor eps_leaf = bp.graph().leaf({latent}, eps, false);
    z.sample = add(z.mean, mul(exp(z.log_std), eps_leaf));
    return z;
}

GaussianLatent VmdModel::encode(Branch b, BoundParams& bp, const Tensor& x, RngStream& eps_rng) {
    return encode(b, bp, x, eps_rng.normal_vector(cfg_.latent_dim));
}

Prediction VmdModel::classify(Branch b, BoundParams& bp, const GaussianLatent& z,
                              LatentMode mode) {
    return classify_latent(b, bp, mode == LatentMode::Sample ? z.sample : z.mean);
}

Prediction VmdModel::classify_latent(Branch b, BoundParams& bp, const Tensor& z) {
    const char* head = (b == Branch::Expert) ? "expert_classifier" : "shared_classifier";
    Prediction pred;
    pred.logits = linear(bp, z, param(std::string(head) + ".weight"),
                         param(std::string(head) + ".bias"));
    pred.probabilities = softmax(pred.logits);
    return pred;
}

Tensor VmdModel::teacher_input(const Tensor& x_s, const Tensor& mask) {
    if (x_s.shape() != mask.shape()) {
        throw DimensionError("teacher_input: shapes differ, " + shape_str(x_s.shape()) + " vs " +
                             shape_str(mask.shape()));
    }
    for (double m : mask.data()) {
        if (!(m >= 0.0 && m <= 1.0)) {
            throw InvalidArgument("teacher_input: mask entries must lie in [0, 1]");
        }
    }
    return mul(x_s, mask);
}

}  // namespace vmd
