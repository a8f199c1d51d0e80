#include "eval/gradcheck.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "losses/losses.hpp"
#include "synth/synth.hpp"
#include "train/train.hpp"

namespace vmd {

namespace {

constexpr size_t kTrials = 10;
constexpr double kEps = 1e-5;

std::vector<double> randn(RngStream& rng, size_t n) {
    return rng.normal_vector(n);
}

// Values pushed away from a kink so finite differences stay two-sided.
std::vector<double> randn_away_from(RngStream& rng, size_t n, double kink, double margin) {
    std::vector<double> v = randn(rng, n);
    for (double& x : v) {
        if (std::abs(x - kink) < margin) x = kink + (x >= kink ? margin : -margin);
    }
    return v;
}

double check_op(const std::string& op, RngStream& rng, size_t trial) {
    bool alt = trial % 2 == 1;
    if (op == "matmul") {
        std::vector<double> other = randn(rng, 6);
        TensorFn f = [other, alt](Graph& g, const Tensor& x) {
            Tensor c = g.leaf(alt ? Shape{2, 3} : Shape{3, 2}, other);
            return alt ? sum(matmul(c, reshape(x, {3, 2}))) : sum(matmul(reshape(x, {2, 3}), c));
        };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    if (op == "add" || op == "sub" || op == "mul") {
        // even trials: x is the full-shape left operand; odd: broadcast scalar right
        size_t n = alt ? 1 : 6;
        std::vector<double> other = randn(rng, 6);
        TensorFn f = [op, other, alt](Graph& g, const Tensor& x) {
            Tensor c = g.leaf({6}, other);
            Tensor r;
            if (op == "add") {
                r = alt ? add(c, x) : add(x, c);
            } else if (op == "sub") {
                r = alt ? sub(c, x) : sub(x, c);
            } else {
                r = alt ? mul(c, x) : mul(x, c);
            }
            return sum(r);
        };
        return gradient_check(f, {n}, randn(rng, n), kEps);
    }
    if (op == "scale") {
        TensorFn f = [](Graph&, const Tensor& x) { return sum(scale(x, -1.7)); };
        return gradient_check(f, {5}, randn(rng, 5), kEps);
    }
    if (op == "add_scalar") {
        TensorFn f = [](Graph&, const Tensor& x) { return sum(mul(add_scalar(x, 0.3), x)); };
        return gradient_check(f, {5}, randn(rng, 5), kEps);
    }
    if (op == "exp") {
        TensorFn f = [](Graph&, const Tensor& x) { return sum(exp(x)); };
        return gradient_check(f, {5}, randn(rng, 5), kEps);
    }
    if (op == "log") {
        std::vector<double> x0 = randn(rng, 5);
        for (double& v : x0) v = std::abs(v) + 0.1;
        TensorFn f = [](Graph&, const Tensor& x) { return sum(log(x)); };
        return gradient_check(f, {5}, x0, kEps);
    }
    if (op == "tanh") {
        TensorFn f = [](Graph&, const Tensor& x) { return sum(tanh(x)); };
        return gradient_check(f, {5}, randn(rng, 5), kEps);
    }
    if (op == "relu") {
        TensorFn f = [](Graph&, const Tensor& x) { return sum(relu(x)); };
        return gradient_check(f, {5}, randn_away_from(rng, 5, 0.0, 0.05), kEps);
    }
    if (op == "clamp") {
        std::vector<double> x0 = randn(rng, 6);
        for (double& v : x0) {
            if (std::abs(v - 0.8) < 0.05) v += 0.1;
            if (std::abs(v + 0.8) < 0.05) v -= 0.1;
        }
        TensorFn f = [](Graph&, const Tensor& x) { return sum(clamp(x, -0.8, 0.8)); };
        return gradient_check(f, {6}, x0, kEps);
    }
    if (op == "sum") {
        TensorFn f = [alt](Graph&, const Tensor& x) {
            return alt ? sum(mul(x, x)) : sum(x);
        };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    if (op == "mean") {
        TensorFn f = [](Graph&, const Tensor& x) { return mean(mul(x, x)); };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    if (op == "sum_axis" || op == "mean_axis") {
        size_t axis = alt ? 1 : 0;
        std::vector<double> w = randn(rng, axis == 0 ? 3 : 2);
        TensorFn f = [op, axis, w](Graph& g, const Tensor& x) {
            Tensor m = reshape(x, {2, 3});
            Tensor r = op == "sum_axis" ? sum(m, axis) : mean(m, axis);
            return sum(mul(r, g.leaf({w.size()}, w)));
        };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    if (op == "softmax") {
        std::vector<double> w = randn(rng, 6);
        TensorFn f = [w, alt](Graph& g, const Tensor& x) {
            Tensor weights = g.leaf(alt ? Shape{2, 3} : Shape{6}, w);
            Tensor s = alt ? softmax(reshape(x, {2, 3}), 1) : softmax(x, 0);
            return sum(mul(s, weights));
        };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    if (op == "cosine_similarity") {
        TensorFn f = [](Graph&, const Tensor& x) {
            return cosine_similarity(slice(x, 0, 3), slice(x, 3, 3));
        };
        std::vector<double> x0 = randn(rng, 6);
        return gradient_check(f, {6}, x0, kEps);
    }
    if (op == "stack") {
        std::vector<double> w = randn(rng, 4);
        TensorFn f = [w](Graph& g, const Tensor& x) {
            std::vector<Tensor> cells;
            for (size_t i = 0; i < 4; ++i) cells.push_back(as_scalar(slice(x, i, 1)));
            return sum(mul(stack(cells), g.leaf({4}, w)));
        };
        return gradient_check(f, {4}, randn(rng, 4), kEps);
    }
    if (op == "slice") {
        std::vector<double> w = randn(rng, 2);
        TensorFn f = [w](Graph& g, const Tensor& x) {
            return sum(mul(slice(x, 1, 2), g.leaf({2}, w)));
        };
        return gradient_check(f, {5}, randn(rng, 5), kEps);
    }
    if (op == "reshape") {
        std::vector<double> w = randn(rng, 6);
        TensorFn f = [w](Graph& g, const Tensor& x) {
            return sum(mul(reshape(x, {2, 3}), g.leaf({2, 3}, w)));
        };
        return gradient_check(f, {6}, randn(rng, 6), kEps);
    }
    throw InvalidArgument("gradcheck: unknown op '" + op + "'");
}

// Full objective on a tiny synthetic batch: finite differences over every
// model parameter element with fixed eps draws.
double check_objective() {
    GeneratorSpec gs;
    gs.n_samples = 4;
    gs.feature_dim = 6;
    gs.report_dim = 4;
    gs.signal_dims = 3;
    gs.mask_noise_dims = 2;
    gs.noise_scale = 1.0;
    gs.seed = 99;
    std::vector<Sample> data = generate(gs);
    std::vector<size_t> indices{0, 1, 2, 3};

    TrainConfig cfg;
    cfg.hidden_dims = {5, 4};
    cfg.latent_dim = 3;
    cfg.seed = 123;
    VmdModel model(
        VmdModelConfig{gs.feature_dim, gs.report_dim, cfg.hidden_dims, cfg.latent_dim},
        cfg.seed);

    auto evaluate = [&]() {
        EpsStreams eps{RngStream(7, "eps.student"), RngStream(7, "eps.teacher"),
                       RngStream(7, "eps.expert")};
        ForwardBatch fb;
        forward_batch(fb, model, data, indices, cfg.weights, cfg.options, eps);
        return global_objective(fb.graph, fb.outputs, cfg.weights, cfg.options).total.value();
    };

    model.zero_grad();
    {
        EpsStreams eps{RngStream(7, "eps.student"), RngStream(7, "eps.teacher"),
                       RngStream(7, "eps.expert")};
        ForwardBatch fb;
        forward_batch(fb, model, data, indices, cfg.weights, cfg.options, eps);
        ObjectiveResult obj = global_objective(fb.graph, fb.outputs, cfg.weights, cfg.options);
        fb.graph.backward(obj.total);
        fb.bp.harvest();
    }

    double max_rel = 0.0;
    for (Param* p : model.parameters()) {
        for (size_t i = 0; i < p->numel(); ++i) {
            double keep = p->value[i];
            p->value[i] = keep + kEps;
            double fp = evaluate();
            p->value[i] = keep - kEps;
            double fm = evaluate();
            p->value[i] = keep;
            double g_fd = (fp - fm) / (2.0 * kEps);
            double g_ad = p->grad[i];
            double denom = std::max({std::abs(g_ad), std::abs(g_fd), 1e-8});
            max_rel = std::max(max_rel, std::abs(g_ad - g_fd) / denom);
        }
    }
    return max_rel;
}

}  // namespace

std::vector<std::string> registered_gradcheck_ops() {
    return {"matmul", "add",  "sub",      "mul",      "scale",     "add_scalar",
            "exp",    "log",  "tanh",     "relu",     "clamp",     "sum",
            "mean",   "sum_axis", "mean_axis", "softmax", "cosine_similarity",
            "stack",  "slice", "reshape"};
}

bool GradcheckReport::pass() const {
    for (const auto& c : ops) {
        if (!(c.max_rel_err < threshold)) return false;
    }
    if (objective_err >= 0.0 && !(objective_err < threshold)) return false;
    return true;
}

nlohmann::ordered_json GradcheckReport::to_json() const {
    nlohmann::ordered_json j;
    j["threshold"] = threshold;
    auto& list = j["ops"] = nlohmann::ordered_json::array();
    for (const auto& c : ops) {
        list.push_back({{"op", c.op}, {"max_rel_err", c.max_rel_err}});
    }
    if (objective_err >= 0.0) j["objective_max_rel_err"] = objective_err;
    j["pass"] = pass();
    return j;
}

std::string GradcheckReport::to_text() const {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3);
    for (const auto& c : ops) {
        os << std::left << std::setw(20) << c.op << c.max_rel_err
           << (c.max_rel_err < threshold ? "  ok" : "  FAIL") << "\n";
    }
    if (objective_err >= 0.0) {
        os << std::left << std::setw(20) << "objective" << objective_err
           << (objective_err < threshold ? "  ok" : "  FAIL") << "\n";
    }
    os << (pass() ? "gradcheck: all clear" : "gradcheck: FAILURES above threshold") << "\n";
    return os.str();
}

GradcheckReport run_gradcheck(const std::string& only_op) {
    GradcheckReport report;
    std::vector<std::string> ops = registered_gradcheck_ops();
    if (!only_op.empty()) {
        bool known = false;
        for (const auto& o : ops) known = known || o == only_op;
        if (!known) throw UsageError("gradcheck: unknown op '" + only_op + "'");
        ops = {only_op};
    }
    for (const auto& op : ops) {
        RngStream rng(2024, "gradcheck." + op);
        OpCheck check{op, 0.0};
        for (size_t trial = 0; trial < kTrials; ++trial) {
            check.max_rel_err = std::max(check.max_rel_err, check_op(op, rng, trial));
        }
        report.ops.push_back(check);
    }
    if (only_op.empty()) report.objective_err = check_objective();
    return report;
}

}  // namespace vmd
