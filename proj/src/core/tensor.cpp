#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vmd {

size_t shape_numel(const Shape& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

namespace {

void check_positive_dims(const Shape& shape, const char* op) {
    for (size_t d : shape) {
        if (d == 0) {
            throw DimensionError(std::string(op) + ": zero-sized dimension in " + shape_str(shape));
        }
    }
}

Graph& same_graph(const Tensor& a, const Tensor& b, const char* op) {
    if (&a.graph() != &b.graph()) {
        throw StateError(std::string(op) + ": operands belong to different graphs");
    }
    return a.graph();
}

bool is_broadcast_scalar(const Tensor& t) {
    return t.numel() == 1;
}

void check_elementwise_shapes(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return;
    if (is_broadcast_scalar(a) || is_broadcast_scalar(b)) return;
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
}

}  // namespace

const std::vector<double>& Tensor::grad() const {
    return node().grad;
}

double Tensor::value() const {
    if (numel() != 1) {
        throw InvalidArgument("Tensor::value: tensor of shape " + shape_str(shape()) +
                              " is not a scalar");
    }
    return node().data[0];
}

double Tensor::at(size_t r, size_t c) const {
    if (rank() != 2) throw DimensionError("Tensor::at(r,c): rank-2 tensor required");
    return node().data.at(r * shape()[1] + c);
}

Graph& Tensor::graph() const {
    return *node().graph;
}

TensorNode& Tensor::node() const {
    if (!node_) throw StateError("use of empty Tensor handle");
    return *node_;
}

Tensor Graph::adopt(std::shared_ptr<TensorNode> node) {
    node->graph = this;
    node->id = nodes_.size();
    nodes_.push_back(node);
    return Tensor(std::move(node));
}

Tensor Graph::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("leaf: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return adopt(std::move(node));
}

Tensor Graph::scalar(double v) {
    return leaf({}, {v});
}

Tensor Graph::constant(Shape shape, double fill) {
    size_t n = shape_numel(shape);
    return leaf(std::move(shape), std::vector<double>(n, fill));
}

void Graph::backward(const Tensor& loss) {
    if (backward_done_) {
        throw StateError("backward: graph already walked backward; build a fresh graph");
    }
    if (&loss.graph() != this) {
        throw StateError("backward: loss tensor belongs to a different graph");
    }
    if (loss.numel() != 1) {
        throw InvalidArgument("backward: loss must be scalar, got shape " +
                              shape_str(loss.shape()));
    }
    backward_done_ = true;
    for (auto& n : nodes_) {
        if (n->requires_grad) n->grad.assign(n->data.size(), 0.0);
    }
    if (loss.requires_grad()) loss.node().grad[0] = 1.0;

    backward_visits_ = 0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        ++backward_visits_;
        TensorNode& n = **it;
        if (n.requires_grad && n.backward_fn && !n.grad.empty()) n.backward_fn();
    }
}

namespace {

// Creates the result node for an op over `parents`. requires_grad is inherited.
Tensor make_result(Graph& g, Shape shape, std::vector<double> data, const char* op,
                   std::initializer_list<Tensor> parents) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    for (const Tensor& p : parents) {
        if (p.requires_grad()) node->requires_grad = true;
    }
    return g.adopt(std::move(node));
}

// Accumulates `g` into the gradient of `p`, folding to a single element when
// `p` entered the op as a broadcast scalar.
void accumulate(TensorNode& p, const std::vector<double>& g) {
    if (!p.requires_grad || p.grad.empty()) return;
    if (p.data.size() == g.size()) {
        for (size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
    } else {
        double s = 0.0;
        for (double v : g) s += v;
        p.grad[0] += s;
    }
}

double bvalue(const std::vector<double>& v, size_t i) {
    return v.size() == 1 ? v[0] : v[i];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    Graph& g = same_graph(a, b, "matmul");
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul: rank-2 tensors required, got " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    }
    size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const auto& A = a.data();
    const auto& B = b.data();
    for (size_t i = 0; i < m; ++i) {
        for (size_t kk = 0; kk < k; ++kk) {
            double av = A[i * k + kk];
            if (av == 0.0) continue;
            for (size_t j = 0; j < n; ++j) out[i * n + j] += av * B[kk * n + j];
        }
    }
    Tensor r = make_result(g, {m, n}, std::move(out), "matmul", {a, b});
    TensorNode* pa = &a.node();
    TensorNode* pb = &b.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pa, pb, pr, m, k, n]() {
        const auto& gout = pr->grad;
        if (pa->requires_grad && !pa->grad.empty()) {
            for (size_t i = 0; i < m; ++i)
                for (size_t kk = 0; kk < k; ++kk) {
                    double s = 0.0;
                    for (size_t j = 0; j < n; ++j) s += gout[i * n + j] * pb->data[kk * n + j];
                    pa->grad[i * k + kk] += s;
                }
        }
        if (pb->requires_grad && !pb->grad.empty()) {
            for (size_t kk = 0; kk < k; ++kk)
                for (size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (size_t i = 0; i < m; ++i) s += pa->data[i * k + kk] * gout[i * n + j];
                    pb->grad[kk * n + j] += s;
                }
        }
    };
    return r;
}

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary_elementwise(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    Graph& g = same_graph(a, b, name);
    check_elementwise_shapes(a, b, name);
    const Shape& shape = is_broadcast_scalar(a) ? b.shape() : a.shape();
    size_t n = shape_numel(shape);
    std::vector<double> out(n);
    const auto& A = a.data();
    const auto& B = b.data();
    for (size_t i = 0; i < n; ++i) {
        double x = bvalue(A, i), y = bvalue(B, i);
        switch (op) {
            case BinOp::Add: out[i] = x + y; break;
            case BinOp::Sub: out[i] = x - y; break;
            case BinOp::Mul: out[i] = x * y; break;
        }
    }
    Tensor r = make_result(g, shape, std::move(out), name, {a, b});
    TensorNode* pa = &a.node();
    TensorNode* pb = &b.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pa, pb, pr, op, n]() {
        const auto& gout = pr->grad;
        std::vector<double> tmp(n);
        if (pa->requires_grad && !pa->grad.empty()) {
            for (size_t i = 0; i < n; ++i) {
                tmp[i] = (op == BinOp::Mul) ? gout[i] * bvalue(pb->data, i) : gout[i];
            }
            accumulate(*pa, tmp);
        }
        if (pb->requires_grad && !pb->grad.empty()) {
            for (size_t i = 0; i < n; ++i) {
                switch (op) {
                    case BinOp::Add: tmp[i] = gout[i]; break;
                    case BinOp::Sub: tmp[i] = -gout[i]; break;
                    case BinOp::Mul: tmp[i] = gout[i] * bvalue(pa->data, i); break;
                }
            }
            accumulate(*pb, tmp);
        }
    };
    return r;
}

Tensor unary_elementwise(const Tensor& t, const char* name,
                         const std::function<double(double)>& fwd,
                         // local gradient as a function of (input, output)
                         const std::function<double(double, double)>& dfd) {
    Graph& g = t.graph();
    size_t n = t.numel();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = fwd(t.data()[i]);
    Tensor r = make_result(g, t.shape(), std::move(out), name, {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr, dfd, n]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (size_t i = 0; i < n; ++i) {
            pt->grad[i] += pr->grad[i] * dfd(pt->data[i], pr->data[i]);
        }
    };
    return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Mul, "mul"); }

Tensor scale(const Tensor& t, double c) {
    return unary_elementwise(
        t, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& t, double c) {
    return unary_elementwise(
        t, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& t) { return scale(t, -1.0); }

Tensor exp(const Tensor& t) {
    return unary_elementwise(
        t, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& t) {
    return unary_elementwise(
        t, "log", [](double x) { return std::log(std::max(x, kEpsFloor)); },
        [](double x, double) { return x > kEpsFloor ? 1.0 / x : 0.0; });
}

Tensor tanh(const Tensor& t) {
    return unary_elementwise(
        t, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& t) {
    return unary_elementwise(
        t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
    if (!(lo <= hi)) throw InvalidArgument("clamp: lo must be <= hi");
    return unary_elementwise(
        t, "clamp", [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& t) {
    if (t.numel() == 0) throw DimensionError("sum: empty tensor");
    double s = 0.0;
    for (double v : t.data()) s += v;
    Tensor r = make_result(t.graph(), {}, {s}, "sum", {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (double& gv : pt->grad) gv += pr->grad[0];
    };
    return r;
}

Tensor mean(const Tensor& t) {
    if (t.numel() == 0) throw DimensionError("mean: empty tensor");
    size_t n = t.numel();
    double s = 0.0;
    for (double v : t.data()) s += v;
    Tensor r = make_result(t.graph(), {}, {s / static_cast<double>(n)}, "mean", {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr, n]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        double gv = pr->grad[0] / static_cast<double>(n);
        for (double& x : pt->grad) x += gv;
    };
    return r;
}

namespace {

Tensor reduce_axis(const Tensor& t, size_t axis, bool take_mean, const char* name) {
    if (t.numel() == 0) throw DimensionError(std::string(name) + ": empty tensor");
    if (axis >= std::max<size_t>(t.rank(), 1)) {
        throw DimensionError(std::string(name) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(t.shape()));
    }
    if (t.rank() <= 1) return take_mean ? mean(t) : sum(t);

    size_t rows = t.shape()[0], cols = t.shape()[1];
    size_t out_n = (axis == 0) ? cols : rows;
    size_t reduced = (axis == 0) ? rows : cols;
    std::vector<double> out(out_n, 0.0);
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out[axis == 0 ? j : i] += t.data()[i * cols + j];
    double factor = take_mean ? 1.0 / static_cast<double>(reduced) : 1.0;
    if (take_mean)
        for (double& v : out) v *= factor;
    Tensor r = make_result(t.graph(), {out_n}, std::move(out), name, {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr, rows, cols, axis, factor]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < cols; ++j)
                pt->grad[i * cols + j] += pr->grad[axis == 0 ? j : i] * factor;
    };
    return r;
}

}  // namespace

Tensor sum(const Tensor& t, size_t axis) { return reduce_axis(t, axis, false, "sum"); }
Tensor mean(const Tensor& t, size_t axis) { return reduce_axis(t, axis, true, "mean"); }

Tensor softmax(const Tensor& t, size_t axis) {
    if (t.numel() == 0) throw DimensionError("softmax: empty tensor");
    if (t.rank() > 2) throw DimensionError("softmax: rank <= 2 required");
    if (axis >= std::max<size_t>(t.rank(), 1)) {
        throw DimensionError("softmax: axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(t.shape()));
    }
    size_t rows, cols;
    bool along_cols;  // normalize within each row
    if (t.rank() <= 1) {
        rows = 1;
        cols = t.numel();
        along_cols = true;
    } else {
        rows = t.shape()[0];
        cols = t.shape()[1];
        along_cols = (axis == 1);
    }
    size_t groups = along_cols ? rows : cols;
    size_t width = along_cols ? cols : rows;
    auto at = [&](size_t grp, size_t k) { return along_cols ? grp * cols + k : k * cols + grp; };

    std::vector<double> out(t.numel());
    for (size_t gi = 0; gi < groups; ++gi) {
        double mx = t.data()[at(gi, 0)];
        for (size_t k = 1; k < width; ++k) mx = std::max(mx, t.data()[at(gi, k)]);
        double denom = 0.0;
        for (size_t k = 0; k < width; ++k) {
            double e = std::exp(t.data()[at(gi, k)] - mx);
            out[at(gi, k)] = e;
            denom += e;
        }
        for (size_t k = 0; k < width; ++k) out[at(gi, k)] /= denom;
    }
    Tensor r = make_result(t.graph(), t.shape(), std::move(out), "softmax", {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr, groups, width, at]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (size_t gi = 0; gi < groups; ++gi) {
            double dot = 0.0;
            for (size_t k = 0; k < width; ++k) {
                size_t idx = at(gi, k);
                dot += pr->grad[idx] * pr->data[idx];
            }
            for (size_t k = 0; k < width; ++k) {
                size_t idx = at(gi, k);
                pt->grad[idx] += pr->data[idx] * (pr->grad[idx] - dot);
            }
        }
    };
    return r;
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    Graph& g = same_graph(a, b, "cosine_similarity");
    if (a.rank() != 1 || b.rank() != 1 || a.numel() != b.numel()) {
        throw DimensionError("cosine_similarity: equal-length rank-1 tensors required, got " +
                             shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    size_t d = a.numel();
    double dot = 0.0, naa = 0.0, nbb = 0.0;
    for (size_t i = 0; i < d; ++i) {
        dot += a.data()[i] * b.data()[i];
        naa += a.data()[i] * a.data()[i];
        nbb += b.data()[i] * b.data()[i];
    }
    double norm_a = std::sqrt(naa), norm_b = std::sqrt(nbb);
    bool a_floored = norm_a < kEpsFloor, b_floored = norm_b < kEpsFloor;
    double na = std::max(norm_a, kEpsFloor), nb = std::max(norm_b, kEpsFloor);
    double c = dot / (na * nb);
    Tensor r = make_result(g, {}, {c}, "cosine_similarity", {a, b});
    TensorNode* pa = &a.node();
    TensorNode* pb = &b.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pa, pb, pr, d, na, nb, c, a_floored, b_floored]() {
        double go = pr->grad[0];
        if (pa->requires_grad && !pa->grad.empty()) {
            for (size_t i = 0; i < d; ++i) {
                double dv = pb->data[i] / (na * nb);
                if (!a_floored) dv -= c * pa->data[i] / (na * na);
                pa->grad[i] += go * dv;
            }
        }
        if (pb->requires_grad && !pb->grad.empty()) {
            for (size_t i = 0; i < d; ++i) {
                double dv = pa->data[i] / (na * nb);
                if (!b_floored) dv -= c * pb->data[i] / (nb * nb);
                pb->grad[i] += go * dv;
            }
        }
    };
    return r;
}

Tensor stack(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw DimensionError("stack: empty input");
    Graph& g = scalars[0].graph();
    std::vector<double> out(scalars.size());
    bool rg = false;
    for (size_t i = 0; i < scalars.size(); ++i) {
        if (&scalars[i].graph() != &g) throw StateError("stack: operands from different graphs");
        if (scalars[i].numel() != 1) {
            throw DimensionError("stack: scalar inputs required, got " +
                                 shape_str(scalars[i].shape()));
        }
        out[i] = scalars[i].data()[0];
        rg = rg || scalars[i].requires_grad();
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = {scalars.size()};
    node->data = std::move(out);
    node->op = "stack";
    node->requires_grad = rg;
    Tensor r = g.adopt(std::move(node));
    std::vector<TensorNode*> parents;
    parents.reserve(scalars.size());
    for (const Tensor& s : scalars) parents.push_back(&s.node());
    TensorNode* pr = &r.node();
    pr->backward_fn = [parents, pr]() {
        for (size_t i = 0; i < parents.size(); ++i) {
            if (parents[i]->requires_grad && !parents[i]->grad.empty()) {
                parents[i]->grad[0] += pr->grad[i];
            }
        }
    };
    return r;
}

Tensor slice(const Tensor& t, size_t start, size_t len) {
    if (t.rank() != 1) throw DimensionError("slice: rank-1 tensor required");
    if (len == 0 || start + len > t.numel()) {
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of bounds for " +
                             shape_str(t.shape()));
    }
    std::vector<double> out(t.data().begin() + static_cast<long>(start),
                            t.data().begin() + static_cast<long>(start + len));
    Tensor r = make_result(t.graph(), {len}, std::move(out), "slice", {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr, start, len]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (size_t i = 0; i < len; ++i) pt->grad[start + i] += pr->grad[i];
    };
    return r;
}

Tensor reshape(const Tensor& t, Shape shape) {
    check_positive_dims(shape, "reshape");
    if (shape_numel(shape) != t.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(t.shape()) + " as " +
                             shape_str(shape));
    }
    Tensor r = make_result(t.graph(), std::move(shape), t.data(), "reshape", {t});
    TensorNode* pt = &t.node();
    TensorNode* pr = &r.node();
    pr->backward_fn = [pt, pr]() {
        if (!pt->requires_grad || pt->grad.empty()) return;
        for (size_t i = 0; i < pr->grad.size(); ++i) pt->grad[i] += pr->grad[i];
    };
    return r;
}

Tensor as_scalar(const Tensor& t) {
    if (t.numel() != 1) {
        throw DimensionError("as_scalar: one-element tensor required, got " +
                             shape_str(t.shape()));
    }
    return reshape(t, {});
}

double gradient_check(const TensorFn& f, const Shape& shape, const std::vector<double>& x0,
                      double eps) {
    if (eps <= 0.0) throw InvalidArgument("gradient_check: eps must be > 0");
    if (shape_numel(shape) != x0.size()) {
        throw DimensionError("gradient_check: shape/data mismatch");
    }

    std::vector<double> g_ad;
    {
        Graph g;
        Tensor x = g.leaf(shape, x0, true);
        Tensor y = f(g, x);
        if (y.numel() != 1) {
            throw InvalidArgument("gradient_check: f must be scalar-valued");
        }
        g.backward(y);
        g_ad = x.node().grad;
    }

    auto eval = [&](const std::vector<double>& xv) {
        Graph g;
        Tensor x = g.leaf(shape, xv, false);
        return f(g, x).value();
    };

    double max_rel = 0.0;
    std::vector<double> xv = x0;
    for (size_t i = 0; i < x0.size(); ++i) {
        xv[i] = x0[i] + eps;
        double fp = eval(xv);
        xv[i] = x0[i] - eps;
        double fm = eval(xv);
        xv[i] = x0[i];
        double g_fd = (fp - fm) / (2.0 * eps);
        double denom = std::max({std::abs(g_ad[i]), std::abs(g_fd), 1e-8});
        max_rel = std::max(max_rel, std::abs(g_ad[i] - g_fd) / denom);
    }
    return max_rel;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace vmd
