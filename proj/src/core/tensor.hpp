#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace vmd {

class Graph;

using Shape = std::vector<size_t>;

size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Floor applied to log/div denominators throughout.
inline constexpr double kEpsFloor = 1e-12;

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated during backward, same length as data
    bool requires_grad = false;
    const char* op = "leaf";
    Graph* graph = nullptr;
    size_t id = 0;
    // Accumulates this node's grad into its parents' grads. Empty for leaves.
    std::function<void()> backward_fn;

    size_t numel() const { return data.size(); }
    size_t rank() const { return shape.size(); }
};

// Value-semantics handle to a node on a Graph tape. Cheap to copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node().shape; }
    size_t rank() const { return node().rank(); }
    size_t numel() const { return node().numel(); }
    bool requires_grad() const { return node().requires_grad; }
    bool is_scalar() const { return node().numel() == 1 && node().rank() == 0; }

    const std::vector<double>& data() const { return node().data; }
    std::vector<double>& data() { return node().data; }
    const std::vector<double>& grad() const;

    double value() const;          // scalar value; throws unless numel == 1
    double at(size_t i) const { return node().data.at(i); }
    double at(size_t r, size_t c) const;

    Graph& graph() const;
    TensorNode& node() const;

private:
    std::shared_ptr<TensorNode> node_;
};

// Records every operation in construction order; backward walks the tape in
// reverse exactly once. A graph and its tensors belong to a single thread;
// independent graphs may run concurrently.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Tensor leaf(Shape shape, std::vector<double> data, bool requires_grad = false);
    Tensor scalar(double v);
    Tensor constant(Shape shape, double fill);
    Tensor zeros(Shape shape) { return constant(std::move(shape), 0.0); }
    Tensor ones(Shape shape) { return constant(std::move(shape), 1.0); }

    // Seeds the scalar loss with gradient 1 and propagates through the tape
    // in reverse construction order. A graph can be walked backward once.
    void backward(const Tensor& loss);

    size_t node_count() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }
    // Number of nodes visited by the last backward pass.
    size_t backward_visits() const { return backward_visits_; }

    Tensor adopt(std::shared_ptr<TensorNode> node);

private:
    std::vector<std::shared_ptr<TensorNode>> nodes_;
    bool backward_done_ = false;
    size_t backward_visits_ = 0;
};

// --- elementwise and linear-algebra ops -------------------------------------
// Binary elementwise ops accept equal shapes or a scalar on either side.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, double c);
Tensor add_scalar(const Tensor& t, double c);
Tensor exp(const Tensor& t);
// Input floored at kEpsFloor before the log; floored entries get zero gradient.
Tensor log(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor clamp(const Tensor& t, double lo, double hi);
Tensor neg(const Tensor& t);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
Tensor sum(const Tensor& t, size_t axis);
Tensor mean(const Tensor& t, size_t axis);

// Max-subtracted softmax. Rank-1 tensors use axis 0; rank-2 supports both axes.
Tensor softmax(const Tensor& t, size_t axis = 0);

// a.b / (max(|a|,1e-12) * max(|b|,1e-12)) over rank-1 tensors; scalar result.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Scalars -> rank-1 vector.
Tensor stack(const std::vector<Tensor>& scalars);
// Contiguous range [start, start+len) of a rank-1 tensor.
Tensor slice(const Tensor& t, size_t start, size_t len);
// Same data, new shape (numel must match).
Tensor reshape(const Tensor& t, Shape shape);
// Rank-0 view of a one-element tensor.
Tensor as_scalar(const Tensor& t);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// --- verification ------------------------------------------------------------

// Central finite differences against recorded gradients for a scalar-valued
// function of one input tensor. Returns the max over elements of
// |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
using TensorFn = std::function<Tensor(Graph&, const Tensor&)>;
double gradient_check(const TensorFn& f, const Shape& shape,
                      const std::vector<double>& x0, double eps = 1e-5);

bool all_finite(const std::vector<double>& v);

}  // namespace vmd
