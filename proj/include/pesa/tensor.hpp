#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pesa {

struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

// Numeric precision of newly produced tensor values. f64 is the default and
// the only mode used by tests; f32 rounds every op result (and optimizer
// updates) through IEEE single precision.
enum class Precision { f64, f32 };

void set_precision(Precision p);
Precision current_precision();

// RAII guard disabling tape recording, e.g. for inference rollouts.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;   // allocated lazily by backward()
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
};

}  // namespace detail

// Dense row-major tensor handle. Values are immutable once an op has produced
// them; only leaf tensors (parameters, inputs) may be mutated through
// mutable_data(), and grad buffers accumulate across backward() calls until
// zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);

    bool defined() const { return node != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t ndim() const { return shape().size(); }

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // leaf tensors only

    bool requires_grad() const;
    Tensor& set_requires_grad(bool b);  // leaf tensors only
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    double item() const;  // scalar tensors only
    Tensor detach() const;

    std::shared_ptr<detail::Node> node;
};

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Elementwise ops (shapes must match exactly; no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Reductions to scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

// Activations.
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

// Periodic cross-correlation. input: c_in x H x W, kernel: c_out x c_in x k x k
// (k odd, centered), bias: c_out. Output c_out x H x W with wrap-around
// indexing at the edges.
Tensor conv2d_periodic(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// Dense affine map for 1-D vectors: w (out x in) * x (in) + b (out).
Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b);

// Per-channel reductions over the spatial axes of a c x H x W tensor.
Tensor channel_avg(const Tensor& a);
Tensor channel_max(const Tensor& a);

// Multiply each channel of a c x H x W field by the matching entry of a
// length-c coefficient vector.
Tensor scale_channels(const Tensor& field, const Tensor& coeff);

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively into
// every reachable requires_grad tensor; call zero_grad() between backward
// passes to avoid doubling.
void backward(const Tensor& loss);

bool all_finite(const Tensor& t);

}  // namespace pesa
