#include "pesa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pesa {

namespace {

Precision g_precision = Precision::f64;
bool g_grad_enabled = true;

void round_to_precision(std::vector<double>& v) {
    if (g_precision == Precision::f32) {
        for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    }
}

}  // namespace

void set_precision(Precision p) { g_precision = p; }
Precision current_precision() { return g_precision; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> value) {
    if (value.size() != shape_numel(shape))
        throw TensorError("data length " + std::to_string(value.size()) +
                          " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    round_to_precision(n->value);
    return n;
}

// Wraps an op result. The tape edge is only recorded when grads are enabled
// and some parent requires them.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    round_to_precision(n->value);
    bool track = false;
    if (g_grad_enabled) {
        for (const auto& p : parents)
            if (p && p->requires_grad) track = true;
    }
    if (track) {
        n->requires_grad = true;
        n->leaf = false;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    Tensor t;
    t.node = std::move(n);
    return t;
}

void ensure_grad(Node& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

}  // namespace detail

using detail::Node;
using detail::ensure_grad;
using detail::make_op;

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    Tensor t;
    t.node = detail::make_leaf(std::move(shape), std::vector<double>(n, 0.0));
    return t;
}

Tensor Tensor::full(Shape shape, double v) {
    std::size_t n = shape_numel(shape);
    Tensor t;
    t.node = detail::make_leaf(std::move(shape), std::vector<double>(n, v));
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    Tensor t;
    t.node = detail::make_leaf(std::move(shape), std::move(data));
    return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

const Shape& Tensor::shape() const {
    if (!node) throw TensorError("use of undefined tensor");
    return node->shape;
}

std::size_t Tensor::size() const { return shape_numel(shape()); }

const std::vector<double>& Tensor::data() const {
    if (!node) throw TensorError("use of undefined tensor");
    return node->value;
}

std::vector<double>& Tensor::mutable_data() {
    if (!node) throw TensorError("use of undefined tensor");
    if (!node->leaf) throw TensorError("mutable_data on a non-leaf tensor");
    return node->value;
}

bool Tensor::requires_grad() const { return node && node->requires_grad; }

Tensor& Tensor::set_requires_grad(bool b) {
    if (!node) throw TensorError("use of undefined tensor");
    if (!node->leaf) throw TensorError("set_requires_grad on a non-leaf tensor");
    node->requires_grad = b;
    return *this;
}

bool Tensor::has_grad() const { return node && !node->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!node) throw TensorError("use of undefined tensor");
    if (node->grad.empty()) throw TensorError("grad not populated; run backward() first");
    return node->grad;
}

void Tensor::zero_grad() {
    if (node) std::fill(node->grad.begin(), node->grad.end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw TensorError("item() on non-scalar tensor " + shape_str(shape()));
    return data()[0];
}

Tensor Tensor::detach() const {
    if (!node) return {};
    Tensor t;
    t.node = detail::make_leaf(node->shape, node->value);
    return t;
}

bool all_finite(const Tensor& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    const auto &av = a.data(), &bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto pa = a.node, pb = b.node;
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    const auto &av = a.data(), &bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    auto pa = a.node, pb = b.node;
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    const auto &av = a.data(), &bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto pa = a.node, pb = b.node;
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->value[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
    auto pa = a.node;
    return make_op(a.shape(), std::move(out), {pa}, [pa, s](Node& self) {
        ensure_grad(*pa);
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * s;
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    auto pa = a.node;
    return make_op({1}, {acc}, {pa}, [pa](Node& self) {
        ensure_grad(*pa);
        double g = self.grad[0];
        for (double& gi : pa->grad) gi += g;
    });
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    double inv = 1.0 / static_cast<double>(a.size());
    auto pa = a.node;
    return make_op({1}, {acc * inv}, {pa}, [pa, inv](Node& self) {
        ensure_grad(*pa);
        double g = self.grad[0] * inv;
        for (double& gi : pa->grad) gi += g;
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    const auto &av = a.data(), &bv = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        acc += d * d;
    }
    double inv = 1.0 / static_cast<double>(a.size());
    auto pa = a.node, pb = b.node;
    return make_op({1}, {acc * inv}, {pa, pb}, [pa, pb, inv](Node& self) {
        double g = 2.0 * self.grad[0] * inv;
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < pa->value.size(); ++i)
                pa->grad[i] += g * (pa->value[i] - pb->value[i]);
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < pb->value.size(); ++i)
                pb->grad[i] -= g * (pa->value[i] - pb->value[i]);
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
    auto pa = a.node;
    return make_op(a.shape(), std::move(out), {pa}, [pa](Node& self) {
        ensure_grad(*pa);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double y = self.value[i];
            pa->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    auto pa = a.node;
    return make_op(a.shape(), std::move(out), {pa}, [pa](Node& self) {
        ensure_grad(*pa);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa->value[i] > 0.0) pa->grad[i] += self.grad[i];
    });
}

Tensor conv2d_periodic(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.ndim() != 3)
        throw TensorError("conv2d_periodic: input must be c_in x H x W, got " +
                          shape_str(input.shape()));
    if (kernel.ndim() != 4)
        throw TensorError("conv2d_periodic: kernel must be c_out x c_in x k x k, got " +
                          shape_str(kernel.shape()));
    const std::size_t c_in = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
    const std::size_t c_out = kernel.shape()[0], k = kernel.shape()[2];
    if (kernel.shape()[1] != c_in)
        throw TensorError("conv2d_periodic: kernel input-channel dim " +
                          std::to_string(kernel.shape()[1]) + " does not match input channels " +
                          std::to_string(c_in));
    if (kernel.shape()[3] != k)
        throw TensorError("conv2d_periodic: kernel must be square, got " +
                          shape_str(kernel.shape()));
    if (k % 2 == 0) throw TensorError("conv2d_periodic: kernel size must be odd, got " +
                                      std::to_string(k));
    if (H < k || W < k)
        throw TensorError("conv2d_periodic: spatial dims " + std::to_string(H) + "x" +
                          std::to_string(W) + " smaller than kernel " + std::to_string(k));
    if (bias.ndim() != 1 || bias.shape()[0] != c_out)
        throw TensorError("conv2d_periodic: bias dim must equal output channels " +
                          std::to_string(c_out) + ", got " + shape_str(bias.shape()));

    const std::size_t r = k / 2;
    const auto& in = input.data();
    const auto& kw = kernel.data();
    const auto& bv = bias.data();
    std::vector<double> out(c_out * H * W);

    auto wrap = [](std::ptrdiff_t i, std::size_t n) -> std::size_t {
        std::ptrdiff_t m = i % static_cast<std::ptrdiff_t>(n);
        return static_cast<std::size_t>(m < 0 ? m + static_cast<std::ptrdiff_t>(n) : m);
    };

    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                double acc = bv[o];
                for (std::size_t i = 0; i < c_in; ++i) {
                    const double* inch = &in[i * H * W];
                    const double* kch = &kw[(o * c_in + i) * k * k];
                    for (std::size_t dy = 0; dy < k; ++dy) {
                        std::size_t yy = wrap(static_cast<std::ptrdiff_t>(y + dy) -
                                              static_cast<std::ptrdiff_t>(r), H);
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            std::size_t xx = wrap(static_cast<std::ptrdiff_t>(x + dx) -
                                                  static_cast<std::ptrdiff_t>(r), W);
                            acc += inch[yy * W + xx] * kch[dy * k + dx];
                        }
                    }
                }
                out[(o * H + y) * W + x] = acc;
            }
        }
    }

    auto pin = input.node, pk = kernel.node, pb = bias.node;
    return make_op({c_out, H, W}, std::move(out), {pin, pk, pb},
                   [pin, pk, pb, c_in, c_out, H, W, k, r, wrap](Node& self) {
        const auto& g = self.grad;
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (std::size_t p = 0; p < H * W; ++p) acc += g[o * H * W + p];
                pb->grad[o] += acc;
            }
        }
        if (pk->requires_grad) {
            ensure_grad(*pk);
            for (std::size_t o = 0; o < c_out; ++o)
                for (std::size_t i = 0; i < c_in; ++i) {
                    const double* inch = &pin->value[i * H * W];
                    double* gk = &pk->grad[(o * c_in + i) * k * k];
                    for (std::size_t y = 0; y < H; ++y)
                        for (std::size_t x = 0; x < W; ++x) {
                            double go = g[(o * H + y) * W + x];
                            for (std::size_t dy = 0; dy < k; ++dy) {
                                std::size_t yy = wrap(static_cast<std::ptrdiff_t>(y + dy) -
                                                      static_cast<std::ptrdiff_t>(r), H);
                                for (std::size_t dx = 0; dx < k; ++dx) {
                                    std::size_t xx = wrap(static_cast<std::ptrdiff_t>(x + dx) -
                                                          static_cast<std::ptrdiff_t>(r), W);
                                    gk[dy * k + dx] += go * inch[yy * W + xx];
                                }
                            }
                        }
                }
        }
        if (pin->requires_grad) {
            ensure_grad(*pin);
            for (std::size_t o = 0; o < c_out; ++o)
                for (std::size_t i = 0; i < c_in; ++i) {
                    const double* kch = &pk->value[(o * c_in + i) * k * k];
                    double* gi = &pin->grad[i * H * W];
                    for (std::size_t y = 0; y < H; ++y)
                        for (std::size_t x = 0; x < W; ++x) {
                            double go = g[(o * H + y) * W + x];
                            for (std::size_t dy = 0; dy < k; ++dy) {
                                std::size_t yy = wrap(static_cast<std::ptrdiff_t>(y + dy) -
                                                      static_cast<std::ptrdiff_t>(r), H);
                                for (std::size_t dx = 0; dx < k; ++dx) {
                                    std::size_t xx = wrap(static_cast<std::ptrdiff_t>(x + dx) -
                                                          static_cast<std::ptrdiff_t>(r), W);
                                    gi[yy * W + xx] += go * kch[dy * k + dx];
                                }
                            }
                        }
                }
        }
    });
}

Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b) {
    if (w.ndim() != 2) throw TensorError("linear: weight must be out x in, got " +
                                         shape_str(w.shape()));
    const std::size_t out_dim = w.shape()[0], in_dim = w.shape()[1];
    if (x.ndim() != 1 || x.shape()[0] != in_dim)
        throw TensorError("linear: input dim mismatch, weight " + shape_str(w.shape()) +
                          " vs input " + shape_str(x.shape()));
    if (b.ndim() != 1 || b.shape()[0] != out_dim)
        throw TensorError("linear: bias dim mismatch, expected " + std::to_string(out_dim) +
                          ", got " + shape_str(b.shape()));
    std::vector<double> out(out_dim);
    const auto &wv = w.data(), &xv = x.data(), &bv = b.data();
    for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = bv[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += wv[o * in_dim + i] * xv[i];
        out[o] = acc;
    }
    auto pw = w.node, px = x.node, pb = b.node;
    return make_op({out_dim}, std::move(out), {pw, px, pb},
                   [pw, px, pb, out_dim, in_dim](Node& self) {
        const auto& g = self.grad;
        if (pw->requires_grad) {
            ensure_grad(*pw);
            for (std::size_t o = 0; o < out_dim; ++o)
                for (std::size_t i = 0; i < in_dim; ++i)
                    pw->grad[o * in_dim + i] += g[o] * px->value[i];
        }
        if (px->requires_grad) {
            ensure_grad(*px);
            for (std::size_t o = 0; o < out_dim; ++o)
                for (std::size_t i = 0; i < in_dim; ++i)
                    px->grad[i] += g[o] * pw->value[o * in_dim + i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t o = 0; o < out_dim; ++o) pb->grad[o] += g[o];
        }
    });
}

namespace {

void check_chw(const Tensor& a, const char* op) {
    if (a.ndim() != 3)
        throw TensorError(std::string(op) + ": expected c x H x W tensor, got " +
                          shape_str(a.shape()));
}

}  // namespace

Tensor channel_avg(const Tensor& a) {
    check_chw(a, "channel_avg");
    const std::size_t c = a.shape()[0], hw = a.shape()[1] * a.shape()[2];
    std::vector<double> out(c);
    const auto& av = a.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += av[ch * hw + p];
        out[ch] = acc / static_cast<double>(hw);
    }
    auto pa = a.node;
    return make_op({c}, std::move(out), {pa}, [pa, c, hw](Node& self) {
        ensure_grad(*pa);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double g = self.grad[ch] / static_cast<double>(hw);
            for (std::size_t p = 0; p < hw; ++p) pa->grad[ch * hw + p] += g;
        }
    });
}

Tensor channel_max(const Tensor& a) {
    check_chw(a, "channel_max");
    const std::size_t c = a.shape()[0], hw = a.shape()[1] * a.shape()[2];
    std::vector<double> out(c);
    auto argmax = std::make_shared<std::vector<std::size_t>>(c);
    const auto& av = a.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < hw; ++p)
            if (av[ch * hw + p] > av[ch * hw + best]) best = p;
        (*argmax)[ch] = best;
        out[ch] = av[ch * hw + best];
    }
    auto pa = a.node;
    return make_op({c}, std::move(out), {pa}, [pa, argmax, c, hw](Node& self) {
        ensure_grad(*pa);
        for (std::size_t ch = 0; ch < c; ++ch)
            pa->grad[ch * hw + (*argmax)[ch]] += self.grad[ch];
    });
}

Tensor scale_channels(const Tensor& field, const Tensor& coeff) {
    check_chw(field, "scale_channels");
    const std::size_t c = field.shape()[0], hw = field.shape()[1] * field.shape()[2];
    if (coeff.ndim() != 1 || coeff.shape()[0] != c)
        throw TensorError("scale_channels: coeff must have length " + std::to_string(c) +
                          ", got " + shape_str(coeff.shape()));
    std::vector<double> out(c * hw);
    const auto &fv = field.data(), &cv = coeff.data();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = fv[ch * hw + p] * cv[ch];
    auto pf = field.node, pc = coeff.node;
    return make_op(field.shape(), std::move(out), {pf, pc}, [pf, pc, c, hw](Node& self) {
        if (pf->requires_grad) {
            ensure_grad(*pf);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p)
                    pf->grad[ch * hw + p] += self.grad[ch * hw + p] * pc->value[ch];
        }
        if (pc->requires_grad) {
            ensure_grad(*pc);
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (std::size_t p = 0; p < hw; ++p)
                    acc += self.grad[ch * hw + p] * pf->value[ch * hw + p];
                pc->grad[ch] += acc;
            }
        }
    });
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw TensorError("backward on undefined tensor");
    if (loss.size() != 1)
        throw TensorError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.node->requires_grad) return;  // nothing reachable needs gradients

    // Iterative post-order DFS so deep rollout graphs cannot overflow the stack.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node.get(), 0);
    visited.insert(loss.node.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Intermediate grads are scratch per sweep; leaf grads accumulate.
    for (Node* n : order) {
        if (!n->requires_grad) continue;
        if (n->leaf) {
            ensure_grad(*n);
        } else {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    loss.node->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

}  // namespace pesa
