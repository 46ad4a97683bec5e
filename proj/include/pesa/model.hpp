#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pesa/fft.hpp"
#include "pesa/optim.hpp"
#include "pesa/tensor.hpp"

namespace pesa {

enum class Variant { full, no_sa, no_pe, pe_plus_fourier };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    std::size_t state_channels = 2;
    std::size_t pi_channels = 8;    // N_c
    std::size_t pi_layers = 2;      // N_l parallel conv branches
    std::size_t kernel_size = 5;    // odd
    double dt = 0.01;               // model step (s)
    double h = 1.0 / 32.0;          // grid spacing
    std::size_t modes1 = 8;         // retained frequency modes per axis
    std::size_t modes2 = 8;
    std::size_t enc_width = 8;
    std::size_t dec_width = 8;
    std::size_t attn_hidden = 8;
    Variant variant = Variant::full;
    // PyConv: fixed Laplacian stencil with a per-state-channel coefficient.
    std::vector<double> pyconv_init = {1.0, 1.0};
    bool pyconv_trainable = true;
    std::uint64_t init_seed = 0;
};

// One-hidden-layer MLP with ReLU, mapping R^c -> R^c.
struct Mlp {
    Tensor w1, b1, w2, b2;
    Tensor forward(const Tensor& x) const;
};

// PeSANet forward model: physics-encoded block (PyConv + Pi-block) plus the
// spectral-enhanced block, combined as summed time-derivative contributions
// under a forward-Euler update. Forward passes are pure functions of
// (parameters, input).
class PeSANet {
public:
    PeSANet(ModelConfig cfg, std::size_t grid);

    const ModelConfig& config() const { return cfg_; }
    std::size_t grid() const { return grid_; }

    // Trainable parameters only; the PyConv stencil is never included.
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // coefficient[ch] * 5-point Laplacian of each state channel.
    Tensor pyconv_forward(const Tensor& state) const;
    // W_c . prod_l (K_l * state + b_l): multiplicative conv branches, then a
    // 1x1 projection back to state channels.
    Tensor pi_block_forward(const Tensor& state) const;

    struct AttentionResult {
        Tensor att_real;  // sigmoid outputs in (0,1), length c
        Tensor att_imag;
        ComplexTensor processed;
    };
    AttentionResult spectral_attention(const ComplexTensor& spec) const;

    // Variant-dependent: attention + skip + mode-truncated linear map (full),
    // skip + linear only (no_sa), or plain truncated linear (pe_plus_fourier).
    ComplexTensor frequency_domain_operator(const ComplexTensor& spec) const;

    // encoder -> fft2 -> frequency_domain_operator -> ifft2 -> decoder.
    Tensor spectral_block_forward(const Tensor& state) const;

    // next = state + dt * F(state). Throws BlowupError on non-finite output.
    Tensor step(const Tensor& state) const;

    const Tensor& pyconv_stencil() const { return pyconv_kernel_; }

    bool has_physics_block() const { return cfg_.variant != Variant::no_pe; }

private:
    void check_state(const Tensor& state) const;

    ModelConfig cfg_;
    std::size_t grid_;

    Tensor pyconv_kernel_;  // fixed, non-trainable
    Tensor pyconv_coeff_;
    std::vector<Tensor> pi_kernels_;
    std::vector<Tensor> pi_biases_;
    Tensor pi_proj_;       // 1x1 projection weights
    Tensor zero_bias_c_;   // shared zero bias for bias-free convs

    Tensor enc_w_, enc_b_;
    Tensor dec_w_, dec_b_;
    Tensor spec_wr_, spec_wi_;
    Mlp mlp_real_avg_, mlp_real_max_, mlp_imag_avg_, mlp_imag_max_;

    ParamSet params_;
};

PeSANet build_variant(const ModelConfig& cfg, std::size_t grid);

// Inference rollout: [ic, step(ic), ...], length steps+1, each state detached.
// Throws BlowupError carrying the failing step index.
std::vector<std::vector<double>> rollout(const PeSANet& model, const std::vector<double>& ic,
                                         std::size_t steps);

}  // namespace pesa
