#include "pesa/model.hpp"

#include <cmath>

#include "pesa/pde.hpp"
#include "pesa/rng.hpp"

namespace pesa {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_sa: return "no_sa";
        case Variant::no_pe: return "no_pe";
        case Variant::pe_plus_fourier: return "pe_plus_fourier";
    }
    throw ConfigError("unknown variant enum value");
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "no_sa") return Variant::no_sa;
    if (name == "no_pe") return Variant::no_pe;
    if (name == "pe_plus_fourier") return Variant::pe_plus_fourier;
    throw ConfigError("unknown variant '" + name +
                      "' (expected full, no_sa, no_pe, or pe_plus_fourier)");
}

Tensor Mlp::forward(const Tensor& x) const {
    return linear(w2, relu(linear(w1, x, b1)), b2);
}

namespace {

// Per-submodule seeds keyed by name, so shared submodules initialize
// identically across variants built from the same seed.
Tensor init_uniform(Shape shape, std::size_t fan_in, std::uint64_t seed,
                    const std::string& name) {
    Rng rng(seed ^ fnv1a64(name));
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(-s, s);
    Tensor t = Tensor::from(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

Tensor laplacian_stencil(std::size_t channels, double h) {
    // Diagonal c x c x 3 x 3 kernel holding the 5-point stencil / h^2.
    const double ih2 = 1.0 / (h * h);
    std::vector<double> data(channels * channels * 9, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double* k = &data[(c * channels + c) * 9];
        k[1] = ih2;
        k[3] = ih2;
        k[4] = -4.0 * ih2;
        k[5] = ih2;
        k[7] = ih2;
    }
    return Tensor::from({channels, channels, 3, 3}, std::move(data));
}

}  // namespace

PeSANet::PeSANet(ModelConfig cfg, std::size_t grid) : cfg_(std::move(cfg)), grid_(grid) {
    const std::size_t c = cfg_.state_channels;
    const std::size_t k = cfg_.kernel_size;
    if (cfg_.pi_layers < 1) throw ConfigError("pi_layers (N_l) must be >= 1");
    if (cfg_.pi_channels < 1) throw ConfigError("pi_channels (N_c) must be >= 1");
    if (k % 2 == 0) throw ConfigError("kernel_size must be odd");
    if (grid_ < 2) throw ConfigError("grid must be >= 2");
    if (2 * cfg_.modes1 > grid_ || 2 * cfg_.modes2 > grid_)
        throw ConfigError("retained modes (" + std::to_string(cfg_.modes1) + "," +
                          std::to_string(cfg_.modes2) + ") exceed half the grid size " +
                          std::to_string(grid_));
    if (cfg_.pyconv_init.size() != c)
        throw ConfigError("pyconv_init must have one coefficient per state channel");
    if (cfg_.dt <= 0.0 || cfg_.h <= 0.0) throw ConfigError("dt and h must be positive");

    const std::uint64_t seed = cfg_.init_seed;
    zero_bias_c_ = Tensor::zeros({c});

    if (has_physics_block()) {
        pyconv_kernel_ = laplacian_stencil(c, cfg_.h);
        pyconv_coeff_ = Tensor::from({c}, cfg_.pyconv_init);
        if (cfg_.pyconv_trainable) {
            pyconv_coeff_.set_requires_grad(true);
            params_.push_back({"pyconv.coeff", pyconv_coeff_});
        }
        for (std::size_t l = 0; l < cfg_.pi_layers; ++l) {
            std::string base = "pi.branch" + std::to_string(l);
            Tensor kern = init_uniform({cfg_.pi_channels, c, k, k}, c * k * k, seed,
                                       base + ".kernel");
            Tensor bias = init_uniform({cfg_.pi_channels}, c * k * k, seed, base + ".bias");
            params_.push_back({base + ".kernel", kern});
            params_.push_back({base + ".bias", bias});
            pi_kernels_.push_back(kern);
            pi_biases_.push_back(bias);
        }
        pi_proj_ = init_uniform({c, cfg_.pi_channels, 1, 1}, cfg_.pi_channels, seed, "pi.proj");
        params_.push_back({"pi.proj", pi_proj_});
    }

    enc_w_ = init_uniform({cfg_.enc_width, c, 1, 1}, c, seed, "enc.weight");
    enc_b_ = init_uniform({cfg_.enc_width}, c, seed, "enc.bias");
    params_.push_back({"enc.weight", enc_w_});
    params_.push_back({"enc.bias", enc_b_});

    dec_w_ = init_uniform({c, cfg_.dec_width, 1, 1}, cfg_.dec_width, seed, "dec.weight");
    dec_b_ = init_uniform({c}, cfg_.dec_width, seed, "dec.bias");
    params_.push_back({"dec.weight", dec_w_});
    params_.push_back({"dec.bias", dec_b_});

    Shape wshape = {cfg_.dec_width, cfg_.enc_width, 2 * cfg_.modes1, 2 * cfg_.modes2};
    spec_wr_ = init_uniform(wshape, cfg_.enc_width, seed, "spec.weight_real");
    spec_wi_ = init_uniform(wshape, cfg_.enc_width, seed, "spec.weight_imag");
    params_.push_back({"spec.weight_real", spec_wr_});
    params_.push_back({"spec.weight_imag", spec_wi_});

    if (cfg_.variant == Variant::full || cfg_.variant == Variant::no_pe) {
        auto make_mlp = [&](const std::string& base) {
            Mlp m;
            m.w1 = init_uniform({cfg_.attn_hidden, cfg_.enc_width}, cfg_.enc_width, seed,
                                base + ".w1");
            m.b1 = init_uniform({cfg_.attn_hidden}, cfg_.enc_width, seed, base + ".b1");
            m.w2 = init_uniform({cfg_.enc_width, cfg_.attn_hidden}, cfg_.attn_hidden, seed,
                                base + ".w2");
            m.b2 = init_uniform({cfg_.enc_width}, cfg_.attn_hidden, seed, base + ".b2");
            params_.push_back({base + ".w1", m.w1});
            params_.push_back({base + ".b1", m.b1});
            params_.push_back({base + ".w2", m.w2});
            params_.push_back({base + ".b2", m.b2});
            return m;
        };
        mlp_real_avg_ = make_mlp("att.mlp_real_avg");
        mlp_real_max_ = make_mlp("att.mlp_real_max");
        mlp_imag_avg_ = make_mlp("att.mlp_imag_avg");
        mlp_imag_max_ = make_mlp("att.mlp_imag_max");
    }
}

void PeSANet::check_state(const Tensor& state) const {
    Shape want = {cfg_.state_channels, grid_, grid_};
    if (state.shape() != want)
        throw TensorError("model expects state " + shape_str(want) + ", got " +
                          shape_str(state.shape()));
}

Tensor PeSANet::pyconv_forward(const Tensor& state) const {
    check_state(state);
    if (!has_physics_block()) throw ConfigError("pyconv_forward: variant has no physics block");
    Tensor lap = conv2d_periodic(state, pyconv_kernel_, zero_bias_c_);
    return scale_channels(lap, pyconv_coeff_);
}

Tensor PeSANet::pi_block_forward(const Tensor& state) const {
    check_state(state);
    if (!has_physics_block()) throw ConfigError("pi_block_forward: variant has no physics block");
    Tensor prod;
    for (std::size_t l = 0; l < cfg_.pi_layers; ++l) {
        Tensor branch = conv2d_periodic(state, pi_kernels_[l], pi_biases_[l]);
        prod = l == 0 ? branch : mul(prod, branch);
    }
    return conv2d_periodic(prod, pi_proj_, zero_bias_c_);
}

PeSANet::AttentionResult PeSANet::spectral_attention(const ComplexTensor& spec) const {
    // Pooling over all frequency components, real and imaginary parts
    // separately: the complex field has no natural ordering for a max.
    Tensor att_x = sigmoid(add(mlp_real_avg_.forward(channel_avg(spec.real)),
                               mlp_real_max_.forward(channel_max(spec.real))));
    Tensor att_y = sigmoid(add(mlp_imag_avg_.forward(channel_avg(spec.imag)),
                               mlp_imag_max_.forward(channel_max(spec.imag))));
    // (X + iY) (att_x + i att_y), per-channel scalars broadcast over modes.
    Tensor pr = sub(scale_channels(spec.real, att_x), scale_channels(spec.imag, att_y));
    Tensor pi = add(scale_channels(spec.real, att_y), scale_channels(spec.imag, att_x));
    return {att_x, att_y, {pr, pi}};
}

ComplexTensor PeSANet::frequency_domain_operator(const ComplexTensor& spec) const {
    ComplexTensor agg;
    switch (cfg_.variant) {
        case Variant::full:
        case Variant::no_pe:
            agg = complex_add(spec, spectral_attention(spec).processed);
            break;
        case Variant::no_sa:
            // Attention replaced by identity pass-through; skip retained.
            agg = complex_add(spec, spec);
            break;
        case Variant::pe_plus_fourier:
            // Plain truncated Fourier layer: no attention, no skip.
            agg = spec;
            break;
    }
    return spectral_linear(agg, spec_wr_, spec_wi_, cfg_.modes1, cfg_.modes2);
}

Tensor PeSANet::spectral_block_forward(const Tensor& state) const {
    check_state(state);
    Tensor enc = conv2d_periodic(state, enc_w_, enc_b_);
    ComplexTensor spec = fft2(enc);
    ComplexTensor out = frequency_domain_operator(spec);
    // Project back onto the conjugate-symmetric subspace so the inverse
    // transform is real; complex attention coefficients and mode mixing do
    // not preserve Hermitian symmetry on their own.
    Tensor field = ifft2(hermitian_symmetrize(out));
    return conv2d_periodic(field, dec_w_, dec_b_);
}

Tensor PeSANet::step(const Tensor& state) const {
    check_state(state);
    Tensor rhs = spectral_block_forward(state);
    if (has_physics_block())
        rhs = add(rhs, add(pyconv_forward(state), pi_block_forward(state)));
    Tensor next = add(state, scale(rhs, cfg_.dt));
    if (!all_finite(next)) throw BlowupError("pesanet_step: non-finite state", 0);
    return next;
}

PeSANet build_variant(const ModelConfig& cfg, std::size_t grid) { return PeSANet(cfg, grid); }

std::vector<std::vector<double>> rollout(const PeSANet& model, const std::vector<double>& ic,
                                         std::size_t steps) {
    NoGradGuard no_grad;
    const std::size_t c = model.config().state_channels, n = model.grid();
    if (ic.size() != c * n * n)
        throw TensorError("rollout: ic has " + std::to_string(ic.size()) +
                          " values, expected " + std::to_string(c * n * n));

    std::vector<std::vector<double>> out;
    out.reserve(steps + 1);
    out.push_back(ic);
    Tensor state = Tensor::from({c, n, n}, ic);
    for (std::size_t s = 0; s < steps; ++s) {
        try {
            state = model.step(state).detach();
        } catch (const BlowupError& e) {
            throw BlowupError(e.what(), s);
        }
        out.push_back(state.data());
    }
    return out;
}

}  // namespace pesa
