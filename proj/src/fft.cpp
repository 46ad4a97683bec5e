#include "pesa/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace pesa {

namespace detail {

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backprop);
void ensure_grad(Node& n);

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j];
                cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// O(n^2) fallback for non-power-of-two lengths (grids here are small).
void dft_naive(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    std::vector<cplx> out(n);
    double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double ang = sgn * 2.0 * std::numbers::pi * static_cast<double>(k * j) /
                         static_cast<double>(n);
            acc += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    a = std::move(out);
}

void fft1d(std::vector<cplx>& a, bool inverse) {
    if (is_pow2(a.size()))
        fft_pow2(a, inverse);
    else
        dft_naive(a, inverse);
}

}  // namespace

void dft2_raw(const double* re_in, const double* im_in, double* re_out, double* im_out,
              std::size_t h, std::size_t w, bool inverse) {
    std::vector<cplx> buf(h * w);
    for (std::size_t i = 0; i < h * w; ++i)
        buf[i] = cplx(re_in[i], im_in ? im_in[i] : 0.0);

    std::vector<cplx> line(w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) line[x] = buf[y * w + x];
        fft1d(line, inverse);
        for (std::size_t x = 0; x < w; ++x) buf[y * w + x] = line[x];
    }
    line.assign(h, cplx());
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y = 0; y < h; ++y) line[y] = buf[y * w + x];
        fft1d(line, inverse);
        for (std::size_t y = 0; y < h; ++y) buf[y * w + x] = line[y];
    }
    for (std::size_t i = 0; i < h * w; ++i) {
        re_out[i] = buf[i].real();
        im_out[i] = buf[i].imag();
    }
}

}  // namespace detail

using detail::Node;
using detail::dft2_raw;
using detail::ensure_grad;
using detail::make_op;

namespace {

void check_spectrum(const ComplexTensor& s, const char* op) {
    if (s.real.ndim() != 3)
        throw TensorError(std::string(op) + ": expected c x k1 x k2 spectrum, got " +
                          shape_str(s.real.shape()));
    if (s.real.shape() != s.imag.shape())
        throw TensorError(std::string(op) + ": real/imag shape mismatch " +
                          shape_str(s.real.shape()) + " vs " + shape_str(s.imag.shape()));
}

}  // namespace

ComplexTensor complex_add(const ComplexTensor& a, const ComplexTensor& b) {
    return {add(a.real, b.real), add(a.imag, b.imag)};
}

ComplexTensor fft2(const Tensor& x) {
    if (x.ndim() != 3)
        throw TensorError("fft2: expected c x H x W tensor, got " + shape_str(x.shape()));
    const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (h < 2 || w < 2)
        throw TensorError("fft2: spatial dims must be >= 2, got " + shape_str(x.shape()));
    if (!all_finite(x)) throw TensorError("fft2: non-finite input");

    const std::size_t hw = h * w;
    std::vector<double> re(c * hw), im(c * hw);
    for (std::size_t ch = 0; ch < c; ++ch)
        dft2_raw(&x.data()[ch * hw], nullptr, &re[ch * hw], &im[ch * hw], h, w, false);

    auto px = x.node;
    // d(Re X_k)/dx_n = cos(2*pi*k.n/N): pull-back is the real part of the
    // unnormalized inverse transform of the output grad.
    Tensor real = make_op({c, h, w}, std::move(re), {px}, [px, c, h, w, hw](Node& self) {
        ensure_grad(*px);
        std::vector<double> tr(hw), ti(hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
            dft2_raw(&self.grad[ch * hw], nullptr, tr.data(), ti.data(), h, w, true);
            for (std::size_t i = 0; i < hw; ++i) px->grad[ch * hw + i] += tr[i];
        }
    });
    Tensor imag = make_op({c, h, w}, std::move(im), {px}, [px, c, h, w, hw](Node& self) {
        ensure_grad(*px);
        std::vector<double> zeros(hw, 0.0), tr(hw), ti(hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
            // grad enters on the imaginary slot: i * g under the inverse kernel.
            dft2_raw(zeros.data(), &self.grad[ch * hw], tr.data(), ti.data(), h, w, true);
            for (std::size_t i = 0; i < hw; ++i) px->grad[ch * hw + i] += tr[i];
        }
    });
    return {real, imag};
}

Tensor ifft2(const ComplexTensor& s) {
    check_spectrum(s, "ifft2");
    const std::size_t c = s.shape()[0], h = s.shape()[1], w = s.shape()[2];
    const std::size_t hw = h * w;
    const double inv = 1.0 / static_cast<double>(hw);

    std::vector<double> out(c * hw), ti(hw), tr(hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        dft2_raw(&s.real.data()[ch * hw], &s.imag.data()[ch * hw], tr.data(), ti.data(), h, w,
                 true);
        for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = tr[i] * inv;
    }

    auto pr = s.real.node, pi = s.imag.node;
    return make_op({c, h, w}, std::move(out), {pr, pi}, [pr, pi, c, h, w, hw, inv](Node& self) {
        std::vector<double> tr(hw), ti(hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
            dft2_raw(&self.grad[ch * hw], nullptr, tr.data(), ti.data(), h, w, false);
            if (pr->requires_grad) {
                ensure_grad(*pr);
                for (std::size_t i = 0; i < hw; ++i) pr->grad[ch * hw + i] += tr[i] * inv;
            }
            if (pi->requires_grad) {
                ensure_grad(*pi);
                for (std::size_t i = 0; i < hw; ++i) pi->grad[ch * hw + i] += ti[i] * inv;
            }
        }
    });
}

double ifft2_imag_residue(const ComplexTensor& s) {
    check_spectrum(s, "ifft2_imag_residue");
    const std::size_t c = s.shape()[0], h = s.shape()[1], w = s.shape()[2];
    const std::size_t hw = h * w;
    const double inv = 1.0 / static_cast<double>(hw);
    std::vector<double> tr(hw), ti(hw);
    double worst = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        dft2_raw(&s.real.data()[ch * hw], &s.imag.data()[ch * hw], tr.data(), ti.data(), h, w,
                 true);
        for (std::size_t i = 0; i < hw; ++i) worst = std::max(worst, std::abs(ti[i] * inv));
    }
    return worst;
}

ComplexTensor hermitian_symmetrize(const ComplexTensor& s) {
    check_spectrum(s, "hermitian_symmetrize");
    const std::size_t c = s.shape()[0], h = s.shape()[1], w = s.shape()[2];
    const std::size_t hw = h * w;

    auto mirror = [h, w](std::size_t y, std::size_t x) {
        return ((h - y) % h) * w + ((w - x) % w);
    };

    std::vector<double> re(c * hw), im(c * hw);
    const auto &rv = s.real.data(), &iv = s.imag.data();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                std::size_t a = ch * hw + y * w + x;
                std::size_t b = ch * hw + mirror(y, x);
                re[a] = 0.5 * (rv[a] + rv[b]);
                im[a] = 0.5 * (iv[a] - iv[b]);
            }

    auto pr = s.real.node, pi = s.imag.node;
    Tensor real = make_op({c, h, w}, std::move(re), {pr}, [pr, c, h, w, hw, mirror](Node& self) {
        ensure_grad(*pr);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    std::size_t a = ch * hw + y * w + x;
                    std::size_t b = ch * hw + mirror(y, x);
                    pr->grad[a] += 0.5 * self.grad[a];
                    pr->grad[b] += 0.5 * self.grad[a];
                }
    });
    Tensor imag = make_op({c, h, w}, std::move(im), {pi}, [pi, c, h, w, hw, mirror](Node& self) {
        ensure_grad(*pi);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    std::size_t a = ch * hw + y * w + x;
                    std::size_t b = ch * hw + mirror(y, x);
                    pi->grad[a] += 0.5 * self.grad[a];
                    pi->grad[b] -= 0.5 * self.grad[a];
                }
    });
    return {real, imag};
}

ComplexTensor spectral_linear(const ComplexTensor& s, const Tensor& wr, const Tensor& wi,
                              std::size_t m1, std::size_t m2) {
    check_spectrum(s, "spectral_linear");
    const std::size_t c_in = s.shape()[0], h = s.shape()[1], w = s.shape()[2];
    if (wr.ndim() != 4 || wr.shape() != wi.shape())
        throw TensorError("spectral_linear: weights must be c_out x c_in x 2*m1 x 2*m2 pairs");
    const std::size_t c_out = wr.shape()[0];
    if (wr.shape()[1] != c_in || wr.shape()[2] != 2 * m1 || wr.shape()[3] != 2 * m2)
        throw TensorError("spectral_linear: weight shape " + shape_str(wr.shape()) +
                          " does not match spectrum " + shape_str(s.shape()) + " with modes (" +
                          std::to_string(m1) + "," + std::to_string(m2) + ")");
    if (2 * m1 > h || 2 * m2 > w)
        throw TensorError("spectral_linear: retained modes (" + std::to_string(m1) + "," +
                          std::to_string(m2) + ") exceed spectrum " + shape_str(s.shape()));

    const std::size_t hw = h * w;
    const std::size_t mm = (2 * m1) * (2 * m2);
    // Block index a in [0, 2*m1): low rows first, then the mirrored high rows.
    auto row_of = [h, m1](std::size_t a) { return a < m1 ? a : h - 2 * m1 + a; };
    auto col_of = [w, m2](std::size_t b) { return b < m2 ? b : w - 2 * m2 + b; };

    std::vector<double> out_re(c_out * hw, 0.0), out_im(c_out * hw, 0.0);
    const auto &sr = s.real.data(), &si = s.imag.data();
    const auto &wrv = wr.data(), &wiv = wi.data();

    for (std::size_t a = 0; a < 2 * m1; ++a)
        for (std::size_t b = 0; b < 2 * m2; ++b) {
            std::size_t pos = row_of(a) * w + col_of(b);
            std::size_t wpos = a * (2 * m2) + b;
            for (std::size_t o = 0; o < c_out; ++o) {
                double ar = 0.0, ai = 0.0;
                for (std::size_t i = 0; i < c_in; ++i) {
                    double xr = sr[i * hw + pos], xi = si[i * hw + pos];
                    double vr = wrv[(o * c_in + i) * mm + wpos];
                    double vi = wiv[(o * c_in + i) * mm + wpos];
                    ar += xr * vr - xi * vi;
                    ai += xr * vi + xi * vr;
                }
                out_re[o * hw + pos] = ar;
                out_im[o * hw + pos] = ai;
            }
        }

    auto psr = s.real.node, psi = s.imag.node, pwr = wr.node, pwi = wi.node;
    // Real and imag outputs share the same parents; each backprop closure
    // handles its own component of the complex product.
    auto bp = [psr, psi, pwr, pwi, c_in, c_out, h, w, hw, mm, m1, m2, row_of, col_of](
                  Node& self, bool is_real) {
        for (std::size_t a = 0; a < 2 * m1; ++a)
            for (std::size_t b = 0; b < 2 * m2; ++b) {
                std::size_t pos = row_of(a) * w + col_of(b);
                std::size_t wpos = a * (2 * m2) + b;
                for (std::size_t o = 0; o < c_out; ++o) {
                    double g = self.grad[o * hw + pos];
                    if (g == 0.0) continue;
                    for (std::size_t i = 0; i < c_in; ++i) {
                        double xr = psr->value[i * hw + pos], xi = psi->value[i * hw + pos];
                        double vr = pwr->value[(o * c_in + i) * mm + wpos];
                        double vi = pwi->value[(o * c_in + i) * mm + wpos];
                        if (is_real) {
                            // out_re = xr*vr - xi*vi
                            if (psr->requires_grad) {
                                ensure_grad(*psr);
                                psr->grad[i * hw + pos] += g * vr;
                            }
                            if (psi->requires_grad) {
                                ensure_grad(*psi);
                                psi->grad[i * hw + pos] -= g * vi;
                            }
                            if (pwr->requires_grad) {
                                ensure_grad(*pwr);
                                pwr->grad[(o * c_in + i) * mm + wpos] += g * xr;
                            }
                            if (pwi->requires_grad) {
                                ensure_grad(*pwi);
                                pwi->grad[(o * c_in + i) * mm + wpos] -= g * xi;
                            }
                        } else {
                            // out_im = xr*vi + xi*vr
                            if (psr->requires_grad) {
                                ensure_grad(*psr);
                                psr->grad[i * hw + pos] += g * vi;
                            }
                            if (psi->requires_grad) {
                                ensure_grad(*psi);
                                psi->grad[i * hw + pos] += g * vr;
                            }
                            if (pwr->requires_grad) {
                                ensure_grad(*pwr);
                                pwr->grad[(o * c_in + i) * mm + wpos] += g * xi;
                            }
                            if (pwi->requires_grad) {
                                ensure_grad(*pwi);
                                pwi->grad[(o * c_in + i) * mm + wpos] += g * xr;
                            }
                        }
                    }
                }
            }
    };

    Tensor real = make_op({c_out, h, w}, std::move(out_re), {psr, psi, pwr, pwi},
                          [bp](Node& self) { bp(self, true); });
    Tensor imag = make_op({c_out, h, w}, std::move(out_im), {psr, psi, pwr, pwi},
                          [bp](Node& self) { bp(self, false); });
    return {real, imag};
}

}  // namespace pesa
