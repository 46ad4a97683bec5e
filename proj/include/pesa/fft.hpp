#pragma once

#include "pesa/tensor.hpp"

namespace pesa {

// Complex c x k1 x k2 array stored as two real tensors of identical shape.
struct ComplexTensor {
    Tensor real;
    Tensor imag;

    const Shape& shape() const { return real.shape(); }
};

ComplexTensor complex_add(const ComplexTensor& a, const ComplexTensor& b);

// 2-D DFT per channel of a real c x H x W field. Convention: unnormalized
// forward, X_k = sum_n x_n exp(-2*pi*i*k.n/N); ifft2 applies the 1/(HW)
// factor. Both directions are differentiable.
ComplexTensor fft2(const Tensor& x);

// Inverse 2-D DFT; returns the real part of (1/HW) * sum_k X_k exp(+2*pi*i*k.n/N).
// For conjugate-symmetric input the discarded imaginary part is below 1e-10;
// use ifft2_imag_residue to audit it.
Tensor ifft2(const ComplexTensor& s);

// Max |imaginary part| of the inverse transform (forward-only diagnostic).
double ifft2_imag_residue(const ComplexTensor& s);

// Projects a spectrum onto the conjugate-symmetric subspace:
// Z'(k) = (Z(k) + conj(Z(-k))) / 2, per channel. Makes the subsequent ifft2
// output exactly the real part of the unprojected inverse transform.
ComplexTensor hermitian_symmetrize(const ComplexTensor& s);

// Mode-truncated complex channel mixing. Keeps the four lowest-frequency
// corner blocks (m1 rows, m2 cols each, unshifted layout) and applies a
// learned per-mode complex linear map c_in -> c_out; all other modes are zero.
// wr, wi: c_out x c_in x 2*m1 x 2*m2. Linear in the input spectrum.
ComplexTensor spectral_linear(const ComplexTensor& s, const Tensor& wr, const Tensor& wi,
                              std::size_t m1, std::size_t m2);

namespace detail {
// Raw unnormalized 2-D transform of one H x W channel; inverse flips the
// exponent sign only. Used internally and by test oracles.
void dft2_raw(const double* re_in, const double* im_in, double* re_out, double* im_out,
              std::size_t h, std::size_t w, bool inverse);
}  // namespace detail

}  // namespace pesa
