#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

// Inner-loop kernels with a scalar reference and an AVX2 variant chosen at
// runtime.  Reductions may differ from the scalar path in the last bits
// because of summation order; the mask kernels are exact.

namespace lab::simd {

using cplx = std::complex<double>;

enum class Isa { scalar, avx2 };

bool avx2_available();
Isa active_isa();
const char* isa_name(Isa isa);

// Overrides the dispatch (e.g. LAB_SIMD=scalar does the same from the
// environment).  Requesting avx2 on a machine without it falls back to scalar.
void force_isa(Isa isa);

// sum_j w[j] conj(u[j]) v[j]
cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n);
// sum_j w[j] |u[j]|^2
double wnorm2(const double* w, const cplx* u, std::size_t n);
// y += a x
void axpy(cplx a, const cplx* x, cplx* y, std::size_t n);
// y = s .* x  (s real, one factor per element)
void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n);

void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
// out = a & ~b
void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
std::size_t mask_count(const std::uint64_t* a, std::size_t nwords);

namespace scalar {
cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n);
double wnorm2(const double* w, const cplx* u, std::size_t n);
void axpy(cplx a, const cplx* x, cplx* y, std::size_t n);
void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n);
void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
std::size_t mask_count(const std::uint64_t* a, std::size_t nwords);
}  // namespace scalar

namespace avx2 {
cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n);
double wnorm2(const double* w, const cplx* u, std::size_t n);
void axpy(cplx a, const cplx* x, cplx* y, std::size_t n);
void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n);
void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords);
std::size_t mask_count(const std::uint64_t* a, std::size_t nwords);
}  // namespace avx2

}  // namespace lab::simd
