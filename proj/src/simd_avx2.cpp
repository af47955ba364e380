#include "lab/simd.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define LAB_AVX2 __attribute__((target("avx2,fma")))
#else
#define LAB_AVX2
#endif

namespace lab::simd::avx2 {

#if defined(__x86_64__) || defined(__i386__)

namespace {

// [w0, w0, w1, w1]
LAB_AVX2 inline __m256d dup_pair(const double* w) {
    const __m128d p = _mm_loadu_pd(w);
    return _mm256_permute4x64_pd(_mm256_castpd128_pd256(p), 0x50);
}

LAB_AVX2 inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

LAB_AVX2 cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n) {
    const double* up = reinterpret_cast<const double*>(u);
    const double* vp = reinterpret_cast<const double*>(v);
    __m256d acc_re = _mm256_setzero_pd();
    __m256d acc_im = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const __m256d wv = dup_pair(w + j);
        const __m256d a = _mm256_loadu_pd(up + 2 * j);
        const __m256d b = _mm256_loadu_pd(vp + 2 * j);
        const __m256d bs = _mm256_permute_pd(b, 0x5);
        acc_re = _mm256_fmadd_pd(wv, _mm256_mul_pd(a, b), acc_re);
        acc_im = _mm256_fmadd_pd(wv, _mm256_mul_pd(a, bs), acc_im);
    }
    double re = hsum(acc_re);
    // lanes hold [ur*vi, ui*vr, ...]; imaginary part is the alternating sum
    const __m256d sign = _mm256_setr_pd(1.0, -1.0, 1.0, -1.0);
    double im = hsum(_mm256_mul_pd(acc_im, sign));
    for (; j < n; ++j) {
        re += w[j] * (u[j].real() * v[j].real() + u[j].imag() * v[j].imag());
        im += w[j] * (u[j].real() * v[j].imag() - u[j].imag() * v[j].real());
    }
    return {re, im};
}

LAB_AVX2 double wnorm2(const double* w, const cplx* u, std::size_t n) {
    const double* up = reinterpret_cast<const double*>(u);
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const __m256d wv = dup_pair(w + j);
        const __m256d a = _mm256_loadu_pd(up + 2 * j);
        acc = _mm256_fmadd_pd(wv, _mm256_mul_pd(a, a), acc);
    }
    double s = hsum(acc);
    for (; j < n; ++j) s += w[j] * std::norm(u[j]);
    return s;
}

LAB_AVX2 void axpy(cplx a, const cplx* x, cplx* y, std::size_t n) {
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_setr_pd(-a.imag(), a.imag(), -a.imag(), a.imag());
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        const __m256d xv = _mm256_loadu_pd(xp + 2 * j);
        const __m256d xs = _mm256_permute_pd(xv, 0x5);
        __m256d yv = _mm256_loadu_pd(yp + 2 * j);
        yv = _mm256_fmadd_pd(ar, xv, yv);
        yv = _mm256_fmadd_pd(ai, xs, yv);
        _mm256_storeu_pd(yp + 2 * j, yv);
    }
    for (; j < n; ++j) y[j] += a * x[j];
}

LAB_AVX2 void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n) {
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        _mm256_storeu_pd(yp + 2 * j, _mm256_mul_pd(dup_pair(s + j), _mm256_loadu_pd(xp + 2 * j)));
    }
    for (; j < n; ++j) y[j] = s[j] * x[j];
}

LAB_AVX2 void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    std::size_t i = 0;
    for (; i + 4 <= nwords; i += 4) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i y = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_and_si256(x, y));
    }
    for (; i < nwords; ++i) out[i] = a[i] & b[i];
}

LAB_AVX2 void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    std::size_t i = 0;
    for (; i + 4 <= nwords; i += 4) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i y = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_or_si256(x, y));
    }
    for (; i < nwords; ++i) out[i] = a[i] | b[i];
}

LAB_AVX2 void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    std::size_t i = 0;
    for (; i + 4 <= nwords; i += 4) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i y = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        // andnot computes ~first & second
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_andnot_si256(y, x));
    }
    for (; i < nwords; ++i) out[i] = a[i] & ~b[i];
}

// Nibble-table popcount (Mula) on 256-bit lanes, folded with sad_epu8.
LAB_AVX2 std::size_t mask_count(const std::uint64_t* a, std::size_t nwords) {
    const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                         0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low = _mm256_set1_epi8(0x0f);
    __m256i acc = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 4 <= nwords; i += 4) {
        const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i lo = _mm256_and_si256(v, low);
        const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low);
        const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
        acc = _mm256_add_epi64(acc, _mm256_sad_epu8(cnt, _mm256_setzero_si256()));
    }
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    std::size_t c = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < nwords; ++i) c += static_cast<std::size_t>(__builtin_popcountll(a[i]));
    return c;
}

#else

cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n) { return scalar::wdot(w, u, v, n); }
double wnorm2(const double* w, const cplx* u, std::size_t n) { return scalar::wnorm2(w, u, n); }
void axpy(cplx a, const cplx* x, cplx* y, std::size_t n) { scalar::axpy(a, x, y, n); }
void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n) { scalar::scale_real(s, x, y, n); }
void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    scalar::mask_and(a, b, out, nwords);
}
void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    scalar::mask_or(a, b, out, nwords);
}
void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    scalar::mask_andnot(a, b, out, nwords);
}
std::size_t mask_count(const std::uint64_t* a, std::size_t nwords) { return scalar::mask_count(a, nwords); }

#endif

}  // namespace lab::simd::avx2
