#include "lab/simd.hpp"

#include <atomic>
#include <bit>
#include <cstdlib>
#include <cstring>

namespace lab::simd {

namespace scalar {

cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double ur = u[j].real(), ui = u[j].imag();
        const double vr = v[j].real(), vi = v[j].imag();
        re += w[j] * (ur * vr + ui * vi);
        im += w[j] * (ur * vi - ui * vr);
    }
    return {re, im};
}

double wnorm2(const double* w, const cplx* u, std::size_t n) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[j] * std::norm(u[j]);
    return s;
}

void axpy(cplx a, const cplx* x, cplx* y, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j];
}

void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) y[j] = s[j] * x[j];
}

void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    for (std::size_t i = 0; i < nwords; ++i) out[i] = a[i] & b[i];
}

void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    for (std::size_t i = 0; i < nwords; ++i) out[i] = a[i] | b[i];
}

void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    for (std::size_t i = 0; i < nwords; ++i) out[i] = a[i] & ~b[i];
}

std::size_t mask_count(const std::uint64_t* a, std::size_t nwords) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < nwords; ++i) c += static_cast<std::size_t>(std::popcount(a[i]));
    return c;
}

}  // namespace scalar

namespace {

struct Table {
    decltype(&scalar::wdot) wdot;
    decltype(&scalar::wnorm2) wnorm2;
    decltype(&scalar::axpy) axpy;
    decltype(&scalar::scale_real) scale_real;
    decltype(&scalar::mask_and) mask_and;
    decltype(&scalar::mask_or) mask_or;
    decltype(&scalar::mask_andnot) mask_andnot;
    decltype(&scalar::mask_count) mask_count;
};

constexpr Table kScalar{scalar::wdot,     scalar::wnorm2,  scalar::axpy,        scalar::scale_real,
                        scalar::mask_and, scalar::mask_or, scalar::mask_andnot, scalar::mask_count};
constexpr Table kAvx2{avx2::wdot,     avx2::wnorm2,  avx2::axpy,        avx2::scale_real,
                      avx2::mask_and, avx2::mask_or, avx2::mask_andnot, avx2::mask_count};

Isa detect() {
    if (const char* env = std::getenv("LAB_SIMD"); env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return avx2_available() ? Isa::avx2 : Isa::scalar;
}

std::atomic<int>& current() {
    static std::atomic<int> isa{static_cast<int>(detect())};
    return isa;
}

const Table& table() {
    return current().load(std::memory_order_relaxed) == static_cast<int>(Isa::avx2) ? kAvx2 : kScalar;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() { return static_cast<Isa>(current().load()); }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
    if (isa == Isa::avx2 && !avx2_available()) isa = Isa::scalar;
    current().store(static_cast<int>(isa));
}

cplx wdot(const double* w, const cplx* u, const cplx* v, std::size_t n) { return table().wdot(w, u, v, n); }
double wnorm2(const double* w, const cplx* u, std::size_t n) { return table().wnorm2(w, u, n); }
void axpy(cplx a, const cplx* x, cplx* y, std::size_t n) { table().axpy(a, x, y, n); }
void scale_real(const double* s, const cplx* x, cplx* y, std::size_t n) { table().scale_real(s, x, y, n); }
void mask_and(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    table().mask_and(a, b, out, nwords);
}
void mask_or(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    table().mask_or(a, b, out, nwords);
}
void mask_andnot(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t nwords) {
    table().mask_andnot(a, b, out, nwords);
}
std::size_t mask_count(const std::uint64_t* a, std::size_t nwords) { return table().mask_count(a, nwords); }

}  // namespace lab::simd
