#include "lab/special.hpp"

#include "lab/errors.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lab {

namespace {

void bessel_series(int L, double x, double* out) {
    // x^l/(2l+1)!! * (1 - x^2/(2(2l+3)) + x^4/(8(2l+3)(2l+5)))
    double lead = 1.0;
    const double x2 = x * x;
    for (int l = 0; l <= L; ++l) {
        if (l > 0) lead *= x / (2.0 * l + 1.0);
        const double a = 2.0 * l + 3.0;
        out[l] = lead * (1.0 - x2 / (2.0 * a) + x2 * x2 / (8.0 * a * (a + 2.0)));
    }
}

}  // namespace

void sph_bessel_all(int L, double x, double* out) {
    if (L < 0) return;
    if (x < 0) throw DomainError("sph_bessel_all: negative argument");
    if (x < 1e-3) {
        bessel_series(L, x, out);
        return;
    }
    const double s = std::sin(x), c = std::cos(x);
    const double j0 = s / x;
    const double j1 = s / (x * x) - c / x;
    if (x > L) {
        out[0] = j0;
        if (L >= 1) out[1] = j1;
        for (int l = 1; l < L; ++l) out[l + 1] = (2.0 * l + 1.0) / x * out[l] - out[l - 1];
        return;
    }
    const int N = L + 20 + static_cast<int>(std::sqrt(40.0 * (L + 1)));
    std::vector<double> tmp(N + 2, 0.0);
    tmp[N + 1] = 0.0;
    tmp[N] = 1e-300;
    for (int l = N; l >= 1; --l) {
        tmp[l - 1] = (2.0 * l + 1.0) / x * tmp[l] - tmp[l + 1];
        if (std::abs(tmp[l - 1]) > 1e250) {
            for (int k = l - 1; k <= N + 1; ++k) tmp[k] *= 1e-250;
        }
    }
    double peak = 0.0;
    for (int l = 0; l <= N; ++l) peak = std::max(peak, std::abs(tmp[l]));
    for (int l = 0; l <= N; ++l) tmp[l] /= peak;
    double sum = 0.0;
    for (int l = 0; l <= N; ++l) sum += (2.0 * l + 1.0) * tmp[l] * tmp[l];
    double scale = 1.0 / std::sqrt(sum);
    const bool use_j0 = std::abs(j0) >= std::abs(j1);
    const double ref = use_j0 ? j0 : j1;
    const double got = use_j0 ? tmp[0] : tmp[1];
    if ((ref < 0) != (got < 0)) scale = -scale;
    for (int l = 0; l <= L; ++l) out[l] = tmp[l] * scale;
}

double sph_bessel(int l, double x) {
    std::vector<double> buf(l + 1);
    sph_bessel_all(l, x, buf.data());
    return buf[l];
}

void legendre_normalized(int L, double x, double* out) {
    const double sx = std::sqrt(std::max(0.0, 1.0 - x * x));
    auto at = [&](int l, int m) -> double& { return out[l * (l + 1) / 2 + m]; };
    at(0, 0) = 0.5 / std::sqrt(std::numbers::pi);
    for (int m = 1; m <= L; ++m) at(m, m) = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sx * at(m - 1, m - 1);
    for (int m = 0; m < L; ++m) at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * at(m, m);
    for (int m = 0; m <= L; ++m) {
        for (int l = m + 2; l <= L; ++l) {
            const double ll = static_cast<double>(l) * l, mm = static_cast<double>(m) * m;
            const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
            const double lp = l - 1.0;
            const double b = std::sqrt((lp * lp - mm) / (4.0 * lp * lp - 1.0));
            at(l, m) = a * (x * at(l - 1, m) - b * at(l - 2, m));
        }
    }
}

void ylm_all(int L, double theta, double phi, cplx* out) {
    std::vector<double> p((L + 1) * (L + 2) / 2);
    legendre_normalized(L, std::cos(theta), p.data());
    for (int l = 0; l <= L; ++l) {
        const int base = l * l + l;
        out[base] = p[l * (l + 1) / 2];
        for (int m = 1; m <= l; ++m) {
            const cplx e = std::polar(1.0, m * phi);
            const cplx y = p[l * (l + 1) / 2 + m] * e;
            out[base + m] = y;
            out[base - m] = (m % 2 ? -1.0 : 1.0) * std::conj(y);
        }
    }
}

cplx ylm(int l, int m, double theta, double phi) {
    if (l < 0 || std::abs(m) > l) throw DomainError("ylm: invalid (l, m)");
    std::vector<cplx> buf((l + 1) * (l + 1));
    ylm_all(l, theta, phi, buf.data());
    return buf[l * l + l + m];
}

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n));
    if (!t) throw NumericalError("gauss_legendre: table allocation failed");
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) gsl_integration_glfixed_point(a, b, static_cast<std::size_t>(i), &x[i], &w[i], t);
    gsl_integration_glfixed_table_free(t);
}

AngularQuadrature AngularQuadrature::for_degree(int L) {
    AngularQuadrature q;
    q.L = L;
    std::vector<double> ct, wt;
    gauss_legendre(L + 1, -1.0, 1.0, ct, wt);
    const int nphi = 2 * L + 2;
    const double dphi = 2.0 * std::numbers::pi / nphi;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        const double th = std::acos(ct[i]);
        const double st = std::sin(th);
        for (int k = 0; k < nphi; ++k) {
            const double ph = k * dphi;
            q.theta.push_back(th);
            q.phi.push_back(ph);
            q.weight.push_back(wt[i] * dphi);
            q.x.push_back(st * std::cos(ph));
            q.y.push_back(st * std::sin(ph));
            q.z.push_back(ct[i]);
        }
    }
    return q;
}

std::vector<cplx> AngularQuadrature::coefficients(const std::vector<cplx>& values, int Lout) const {
    const std::size_t nm = static_cast<std::size_t>((Lout + 1) * (Lout + 1));
    std::vector<cplx> c(nm, 0.0), y(nm);
    for (std::size_t q = 0; q < size(); ++q) {
        ylm_all(Lout, theta[q], phi[q], y.data());
        for (std::size_t i = 0; i < nm; ++i) c[i] += weight[q] * std::conj(y[i]) * values[q];
    }
    return c;
}

std::vector<cplx> AngularQuadrature::synthesize(const std::vector<cplx>& coeffs, int Lin) const {
    const std::size_t nm = static_cast<std::size_t>((Lin + 1) * (Lin + 1));
    std::vector<cplx> f(size(), 0.0), y(nm);
    for (std::size_t q = 0; q < size(); ++q) {
        ylm_all(Lin, theta[q], phi[q], y.data());
        for (std::size_t i = 0; i < nm; ++i) f[q] += coeffs[i] * y[i];
    }
    return f;
}

PositionGrid PositionGrid::panels(double R, double panel_width, int order) {
    if (R <= 0 || panel_width <= 0) throw DomainError("PositionGrid: nonpositive extent");
    const int np = static_cast<int>(std::ceil(R / panel_width));
    const double width = R / np;
    std::vector<double> x, w;
    gauss_legendre(order, 0.0, width, x, w);
    PositionGrid g;
    for (int p = 0; p < np; ++p) {
        for (int i = 0; i < order; ++i) {
            const double r = p * width + x[i];
            g.r.push_back(r);
            g.w.push_back(w[i] * r * r);
        }
    }
    return g;
}

}  // namespace lab
