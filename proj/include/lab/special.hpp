#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace lab {

using cplx = std::complex<double>;

// j_0(x) .. j_L(x) written to out[0..L].  Series for tiny x, upward recurrence
// above x > L, Miller's downward recurrence otherwise.
void sph_bessel_all(int L, double x, double* out);
double sph_bessel(int l, double x);

// Fully normalized associated Legendre values used by the spherical
// harmonics: out[l*(l+1)/2 + m] = sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) P_l^m(x)
// for 0 <= m <= l <= L, Condon-Shortley phase included.
void legendre_normalized(int L, double x, double* out);

// Complex spherical harmonics with the Condon-Shortley phase, indexed
// l*l + l + m (same ordering as ModeSet).
void ylm_all(int L, double theta, double phi, cplx* out);
cplx ylm(int l, int m, double theta, double phi);

// n-point Gauss-Legendre rule on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

// Product rule on the sphere: Gauss-Legendre in cos(theta) times a uniform
// azimuthal grid.  Integrates Y_lm products exactly for l + l' <= 2*L.
struct AngularQuadrature {
    int L = 0;
    std::vector<double> theta, phi, weight;  // flattened, size n_theta * n_phi
    std::vector<double> x, y, z;             // unit directions

    static AngularQuadrature for_degree(int L);
    std::size_t size() const { return weight.size(); }

    // c_lm = sum_q w_q conj(Y_lm(q)) f(q) for l <= Lout.
    std::vector<cplx> coefficients(const std::vector<cplx>& values, int Lout) const;
    // f(q) = sum_lm c_lm Y_lm(q).
    std::vector<cplx> synthesize(const std::vector<cplx>& coeffs, int Lin) const;
};

// Gauss-Legendre panels on [0, R] for radial integrals in position space.
struct PositionGrid {
    std::vector<double> r, w;  // w includes r^2

    static PositionGrid panels(double R, double panel_width = 0.025, int order = 8);
    std::size_t size() const { return r.size(); }
};

}  // namespace lab
