#pragma once

#include "lab/simd.hpp"
#include "lab/special.hpp"

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lab {

enum class GridKind { log_spaced, linear };

// Radial frequency nodes with weights for integrals against w^2 dw.
class RadialGrid {
public:
    static constexpr int kEndNodes = 8;

    // Uniform in ln(w); the default one-particle grid.
    static RadialGrid log_spaced(double wmin, double wmax, std::size_t n);
    static RadialGrid linear(double wmin, double wmax, std::size_t n);
    // Log grid with `per_octave` nodes per factor 2, placed at
    // 2^(lo + (k + 1/2)/per_octave) so every power of two lies midway between
    // two nodes.  Shell boundaries 2^-i then never coincide with a node.
    static RadialGrid dyadic(int lo_exp, int hi_exp, int per_octave);
    static RadialGrid default_grid() { return log_spaced(1e-4, 1e2, 2048); }

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    GridKind kind() const { return kind_; }
    std::size_t size() const { return nodes_.size(); }
    double wmin() const { return nodes_.front(); }
    double wmax() const { return nodes_.back(); }
    // ln(w_{j+1}/w_j) for log grids, spacing for linear grids.
    double step() const { return step_; }

    // Integral over [0, w_0] of a density d(w) (already including w^2 and any
    // angular factors), extrapolated linearly from its values at the first two
    // nodes.  Used where the integrand does not vanish at w = 0.
    double low_tail(double d0, double d1) const;
    // Same, for densities even in w: fits a + b w^2 through the first two nodes.
    double low_tail_even(double d0, double d1) const;

    bool same_as(const RadialGrid& other) const;

private:
    RadialGrid(std::vector<double> nodes, GridKind kind, double step);
    std::vector<double> nodes_, weights_;
    GridKind kind_;
    double step_;
};

// Trapezoid weights with Gregory-type end corrections on n uniform points
// (unit spacing), exact for polynomials of degree < kEndNodes.
std::vector<double> corrected_trapezoid(std::size_t n);

class ModeSet {
public:
    explicit ModeSet(int ell_max);
    int ell_max() const { return ell_max_; }
    std::size_t size() const { return modes_.size(); }
    const std::pair<int, int>& operator[](std::size_t i) const { return modes_[i]; }
    static std::size_t index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }

private:
    int ell_max_;
    std::vector<std::pair<int, int>> modes_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;
using ModesPtr = std::shared_ptr<const ModeSet>;

// v(k) = sum_lm v_lm(w) Y_lm(k/|k|), coefficients stored mode-major.
class WaveFunction {
public:
    WaveFunction() = default;
    WaveFunction(GridPtr grid, ModesPtr modes);

    const RadialGrid& grid() const { return *grid_; }
    const ModeSet& modes() const { return *modes_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const ModesPtr& modes_ptr() const { return modes_; }
    std::size_t n_modes() const { return modes_->size(); }
    std::size_t n_nodes() const { return grid_->size(); }

    cplx& at(std::size_t mode, std::size_t j) { return c_[mode * n_nodes() + j]; }
    cplx at(std::size_t mode, std::size_t j) const { return c_[mode * n_nodes() + j]; }
    cplx* row(std::size_t mode) { return c_.data() + mode * n_nodes(); }
    const cplx* row(std::size_t mode) const { return c_.data() + mode * n_nodes(); }
    std::vector<cplx>& coeffs() { return c_; }
    const std::vector<cplx>& coeffs() const { return c_; }

    bool compatible(const WaveFunction& other) const;
    bool all_finite() const;
    WaveFunction zeros_like() const { return WaveFunction(grid_, modes_); }

    WaveFunction& operator+=(const WaveFunction& o);
    WaveFunction& operator-=(const WaveFunction& o);
    WaveFunction& operator*=(cplx s);

private:
    GridPtr grid_;
    ModesPtr modes_;
    std::vector<cplx> c_;
};

WaveFunction operator+(WaveFunction a, const WaveFunction& b);
WaveFunction operator-(WaveFunction a, const WaveFunction& b);
WaveFunction operator*(cplx s, WaveFunction a);

cplx inner_product(const WaveFunction& u, const WaveFunction& v);
double norm2(const WaveFunction& v);
double symplectic_form(const WaveFunction& f, const WaveFunction& g);

// (Gamma v)_lm = (-1)^(l+m) conj(v_{l,-m}): complex conjugation in position space.
WaveFunction apply_gamma(const WaveFunction& v);
// Gamma composed with parity, (-1)^l Gamma.
WaveFunction apply_gamma_hat(const WaveFunction& v);

// Multiplies mode rows by a radial function w -> s(w).
template <class F>
WaveFunction multiply_radial(const WaveFunction& v, F&& s);

// Zeroes every node with w_j < eps.
WaveFunction shell_project(const WaveFunction& v, double eps);
// Keeps only the modes whose l passes the predicate.
template <class P>
WaveFunction restrict_modes(const WaveFunction& v, P&& keep_l);

struct Dilated {
    WaveFunction wf;
    std::vector<std::string> warnings;
};

// Resamples radial mode arrays at lambda * w_j with a monotone cubic in ln(w)
// on modulus and unwrapped phase.  Above the grid the values are zero; below
// it a power law through the two lowest nodes is used.
std::vector<cplx> resample_scaled(const RadialGrid& g, const cplx* f, double lambda, bool* used_low, bool* used_high);

// f_lambda(k) = lambda^(3/2) f(lambda k).
Dilated dilate(const WaveFunction& f, double lambda);

// f = w^(-1/2) h^ + i w^(1/2) g^, with h^, g^ the Fourier transforms of real
// position-space functions h, g.
struct TestVector {
    WaveFunction wf;
    WaveFunction h_part, g_part;
    std::optional<std::string> locality;

    static TestVector from_parts(WaveFunction h_hat, WaveFunction g_hat, std::optional<std::string> locality = {});
    // Largest relative mismatch between wf and the reconstruction from parts.
    double reconstruction_defect() const;
    // Largest violation of h_lm = (-1)^(l+m) conj(h_{l,-m}) over both parts.
    double reality_defect() const;
};

// h^_lambda = lambda h^(lambda .), g^_lambda = lambda^2 g^(lambda .).
struct DilatedTest {
    TestVector tv;
    std::vector<std::string> warnings;
};
DilatedTest dilate(const TestVector& f, double lambda);

// H^_l(w) = 4 pi (-i)^l int j_l(w r) H(r) r^2 dr: the Fourier transform of
// H(r) Y_lm(x/|x|) is H^_l(|k|) Y_lm(k/|k|) in the convention
// f^(k) = int e^{-ik.x} f(x) d^3x.
std::vector<cplx> radial_fourier(const PositionGrid& pg, const std::vector<double>& H, int ell, const RadialGrid& g,
                                 int ell_max = -1);
// All l at once: H[l] sampled on pg; returns out[l][j].
std::vector<std::vector<cplx>> radial_fourier_all(const PositionGrid& pg, const std::vector<std::vector<double>>& H,
                                                  const RadialGrid& g);
// H(r) = (2 pi)^-3 4 pi i^l int j_l(w r) H^(w) w^2 dw, evaluated at the given radii.
std::vector<cplx> inverse_radial_fourier(const RadialGrid& g, const std::vector<cplx>& Hhat, int ell,
                                         const std::vector<double>& radii);

// --- template definitions ---

template <class F>
WaveFunction multiply_radial(const WaveFunction& v, F&& s) {
    WaveFunction out = v.zeros_like();
    const auto& w = v.grid().nodes();
    std::vector<double> fac(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) fac[j] = s(w[j]);
    for (std::size_t m = 0; m < v.n_modes(); ++m) simd::scale_real(fac.data(), v.row(m), out.row(m), w.size());
    return out;
}

template <class P>
WaveFunction restrict_modes(const WaveFunction& v, P&& keep_l) {
    WaveFunction out = v.zeros_like();
    for (std::size_t m = 0; m < v.n_modes(); ++m) {
        if (!keep_l(v.modes()[m].first)) continue;
        std::copy(v.row(m), v.row(m) + v.n_nodes(), out.row(m));
    }
    return out;
}

}  // namespace lab
