#include "lab/hilbert.hpp"

#include "lab/errors.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_interp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lab {

namespace {

constexpr double kPi = std::numbers::pi;

// Left-end corrections d_j (j < K) for the unit-spacing trapezoid rule.  They
// cancel the Euler-Maclaurin end terms: sum_j d_j j^k = B_{k+1}/(k+1) for odd
// k and 0 for even k, k < K.
const std::vector<double>& end_corrections() {
    static const std::vector<double> d = [] {
        constexpr int K = RadialGrid::kEndNodes;
        const double bernoulli[] = {1.0, -0.5, 1.0 / 6, 0.0, -1.0 / 30, 0.0, 1.0 / 42, 0.0, -1.0 / 30};
        Eigen::MatrixXd A(K, K);
        Eigen::VectorXd rhs(K);
        for (int k = 0; k < K; ++k) {
            for (int j = 0; j < K; ++j) A(k, j) = std::pow(static_cast<double>(j), k);
            rhs(k) = (k % 2 == 1) ? bernoulli[k + 1] / (k + 1) : 0.0;
        }
        A(0, 0) = 1.0;  // 0^0
        Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
        return std::vector<double>(sol.data(), sol.data() + K);
    }();
    return d;
}

void require_compatible(const WaveFunction& u, const WaveFunction& v, const char* who) {
    if (!u.compatible(v)) throw BasisError(std::string(who) + ": incompatible grid or mode set");
}

}  // namespace

std::vector<double> corrected_trapezoid(std::size_t n) {
    constexpr std::size_t K = RadialGrid::kEndNodes;
    if (n < 2 * K) throw DomainError("corrected_trapezoid: need at least 16 nodes");
    std::vector<double> c(n, 1.0);
    c.front() = c.back() = 0.5;
    const auto& d = end_corrections();
    for (std::size_t j = 0; j < K; ++j) {
        c[j] += d[j];
        c[n - 1 - j] += d[j];
    }
    return c;
}

RadialGrid::RadialGrid(std::vector<double> nodes, GridKind kind, double step)
    : nodes_(std::move(nodes)), kind_(kind), step_(step) {
    const auto c = corrected_trapezoid(nodes_.size());
    weights_.resize(nodes_.size());
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        const double w = nodes_[j];
        weights_[j] = kind_ == GridKind::log_spaced ? step_ * c[j] * w * w * w : step_ * c[j] * w * w;
    }
}

RadialGrid RadialGrid::log_spaced(double wmin, double wmax, std::size_t n) {
    if (!(wmin > 0) || !(wmax > wmin) || n < 2 * kEndNodes) throw DomainError("RadialGrid: invalid log grid");
    const double h = std::log(wmax / wmin) / static_cast<double>(n - 1);
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = wmin * std::exp(h * static_cast<double>(j));
    w.back() = wmax;
    return RadialGrid(std::move(w), GridKind::log_spaced, h);
}

RadialGrid RadialGrid::linear(double wmin, double wmax, std::size_t n) {
    if (!(wmin > 0) || !(wmax > wmin) || n < 2 * kEndNodes) throw DomainError("RadialGrid: invalid linear grid");
    const double h = (wmax - wmin) / static_cast<double>(n - 1);
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = wmin + h * static_cast<double>(j);
    return RadialGrid(std::move(w), GridKind::linear, h);
}

RadialGrid RadialGrid::dyadic(int lo_exp, int hi_exp, int per_octave) {
    if (hi_exp <= lo_exp || per_octave < 1) throw DomainError("RadialGrid: invalid dyadic grid");
    const int n = (hi_exp - lo_exp) * per_octave;
    std::vector<double> w(n);
    for (int k = 0; k < n; ++k) w[k] = std::exp2(lo_exp + (k + 0.5) / per_octave);
    return RadialGrid(std::move(w), GridKind::log_spaced, std::log(2.0) / per_octave);
}

double RadialGrid::low_tail(double d0, double d1) const {
    const double w0 = nodes_[0], w1 = nodes_[1];
    const double slope = (d1 - d0) / (w1 - w0);
    return w0 * d0 - 0.5 * slope * w0 * w0;
}

double RadialGrid::low_tail_even(double d0, double d1) const {
    const double w0 = nodes_[0], w1 = nodes_[1];
    const double b = (d1 - d0) / (w1 * w1 - w0 * w0);
    const double a = d0 - b * w0 * w0;
    return a * w0 + b * w0 * w0 * w0 / 3.0;
}

bool RadialGrid::same_as(const RadialGrid& other) const {
    return this == &other || (kind_ == other.kind_ && nodes_ == other.nodes_);
}

ModeSet::ModeSet(int ell_max) : ell_max_(ell_max) {
    if (ell_max < 0) throw DomainError("ModeSet: negative ell_max");
    for (int l = 0; l <= ell_max; ++l)
        for (int m = -l; m <= l; ++m) modes_.emplace_back(l, m);
}

WaveFunction::WaveFunction(GridPtr grid, ModesPtr modes)
    : grid_(std::move(grid)), modes_(std::move(modes)), c_(grid_->size() * modes_->size(), cplx(0.0)) {}

bool WaveFunction::compatible(const WaveFunction& o) const {
    if (!grid_ || !o.grid_) return false;
    return grid_->same_as(*o.grid_) && modes_->ell_max() == o.modes_->ell_max();
}

bool WaveFunction::all_finite() const {
    return std::all_of(c_.begin(), c_.end(), [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

WaveFunction& WaveFunction::operator+=(const WaveFunction& o) {
    require_compatible(*this, o, "operator+=");
    simd::axpy(1.0, o.c_.data(), c_.data(), c_.size());
    return *this;
}

WaveFunction& WaveFunction::operator-=(const WaveFunction& o) {
    require_compatible(*this, o, "operator-=");
    simd::axpy(-1.0, o.c_.data(), c_.data(), c_.size());
    return *this;
}

WaveFunction& WaveFunction::operator*=(cplx s) {
    for (auto& z : c_) z *= s;
    return *this;
}

WaveFunction operator+(WaveFunction a, const WaveFunction& b) { return a += b; }
WaveFunction operator-(WaveFunction a, const WaveFunction& b) { return a -= b; }
WaveFunction operator*(cplx s, WaveFunction a) { return a *= s; }

cplx inner_product(const WaveFunction& u, const WaveFunction& v) {
    require_compatible(u, v, "inner_product");
    const double* w = u.grid().weights().data();
    cplx s = 0.0;
    for (std::size_t m = 0; m < u.n_modes(); ++m) s += simd::wdot(w, u.row(m), v.row(m), u.n_nodes());
    return s;
}

double norm2(const WaveFunction& v) {
    const double* w = v.grid().weights().data();
    double s = 0.0;
    for (std::size_t m = 0; m < v.n_modes(); ++m) s += simd::wnorm2(w, v.row(m), v.n_nodes());
    return s;
}

double symplectic_form(const WaveFunction& f, const WaveFunction& g) { return -inner_product(f, g).imag(); }

WaveFunction apply_gamma(const WaveFunction& v) {
    WaveFunction out = v.zeros_like();
    const std::size_t n = v.n_nodes();
    for (std::size_t i = 0; i < v.n_modes(); ++i) {
        const auto [l, m] = v.modes()[i];
        const double sign = ((l + m) % 2 == 0) ? 1.0 : -1.0;
        const cplx* src = v.row(ModeSet::index(l, -m));
        cplx* dst = out.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] = sign * std::conj(src[j]);
    }
    return out;
}

WaveFunction apply_gamma_hat(const WaveFunction& v) {
    WaveFunction out = apply_gamma(v);
    for (std::size_t i = 0; i < out.n_modes(); ++i) {
        if (out.modes()[i].first % 2 == 0) continue;
        cplx* r = out.row(i);
        for (std::size_t j = 0; j < out.n_nodes(); ++j) r[j] = -r[j];
    }
    return out;
}

WaveFunction shell_project(const WaveFunction& v, double eps) {
    WaveFunction out = v;
    const auto& w = v.grid().nodes();
    const std::size_t cut = static_cast<std::size_t>(std::lower_bound(w.begin(), w.end(), eps) - w.begin());
    if (cut == 0) return out;
    for (std::size_t m = 0; m < v.n_modes(); ++m) std::fill(out.row(m), out.row(m) + cut, cplx(0.0));
    return out;
}

std::vector<cplx> resample_scaled(const RadialGrid& g, const cplx* f, double lambda, bool* used_low, bool* used_high) {
    const std::size_t n = g.size();
    const auto& w = g.nodes();
    std::vector<double> x(n), mod(n), ph(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = std::log(w[j]);
        mod[j] = std::abs(f[j]);
        double a = mod[j] > 0 ? std::arg(f[j]) : (j ? ph[j - 1] : 0.0);
        if (j > 0) {
            const double prev = ph[j - 1];
            a += 2 * kPi * std::round((prev - a) / (2 * kPi));
        }
        ph[j] = a;
    }
    std::vector<cplx> out(n, cplx(0.0));
    if (std::all_of(mod.begin(), mod.end(), [](double v) { return v == 0.0; })) return out;

    gsl_interp* im = gsl_interp_alloc(gsl_interp_steffen, n);
    gsl_interp* ip = gsl_interp_alloc(gsl_interp_steffen, n);
    gsl_interp_accel* acc = gsl_interp_accel_alloc();
    gsl_interp_init(im, x.data(), mod.data(), n);
    gsl_interp_init(ip, x.data(), ph.data(), n);

    const double loglam = std::log(lambda);
    const bool log_grid = g.kind() == GridKind::log_spaced;
    for (std::size_t j = 0; j < n; ++j) {
        const double t = x[j] + loglam;
        if (log_grid) {
            const double s = (t - x[0]) / g.step();
            const double r = std::round(s);
            if (std::abs(s - r) < 1e-9 && r >= 0 && r <= static_cast<double>(n - 1)) {
                out[j] = f[static_cast<std::size_t>(r)];
                continue;
            }
        }
        if (t > x[n - 1]) {
            if (used_high) *used_high = true;
            continue;
        }
        if (t < x[0]) {
            if (used_low) *used_low = true;
            if (mod[0] == 0.0 || mod[1] == 0.0) continue;
            const double p = std::log(mod[1] / mod[0]) / (x[1] - x[0]);
            out[j] = std::polar(mod[0] * std::exp(p * (t - x[0])), ph[0]);
            continue;
        }
        const double m = std::max(0.0, gsl_interp_eval(im, x.data(), mod.data(), t, acc));
        const double a = gsl_interp_eval(ip, x.data(), ph.data(), t, acc);
        out[j] = std::polar(m, a);
    }
    gsl_interp_accel_free(acc);
    gsl_interp_free(im);
    gsl_interp_free(ip);
    return out;
}

namespace {

// Dilates each mode row by lambda with amplitude factor `amp`, collecting the
// band warnings.  Edge values below 1e-8 of the peak are treated as resolved.
WaveFunction dilate_rows(const WaveFunction& f, double lambda, double amp, std::vector<std::string>& warnings) {
    if (!(lambda > 0)) throw DomainError("dilate: lambda must be positive");
    WaveFunction out = f.zeros_like();
    if (lambda == 1.0) {
        out = f;
        out *= amp;
        return out;
    }
    bool low = false, high = false;
    double peak = 0.0, top = 0.0, bottom = 0.0;
    const std::size_t n = f.n_nodes();
    const auto& w = f.grid().weights();
    for (std::size_t m = 0; m < f.n_modes(); ++m) {
        const cplx* r = f.row(m);
        for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, std::abs(r[j]) * std::sqrt(w[j]));
        top = std::max(top, std::abs(r[n - 1]) * std::sqrt(w[n - 1]));
        bottom = std::max(bottom, std::abs(r[0]) * std::sqrt(w[0]));
        if (std::all_of(r, r + n, [](cplx z) { return z == cplx(0.0); })) continue;
        auto s = resample_scaled(f.grid(), r, lambda, &low, &high);
        cplx* d = out.row(m);
        for (std::size_t j = 0; j < n; ++j) d[j] = amp * s[j];
    }
    if (high && top > 1e-8 * peak)
        warnings.push_back("dilate: lambda * w_max leaves the grid with non-negligible edge values; truncated to zero");
    if (low && bottom > 1e-8 * peak)
        warnings.push_back("dilate: lambda * w_min below the grid; power-law extrapolation used");
    return out;
}

}  // namespace

Dilated dilate(const WaveFunction& f, double lambda) {
    Dilated d;
    d.wf = dilate_rows(f, lambda, std::pow(lambda, 1.5), d.warnings);
    return d;
}

TestVector TestVector::from_parts(WaveFunction h_hat, WaveFunction g_hat, std::optional<std::string> locality) {
    require_compatible(h_hat, g_hat, "TestVector");
    TestVector t;
    const WaveFunction a = multiply_radial(h_hat, [](double w) { return 1.0 / std::sqrt(w); });
    const WaveFunction b = multiply_radial(g_hat, [](double w) { return std::sqrt(w); });
    t.wf = a;
    simd::axpy(cplx(0.0, 1.0), b.coeffs().data(), t.wf.coeffs().data(), b.coeffs().size());
    t.h_part = std::move(h_hat);
    t.g_part = std::move(g_hat);
    t.locality = std::move(locality);
    return t;
}

double TestVector::reconstruction_defect() const {
    const TestVector r = from_parts(h_part, g_part);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < wf.coeffs().size(); ++i) {
        num = std::max(num, std::abs(wf.coeffs()[i] - r.wf.coeffs()[i]));
        den = std::max(den, std::abs(wf.coeffs()[i]));
    }
    return den > 0 ? num / den : num;
}

double TestVector::reality_defect() const {
    double worst = 0.0;
    for (const WaveFunction* p : {&h_part, &g_part}) {
        const WaveFunction gp = apply_gamma(*p);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < gp.coeffs().size(); ++i) {
            num = std::max(num, std::abs(gp.coeffs()[i] - p->coeffs()[i]));
            den = std::max(den, std::abs(p->coeffs()[i]));
        }
        worst = std::max(worst, den > 0 ? num / den : num);
    }
    return worst;
}

DilatedTest dilate(const TestVector& f, double lambda) {
    DilatedTest d;
    WaveFunction h = dilate_rows(f.h_part, lambda, lambda, d.warnings);
    WaveFunction g = dilate_rows(f.g_part, lambda, lambda * lambda, d.warnings);
    d.tv = TestVector::from_parts(std::move(h), std::move(g), f.locality);
    std::sort(d.warnings.begin(), d.warnings.end());
    d.warnings.erase(std::unique(d.warnings.begin(), d.warnings.end()), d.warnings.end());
    return d;
}

std::vector<std::vector<cplx>> radial_fourier_all(const PositionGrid& pg, const std::vector<std::vector<double>>& H,
                                                  const RadialGrid& g) {
    const int L = static_cast<int>(H.size()) - 1;
    if (L < 0) return {};
    for (const auto& h : H)
        if (h.size() != pg.size()) throw DomainError("radial_fourier: profile does not match position grid");
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < pg.size(); ++i)
        for (const auto& h : H)
            if (h[i] != 0.0) {
                active.push_back(i);
                break;
            }
    std::vector<std::vector<cplx>> out(L + 1, std::vector<cplx>(g.size(), cplx(0.0)));
    std::vector<double> jb(L + 1), acc(L + 1);
    for (std::size_t j = 0; j < g.size(); ++j) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double w = g.nodes()[j];
        for (std::size_t i : active) {
            sph_bessel_all(L, w * pg.r[i], jb.data());
            for (int l = 0; l <= L; ++l) acc[l] += pg.w[i] * H[l][i] * jb[l];
        }
        cplx phase = 4.0 * kPi;
        for (int l = 0; l <= L; ++l) {
            out[l][j] = phase * acc[l];
            phase *= cplx(0.0, -1.0);
        }
    }
    return out;
}

std::vector<cplx> radial_fourier(const PositionGrid& pg, const std::vector<double>& H, int ell, const RadialGrid& g,
                                 int ell_max) {
    if (ell < 0 || (ell_max >= 0 && ell > ell_max)) throw DomainError("radial_fourier: ell out of range");
    std::vector<std::vector<double>> Hs(ell + 1, std::vector<double>(pg.size(), 0.0));
    Hs[ell] = H;
    return radial_fourier_all(pg, Hs, g)[ell];
}

std::vector<cplx> inverse_radial_fourier(const RadialGrid& g, const std::vector<cplx>& Hhat, int ell,
                                         const std::vector<double>& radii) {
    if (ell < 0) throw DomainError("inverse_radial_fourier: negative ell");
    if (Hhat.size() != g.size()) throw DomainError("inverse_radial_fourier: size mismatch");
    cplx phase = 4.0 * kPi / std::pow(2.0 * kPi, 3);
    for (int l = 0; l < ell; ++l) phase *= cplx(0.0, 1.0);
    std::vector<cplx> out(radii.size(), cplx(0.0));
    std::vector<double> jb(ell + 1);
    for (std::size_t i = 0; i < radii.size(); ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            sph_bessel_all(ell, g.nodes()[j] * radii[i], jb.data());
            s += g.weights()[j] * jb[ell] * Hhat[j];
        }
        out[i] = phase * s;
    }
    return out;
}

}  // namespace lab
