#include "lab/errors.hpp"
#include "lab/jld.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

namespace lab {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread safe.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

double mass_of(double p0, double p1) { return std::sqrt(std::max(p0 * p0 - p1 * p1, 0.0)); }

void check_samples(const MomentumSamples& f) {
    if (f.n < 2 || f.n % 2 != 0) throw DomainError("jld: n must be even and at least 2");
    if (!(f.dp > 0.0)) throw DomainError("jld: dp must be positive");
    if (f.values.size() != static_cast<std::size_t>(f.n) * f.n) throw DomainError("jld: expected n*n samples");
    for (int k0 = 0; k0 < f.n; ++k0)
        for (int k1 = 0; k1 < f.n; ++k1) {
            const double p0 = f.p(k0), p1 = f.p(k1);
            if (p0 * p0 - p1 * p1 < 0.0 && f.at(k0, k1) != cplx{})
                throw DomainError("jld: f-check is nonzero outside the closed cone");
        }
}

// exp(2 pi i m/n) with the exponent reduced mod n first
cplx unit_root(long m, int n) {
    m %= n;
    if (m < 0) m += n;
    return std::polar(1.0, 2.0 * kPi * static_cast<double>(m) / n);
}

}  // namespace

double MomentumSamples::dx() const { return 2.0 * kPi / (n * dp); }

std::vector<double> sigma_grid(double ds, int half) {
    if (!(ds > 0.0) || half < 0) throw DomainError("sigma grid: ds > 0 and half >= 0 required");
    std::vector<double> s;
    for (int k = -half; k <= half; ++k) s.push_back(k * ds);
    return s;
}

std::pair<JldField, JldReport> jld_transform_1p1(const MomentumSamples& f, const std::vector<double>& sigma) {
    check_samples(f);
    const int n = f.n;
    const std::size_t ns = sigma.size();
    if (ns % 2 == 0) throw DomainError("jld: sigma grid must have an odd node count");
    const double ds = ns > 1 ? sigma[1] - sigma[0] : 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
        const double want = (static_cast<double>(k) - static_cast<double>(ns / 2)) * ds;
        if (std::abs(sigma[k] - want) > 1e-12 * std::max(1.0, std::abs(want)))
            throw DomainError("jld: sigma grid must be uniform and symmetric about 0");
    }
    if (ns > 1 && !(ds > 0.0)) throw DomainError("jld: sigma grid must be increasing");

    JldField out;
    out.n = n;
    out.dx = f.dx();
    out.sigma = sigma;
    out.F.assign(ns * n * n, cplx{});

    const std::size_t nn = static_cast<std::size_t>(n) * n;
    fftw_complex* buf = fftw_alloc_complex(nn);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    for (std::size_t s = 0; s < ns; ++s) {
        for (int k0 = 0; k0 < n; ++k0)
            for (int k1 = 0; k1 < n; ++k1) {
                const double sign = ((k0 + k1) % 2 == 0) ? 1.0 : -1.0;
                const cplx v = sign * f.at(k0, k1) * std::cos(sigma[s] * mass_of(f.p(k0), f.p(k1)));
                const std::size_t i = static_cast<std::size_t>(k0) * n + k1;
                buf[i][0] = v.real();
                buf[i][1] = v.imag();
            }
        fftw_execute(plan);
        for (int j0 = 0; j0 < n; ++j0)
            for (int j1 = 0; j1 < n; ++j1) {
                const double sign = ((j0 + j1) % 2 == 0) ? 1.0 : -1.0;
                const std::size_t i = static_cast<std::size_t>(j0) * n + j1;
                out.F[s * nn + i] = sign * cplx{buf[i][0], buf[i][1]};
            }
    }
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);

    JldReport rep;
    for (const auto& v : out.F) rep.max_abs = std::max(rep.max_abs, std::abs(v));

    // periodic differences in x, interior rows in sigma
    if (ns >= 3) {
        const double h = out.dx;
        double num = 0.0, den = 0.0;
        auto wrap = [n](int j) { return (j + n) % n; };
        for (std::size_t s = 1; s + 1 < ns; ++s)
            for (int j0 = 0; j0 < n; ++j0)
                for (int j1 = 0; j1 < n; ++j1) {
                    const cplx c = out.at(s, j0, j1);
                    const cplx d00 = (out.at(s, wrap(j0 + 1), j1) - 2.0 * c + out.at(s, wrap(j0 - 1), j1)) / (h * h);
                    const cplx d11 = (out.at(s, j0, wrap(j1 + 1)) - 2.0 * c + out.at(s, j0, wrap(j1 - 1))) / (h * h);
                    const cplx dss = (out.at(s + 1, j0, j1) - 2.0 * c + out.at(s - 1, j0, j1)) / (ds * ds);
                    num += std::norm(d00 - d11 - dss);
                    den += std::norm(c);
                }
        rep.wave_residual = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
    if (rep.max_abs > 0.0) {
        double sym = 0.0;
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t i = 0; i < nn; ++i)
                sym = std::max(sym, std::abs(out.F[s * nn + i] - out.F[(ns - 1 - s) * nn + i]));
        rep.symmetry_defect = sym / rep.max_abs;
        const auto direct = direct_position_samples(f);
        double diff = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            diff = std::max(diff, std::abs(out.F[(ns / 2) * nn + i] - direct[i]));
            ref = std::max(ref, std::abs(direct[i]));
        }
        rep.restriction_defect = ref > 0.0 ? diff / ref : 0.0;
    }
    return {std::move(out), rep};
}

cplx jld_field_at(const MomentumSamples& f, double x0, double x1, double sigma) {
    cplx sum{};
    for (int k0 = 0; k0 < f.n; ++k0)
        for (int k1 = 0; k1 < f.n; ++k1) {
            const cplx v = f.at(k0, k1);
            if (v == cplx{}) continue;
            const double p0 = f.p(k0), p1 = f.p(k1);
            sum += v * std::cos(sigma * mass_of(p0, p1)) * std::polar(1.0, p0 * x0 + p1 * x1);
        }
    return sum;
}

std::vector<cplx> direct_position_samples(const MomentumSamples& f) {
    check_samples(f);
    const int n = f.n, h = n / 2;
    std::vector<cplx> tmp(static_cast<std::size_t>(n) * n), out(tmp.size());
    for (int k0 = 0; k0 < n; ++k0)
        for (int j1 = 0; j1 < n; ++j1) {
            cplx s{};
            for (int k1 = 0; k1 < n; ++k1) s += f.at(k0, k1) * unit_root(static_cast<long>(k1 - h) * (j1 - h), n);
            tmp[static_cast<std::size_t>(k0) * n + j1] = s;
        }
    for (int j0 = 0; j0 < n; ++j0)
        for (int j1 = 0; j1 < n; ++j1) {
            cplx s{};
            for (int k0 = 0; k0 < n; ++k0) s += tmp[static_cast<std::size_t>(k0) * n + j1] * unit_root(static_cast<long>(k0 - h) * (j0 - h), n);
            out[static_cast<std::size_t>(j0) * n + j1] = s;
        }
    return out;
}

MomentumSamples momentum_bump(int n, double dp, double p0, double p1, double radius) {
    if (!(radius > 0.0)) throw DomainError("bump: radius must be positive");
    MomentumSamples f;
    f.n = n;
    f.dp = dp;
    f.values.assign(static_cast<std::size_t>(n) * n, cplx{});
    for (int k0 = 0; k0 < n; ++k0)
        for (int k1 = 0; k1 < n; ++k1) {
            const double q0 = f.p(k0), q1 = f.p(k1);
            if (q0 * q0 - q1 * q1 < 0.0) continue;
            const double r2 = ((q0 - p0) * (q0 - p0) + (q1 - p1) * (q1 - p1)) / (radius * radius);
            if (r2 < 1.0) f.at(k0, k1) = std::exp(1.0 - 1.0 / (1.0 - r2));
        }
    return f;
}

MomentumSamples double_cone_null_projection(const MomentumSamples& seed, double R, int oversample, double margin, double rcond) {
    check_samples(seed);
    if (!(R > 0.0) || oversample < 1 || !(margin >= 1.0)) throw DomainError("null projection: R > 0, oversample >= 1, margin >= 1");
    const int n = seed.n;
    std::vector<std::pair<int, int>> cols;
    for (int k0 = 0; k0 < n; ++k0)
        for (int k1 = 0; k1 < n; ++k1)
            if (seed.p(k0) * seed.p(k0) - seed.p(k1) * seed.p(k1) >= 0.0) cols.emplace_back(k0, k1);
    const double step = seed.dx() / oversample, rad = margin * R;
    std::vector<std::pair<double, double>> pts;
    const int m = static_cast<int>(std::ceil(rad / step));
    for (int a = -m; a <= m; ++a)
        for (int b = -m; b <= m; ++b) {
            const double x1 = a * step, s = b * step;
            if (x1 * x1 + s * s < rad * rad) pts.emplace_back(x1, s);
        }
    // rows: F and d_0 F at x0 = 0, scaled by the momentum range for balance
    const double pmax = n / 2 * seed.dp;
    Eigen::MatrixXcd A(2 * pts.size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const double p0 = seed.p(cols[c].first), p1 = seed.p(cols[c].second), mu = mass_of(p0, p1);
        for (std::size_t r = 0; r < pts.size(); ++r) {
            const cplx v = std::cos(pts[r].second * mu) * std::polar(1.0, p1 * pts[r].first);
            A(static_cast<Eigen::Index>(2 * r), static_cast<Eigen::Index>(c)) = v;
            A(static_cast<Eigen::Index>(2 * r + 1), static_cast<Eigen::Index>(c)) = cplx{0.0, p0 / pmax} * v;
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = rcond * (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::VectorXcd x(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) x(static_cast<Eigen::Index>(c)) = seed.at(cols[c].first, cols[c].second);
    const Eigen::MatrixXcd& V = svd.matrixV();
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        const bool null = j >= sv.size() || sv(j) <= cut;
        if (null) y += V.col(j) * V.col(j).dot(x);
    }
    MomentumSamples out = seed;
    std::fill(out.values.begin(), out.values.end(), cplx{});
    for (std::size_t c = 0; c < cols.size(); ++c) out.at(cols[c].first, cols[c].second) = y(static_cast<Eigen::Index>(c));
    return out;
}

ConeVanishing measure_cone_vanishing(const MomentumSamples& f, double R, int per_axis) {
    if (per_axis < 2) throw DomainError("cone vanishing: per_axis must be at least 2");
    ConeVanishing out;
    double scale = 0.0;
    for (const auto& v : direct_position_samples(f)) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return out;
    auto node = [&](int k) { return -R + 2.0 * R * (k + 0.5) / per_axis; };
    for (int a = 0; a < per_axis; ++a)
        for (int b = 0; b < per_axis; ++b) {
            const double x0 = node(a), x1 = node(b);
            if (std::abs(x0) + std::abs(x1) >= R) continue;
            out.on_double_cone = std::max(out.on_double_cone, std::abs(jld_field_at(f, x0, x1, 0.0)) / scale);
            ++out.samples;
            for (int c = 0; c < per_axis; ++c) {
                const double s = node(c);
                if (std::abs(x0) + std::hypot(x1, s) >= R) continue;
                out.on_lift = std::max(out.on_lift, std::abs(jld_field_at(f, x0, x1, s)) / scale);
                ++out.samples;
            }
        }
    return out;
}

}  // namespace lab
