#include "lab/localization.hpp"

#include "lab/errors.hpp"
#include "lab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lab {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;
const double kSqrt4Pi = std::sqrt(4.0 * kPi);

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& v) {
    const double n = std::sqrt(dot(v, v));
    if (!(n > 0)) throw DomainError("direction must be nonzero");
    return {v[0] / n, v[1] / n, v[2] / n};
}

double angle_between(const Vec3& a, const Vec3& b) { return std::acos(std::clamp(dot(a, b), -1.0, 1.0)); }

// Orthonormal e1, e2 completing n.
std::pair<Vec3, Vec3> frame(const Vec3& n) {
    const Vec3 t = std::abs(n[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 e1{t[1] * n[2] - t[2] * n[1], t[2] * n[0] - t[0] * n[2], t[0] * n[1] - t[1] * n[0]};
    e1 = normalized(e1);
    const Vec3 e2{n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]};
    return {e1, e2};
}

// Coefficients c_lm of a function zonal about n with axis-frame Y_l0
// coefficients z_l, for l <= L.
std::vector<cplx> rotate_zonal(const std::vector<double>& z, const Vec3& n, int L) {
    std::vector<cplx> y(static_cast<std::size_t>((L + 1) * (L + 1)));
    ylm_all(L, std::acos(std::clamp(n[2], -1.0, 1.0)), std::atan2(n[1], n[0]), y.data());
    std::vector<cplx> c(y.size(), 0.0);
    for (int l = 0; l <= L && l < static_cast<int>(z.size()); ++l) {
        const double f = z[l] * std::sqrt(4.0 * kPi / (2 * l + 1));
        for (int m = -l; m <= l; ++m) c[ModeSet::index(l, m)] = f * std::conj(y[ModeSet::index(l, m)]);
    }
    return c;
}

// Axis-frame Y_l0 coefficients, l <= L, of a function of the polar angle
// supported on [0, amax].
template <class F>
std::vector<double> zonal_coefficients(F&& f, double amax, int L, int nodes) {
    std::vector<double> x, w;
    gauss_legendre(nodes, 0.0, amax, x, w);
    std::vector<double> z(L + 1, 0.0), leg((L + 1) * (L + 2) / 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = f(x[i]);
        if (v == 0.0) continue;
        legendre_normalized(L, std::cos(x[i]), leg.data());
        for (int l = 0; l <= L; ++l) z[l] += 2.0 * kPi * w[i] * std::sin(x[i]) * v * leg[l * (l + 1) / 2];
    }
    return z;
}

double laplacian_tail(const std::vector<double>& z, int L, bool even_only) {
    double all = 0, tail = 0;
    for (int l = 1; l < static_cast<int>(z.size()); ++l) {
        if (even_only && l % 2) continue;
        const double t = l * (l + 1.0) * z[l];
        all += t * t;
        if (l > L) tail += t * t;
    }
    return all > 0 ? std::sqrt(tail / all) : 0.0;
}

// int_0^inf j_l(x)/x dx
double bessel_over_x_integral(int l) {
    return std::sqrt(kPi) / 4.0 * std::exp(std::lgamma(0.5 * l) - std::lgamma(0.5 * (l + 3)));
}

cplx minus_i_pow(int l) {
    static const cplx p[4] = {1.0, cplx(0, -1), -1.0, cplx(0, 1)};
    return p[l % 4];
}

}  // namespace

double ConeProfile::bump_value(double angle) const {
    const double ts = bump.support_fraction * opening;
    const double t = angle / ts;
    if (t >= 1.0) return 0.0;
    return bump.amplitude * std::exp(-1.0 / (1.0 - t * t));
}

double ConeProfile::value(const Vec3& n) const {
    const Vec3 u = normalized(n);
    auto one = [&](const Vec3& v) { return 1.0 - a * bump_value(angle_between(v, axis)); };
    if (opening == 0.0) return chi.empty() ? 1.0 : chi[0].real() / kSqrt4Pi;
    if (!even_only) return one(u);
    return 0.5 * (one(u) + one({-u[0], -u[1], -u[2]}));
}

bool ConeProfile::inside(const Vec3& n) const { return angle_between(normalized(n), axis) < opening; }

ConeProfile ConeProfile::even_part() const {
    ConeProfile e = *this;
    e.even_only = true;
    for (int l = 1; l <= ell_max; l += 2)
        for (int m = -l; m <= l; ++m) e.chi[ModeSet::index(l, m)] = 0.0;
    for (std::size_t l = 1; l < e.zonal.size(); l += 2) e.zonal[l] = 0.0;
    e.laplacian_tail = lab::laplacian_tail(zonal, ell_max, true);
    return e;
}

ConeProfile ConeProfile::constant_one(int ell_max) {
    ConeProfile c;
    c.ell_max = ell_max;
    c.chi.assign(static_cast<std::size_t>((ell_max + 1) * (ell_max + 1)), 0.0);
    c.chi[0] = kSqrt4Pi;
    c.y00_overlap = kSqrt4Pi;
    return c;
}

json ConeProfile::to_json() const {
    return json{{"axis", axis},
                {"opening", opening},
                {"support_fraction", bump.support_fraction},
                {"bump_amplitude", bump.amplitude},
                {"a", a},
                {"ell_max", ell_max},
                {"even_only", even_only},
                {"y00_overlap", y00_overlap},
                {"outside_defect", outside_defect},
                {"laplacian_tail", laplacian_tail},
                {"coefficient_decay", coefficient_decay}};
}

ConeProfile build_chi(const Vec3& axis, double opening, const BumpParams& bump, int ell_max) {
    if (!(opening > 0 && opening < kPi / 2)) throw DomainError("build_chi: opening must lie in (0, pi/2)");
    if (!(bump.support_fraction > 0)) throw DomainError("build_chi: bump support must be positive");
    if (!(bump.support_fraction < 1)) throw DomainError("build_chi: bump support reaches the cone boundary");
    if (bump.amplitude == 0.0) throw DomainError("build_chi: zero bump has no mean to normalize");
    if (ell_max < 0) throw DomainError("build_chi: negative ell_max");
    ConeProfile c;
    c.axis = normalized(axis);
    c.opening = opening;
    c.bump = bump;
    c.ell_max = ell_max;
    const int Lbig = std::max(4 * ell_max, 32);
    const double ts = bump.support_fraction * opening;
    const auto z = zonal_coefficients([&](double t) { return c.bump_value(t); }, ts, Lbig, 64 + 4 * Lbig);
    c.a = kSqrt4Pi / z[0];
    c.zonal.resize(z.size());
    for (std::size_t l = 0; l < z.size(); ++l) c.zonal[l] = c.a * z[l];
    c.chi = rotate_zonal(c.zonal, c.axis, ell_max);
    for (auto& v : c.chi) v = -v;
    c.chi[0] += kSqrt4Pi;
    c.y00_overlap = c.chi[0].real();

    const AngularQuadrature aq = AngularQuadrature::for_degree(std::max(2 * ell_max, 16));
    for (std::size_t q = 0; q < aq.size(); ++q) {
        const Vec3 n{aq.x[q], aq.y[q], aq.z[q]};
        if (!c.inside(n)) c.outside_defect = std::max(c.outside_defect, std::abs(c.value(n) - 1.0));
    }
    c.laplacian_tail = laplacian_tail(c.zonal, ell_max, false);
    double zmax = 0;
    for (int l = 1; l < static_cast<int>(c.zonal.size()); ++l) zmax = std::max(zmax, std::abs(c.zonal[l]));
    c.coefficient_decay = zmax > 0 ? std::abs(c.zonal[ell_max]) / zmax : 0.0;
    return c;
}

RadialChargeProfile RadialChargeProfile::make(double q, double r1, double r2, std::size_t samples) {
    RadialChargeProfile p;
    p.spec = ProfileSpec::shell(q, r1, r2);
    for (std::size_t i = 0; i < samples; ++i) {
        const double r = 1.5 * r2 * (i + 0.5) / samples;
        p.radii.push_back(r);
        p.phi_samples.push_back(p.phi(r));
        p.rho_samples.push_back(p.rho(r));
    }
    return p;
}

Charge RadialChargeProfile::charge(const GridPtr& grid, const ModesPtr& modes) const {
    return Charge::from_profiles(ProfileSpec::zero(), spec, grid, modes);
}

UcSplit build_u_c(const RadialChargeProfile& profile, const ConeProfile& cone, const GridPtr& grid, const ModesPtr& modes,
                  double max_tail) {
    const int L = modes->ell_max();
    if (cone.ell_max < L) throw DomainError("build_u_c: cone profile has fewer modes than the mode set");
    if (cone.laplacian_tail > max_tail)
        throw NumericalError("build_u_c: L^2 chi tail above l = " + std::to_string(L) + " is " +
                             std::to_string(cone.laplacian_tail) + ", above the tolerance " + std::to_string(max_tail));
    const double q = profile.q(), r2 = profile.r2();

    // Inside r2: rho + l(l+1) Phi/r^2, transformed numerically.
    const PositionGrid pg = PositionGrid::panels(r2);
    std::vector<std::vector<double>> H(L + 1, std::vector<double>(pg.size()));
    for (std::size_t i = 0; i < pg.size(); ++i) {
        const double r = pg.r[i];
        const double rho = profile.rho(r), phi = profile.phi(r) / (r * r);
        for (int l = 0; l <= L; ++l) H[l][i] = rho + l * (l + 1.0) * phi;
    }
    const auto inner = radial_fourier_all(pg, H, *grid);

    // Outside r2: l(l+1) q/(4 pi r^3), whose transform is
    // (-i)^l l(l+1) q (I_l - int_0^{w r2} j_l(x)/x dx).
    const auto& w = grid->nodes();
    std::vector<std::vector<double>> J(w.size(), std::vector<double>(L + 1, 0.0));
    {
        std::vector<double> gx, gw, jb(L + 1), acc(L + 1, 0.0);
        gauss_legendre(8, 0.0, 1.0, gx, gw);
        double x0 = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double x1 = w[j] * r2;
            const int panels = std::max(1, static_cast<int>(std::ceil((x1 - x0) / 0.5)));
            const double hp = (x1 - x0) / panels;
            for (int p = 0; p < panels; ++p)
                for (std::size_t k = 0; k < gx.size(); ++k) {
                    const double x = x0 + (p + gx[k]) * hp;
                    sph_bessel_all(L, x, jb.data());
                    for (int l = 1; l <= L; ++l) acc[l] += hp * gw[k] * jb[l] / x;
                }
            J[j] = acc;
            x0 = x1;
        }
    }

    UcSplit out;
    out.laplacian_tail = cone.laplacian_tail;
    out.u_c = WaveFunction(grid, modes);
    out.eta.assign(modes->size(), 0.0);
    for (int l = 0; l <= L; ++l) {
        const double Il = l > 0 ? bessel_over_x_integral(l) : 0.0;
        for (int m = -l; m <= l; ++m) {
            const std::size_t k = ModeSet::index(l, m);
            const cplx c = cone.chi[k];
            out.eta[k] = c * minus_i_pow(l) * (l * (l + 1.0)) * q * Il;
            cplx* row = out.u_c.row(k);
            for (std::size_t j = 0; j < w.size(); ++j)
                row[j] = c * (inner[l][j] + minus_i_pow(l) * (l * (l + 1.0)) * q * (Il - J[j][l]));
        }
    }
    // Only l = 0 survives at k = 0; even fit through the two lowest nodes.
    const cplx r0 = out.u_c.at(0, 0) - out.eta[0], r1 = out.u_c.at(0, 1) - out.eta[0];
    const double x0 = w[0] * w[0], x1 = w[1] * w[1];
    out.R_at_0 = (r0 * x1 - r1 * x0) / (x1 - x0) / kSqrt4Pi;
    return out;
}

WaveFunction v_n(const WaveFunction& u_c, double eps) {
    WaveFunction v = multiply_radial(shell_project(u_c, eps), [](double x) { return std::pow(x, -1.5); });
    v *= cplx(0.0, 1.0);
    return v;
}

TestVector ProbeSpec::test_vector(const GridPtr& grid, const ModesPtr& modes) const {
    const int L = modes->ell_max();
    if (power < 0) throw DomainError("probe: negative power");
    if (power > L) throw DomainError("probe: power above the mode cutoff");
    const Vec3 n = normalized(direction);
    // ((1 + t)/2)^p as a polynomial in t = cos(angle), exact with p + L + 2 nodes
    std::vector<double> t, tw;
    gauss_legendre(power + L + 2, -1.0, 1.0, t, tw);
    std::vector<double> z(L + 1, 0.0), leg((L + 1) * (L + 2) / 2);
    for (std::size_t i = 0; i < t.size(); ++i) {
        legendre_normalized(L, t[i], leg.data());
        const double v = std::pow(0.5 * (1.0 + t[i]), power);
        for (int l = 0; l <= L; ++l) z[l] += 2.0 * kPi * tw[i] * v * leg[l * (l + 1) / 2];
    }
    for (int l = power + 1; l <= L; ++l) z[l] = 0.0;
    const auto A = rotate_zonal(z, n, L);

    const PositionGrid pg = PositionGrid::panels(r0 + 7.0 * width);
    std::vector<double> radial(pg.size());
    for (std::size_t i = 0; i < pg.size(); ++i) {
        const double d = (pg.r[i] - r0) / width;
        radial[i] = amplitude * std::exp(-d * d);
    }
    const auto R = radial_fourier_all(pg, std::vector<std::vector<double>>(power + 1, radial), *grid);
    WaveFunction part(grid, modes);
    for (int l = 0; l <= power; ++l)
        for (int m = -l; m <= l; ++m) {
            const std::size_t k = ModeSet::index(l, m);
            if (A[k] == 0.0) continue;
            for (std::size_t j = 0; j < grid->size(); ++j) part.at(k, j) = A[k] * R[l][j];
        }
    WaveFunction zero(grid, modes);
    return g_part ? TestVector::from_parts(zero, part, name) : TestVector::from_parts(part, zero, name);
}

double ProbeSpec::mass_inside(const ConeProfile& cone, bool opposite) const {
    const Vec3 n = normalized(direction);
    auto cap = [&](const Vec3& axis) {
        const auto [e1, e2] = frame(axis);
        std::vector<double> c, cw;
        gauss_legendre(96, std::cos(cone.opening), 1.0, c, cw);
        const int nb = 192;
        double s = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double st = std::sqrt(std::max(0.0, 1.0 - c[i] * c[i]));
            for (int k = 0; k < nb; ++k) {
                const double b = 2.0 * kPi * k / nb;
                const Vec3 x{c[i] * axis[0] + st * (std::cos(b) * e1[0] + std::sin(b) * e2[0]),
                             c[i] * axis[1] + st * (std::cos(b) * e1[1] + std::sin(b) * e2[1]),
                             c[i] * axis[2] + st * (std::cos(b) * e1[2] + std::sin(b) * e2[2])};
                s += cw[i] * (2.0 * kPi / nb) * std::pow(0.5 * (1.0 + dot(x, n)), power);
            }
        }
        return s;
    };
    double inside = cap(cone.axis);
    if (opposite) inside += cap({-cone.axis[0], -cone.axis[1], -cone.axis[2]});
    return inside / (4.0 * kPi / (power + 1));
}

json ProbeSpec::to_json() const {
    return json{{"name", name},   {"r0", r0},         {"width", width},          {"direction", direction},
                {"power", power}, {"amplitude", amplitude}, {"part", g_part ? "g" : "h"}};
}

ProbeSpec ProbeSpec::from_json(const json& j) {
    try {
        ProbeSpec p;
        p.name = j.value("name", p.name);
        p.r0 = j.value("r0", p.r0);
        p.width = j.value("width", p.width);
        if (j.contains("direction")) p.direction = normalized(j.at("direction").get<Vec3>());
        p.power = j.value("power", p.power);
        p.amplitude = j.value("amplitude", p.amplitude);
        const std::string part = j.value("part", std::string("h"));
        if (part != "h" && part != "g") throw ConfigError("probe: part must be h or g");
        p.g_part = part == "g";
        if (!(p.width > 0) || !(p.r0 >= 0) || p.power < 0) throw ConfigError("probe: invalid radius, width or power");
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("probe: ") + e.what());
    }
}

ErrorTable approx_linear_form(const WaveFunction& u_c, const std::vector<double>& eps, const TestVector& f,
                              const Charge& gamma) {
    ErrorTable t;
    t.l_value = linear_form(gamma, f);
    for (double e : eps) {
        ErrorRow r;
        r.eps = e;
        r.pairing = -inner_product(v_n(u_c, e), f.wf).imag();
        r.error = std::abs(t.l_value - r.pairing);
        t.rows.push_back(r);
    }
    return t;
}

IntertwinerResult build_intertwiner(const KprOperator& op, const WaveFunction& u_c, int n0, int n1, TSelect which,
                                    double cauchy_ratio) {
    if (which != TSelect::T && which != TSelect::T_hat) throw DomainError("build_intertwiner: use T or T_hat");
    if (n0 < 1 || n1 <= n0 || n1 > op.shells() + 1) throw DomainError("build_intertwiner: invalid shell range");
    IntertwinerResult res;
    WaveFunction first, prev, v;
    for (int n = n0; n <= n1; ++n) {
        v = v_n(u_c, op.schedule().eps(n));
        const Applied a = op.apply(v, which);
        res.truncated = res.truncated || a.truncated;
        if (n == n0) {
            first = a.wf;
        } else {
            TraceRow row;
            row.n = n;
            row.increment = std::sqrt(norm2(a.wf - prev));
            row.distance = std::sqrt(norm2(a.wf - first));
            res.trace.push_back(row);
        }
        prev = a.wf;
    }
    const double vn = std::sqrt(norm2(v));
    res.parity_defect = vn > 0 ? std::sqrt(norm2(apply_gamma(v) + v)) / vn : 0.0;
    if (which == TSelect::T) res.branch_defect = std::sqrt(norm2(prev - op.apply(v, TSelect::T1).wf));

    const double inc0 = res.trace.front().increment, inc1 = res.trace.back().increment;
    res.ratio = inc0 > 0 ? inc1 / inc0 : 0.0;
    bool rising = res.trace.size() >= 2;
    const std::size_t start = res.trace.size() - std::max<std::size_t>(2, res.trace.size() / 4);
    for (std::size_t k = start + 1; k < res.trace.size(); ++k)
        if (res.trace[k].increment < res.trace[k - 1].increment * (1.0 - 1e-9)) rising = false;
    if (inc0 == 0.0 || res.ratio < cauchy_ratio) {
        res.verdict = "Cauchy";
        res.v_T = prev;
    } else if (rising) {
        res.verdict = "divergent";
    } else {
        res.verdict = "inconclusive";
    }
    return res;
}

std::vector<ResidualRow> verify_intertwining(const KprOperator& op, const WaveFunction& v_T, const Charge& gamma,
                                             const std::vector<TestVector>& probes, TSelect which, double tol) {
    return parallel_map(probes.size(), [&](std::size_t i) {
        const TestVector& f = probes[i];
        ResidualRow r;
        r.name = f.locality.value_or("probe " + std::to_string(i));
        r.l_value = linear_form(gamma, f);
        r.pairing = -inner_product(v_T, op.apply(f.wf, which).wf).imag();
        r.residual = std::abs(r.l_value - r.pairing);
        r.localized = r.residual <= tol;
        return r;
    });
}

VerdictReport opposite_cone_experiment(const KprSchedule& base, const RadialChargeProfile& profile, const ConeProfile& cone,
                                       const GridPtr& grid, const ModesPtr& modes, int n0, int n1, double max_tail) {
    struct Variant {
        const char* name;
        bool even;
        EllFilter filter;
        TSelect which;
        const char* expected;
    };
    const Variant variants[] = {
        {"gamma_hat_with_full_chi", false, EllFilter::positive, TSelect::T_hat, "divergent"},
        {"gamma_hat_with_even_chi", true, EllFilter::positive, TSelect::T_hat, "Cauchy"},
        {"gamma_with_odd_ell_schedule", true, EllFilter::odd_only, TSelect::T, "Cauchy"},
    };
    const ConeProfile even = cone.even_part();
    VerdictReport rep;
    for (const auto& v : variants) {
        KprSchedule s = base;
        s.filter = v.filter;
        const KprOperator op(s, grid, modes);
        const UcSplit split = build_u_c(profile, v.even ? even : cone, grid, modes, max_tail);
        const IntertwinerResult r = build_intertwiner(op, split.u_c, n0, n1, v.which);
        VariantVerdict row;
        row.variant = v.name;
        row.chi = v.even ? "even" : "full";
        row.filter = v.filter == EllFilter::odd_only ? "odd" : "positive";
        row.conjugation = v.which == TSelect::T ? "Gamma" : "Gamma_hat";
        row.expected = v.expected;
        row.verdict = r.verdict;
        row.ratio = r.ratio;
        rep.rows.push_back(row);
    }
    return rep;
}

ObstructionReport vacuum_obstruction(const Charge& gamma, const TestVector& f, const std::vector<double>& lambdas,
                                     const KprOperator* op, double tol) {
    ObstructionReport rep;
    rep.rows = parallel_map(lambdas.size(), [&](std::size_t i) {
        ObstructionRow row;
        row.lambda = lambdas[i];
        const DilatedTest d = dilate(f, lambdas[i]);
        row.norm = std::sqrt(norm2(d.tv.wf));
        row.l_value = linear_form(gamma, d.tv);
        if (op) {
            const WaveFunction t = op->apply(d.tv.wf, TSelect::T).wf;
            double e = 0;
            for (std::size_t k = 0; k < t.coeffs().size(); ++k) e = std::max(e, std::abs(t.coeffs()[k] - d.tv.wf.coeffs()[k]));
            row.t_defect = e;
        }
        return row;
    });
    rep.target = gamma.q * kappa(f);
    const double last = rep.rows.empty() ? 0.0 : rep.rows.back().l_value;
    if (std::abs(rep.target) <= 1e-12) {
        rep.deviation = std::abs(last);
        const double scale = rep.rows.empty() ? 1.0 : std::max(1e-300, std::abs(rep.rows.front().l_value));
        rep.verdict = std::abs(last) <= tol * std::max(1.0, scale) ? "NOT-OBSTRUCTED" : "INCONCLUSIVE";
        return rep;
    }
    rep.deviation = std::abs(last - rep.target) / std::abs(rep.target);
    if (rep.deviation > tol) {
        rep.verdict = "INCONCLUSIVE";
        return rep;
    }
    rep.verdict = "OBSTRUCTED";
    if (op) {
        bool exact = true;
        for (const auto& r : rep.rows) exact = exact && r.t_defect == 0.0;
        if (exact) rep.verdict = "SECTOR-DISTINGUISHED";
    }
    return rep;
}

}  // namespace lab
