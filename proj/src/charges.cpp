#include "lab/charges.hpp"

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

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// S(x) = 1/(1 + e^g), g = 1/x - 1/(1-x): smooth, 0 at x = 0 and 1 at x = 1.
double smooth_step(double x) {
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double t = 1.0 / (1.0 - x) - 1.0 / x;
    return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

double smooth_step_dd(double x) {
    if (x <= 0 || x >= 1) return 0.0;
    const double t = 1.0 / (1.0 - x) - 1.0 / x;
    const double e = std::exp(-std::abs(t));
    const double s1 = e / ((1.0 + e) * (1.0 + e));  // sigma (1 - sigma)
    const double sig = t >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    const double a = 1.0 - x;
    const double t1 = 1.0 / (a * a) + 1.0 / (x * x);
    const double t2 = 2.0 / (a * a * a) - 2.0 / (x * x * x);
    return s1 * ((1.0 - 2.0 * sig) * t1 * t1 + t2);
}

void require_compatible(const WaveFunction& a, const WaveFunction& b, const char* who) {
    if (!a.compatible(b)) throw BasisError(std::string(who) + ": incompatible grid or mode set");
}

// int_0^inf of a density in w whose grid samples are d_j (w^2 already
// divided out), with the even low-frequency tail.
double integrate_density(const RadialGrid& g, const std::vector<double>& d) {
    const auto& w = g.nodes();
    const auto& wt = g.weights();
    double s = 0;
    for (std::size_t j = 0; j < w.size(); ++j) s += wt[j] / (w[j] * w[j]) * d[j];
    return s + g.low_tail_even(d[0], d[1]);
}

}  // namespace

ProfileSpec ProfileSpec::gaussian(double amplitude, double width, Vec3 center, int ell) {
    ProfileSpec p;
    p.family = "gaussian";
    p.amplitude = amplitude;
    p.width = width;
    p.center = center;
    p.ell = ell;
    return p;
}

ProfileSpec ProfileSpec::shell(double q, double r1, double r2) {
    if (!(r1 > 0 && r2 > r1)) throw DomainError("shell profile: need 0 < r1 < r2");
    ProfileSpec p;
    p.family = "shell";
    p.q = q;
    p.r1 = r1;
    p.r2 = r2;
    return p;
}

ProfileSpec ProfileSpec::difference(double amplitude, double width, double width2) {
    ProfileSpec p;
    p.family = "difference";
    p.amplitude = amplitude;
    p.width = width;
    p.width2 = width2;
    return p;
}

double ProfileSpec::radial(double r) const {
    if (family == "zero") return 0.0;
    if (family == "gaussian") return amplitude * std::exp(-r * r / (width * width));
    if (family == "difference") {
        const double a2 = amplitude * (width * width) / (width2 * width2);
        return amplitude * std::exp(-r * r / (width * width)) - a2 * std::exp(-r * r / (width2 * width2));
    }
    if (family == "shell") {
        if (r <= r1 || r >= r2) return 0.0;
        const double d = r2 - r1;
        return -q / (4.0 * kPi * r * d * d) * smooth_step_dd((r - r1) / d);
    }
    throw ConfigError("profile: unknown family '" + family + "'");
}

double ProfileSpec::value(const Vec3& x) const {
    const Vec3 y{x[0] - center[0], x[1] - center[1], x[2] - center[2]};
    const double r = norm3(y);
    const double p = radial(r);
    if (ell == 0 || p == 0.0) return p;
    const double ct = r > 0 ? y[2] / r : 1.0;
    std::vector<double> leg((ell + 1) * (ell + 2) / 2);
    legendre_normalized(ell, ct, leg.data());
    return p * kSqrt4Pi * leg[ell * (ell + 1) / 2];
}

double ProfileSpec::extent() const {
    if (family == "zero") return 0.0;
    if (family == "shell") return r2;
    if (family == "difference") return 6.5 * std::max(width, width2);
    return 6.5 * width;
}

double ProfileSpec::integral() const {
    if (ell != 0 || family == "zero") return 0.0;
    if (family == "gaussian") return amplitude * std::pow(kPi * width * width, 1.5);
    if (family == "shell") return q;
    if (family == "difference") return amplitude * std::pow(kPi, 1.5) * width * width * (width - width2);
    throw ConfigError("profile: unknown family '" + family + "'");
}

double ProfileSpec::shell_potential(double r) const {
    if (family != "shell") throw DomainError("shell_potential: not a shell profile");
    return q / (4.0 * kPi * r) * smooth_step((r - r1) / (r2 - r1));
}

json ProfileSpec::to_json() const {
    json j{{"family", family}};
    if (family == "gaussian") {
        j["amplitude"] = amplitude;
        j["width"] = width;
        if (!centered()) j["center"] = center;
    } else if (family == "shell") {
        j["q"] = q;
        j["r1"] = r1;
        j["r2"] = r2;
    } else if (family == "difference") {
        j["amplitude"] = amplitude;
        j["width"] = width;
        j["width2"] = width2;
    }
    if (ell != 0) j["ell"] = ell;
    return j;
}

ProfileSpec ProfileSpec::from_json(const json& j) {
    try {
        ProfileSpec p;
        p.family = j.at("family").get<std::string>();
        if (p.family == "gaussian") {
            p.amplitude = j.value("amplitude", 1.0);
            p.width = j.at("width").get<double>();
            if (j.contains("center")) p.center = j.at("center").get<Vec3>();
        } else if (p.family == "shell") {
            p = shell(j.at("q").get<double>(), j.at("r1").get<double>(), j.at("r2").get<double>());
        } else if (p.family == "difference") {
            p.amplitude = j.value("amplitude", 1.0);
            p.width = j.at("width").get<double>();
            p.width2 = j.at("width2").get<double>();
        } else if (p.family != "zero") {
            throw ConfigError("profile: unknown family '" + p.family + "'");
        }
        p.ell = j.value("ell", 0);
        if (p.width <= 0 || p.width2 <= 0) throw ConfigError("profile: widths must be positive");
        if (p.ell < 0) throw ConfigError("profile: negative ell");
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("profile: ") + e.what());
    }
}

WaveFunction profile_transform(const ProfileSpec& p, const GridPtr& grid, const ModesPtr& modes) {
    WaveFunction out(grid, modes);
    if (p.is_zero()) return out;
    if (p.ell > modes->ell_max()) throw DomainError("profile_transform: ell above the mode cutoff");
    const auto& w = grid->nodes();
    if (!p.centered()) {
        if (p.family != "gaussian" || p.ell != 0) throw DomainError("profile_transform: only Gaussians may be shifted");
        // A (pi s^2)^{3/2} e^{-w^2 s^2/4} 4 pi (-i)^l j_l(w |c|) conj(Y_lm(c/|c|))
        const int L = modes->ell_max();
        const double c = norm3(p.center);
        const double th = std::acos(std::clamp(p.center[2] / c, -1.0, 1.0));
        const double ph = std::atan2(p.center[1], p.center[0]);
        std::vector<cplx> y(modes->size());
        ylm_all(L, th, ph, y.data());
        std::vector<double> jb(L + 1);
        const double s = p.width;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double g = p.amplitude * std::pow(kPi * s * s, 1.5) * std::exp(-w[j] * w[j] * s * s / 4.0) * 4.0 * kPi;
            sph_bessel_all(L, w[j] * c, jb.data());
            cplx phase = 1.0;
            for (int l = 0; l <= L; ++l) {
                for (int m = -l; m <= l; ++m) {
                    const std::size_t k = ModeSet::index(l, m);
                    out.at(k, j) = g * phase * jb[l] * std::conj(y[k]);
                }
                phase *= cplx(0.0, -1.0);
            }
        }
        return out;
    }
    const PositionGrid pg = PositionGrid::panels(p.extent());
    std::vector<double> H(pg.size());
    for (std::size_t i = 0; i < pg.size(); ++i) H[i] = kSqrt4Pi * p.radial(pg.r[i]);
    const auto row = radial_fourier(pg, H, p.ell, *grid, modes->ell_max());
    std::copy(row.begin(), row.end(), out.row(ModeSet::index(p.ell, 0)));
    return out;
}

TestVector make_test_vector(const ProfileSpec& h, const ProfileSpec& g, const GridPtr& grid, const ModesPtr& modes,
                            std::optional<std::string> locality) {
    return TestVector::from_parts(profile_transform(h, grid, modes), profile_transform(g, grid, modes), std::move(locality));
}

Charge Charge::from_profiles(const ProfileSpec& sigma, const ProfileSpec& rho, const GridPtr& grid, const ModesPtr& modes) {
    Charge c;
    c.sigma_hat = profile_transform(sigma, grid, modes);
    c.rho_hat = profile_transform(rho, grid, modes);
    c.q = rho.integral();
    c.sigma = sigma;
    c.rho = rho;
    return c;
}

Charge Charge::zero(const GridPtr& grid, const ModesPtr& modes) {
    return from_profiles(ProfileSpec::zero(), ProfileSpec::zero(), grid, modes);
}

WaveFunction Charge::momentum() const {
    WaveFunction a = multiply_radial(sigma_hat, [](double w) { return 1.0 / std::sqrt(w); });
    const WaveFunction b = multiply_radial(rho_hat, [](double w) { return std::pow(w, -1.5); });
    simd::axpy(cplx(0.0, 1.0), b.coeffs().data(), a.coeffs().data(), b.coeffs().size());
    return a;
}

json Charge::to_json() const {
    if (!sigma || !rho) throw ConfigError("charge: serialization needs the generating profiles");
    return json{{"sigma", sigma->to_json()}, {"rho", rho->to_json()}, {"q", q}};
}

Charge Charge::from_json(const json& j, const GridPtr& grid, const ModesPtr& modes) {
    try {
        Charge c = from_profiles(ProfileSpec::from_json(j.at("sigma")), ProfileSpec::from_json(j.at("rho")), grid, modes);
        if (j.contains("q")) {
            const double stored = j.at("q").get<double>();
            if (std::abs(stored - c.q) > 1e-4 * std::max(1.0, std::abs(c.q)))
                throw ConfigError("charge: stored q does not match the integral of rho");
            c.q = stored;
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("charge: ") + e.what());
    }
}

Charge& Charge::operator+=(const Charge& o) {
    sigma_hat += o.sigma_hat;
    rho_hat += o.rho_hat;
    q += o.q;
    sigma.reset();
    rho.reset();
    return *this;
}

Charge operator+(Charge a, const Charge& b) { return a += b; }

Charge scaled(const Charge& c, double s) {
    Charge out = c;
    out.sigma_hat *= s;
    out.rho_hat *= s;
    out.q *= s;
    if (out.sigma && out.sigma->family != "shell") out.sigma->amplitude *= s;
    else if (out.sigma) out.sigma->q *= s;
    if (out.rho && out.rho->family != "shell") out.rho->amplitude *= s;
    else if (out.rho) out.rho->q *= s;
    return out;
}

LinearFormParts linear_form_parts(const Charge& gamma, const TestVector& f) {
    require_compatible(gamma.rho_hat, f.h_part, "linear_form");
    const RadialGrid& g = f.h_part.grid();
    const auto& w = g.nodes();
    const std::size_t n = w.size();
    std::vector<double> dr(n, 0.0), ds(n, 0.0);
    for (std::size_t m = 0; m < f.h_part.n_modes(); ++m) {
        const cplx* rh = gamma.rho_hat.row(m);
        const cplx* sh = gamma.sigma_hat.row(m);
        const cplx* hh = f.h_part.row(m);
        const cplx* gh = f.g_part.row(m);
        for (std::size_t j = 0; j < n; ++j) {
            // -Im conj(gamma) f with gamma = w^-1/2 s + i w^-3/2 r, f = w^-1/2 h + i w^1/2 g,
            // per unit of w^2 dw, scaled by w^2 so that the rho term stays finite at 0
            const double wj = w[j];
            dr[j] += (std::conj(rh[j]) * hh[j]).real() - wj * (std::conj(rh[j]) * gh[j]).imag();
            ds[j] += -wj * wj * (std::conj(sh[j]) * gh[j]).real() - wj * (std::conj(sh[j]) * hh[j]).imag();
        }
    }
    LinearFormParts p;
    p.rho_term = integrate_density(g, dr);
    p.sigma_term = integrate_density(g, ds);
    return p;
}

double linear_form(const Charge& gamma, const TestVector& f) { return linear_form_parts(gamma, f).total(); }

double charge_of(const Charge& gamma, double rel_tol) {
    const RadialGrid& g = gamma.rho_hat.grid();
    const auto& w = g.nodes();
    const cplx* r = gamma.rho_hat.row(0);
    const double x0 = w[0] * w[0], x1 = w[1] * w[1], x2 = w[2] * w[2];
    const double y0 = r[0].real(), y1 = r[1].real(), y2 = r[2].real();
    const double two = (y0 * x1 - y1 * x0) / (x1 - x0);
    const double three = y0 * x1 * x2 / ((x0 - x1) * (x0 - x2)) + y1 * x0 * x2 / ((x1 - x0) * (x1 - x2)) +
                         y2 * x0 * x1 / ((x2 - x0) * (x2 - x1));
    double peak = 0;
    for (std::size_t j = 0; j < w.size(); ++j) peak = std::max(peak, std::abs(r[j]));
    if (std::abs(three - two) > rel_tol * std::max(std::abs(three), 1e-10 * peak))
        throw NumericalError("charge_of: low-frequency extrapolation unstable (two-node " + std::to_string(two / kSqrt4Pi) +
                             ", three-node " + std::to_string(three / kSqrt4Pi) + ", lowest node " +
                             std::to_string(w[0]) + ")");
    return three / kSqrt4Pi;
}

Charge time_translate(const Charge& gamma, double t) {
    Charge out;
    out.sigma_hat = gamma.sigma_hat.zeros_like();
    out.rho_hat = gamma.rho_hat.zeros_like();
    const auto& w = gamma.rho_hat.grid().nodes();
    for (std::size_t m = 0; m < out.rho_hat.n_modes(); ++m)
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double c = std::cos(w[j] * t), s = std::sin(w[j] * t);
            const cplx sg = gamma.sigma_hat.at(m, j), rh = gamma.rho_hat.at(m, j);
            out.sigma_hat.at(m, j) = c * sg - s * rh / w[j];
            out.rho_hat.at(m, j) = w[j] * s * sg + c * rh;
        }
    out.q = gamma.q;
    return out;
}

std::vector<double> partial_norms(const Charge& gamma, const std::vector<double>& eps) {
    const WaveFunction v = gamma.momentum();
    std::vector<double> out;
    for (double e : eps) out.push_back(norm2(shell_project(v, e)));
    return out;
}

ChargeSamples ChargeSamples::from_profile(const ProfileSpec& p, double L, int n) {
    if (!(L > 0) || n < 1) throw DomainError("ChargeSamples: invalid box");
    ChargeSamples s;
    s.L = L;
    s.n = n;
    s.h = 2.0 * L / n;
    s.rho.resize(static_cast<std::size_t>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s.rho[(static_cast<std::size_t>(i) * n + j) * n + k] = p.value(s.center(i, j, k));
    return s;
}

Vec3 ChargeSamples::center(int i, int j, int k) const {
    return {-L + (i + 0.5) * h, -L + (j + 0.5) * h, -L + (k + 0.5) * h};
}

double ChargeSamples::total() const {
    double s = 0;
    for (double r : rho) s += r;
    return s * h * h * h;
}

Potential coulomb_potential(const ChargeSamples& s, const Vec3& x) {
    // mean of 1/|y| over a cube of side h centered at 0, times h
    constexpr double kCubeMean = 2.3800772494;
    Potential p;
    const double h3 = s.h * s.h * s.h;
    double acc = 0;
    for (int i = 0; i < s.n; ++i) {
        const double dx = x[0] - (-s.L + (i + 0.5) * s.h);
        for (int j = 0; j < s.n; ++j) {
            const double dy = x[1] - (-s.L + (j + 0.5) * s.h);
            const double* row = &s.rho[(static_cast<std::size_t>(i) * s.n + j) * s.n];
            for (int k = 0; k < s.n; ++k) {
                if (row[k] == 0.0) continue;
                const double dz = x[2] - (-s.L + (k + 0.5) * s.h);
                if (std::abs(dx) < 0.5 * s.h && std::abs(dy) < 0.5 * s.h && std::abs(dz) < 0.5 * s.h) {
                    acc += row[k] * kCubeMean * s.h * s.h;
                    p.regularized = true;
                    continue;
                }
                acc += row[k] * h3 / std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        }
    }
    p.value = acc / (4.0 * kPi);
    return p;
}

double gauss_flux_charge(const ChargeSamples& s, double R, int degree) {
    const AngularQuadrature aq = AngularQuadrature::for_degree(degree);
    const double d = 1e-3 * R;
    const auto terms = parallel_map(aq.size(), [&](std::size_t q) {
        const Vec3 u{aq.x[q], aq.y[q], aq.z[q]};
        const Vec3 a{(R + d) * u[0], (R + d) * u[1], (R + d) * u[2]};
        const Vec3 b{(R - d) * u[0], (R - d) * u[1], (R - d) * u[2]};
        // fourth-order centered difference
        const Vec3 a2{(R + 2 * d) * u[0], (R + 2 * d) * u[1], (R + 2 * d) * u[2]};
        const Vec3 b2{(R - 2 * d) * u[0], (R - 2 * d) * u[1], (R - 2 * d) * u[2]};
        const double dphi = (8.0 * (coulomb_potential(s, a).value - coulomb_potential(s, b).value) -
                             (coulomb_potential(s, a2).value - coulomb_potential(s, b2).value)) /
                            (12.0 * d);
        return aq.weight[q] * R * R * dphi;
    });
    double flux = 0;
    for (double t : terms) flux += t;
    return -flux;
}

double kappa(const TestVector& f) {
    const RadialGrid& g = f.h_part.grid();
    std::vector<double> d(g.size());
    const cplx* h = f.h_part.row(0);
    for (std::size_t j = 0; j < g.size(); ++j) d[j] = kSqrt4Pi * h[j].real();
    return integrate_density(g, d);
}

double kappa_position(const ProfileSpec& h) {
    if (h.is_zero() || h.ell != 0) return 0.0;
    const double twopi2 = 2.0 * kPi * kPi;
    if (!h.centered()) {
        if (h.family != "gaussian") throw DomainError("kappa_position: only Gaussians may be shifted");
        const double c = norm3(h.center);
        return twopi2 * h.integral() * std::erf(c / h.width) / c;
    }
    const PositionGrid pg = PositionGrid::panels(h.extent());
    double s = 0;
    for (std::size_t i = 0; i < pg.size(); ++i) s += pg.w[i] * h.radial(pg.r[i]) / pg.r[i];
    return twopi2 * 4.0 * kPi * s;
}

ScalingReport scaling_sequence(const Charge& gamma, const TestVector& f, const std::vector<double>& lambdas, unsigned jobs) {
    struct Out {
        ScalingRow row;
        std::vector<std::string> warnings;
    };
    const auto res = parallel_map(
        lambdas.size(),
        [&](std::size_t i) {
            Out o;
            const DilatedTest d = dilate(f, lambdas[i]);
            const LinearFormParts p = linear_form_parts(gamma, d.tv);
            o.row = {lambdas[i], p.total(), p.rho_term, p.sigma_term};
            for (const auto& w : d.warnings) o.warnings.push_back("lambda=" + std::to_string(lambdas[i]) + ": " + w);
            return o;
        },
        jobs);
    ScalingReport r;
    for (const auto& o : res) {
        r.rows.push_back(o.row);
        r.warnings.insert(r.warnings.end(), o.warnings.begin(), o.warnings.end());
    }
    for (std::size_t i = 1; i < r.rows.size(); ++i) r.increments.push_back(std::abs(r.rows[i].l_value - r.rows[i - 1].l_value));
    r.target = gamma.q * kappa(f);
    if (!r.rows.empty()) {
        const ScalingRow& last = r.rows.back();
        r.extrapolated = last.l_value;
        if (r.rows.size() >= 2) {
            const ScalingRow& prev = r.rows[r.rows.size() - 2];
            if (last.lambda != prev.lambda)
                r.extrapolated = (last.lambda * last.l_value - prev.lambda * prev.l_value) / (last.lambda - prev.lambda);
        }
        r.deviation = std::abs(last.l_value - r.target) / (r.target != 0 ? std::abs(r.target) : 1.0);
    }
    return r;
}

QuasifreeStateLabel QuasifreeStateLabel::kpr(const KprOperator& op, std::string description) {
    QuasifreeStateLabel s;
    s.kind = Kind::kpr;
    s.op = &op;
    s.description = std::move(description);
    return s;
}

WeylElement weyl_product(const WeylElement& a, const WeylElement& b) {
    WeylElement out;
    out.vector = a.vector + b.vector;
    out.phase = a.phase * b.phase * std::polar(1.0, -0.5 * inner_product(a.vector, b.vector).imag());
    return out;
}

cplx weyl_expectation(const QuasifreeStateLabel& state, const TestVector& f, const Charge* gamma) {
    double n2 = 0;
    if (state.kind == QuasifreeStateLabel::Kind::vacuum) {
        n2 = norm2(f.wf);
    } else {
        if (!state.op) throw DomainError("weyl_expectation: kpr state without operator");
        const Applied a = state.op->apply(f.wf, TSelect::T);
        if (a.truncated) throw DomainError("weyl_expectation: f reaches below the truncated shells of T");
        n2 = norm2(a.wf);
    }
    const double phase = gamma ? linear_form(*gamma, f) : 0.0;
    return std::polar(std::exp(-0.25 * n2), phase);
}

cplx weyl_scaling_limit(const TestVector& f, const Charge& gamma) {
    return std::polar(std::exp(-0.25 * norm2(f.wf)), gamma.q * kappa(f));
}

Implementer local_implementer(const Charge& gamma, double region_diameter, double margin) {
    if (!(region_diameter > 0) || !(margin > 0)) throw DomainError("local_implementer: diameter and margin must be positive");
    Implementer im;
    im.T = margin + region_diameter;
    const double T = im.T;
    im.v = gamma.momentum();
    const auto& w = gamma.rho_hat.grid().nodes();
    for (std::size_t m = 0; m < im.v.n_modes(); ++m)
        for (std::size_t j = 0; j < w.size(); ++j) im.v.at(m, j) *= 1.0 - std::polar(1.0, w[j] * T);
    for (double x : w) im.multiplier_sup = std::max(im.multiplier_sup, 2.0 * std::abs(std::sin(0.5 * x * T)) / x);
    return im;
}

double implementer_residual(const Charge& gamma, const Implementer& v, const TestVector& f) {
    require_compatible(v.v, f.wf, "implementer_residual");
    const RadialGrid& g = f.wf.grid();
    const auto& w = g.nodes();
    std::vector<double> d(w.size(), 0.0);
    for (std::size_t m = 0; m < f.wf.n_modes(); ++m)
        for (std::size_t j = 0; j < w.size(); ++j) d[j] += w[j] * w[j] * (std::conj(v.v.at(m, j)) * f.wf.at(m, j)).imag();
    double im = 0;
    for (std::size_t j = 0; j < w.size(); ++j) im += g.weights()[j] / (w[j] * w[j]) * d[j];
    im += g.low_tail(d[0], d[1]);
    return std::abs(linear_form(gamma, f) + im);
}

}  // namespace lab
