#include "lab/kpr.hpp"

#include "lab/errors.hpp"
#include "lab/format.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace lab {

namespace {

using nlohmann::json;

std::vector<double> read_values(const json& j, const char* key) {
    if (!j.contains("values") || !j.at("values").is_array())
        throw ConfigError(std::string("schedule: ") + key + ".values must be an array");
    return j.at("values").get<std::vector<double>>();
}

WaveFunction random_wave(const GridPtr& g, const ModesPtr& m, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    WaveFunction v(g, m);
    for (auto& z : v.coeffs()) z = cplx(d(rng), d(rng));
    return v;
}

}  // namespace

bool KprSchedule::includes(int i, int l) const {
    if (l > cut(i)) return false;
    switch (filter) {
        case EllFilter::positive: return l > 0;
        case EllFilter::odd_only: return l % 2 == 1;
        case EllFilter::with_zero: return l >= 0;
    }
    return false;
}

int KprSchedule::rank(int i) const {
    int r = 0;
    for (int l = 0; l <= cut(i); ++l)
        if (includes(i, l)) r += 2 * l + 1;
    return r;
}

KprSchedule KprSchedule::geometric(int shells, double ratio, double exponent, double offset) {
    if (shells < 1) throw ConfigError("schedule: need at least one shell");
    KprSchedule s;
    const double lr = std::log(ratio);
    for (int i = 1; i <= shells + 1; ++i) s.log_eps.push_back(i * lr);
    for (int i = 1; i <= shells; ++i) {
        s.bs.push_back(std::pow(i + offset, -exponent));
        s.ell_cut.push_back(i);
    }
    return s;
}

KprSchedule KprSchedule::from_json(const json& j) {
    try {
        const int N = j.at("shells").get<int>();
        if (N < 1) throw ConfigError("schedule: shells must be positive");
        KprSchedule s;
        const json& e = j.at("epsilon");
        const std::string ek = e.at("kind").get<std::string>();
        if (ek == "geometric") {
            const double ratio = e.value("ratio", 0.5);
            const double first = e.value("first", ratio);
            if (!(ratio > 0) || !(first > 0)) throw ConfigError("schedule: epsilon.ratio and epsilon.first must be positive");
            const double lr = std::log(ratio), l1 = std::log(first);
            for (int i = 0; i <= N; ++i) s.log_eps.push_back(l1 + i * lr);
        } else if (ek == "explicit") {
            for (double v : read_values(e, "epsilon")) s.log_eps.push_back(v > 0 ? std::log(v) : std::nan(""));
        } else if (ek == "explicit_log") {
            s.log_eps = read_values(e, "epsilon");
        } else {
            throw ConfigError("schedule: unknown epsilon.kind '" + ek + "'");
        }
        const json& b = j.at("b");
        const std::string bk = b.at("kind").get<std::string>();
        if (bk == "power") {
            const double a = b.value("exponent", 1.0);
            const double off = b.value("offset", 1.0);
            for (int i = 1; i <= N; ++i) s.bs.push_back(std::pow(i + off, -a));
        } else if (bk == "explicit") {
            s.bs = read_values(b, "b");
        } else {
            throw ConfigError("schedule: unknown b.kind '" + bk + "'");
        }
        const json lc = j.value("ell_cut", json{{"kind", "linear"}});
        const std::string lk = lc.at("kind").get<std::string>();
        if (lk == "linear") {
            const int slope = lc.value("slope", 1);
            for (int i = 1; i <= N; ++i) s.ell_cut.push_back(slope * i);
        } else if (lk == "explicit") {
            for (double v : read_values(lc, "ell_cut")) s.ell_cut.push_back(static_cast<int>(v));
        } else {
            throw ConfigError("schedule: unknown ell_cut.kind '" + lk + "'");
        }
        const std::string f = j.value("ell_filter", std::string("positive"));
        if (f == "positive") s.filter = EllFilter::positive;
        else if (f == "odd") s.filter = EllFilter::odd_only;
        else if (f == "with_zero") s.filter = EllFilter::with_zero;
        else throw ConfigError("schedule: unknown ell_filter '" + f + "'");
        if (s.log_eps.size() != static_cast<std::size_t>(N) + 1 || s.bs.size() != static_cast<std::size_t>(N) ||
            s.ell_cut.size() != static_cast<std::size_t>(N))
            throw ConfigError("schedule: sequence lengths do not match shells");
        return s;
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("schedule: ") + ex.what());
    }
}

json KprSchedule::to_json() const {
    std::vector<double> cuts(ell_cut.begin(), ell_cut.end());
    const char* f = filter == EllFilter::positive ? "positive" : filter == EllFilter::odd_only ? "odd" : "with_zero";
    return json{{"shells", shells()},
                {"epsilon", {{"kind", "explicit_log"}, {"values", log_eps}}},
                {"b", {{"kind", "explicit"}, {"values", bs}}},
                {"ell_cut", {{"kind", "explicit"}, {"values", cuts}}},
                {"ell_filter", f}};
}

ValidationReport validate_schedule(const KprSchedule& s, double kpr_tol) {
    ValidationReport r;
    auto fail = [&](std::string msg) {
        r.ok = false;
        r.violations.push_back(std::move(msg));
    };
    const int N = s.shells();
    if (N < 1 || s.log_eps.size() != static_cast<std::size_t>(N) + 1 || s.ell_cut.size() != static_cast<std::size_t>(N)) {
        fail("sequence lengths inconsistent");
        return r;
    }
    for (std::size_t i = 0; i < s.log_eps.size(); ++i) {
        if (!(std::abs(s.log_eps[i]) < HUGE_VAL)) {
            r.eps_decreasing = false;
            fail("epsilon_" + std::to_string(i + 1) + " not positive");
        }
        if (i > 0 && !(s.log_eps[i] < s.log_eps[i - 1])) {
            r.eps_decreasing = false;
            fail("epsilon not strictly decreasing at i=" + std::to_string(i + 1));
        }
    }
    for (int i = 1; i <= N; ++i) {
        if (!(s.b(i) > 0 && s.b(i) < 1)) {
            r.b_in_range = false;
            fail("b_" + std::to_string(i) + " = " + std::to_string(s.b(i)) + " outside (0,1)");
        }
        if (s.cut(i) < 0) fail("ell_cut(" + std::to_string(i) + ") negative");
    }
    if (!r.eps_decreasing || !r.b_in_range) return r;

    const int q = std::max(1, N / 4);
    double head = 0, tail = 0;
    for (int i = 1; i <= q; ++i) head += s.b(i);
    for (int i = N - q + 1; i <= N; ++i) tail += s.b(i);
    if (N >= 4 && !(tail < head)) {
        r.b_trend = false;
        fail("b shows no decay: last-quartile mean >= first-quartile mean");
    }

    double e_sum = 0, k_sum = 0;
    const double lr1 = s.log_ratio(1);
    for (int i = 1; i <= N; ++i) {
        const int rk = s.rank(i);
        r.ranks.push_back(rk);
        const double et = s.eps(i) / (s.b(i) * s.b(i)) * rk;
        e_sum += et;
        r.energy_terms.push_back(et);
        r.energy_partial.push_back(e_sum);
        const double lr = s.log_ratio(i);
        const double kt = s.b(i) * s.b(i) * lr;
        k_sum += kt;
        r.kpr_terms.push_back(kt);
        r.kpr_partial.push_back(k_sum);
        if (i >= 2 && lr > lr1 * (1 + 1e-12)) r.log_ratio_exponent = std::max(r.log_ratio_exponent, std::log(lr / lr1) / std::log(i));
    }
    if (!std::isfinite(e_sum)) fail("energy sum not finite");
    for (int i = N - q + 1; i <= N && i >= 2; ++i)
        if (r.kpr_terms[static_cast<std::size_t>(i - 1)] > r.kpr_terms[static_cast<std::size_t>(i - 2)]) r.kpr_sum_cauchy = false;
    if (N >= 4 && r.kpr_terms.back() > kpr_tol * k_sum) r.kpr_sum_cauchy = false;
    if (!r.kpr_sum_cauchy) fail("sum b_i^2 ln(eps_i/eps_{i+1}) not settled within tolerance");
    if (s.filter == EllFilter::with_zero) r.kpr_like = false;
    r.kpr_like = r.kpr_like && r.kpr_sum_cauchy;
    return r;
}

KprOperator::KprOperator(KprSchedule s, GridPtr grid, ModesPtr modes, bool require_admissible)
    : s_(std::move(s)), grid_(std::move(grid)), modes_(std::move(modes)) {
    const auto rep = validate_schedule(s_, 1.0);
    if (!rep.eps_decreasing || (require_admissible && !rep.b_in_range))
        throw ConfigError("KprOperator: invalid schedule: " + rep.violations.front());
    const int N = s_.shells();
    const auto& w = grid_->nodes();
    shell_.resize(w.size());
    shell_begin_.assign(static_cast<std::size_t>(N) + 2, w.size());
    shell_end_.assign(static_cast<std::size_t>(N) + 2, 0);
    for (std::size_t j = 0; j < w.size(); ++j) {
        int i = 0;
        const double lw = std::log(w[j]);
        if (lw < s_.log_eps_at(1)) {
            // eps decreasing: first i with w >= eps_{i+1}
            i = N + 1;
            for (int k = 1; k <= N; ++k)
                if (lw >= s_.log_eps_at(k + 1)) {
                    i = k;
                    break;
                }
        }
        shell_[j] = i;
        auto ii = static_cast<std::size_t>(i);
        shell_begin_[ii] = std::min(shell_begin_[ii], j);
        shell_end_[ii] = std::max(shell_end_[ii], j + 1);
    }
    const auto& wt = grid_->weights();
    for (std::size_t j = 0; j < w.size(); ++j) {
        xi_.push_back(std::pow(w[j], -1.5));
        wxi_.push_back(wt[j] * xi_.back());
    }
    for (int i = 1; i <= N; ++i) {
        xi_norm_.push_back(s_.log_ratio(i));
        double d = 0;
        for (std::size_t j = shell_begin_[i]; j < shell_end_[i]; ++j) d += wt[j] / (w[j] * w[j] * w[j]);
        xi_disc_.push_back(d);
    }
}

template <class C>
void KprOperator::add_projected(const WaveFunction& v, WaveFunction& out, C&& coef) const {
    for (int i = 1; i <= s_.shells(); ++i) {
        const std::size_t a = shell_begin_[i], b = shell_end_[i];
        if (a >= b) continue;
        const double c = coef(i);
        const double nrm = xi_norm_discrete(i);
        for (std::size_t m = 0; m < v.n_modes(); ++m) {
            if (!s_.includes(i, v.modes()[m].first)) continue;
            const cplx* src = v.row(m);
            cplx alpha = 0;
            for (std::size_t j = a; j < b; ++j) alpha += wxi_[j] * src[j];
            alpha *= c / nrm;
            cplx* dst = out.row(m);
            for (std::size_t j = a; j < b; ++j) dst[j] += alpha * xi_[j];
        }
    }
}

WaveFunction KprOperator::project(int i, const WaveFunction& v) const {
    WaveFunction out = v.zeros_like();
    const std::size_t a = shell_begin_[i], b = shell_end_[i];
    if (a >= b) return out;
    for (std::size_t m = 0; m < v.n_modes(); ++m) {
        if (!s_.includes(i, v.modes()[m].first)) continue;
        cplx alpha = 0;
        for (std::size_t j = a; j < b; ++j) alpha += wxi_[j] * v.at(m, j);
        alpha /= xi_norm_discrete(i);
        for (std::size_t j = a; j < b; ++j) out.at(m, j) = alpha * xi_[j];
    }
    return out;
}

Applied KprOperator::apply(const WaveFunction& v, TSelect which) const {
    if (!v.grid().same_as(*grid_)) throw BasisError("KprOperator: vector on a different grid");
    Applied r{v, false, 0.0};
    const int N = s_.shells();
    const std::size_t lo = shell_begin_[static_cast<std::size_t>(N) + 1], hi = shell_end_[static_cast<std::size_t>(N) + 1];
    for (std::size_t m = 0; m < v.n_modes() && lo < hi; ++m) {
        const int l = v.modes()[m].first;
        bool acts = false;
        for (int i = 1; i <= N && !acts; ++i) acts = s_.includes(i, l);
        if (!acts) continue;
        for (std::size_t j = lo; j < hi; ++j)
            if (v.at(m, j) != cplx(0.0)) r.truncated = true;
    }
    switch (which) {
        case TSelect::T1: add_projected(v, r.wf, [&](int i) { return s_.b(i) - 1.0; }); break;
        case TSelect::T2: add_projected(v, r.wf, [&](int i) { return 1.0 / s_.b(i) - 1.0; }); break;
        case TSelect::T:
        case TSelect::T_hat: {
            const WaveFunction gv = which == TSelect::T ? apply_gamma(v) : apply_gamma_hat(v);
            WaveFunction even = 0.5 * (v + gv);
            WaveFunction odd = 0.5 * (v - gv);
            add_projected(even, r.wf, [&](int i) { return 1.0 / s_.b(i) - 1.0; });
            add_projected(odd, r.wf, [&](int i) { return s_.b(i) - 1.0; });
            r.domain_norm = std::sqrt(norm2(omega_r(even, -0.5)));
            break;
        }
    }
    if (which == TSelect::T2) r.domain_norm = std::sqrt(norm2(omega_r(v, -0.5)));
    return r;
}

WaveFunction KprOperator::omega_r(const WaveFunction& v, double power) const {
    const double e1 = s_.eps(1);
    return multiply_radial(v, [&](double w) { return std::pow(w >= e1 ? e1 : w, power); });
}

Applied apply_t(const KprOperator& op, const WaveFunction& v, TSelect which) { return op.apply(v, which); }

WaveFunction omega_r(const KprOperator& op, const WaveFunction& v, double power) { return op.omega_r(v, power); }

NormBound t2_bound(const KprOperator& op, unsigned seed, int max_iter) {
    NormBound nb;
    const auto& s = op.schedule();
    double sum = 0;
    for (int i = 1; i <= s.shells(); ++i) {
        const double c = 1.0 / s.b(i) - 1.0;
        sum += c * c * s.rank(i) * s.eps(i);
    }
    nb.analytic_bound = std::sqrt(sum);

    // A = (T2 - 1) omega_r^{1/2}, A* = omega_r^{1/2} (T2 - 1); iterate A*A.
    auto A = [&](const WaveFunction& x) {
        WaveFunction y = op.omega_r(x, 0.5);
        WaveFunction t2 = op.apply(y, TSelect::T2).wf;
        return t2 - y;
    };
    auto As = [&](const WaveFunction& x) {
        WaveFunction t2 = op.apply(x, TSelect::T2).wf;
        return op.omega_r(t2 - x, 0.5);
    };
    std::mt19937_64 rng(seed);
    WaveFunction x = random_wave(op.grid_ptr(), op.modes_ptr(), rng);
    double prev = 0;
    for (int it = 1; it <= max_iter; ++it) {
        const double nx = std::sqrt(norm2(x));
        if (nx == 0) break;
        x *= 1.0 / nx;
        WaveFunction ax = A(x);
        const double est = std::sqrt(norm2(ax));
        nb.computed_norm = est;
        nb.iterations = it;
        if (est == 0 || std::abs(est - prev) <= 1e-14 * est) break;
        prev = est;
        x = As(ax);
    }
    return nb;
}

double t2_block_norm(const KprOperator& op) {
    const auto& s = op.schedule();
    const auto& w = op.grid().nodes();
    const auto& wt = op.grid().weights();
    double best = 0;
    for (int i = 1; i <= s.shells(); ++i) {
        bool any = false;
        for (int l = 0; l <= op.modes_ptr()->ell_max(); ++l) any = any || s.includes(i, l);
        if (!any) continue;
        double num = 0;
        for (std::size_t j = 0; j < w.size(); ++j)
            if (op.shell_of(j) == i) num += wt[j] * w[j] * std::pow(w[j], -3.0);
        if (num == 0) continue;
        best = std::max(best, (1.0 / s.b(i) - 1.0) * std::sqrt(num / op.xi_norm_discrete(i)));
    }
    return best;
}

double t1_norm_estimate(const KprOperator& op, unsigned seed, int max_iter) {
    std::mt19937_64 rng(seed);
    WaveFunction x = random_wave(op.grid_ptr(), op.modes_ptr(), rng);
    double est = 0, prev = 0;
    for (int it = 0; it < max_iter; ++it) {
        x *= 1.0 / std::sqrt(norm2(x));
        x = op.apply(x, TSelect::T1).wf;
        est = std::sqrt(norm2(x));
        if (std::abs(est - prev) <= 1e-15) break;
        prev = est;
    }
    return est;
}

ProbeReport convergence_probe(const KprOperator& op, const std::vector<cplx>& eta, int m0, int n1, double cauchy_ratio) {
    const auto& s = op.schedule();
    if (m0 < 1 || n1 <= m0 || n1 > s.shells() + 1) throw DomainError("convergence_probe: shell range outside schedule");
    const ModeSet& ms = *op.modes_ptr();
    if (eta.size() != ms.size()) throw BasisError("convergence_probe: eta has the wrong number of modes");
    ProbeReport rep;
    rep.y00_weight = std::abs(eta[0]);
    double acc = 0;
    for (int n = m0 + 1; n <= n1; ++n) {
        const int i = n - 1;
        // T1 (xi_i (x) eta) = xi_i (x) ((1 - Q~_i) eta + b_i Q~_i eta)
        double in = 0, out = 0;
        for (std::size_t k = 0; k < ms.size(); ++k) {
            const double a2 = std::norm(eta[k]);
            (s.includes(i, ms[k].first) ? in : out) += a2;
        }
        double full = 0;
        for (const auto& z : eta) full += std::norm(z);
        const double lr = op.xi_norm(i);
        const double inc2 = lr * (out + s.b(i) * s.b(i) * in);
        acc += inc2;
        ProbeRow row;
        row.n = n;
        row.increment = std::sqrt(inc2);
        row.partial_norm = std::sqrt(acc);
        row.bound = std::sqrt(lr * (out + s.b(i) * s.b(i) * full));
        rep.rows.push_back(row);
    }
    rep.first_increment = rep.rows.front().increment;
    rep.last_increment = rep.rows.back().increment;
    if (rep.first_increment == 0) rep.verdict = "zero";
    else if (rep.last_increment < cauchy_ratio * rep.first_increment) rep.verdict = "Cauchy";
    else rep.verdict = "divergent";
    return rep;
}

std::vector<double> probe_increments_on_grid(const KprOperator& op, const std::vector<cplx>& eta, int m0, int n1) {
    std::vector<double> out;
    const auto& w = op.grid().nodes();
    for (int n = m0 + 1; n <= n1; ++n) {
        const int i = n - 1;
        WaveFunction u(op.grid_ptr(), op.modes_ptr());
        for (std::size_t k = 0; k < u.n_modes(); ++k)
            for (std::size_t j = 0; j < w.size(); ++j)
                if (op.shell_of(j) == i) u.at(k, j) = eta[k] * std::pow(w[j], -1.5);
        out.push_back(std::sqrt(norm2(op.apply(u, TSelect::T1).wf)));
    }
    return out;
}

std::string probe_csv(const ProbeReport& r) {
    std::ostringstream os;
    os << "n,partial_norm,increment,bound\n";
    for (const auto& row : r.rows)
        os << row.n << ',' << fmt(row.partial_norm) << ',' << fmt(row.increment) << ',' << fmt(row.bound) << '\n';
    return os.str();
}

}  // namespace lab
