#include "lab/charges.hpp"
#include "lab/errors.hpp"
#include "lab/format.hpp"
#include "lab/harness.hpp"
#include "lab/jld.hpp"
#include "lab/kpr.hpp"
#include "lab/localization.hpp"
#include "lab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>

namespace lab {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

const json& empty_object() {
    static const json j = json::object();
    return j;
}

ConfigBlock optional_block(const ConfigBlock& root, const std::string& key) {
    return root.has(key) ? root.block(key) : ConfigBlock(empty_object(), root.key_path(key));
}

// Runs a fixture parser and tags its errors with the config key.
template <class F>
auto parse_at(const ConfigBlock& root, const std::string& key, F&& f) -> decltype(f(root.raw(key))) {
    const json& j = root.raw(key);
    try {
        return f(j);
    } catch (const ConfigError& e) {
        throw ConfigError("config key '" + root.key_path(key) + "': " + e.what());
    } catch (const DomainError& e) {
        throw ConfigError("config key '" + root.key_path(key) + "': " + e.what());
    } catch (const FrameError& e) {
        throw ConfigError("config key '" + root.key_path(key) + "': " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + root.key_path(key) + "': " + e.what());
    }
}

double tol(ExperimentReport& rep, const ConfigBlock& t, const std::string& key, double fallback) {
    const double v = t.number(key, fallback);
    rep.tolerances[key] = v;
    return v;
}

// radial: {kind: log|linear|dyadic, count, min, max} or {kind: dyadic, lo_exp, hi_exp, per_octave}.
GridPtr read_grid(const ConfigBlock& root, const RadialGrid& fallback) {
    if (!root.has("radial")) return std::make_shared<const RadialGrid>(fallback);
    const ConfigBlock r = root.block("radial");
    const std::string kind = r.string("kind", "log");
    GridPtr g;
    try {
        if (kind == "dyadic") {
            g = std::make_shared<const RadialGrid>(RadialGrid::dyadic(r.integer("lo_exp"), r.integer("hi_exp"), r.integer("per_octave")));
        } else if (kind == "log" || kind == "linear") {
            const int n = r.integer("count");
            const double lo = r.number("min"), hi = r.number("max");
            if (n < 16) throw ConfigError("config key 'radial.count': at least 16 nodes");
            if (!(lo > 0) || !(hi > lo)) throw ConfigError("config key 'radial.min': need 0 < min < max");
            g = std::make_shared<const RadialGrid>(kind == "log" ? RadialGrid::log_spaced(lo, hi, static_cast<std::size_t>(n))
                                                                 : RadialGrid::linear(lo, hi, static_cast<std::size_t>(n)));
        } else {
            throw ConfigError("config key 'radial.kind': unknown kind '" + kind + "'");
        }
    } catch (const DomainError& e) {
        throw ConfigError("config key 'radial': " + std::string(e.what()));
    }
    r.finish();
    return g;
}

ModesPtr read_modes(const ConfigBlock& root, int fallback) {
    const int l = root.integer("ell_max", fallback);
    if (l < 0 || l > 64) throw ConfigError("config key 'ell_max': must lie in [0, 64]");
    return std::make_shared<const ModeSet>(l);
}

KprSchedule read_schedule(const ConfigBlock& root, const KprSchedule& fallback) {
    if (!root.has("schedule")) return fallback;
    return parse_at(root, "schedule", [](const json& j) { return KprSchedule::from_json(j); });
}

ProfileSpec read_profile(const ConfigBlock& b, const std::string& key, const ProfileSpec& fallback) {
    if (!b.has(key)) return fallback;
    return parse_at(b, key, [](const json& j) { return ProfileSpec::from_json(j); });
}

// Probe entries accept {polar_deg, azimuth_deg} in place of a direction.
std::vector<ProbeSpec> read_probes(const ConfigBlock& root, const std::string& key) {
    if (!root.has(key)) return {};
    return parse_at(root, key, [](const json& list) {
        if (!list.is_array()) throw ConfigError("expected a list of probes");
        std::vector<ProbeSpec> out;
        for (json p : list) {
            if (p.contains("polar_deg")) {
                const double a = p.at("polar_deg").get<double>() * kPi / 180, b = p.value("azimuth_deg", 0.0) * kPi / 180;
                p["direction"] = {std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)};
                p.erase("polar_deg");
                p.erase("azimuth_deg");
            }
            for (const auto& [k, v] : p.items())
                if (k != "name" && k != "r0" && k != "width" && k != "direction" && k != "power" && k != "amplitude" && k != "part")
                    throw ConfigError("probe: unknown key '" + k + "'");
            out.push_back(ProbeSpec::from_json(p));
        }
        return out;
    });
}

std::vector<double> positive_list(const ConfigBlock& root, const std::string& key, const std::vector<double>& fallback) {
    const auto v = root.numbers(key, fallback);
    if (v.empty()) throw ConfigError("config key '" + root.key_path(key) + "': empty list");
    for (double x : v)
        if (!(x > 0)) throw ConfigError("config key '" + root.key_path(key) + "': values must be positive");
    return v;
}

// ---------------------------------------------------------------- scaling

ExperimentReport scaling_limit(const ConfigBlock& root, unsigned jobs) {
    ExperimentReport rep;
    const GridPtr grid = read_grid(root, RadialGrid::default_grid());
    const ModesPtr modes = read_modes(root, 2);
    const ProfileSpec unit = ProfileSpec::gaussian(std::pow(kPi, -1.5), 1.0);

    const ConfigBlock cb = optional_block(root, "charge");
    const ProfileSpec sigma = read_profile(cb, "sigma", ProfileSpec::zero()), rho = read_profile(cb, "rho", unit);
    cb.finish();
    const ConfigBlock tb = optional_block(root, "test");
    const ProfileSpec h = read_profile(tb, "h", ProfileSpec::gaussian(1.0, 1.0)), g = read_profile(tb, "g", ProfileSpec::zero());
    tb.finish();
    const auto lambdas = positive_list(root, "lambdas", {1.0, 10.0, 100.0, 1000.0});
    const ConfigBlock t = optional_block(root, "tolerances");
    const double dev_tol = tol(rep, t, "deviation", 1e-3);
    const double gauss_tol = tol(rep, t, "gauss", 1e-4);

    std::vector<ProfileSpec> gauss_profiles;
    int gauss_cells = 96;
    if (root.has("gauss")) {
        const ConfigBlock gb = root.block("gauss");
        gauss_cells = gb.integer("cells", 96);
        gauss_profiles = parse_at(gb, "profiles", [](const json& list) {
            std::vector<ProfileSpec> out;
            for (const auto& p : list) out.push_back(ProfileSpec::from_json(p));
            return out;
        });
        gb.finish();
        if (gauss_cells < 8) throw ConfigError("config key 'gauss.cells': at least 8");
    }
    t.finish();
    root.finish();

    const Charge gamma = Charge::from_profiles(sigma, rho, grid, modes);
    const TestVector f = make_test_vector(h, g, grid, modes);
    const ScalingReport s = scaling_sequence(gamma, f, lambdas, jobs);

    Table tab{"scaling", {"lambda", "l_value", "rho_term", "sigma_term", "increment"}, {}};
    for (std::size_t k = 0; k < s.rows.size(); ++k)
        tab.add({fmt(s.rows[k].lambda), fmt(s.rows[k].l_value), fmt(s.rows[k].rho_term), fmt(s.rows[k].sigma_term),
                 k == 0 ? "" : fmt(s.increments[k - 1])});
    rep.tables.push_back(tab);
    rep.results["q"] = gamma.q;
    rep.results["q_extrapolated"] = charge_of(gamma);
    rep.results["kappa"] = kappa(f);
    rep.results["target"] = s.target;
    rep.results["final"] = s.rows.back().l_value;
    rep.results["extrapolated"] = s.extrapolated;
    rep.results["warnings"] = s.warnings;
    rep.check("deviation", s.deviation, "<=", dev_tol);

    if (!gauss_profiles.empty()) {
        Table gt{"gauss", {"profile", "q_rho_hat", "q_flux", "rel_error"}, {}};
        const auto rows = parallel_map(
            gauss_profiles.size(),
            [&](std::size_t i) {
                const ProfileSpec& p = gauss_profiles[i];
                const auto samples = ChargeSamples::from_profile(p, p.extent() * 1.05, gauss_cells);
                const double flux = gauss_flux_charge(samples, 2.0 * p.extent());
                const double q = charge_of(Charge::from_profiles(ProfileSpec::zero(), p, grid, modes));
                return std::array<double, 3>{q, flux, std::abs(flux - q) / std::abs(q)};
            },
            jobs);
        double worst = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            gt.add({std::to_string(i), fmt(rows[i][0]), fmt(rows[i][1]), fmt(rows[i][2])});
            worst = std::max(worst, rows[i][2]);
        }
        rep.tables.push_back(gt);
        rep.check("gauss_rel_error", worst, "<=", gauss_tol);
    }
    return rep;
}

// ---------------------------------------------------------------- kpr

WaveFunction random_vector(const GridPtr& grid, const ModesPtr& modes, std::uint64_t seed, double floor, bool l0_only) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    WaveFunction v(grid, modes);
    const std::size_t nm = l0_only ? 1 : v.n_modes();
    for (std::size_t m = 0; m < nm; ++m)
        for (std::size_t j = 0; j < v.n_nodes(); ++j) {
            const double re = d(rng), im = d(rng);
            if (grid->nodes()[j] >= floor) v.at(m, j) = cplx(re, im);
        }
    return v;
}

ExperimentReport kpr_validate(const ConfigBlock& root, std::uint64_t seed, unsigned jobs) {
    ExperimentReport rep;
    const GridPtr grid = read_grid(root, RadialGrid::dyadic(-44, 6, 8));
    const ModesPtr modes = read_modes(root, 4);
    const KprSchedule s = read_schedule(root, KprSchedule::default_schedule());
    const int pairs = root.integer("pairs", 100);
    const int flat = root.integer("transparency_vectors", 8);
    if (pairs < 1) throw ConfigError("config key 'pairs': must be positive");
    if (flat < 1) throw ConfigError("config key 'transparency_vectors': must be positive");
    const ConfigBlock t = optional_block(root, "tolerances");
    const double symp_tol = tol(rep, t, "symplectic", 1e-9);
    const double bound_tol = tol(rep, t, "bound_rel", 1e-6);
    t.finish();
    root.finish();

    const ValidationReport v = validate_schedule(s);
    rep.results["schedule_ok"] = v.ok;
    rep.results["violations"] = v.violations;
    rep.results["kpr_like"] = v.kpr_like;
    Table st{"schedule", {"i", "eps", "b", "ell_cut", "rank"}, {}};
    for (int i = 1; i <= s.shells(); ++i)
        st.add({std::to_string(i), fmt(s.eps(i)), fmt(s.b(i)), std::to_string(s.cut(i)), std::to_string(s.rank(i))});
    rep.tables.push_back(st);
    rep.check("schedule_admissible", v.ok ? 1.0 : 0.0, "==", 1.0);
    if (!v.ok) return rep;

    const KprOperator op(s, grid, modes);
    const double floor = s.eps(s.shells() + 1);
    const auto defects = parallel_map(
        static_cast<std::size_t>(pairs),
        [&](std::size_t k) {
            const WaveFunction a = random_vector(grid, modes, seed * 1000003 + 2 * k, floor, false);
            const WaveFunction b = random_vector(grid, modes, seed * 1000003 + 2 * k + 1, floor, false);
            const double lhs = symplectic_form(apply_t(op, a, TSelect::T).wf, apply_t(op, b, TSelect::T).wf);
            return std::abs(lhs - symplectic_form(a, b));
        },
        jobs);
    Table sy{"symplectic", {"pair", "defect"}, {}};
    double worst = 0.0;
    for (std::size_t k = 0; k < defects.size(); ++k) {
        sy.add({std::to_string(k), fmt(defects[k])});
        worst = std::max(worst, defects[k]);
    }
    rep.tables.push_back(sy);
    rep.check("symplectic_defect", worst, "<=", symp_tol);

    const NormBound nb = t2_bound(op, static_cast<unsigned>(seed + 1));
    rep.results["t2_norm"] = nb.computed_norm;
    rep.results["t2_analytic_bound"] = nb.analytic_bound;
    rep.results["t2_iterations"] = nb.iterations;
    rep.check("t2_norm_over_bound", nb.analytic_bound > 0 ? nb.computed_norm / nb.analytic_bound : 0.0, "<=", 1.0 + bound_tol);

    // rotation-invariant vectors on every node, below the truncation too
    const auto flat_defects = parallel_map(
        static_cast<std::size_t>(flat),
        [&](std::size_t k) {
            const WaveFunction f = random_vector(grid, modes, seed * 1000003 + 7919 + k, 0.0, true);
            const WaveFunction tf = apply_t(op, f, TSelect::T).wf;
            double m = 0.0;
            for (std::size_t c = 0; c < f.coeffs().size(); ++c) m = std::max(m, std::abs(tf.coeffs()[c] - f.coeffs()[c]));
            return m;
        },
        jobs);
    rep.check("l0_transparency_defect", *std::max_element(flat_defects.begin(), flat_defects.end()), "==", 0.0);
    return rep;
}

std::vector<cplx> read_eta(const ConfigBlock& root, const ModeSet& ms) {
    return parse_at(root, "eta", [&](const json& list) {
        if (!list.is_array() || list.empty()) throw ConfigError("expected a non-empty list of {l, m, re, im}");
        std::vector<cplx> eta(ms.size(), 0.0);
        for (const auto& e : list) {
            for (const auto& [k, v] : e.items())
                if (k != "l" && k != "m" && k != "re" && k != "im") throw ConfigError("unknown key '" + k + "'");
            const int l = e.at("l").get<int>(), m = e.at("m").get<int>();
            if (l < 0 || l > ms.ell_max() || std::abs(m) > l) throw ConfigError("mode (l, m) outside the mode set");
            eta[ModeSet::index(l, m)] += cplx(e.value("re", 1.0), e.value("im", 0.0));
        }
        return eta;
    });
}

ExperimentReport convergence_probe_exp(const ConfigBlock& root) {
    ExperimentReport rep;
    const GridPtr grid = read_grid(root, RadialGrid::dyadic(-44, 6, 8));
    const ModesPtr modes = read_modes(root, 3);
    const KprSchedule s = read_schedule(root, KprSchedule::geometric(40, 0.5, 4.0));
    const auto eta = read_eta(root, *modes);
    const int m0 = root.integer("m0", 5), n1 = root.integer("n1", 35);
    const std::string expected = root.string("expected", "");
    const ConfigBlock t = optional_block(root, "tolerances");
    const double ratio = tol(rep, t, "cauchy_ratio", 1e-3);
    const double closed = tol(rep, t, "closed_form", 1e-14);
    t.finish();
    root.finish();

    const KprOperator op(s, grid, modes);
    ProbeReport p;
    try {
        p = convergence_probe(op, eta, m0, n1, ratio);
    } catch (const DomainError& e) {
        throw ConfigError("config key 'n1': " + std::string(e.what()));
    }
    Table tab{"probe", {"n", "partial_norm", "increment", "bound"}, {}};
    for (const auto& r : p.rows) tab.add({std::to_string(r.n), fmt(r.partial_norm), fmt(r.increment), fmt(r.bound)});
    rep.tables.push_back(tab);
    rep.results["first_increment"] = p.first_increment;
    rep.results["last_increment"] = p.last_increment;
    rep.results["y00_weight"] = p.y00_weight;
    if (!expected.empty()) rep.check_equal("verdict", p.verdict, expected);
    else rep.results["verdict"] = p.verdict;
    if (p.verdict == "Cauchy") rep.check("increment_ratio", p.last_increment / p.first_increment, "<=", ratio);

    bool pure_l0 = true;
    for (std::size_t k = 1; k < eta.size(); ++k) pure_l0 = pure_l0 && eta[k] == 0.0;
    if (pure_l0 && eta[0] != 0.0) {
        // |eta_00|^2 ln(eps_m0/eps_n) on the Y00 branch
        double worst = 0.0;
        for (const auto& r : p.rows) {
            const double want = std::norm(eta[0]) * (s.log_eps_at(m0) - s.log_eps_at(r.n));
            worst = std::max(worst, std::abs(r.partial_norm * r.partial_norm - want) / want);
        }
        rep.check("closed_form_defect", worst, "<=", closed);
    }
    return rep;
}

// ---------------------------------------------------------------- localization

struct LocalizationSetup {
    GridPtr grid;
    ModesPtr modes;
    ConeProfile cone;
    RadialChargeProfile profile;
    KprSchedule schedule;
    int n0 = 5, n1 = 35;
    double max_tail = 1.0;
};

LocalizationSetup read_localization(const ConfigBlock& root) {
    LocalizationSetup L;
    L.grid = read_grid(root, RadialGrid::dyadic(-44, 6, 16));
    L.modes = read_modes(root, 24);
    const ConfigBlock cb = optional_block(root, "cone");
    Vec3 axis{0.0, 0.0, 1.0};
    if (cb.has("axis")) {
        const auto a = cb.numbers("axis");
        if (a.size() != 3) throw ConfigError("config key 'cone.axis': expected three numbers");
        axis = {a[0], a[1], a[2]};
    }
    const double opening = cb.number("opening_deg", 30.0) * kPi / 180;
    BumpParams bump;
    bump.support_fraction = cb.number("support_fraction", bump.support_fraction);
    cb.finish();
    if (!(opening > 0) || !(opening < kPi / 2)) throw ConfigError("config key 'cone.opening_deg': must lie in (0, 90)");
    try {
        L.cone = build_chi(axis, opening, bump, L.modes->ell_max());
    } catch (const DomainError& e) {
        throw ConfigError("config key 'cone': " + std::string(e.what()));
    }
    const ConfigBlock qb = optional_block(root, "charge");
    const double q = qb.number("q", 1.0), r1 = qb.number("r1", 1.0), r2 = qb.number("r2", 2.0);
    qb.finish();
    if (!(r1 > 0) || !(r2 > r1)) throw ConfigError("config key 'charge.r1': need 0 < r1 < r2");
    L.profile = RadialChargeProfile::make(q, r1, r2);
    L.schedule = read_schedule(root, KprSchedule::geometric(40, 0.5, 4.0));
    L.n0 = root.integer("n0", 5);
    L.n1 = root.integer("n1", 35);
    if (L.n0 < 1 || L.n1 <= L.n0 || L.n1 > L.schedule.shells()) throw ConfigError("config key 'n1': need 1 <= n0 < n1 <= shells");
    L.max_tail = root.number("max_tail", 1.0);
    return L;
}

ExperimentReport localize(const ConfigBlock& root, unsigned jobs) {
    ExperimentReport rep;
    const LocalizationSetup L = read_localization(root);
    const auto probes = read_probes(root, "probes");
    const auto controls = read_probes(root, "controls");
    if (probes.empty()) throw ConfigError("config key 'probes': missing or empty");
    const ConfigBlock t = optional_block(root, "tolerances");
    const double res_tol = tol(rep, t, "residual", 1e-4);
    const double factor = tol(rep, t, "control_factor", 10.0);
    const double ratio = tol(rep, t, "cauchy_ratio", 1e-3);
    const double outside = tol(rep, t, "outside_mass", 1e-10);
    t.finish();
    root.finish();

    const UcSplit split = build_u_c(L.profile, L.cone, L.grid, L.modes, L.max_tail);
    const Charge gamma = L.profile.charge(L.grid, L.modes);
    const KprOperator op(L.schedule, L.grid, L.modes);
    const IntertwinerResult it = build_intertwiner(op, split.u_c, L.n0, L.n1, TSelect::T, ratio);

    Table tr{"trace", {"n", "increment", "distance"}, {}};
    for (const auto& r : it.trace) tr.add({std::to_string(r.n), fmt(r.increment), fmt(r.distance)});
    rep.tables.push_back(tr);
    rep.results["increment_ratio"] = it.ratio;
    rep.results["parity_defect"] = it.parity_defect;
    rep.results["branch_defect"] = it.branch_defect;
    rep.results["y00_overlap"] = L.cone.y00_overlap;
    rep.check_equal("intertwiner", it.verdict, "Cauchy");
    if (!it.v_T) return rep;

    std::vector<ProbeSpec> all = probes;
    all.insert(all.end(), controls.begin(), controls.end());
    const auto rows = parallel_map(
        all.size(),
        [&](std::size_t i) {
            const auto r = verify_intertwining(op, *it.v_T, gamma, {all[i].test_vector(L.grid, L.modes)}, TSelect::T, res_tol);
            return std::pair{r.front(), all[i].mass_inside(L.cone)};
        },
        jobs);
    Table rt{"residuals", {"name", "role", "l_value", "pairing", "residual", "mass_inside"}, {}};
    double worst = 0.0, worst_mass = 0.0, control_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool control = i >= probes.size();
        const auto& [r, mass] = rows[i];
        rt.add({all[i].name, control ? "control" : "outside", fmt(r.l_value), fmt(r.pairing), fmt(r.residual), fmt(mass)});
        if (control) {
            control_min = std::min(control_min, r.residual);
        } else {
            worst = std::max(worst, r.residual);
            worst_mass = std::max(worst_mass, mass);
        }
    }
    rep.tables.push_back(rt);
    rep.check("outside_mass", worst_mass, "<=", outside);
    rep.check("residual", worst, "<=", res_tol);
    if (!controls.empty()) rep.check("control_residual", control_min, ">=", factor * res_tol);
    return rep;
}

ExperimentReport opposite_cone(const ConfigBlock& root) {
    ExperimentReport rep;
    const LocalizationSetup L = read_localization(root);
    root.finish();
    const VerdictReport v = opposite_cone_experiment(L.schedule, L.profile, L.cone, L.grid, L.modes, L.n0, L.n1, L.max_tail);
    Table tab{"variants", {"variant", "chi", "filter", "conjugation", "expected", "verdict", "ratio"}, {}};
    for (std::size_t k = 0; k < v.rows.size(); ++k) {
        const auto& r = v.rows[k];
        tab.add({r.variant, r.chi, r.filter, r.conjugation, r.expected, r.verdict, fmt(r.ratio)});
        rep.check_equal("variant_" + std::to_string(k + 1), r.verdict, r.expected);
    }
    rep.tables.push_back(tab);
    return rep;
}

// ---------------------------------------------------------------- jld

ExperimentReport jld_reduce(const ConfigBlock& root, unsigned jobs) {
    ExperimentReport rep;
    const Region G = parse_at(root, "scene", [](const json& j) { return make_region(j); });
    const int dim = G.grid.dim;
    std::vector<WedgeFrame> wedges;
    if (root.has("wedges")) {
        wedges = parse_at(root, "wedges", [&](const json& list) {
            if (!list.is_array() || list.empty()) throw ConfigError("expected a non-empty list");
            std::vector<WedgeFrame> out;
            for (const auto& w : list) out.push_back(WedgeFrame::from_json(w, dim));
            return out;
        });
    } else {
        wedges.push_back(WedgeFrame::standard(dim));
    }
    const std::string mode = root.string("mode", "plain");
    if (mode != "plain" && mode != "tilde") throw ConfigError("config key 'mode': expected plain or tilde");
    const int cap = root.integer("cap", 16);
    NeighborhoodDictionary dict;
    dict.jobs = jobs;
    BandDictionary bands;
    bands.jobs = jobs;
    if (root.has("radii")) {
        dict.radii.clear();
        for (double r : positive_list(root, "radii", {})) dict.radii.push_back(static_cast<int>(r));
        bands.radii = dict.radii;
    }
    const ConfigBlock eb = optional_block(root, "expect");
    std::optional<Region> first;
    if (eb.has("first_step"))
        first = parse_at(eb, "first_step", [&](const json& j) { return make_region(G.grid, j); });
    const int layer = eb.integer("layer", 1);
    const int want_iter = eb.integer("iterations", -1);
    const int want_final = eb.integer("final_cells", -1);
    eb.finish();
    root.finish();

    FixpointResult fx;
    try {
        fx = r_fixpoint(G, wedges, mode == "plain" ? ReduceMode::plain : ReduceMode::tilde, cap, dict, bands);
    } catch (const FrameError& e) {
        throw ConfigError("config key 'wedges': " + std::string(e.what()));
    }

    Table tr{"trace", {"iteration", "cell_count"}, {}};
    for (std::size_t k = 0; k < fx.trace.size(); ++k) tr.add({std::to_string(k), std::to_string(fx.trace[k])});
    rep.tables.push_back(tr);
    rep.artifacts.push_back({"initial.pbm", G.to_pbm()});
    rep.artifacts.push_back({"final.pbm", fx.region.to_pbm()});
    rep.results["initial_cells"] = G.count();
    rep.results["final_cells"] = fx.region.count();
    rep.results["iterations"] = fx.iterations;
    rep.results["stabilized"] = fx.stabilized;
    rep.results["grid"] = G.grid.to_json();

    if (first) {
        // one step with the first wedge
        const Region r1 = mode == "plain" ? r_w_step(G, wedges.front(), dict) : r_tilde_step(G, wedges.front(), bands);
        std::size_t mismatch = 0;
        for (std::size_t i = 0; i < r1.mask.size(); ++i) mismatch += (r1.mask[i] != 0) != (first->mask[i] != 0);
        rep.results["first_step_cells"] = r1.count();
        rep.results["first_step_expected_cells"] = first->count();
        rep.results["first_step_mismatch"] = mismatch;
        rep.check("first_step_outside_layer", r1.equal_up_to_layer(*first, layer) ? 0.0 : 1.0, "==", 0.0);
    }
    if (want_iter >= 0) rep.check("iterations", fx.iterations, "==", want_iter);
    if (want_final >= 0) rep.check("final_cells", static_cast<double>(fx.region.count()), "==", want_final);
    return rep;
}

ExperimentReport jld_correspondence(const ConfigBlock& root, unsigned jobs) {
    ExperimentReport rep;
    const auto sizes = positive_list(root, "sizes", {32, 64, 128});
    const double dp = root.number("dp", 0.5);
    const int half = root.integer("sigma_half", 8);
    const ConfigBlock bb = optional_block(root, "bump");
    const double p0 = bb.number("p0", 3.0), p1 = bb.number("p1", 1.0), radius = bb.number("radius", 1.5);
    bb.finish();
    const ConfigBlock vb = optional_block(root, "vanishing");
    const int vn = vb.integer("n", 32), vhalf = vb.integer("sigma_half", 4), over = vb.integer("oversample", 8);
    const double vdp = vb.number("dp", 1.0), vp0 = vb.number("p0", 6.0), vp1 = vb.number("p1", 2.0);
    const double vrad = vb.number("radius", 5.0), rcells = vb.number("R_cells", 3.0), margin = vb.number("margin", 1.2);
    vb.finish();
    const ConfigBlock t = optional_block(root, "tolerances");
    const double order_min = tol(rep, t, "order", 1.8);
    const double sym_tol = tol(rep, t, "symmetry", 1e-10);
    const double restr_tol = tol(rep, t, "restriction", 1e-8);
    const double factor = tol(rep, t, "vanishing_factor", 10.0);
    t.finish();
    root.finish();
    for (double n : sizes)
        if (n != std::floor(n) || static_cast<int>(n) % 2 != 0 || n < 8) throw ConfigError("config key 'sizes': even integers >= 8");
    if (half < 1 || vhalf < 1) throw ConfigError("config key 'sigma_half': must be positive");
    if (!(dp > 0) || !(vdp > 0)) throw ConfigError("config key 'dp': must be positive");

    const auto reps = parallel_map(
        sizes.size(),
        [&](std::size_t i) {
            const auto f = momentum_bump(static_cast<int>(sizes[i]), dp, p0, p1, radius);
            return std::pair{f.dx(), jld_transform_1p1(f, sigma_grid(f.dx(), half)).second};
        },
        jobs);
    Table ct{"convergence", {"n", "dx", "wave_residual", "order", "symmetry_defect", "restriction_defect"}, {}};
    double order = std::numeric_limits<double>::infinity(), sym = 0.0, restr = 0.0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& [dx, r] = reps[i];
        std::string o;
        if (i > 0) {
            const double oi = std::log2(reps[i - 1].second.wave_residual / r.wave_residual) / std::log2(sizes[i] / sizes[i - 1]);
            order = std::min(order, oi);
            o = fmt(oi);
        }
        sym = std::max(sym, r.symmetry_defect);
        restr = std::max(restr, r.restriction_defect);
        ct.add({fmt(sizes[i]), fmt(dx), fmt(r.wave_residual), o, fmt(r.symmetry_defect), fmt(r.restriction_defect)});
    }
    rep.tables.push_back(ct);
    if (reps.size() > 1) rep.check("wave_order", order, ">=", order_min);
    rep.check("symmetry_defect", sym, "<=", sym_tol);
    rep.check("restriction_defect", restr, "<=", restr_tol);

    const auto seed = momentum_bump(vn, vdp, vp0, vp1, vrad);
    const double R = rcells * seed.dx();
    const auto f = double_cone_null_projection(seed, R, over, margin);
    const auto [F, vr] = jld_transform_1p1(f, sigma_grid(seed.dx(), vhalf));
    const ConeVanishing before = measure_cone_vanishing(seed, R), after = measure_cone_vanishing(f, R);
    rep.results["vanishing"] = {{"R", R},
                                {"seed_on_double_cone", before.on_double_cone},
                                {"on_double_cone", after.on_double_cone},
                                {"on_lift", after.on_lift},
                                {"restriction_defect", vr.restriction_defect},
                                {"samples", after.samples},
                                {"ratio_to_restriction", vr.restriction_defect > 0 ? after.on_lift / vr.restriction_defect : 0.0}};
    // the projection must leave a nontrivial f and some sample points
    double n_seed = 0.0, n_f = 0.0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        n_seed += std::norm(seed.values[k]);
        n_f += std::norm(f.values[k]);
    }
    rep.check("projected_fraction", n_seed > 0 ? std::sqrt(n_f / n_seed) : 0.0, ">=", 1e-3);
    rep.check("vanishing_samples", after.samples, ">=", 1);
    const double scale = std::max(vr.restriction_defect, after.on_double_cone);
    rep.check("lift_vanishing_ratio", scale > 0 ? after.on_lift / scale : 0.0, "<=", factor);
    return rep;
}

using Pipeline = std::function<ExperimentReport(const ConfigBlock&, std::uint64_t, unsigned)>;

const std::map<std::string, Pipeline>& registry() {
    static const std::map<std::string, Pipeline> r{
        {"scaling-limit", [](const ConfigBlock& c, std::uint64_t, unsigned j) { return scaling_limit(c, j); }},
        {"kpr-validate", [](const ConfigBlock& c, std::uint64_t s, unsigned j) { return kpr_validate(c, s, j); }},
        {"convergence-probe", [](const ConfigBlock& c, std::uint64_t, unsigned) { return convergence_probe_exp(c); }},
        {"localize", [](const ConfigBlock& c, std::uint64_t, unsigned j) { return localize(c, j); }},
        {"opposite-cone", [](const ConfigBlock& c, std::uint64_t, unsigned) { return opposite_cone(c); }},
        {"jld-reduce", [](const ConfigBlock& c, std::uint64_t, unsigned j) { return jld_reduce(c, j); }},
        {"jld-correspondence", [](const ConfigBlock& c, std::uint64_t, unsigned j) { return jld_correspondence(c, j); }},
    };
    return r;
}

template <class E>
[[noreturn]] void rethrow_with(const std::string& id, const E& e) {
    throw E("experiment '" + id + "': " + e.what());
}

}  // namespace

std::vector<std::string> experiment_ids() {
    std::vector<std::string> ids;
    for (const auto& [k, v] : registry()) ids.push_back(k);
    return ids;
}

ExperimentReport run_experiment(const ExperimentConfig& config, unsigned jobs) {
    const auto it = registry().find(config.experiment);
    if (it == registry().end()) throw ConfigError("config key 'experiment': unknown experiment id '" + config.experiment + "'");
    ConfigBlock root(config.body, "");
    root.string("experiment");
    if (root.has("seed")) root.raw("seed");
    ExperimentReport rep;
    try {
        rep = it->second(root, static_cast<std::uint64_t>(config.seed), jobs);
    } catch (const ConfigError& e) {
        rethrow_with(config.experiment, e);
    } catch (const DomainError& e) {
        rethrow_with(config.experiment, e);
    } catch (const NumericalError& e) {
        rethrow_with(config.experiment, e);
    } catch (const BasisError& e) {
        rethrow_with(config.experiment, e);
    } catch (const FrameError& e) {
        rethrow_with(config.experiment, e);
    }
    rep.experiment = config.experiment;
    rep.config = config.body;
    rep.config_hash = config.hash();
    if (!config.out_dir.empty()) rep.write(config.out_dir);
    return rep;
}

}  // namespace lab
