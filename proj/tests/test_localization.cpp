#include "doctest.h"
#include "oracles.hpp"

#include "lab/errors.hpp"
#include "lab/localization.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lab;

namespace {

constexpr double kPi = std::numbers::pi;

// Dyadic grid reaching below the last shell of a 40-shell schedule, l <= 24
// and a 30 degree cone about +z.
struct Pipeline {
    GridPtr grid = std::make_shared<const RadialGrid>(RadialGrid::dyadic(-44, 6, 16));
    ModesPtr modes = std::make_shared<const ModeSet>(24);
    ConeProfile cone = build_chi({0, 0, 1}, kPi / 6, {}, 24);
    RadialChargeProfile profile = RadialChargeProfile::make(1.0, 1.0, 2.0);
    UcSplit split = build_u_c(profile, cone, grid, modes, 1.0);
    Charge gamma = profile.charge(grid, modes);
    KprOperator op{KprSchedule::geometric(40, 0.5, 4.0), grid, modes};

    static const Pipeline& get() {
        static const Pipeline p;
        return p;
    }
};

ProbeSpec probe_at(double polar_deg, double azimuth_deg, double r0 = 3.0) {
    const double a = polar_deg * kPi / 180, b = azimuth_deg * kPi / 180;
    ProbeSpec p;
    p.name = "probe " + std::to_string(static_cast<int>(polar_deg)) + "/" + std::to_string(static_cast<int>(azimuth_deg));
    p.direction = {std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)};
    p.r0 = r0;
    p.power = 24;
    return p;
}

std::vector<ProbeSpec> outside_family() {
    return {probe_at(180, 0),       probe_at(165, 0),      probe_at(165, 120),      probe_at(165, 240),
            probe_at(150, 60, 2.5), probe_at(150, 180, 3.5), probe_at(155, 300, 4.0), probe_at(170, 90, 2.0)};
}

}  // namespace

TEST_CASE("cone profile: unit outside the cone, no Y00 component, real coefficients") {
    const auto& P = Pipeline::get();
    const ConeProfile& c = P.cone;
    CHECK(std::abs(c.y00_overlap) <= 1e-10);
    CHECK(c.outside_defect <= 1e-8);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    for (int k = 0; k < 200; ++k) {
        const Vec3 n{d(rng), d(rng), d(rng)};
        if (!c.inside(n)) CHECK(c.value(n) == 1.0);
    }
    CHECK(c.value({0, 0, 1}) == doctest::Approx(1.0 - c.a * std::exp(-1.0)));
    // Gamma-reality of a real function
    for (int l = 0; l <= c.ell_max; ++l)
        for (int m = -l; m <= l; ++m) {
            const cplx a = c.chi[ModeSet::index(l, m)];
            const cplx b = c.chi[ModeSet::index(l, -m)];
            CHECK(std::abs(a - (m % 2 ? -1.0 : 1.0) * std::conj(b)) <= 1e-12);
        }
    // a tilted axis gives the same zonal data
    const auto tilted = build_chi({1, 1, 0}, kPi / 6, {}, 24);
    CHECK(tilted.a == doctest::Approx(c.a).epsilon(1e-13));
    CHECK(std::abs(tilted.y00_overlap) <= 1e-10);
    CHECK(tilted.value({-1, -1, 0}) == 1.0);
}

TEST_CASE("cone profile: normalization follows the bump mean") {
    auto mean = [](double ts) {
        return 2.0 * kPi * oracle::integrate([&](double t) { return std::exp(-1.0 / (1.0 - (t / ts) * (t / ts))) * std::sin(t); },
                                             0.0, ts);
    };
    const double opening = 0.6;
    const auto c1 = build_chi({0, 0, 1}, opening, {0.5, 1.0}, 8);
    const auto c2 = build_chi({0, 0, 1}, opening, {0.9, 1.0}, 8);
    CHECK(c1.a / c2.a == doctest::Approx(mean(0.9 * opening) / mean(0.5 * opening)).epsilon(1e-10));
    CHECK(c1.a == doctest::Approx(4.0 * kPi / mean(0.5 * opening)).epsilon(1e-10));
    // widening the cone with the bump fixed in angle
    const auto c3 = build_chi({0, 0, 1}, 1.2, {0.25, 1.0}, 8);
    CHECK(c3.a == doctest::Approx(c1.a).epsilon(1e-10));
}

TEST_CASE("cone profile: invalid constructions") {
    CHECK_THROWS_AS(build_chi({0, 0, 1}, 0.5, {0.8, 0.0}, 8), DomainError);
    CHECK_THROWS_AS(build_chi({0, 0, 1}, 0.5, {1.0, 1.0}, 8), DomainError);
    CHECK_THROWS_AS(build_chi({0, 0, 1}, 0.0, {}, 8), DomainError);
    CHECK_THROWS_AS(build_chi({0, 0, 1}, kPi / 2, {}, 8), DomainError);
    CHECK_THROWS_AS(build_chi({0, 0, 0}, 0.5, {}, 8), DomainError);
}

TEST_CASE("even part of the cone profile") {
    const auto e = Pipeline::get().cone.even_part();
    for (int l = 1; l <= e.ell_max; l += 2) CHECK(std::abs(e.chi[ModeSet::index(l, 0)]) == 0.0);
    CHECK(std::abs(e.chi[0]) <= 1e-10);
    CHECK(e.value({1, 0, 0}) == 1.0);
    CHECK(e.value({0, 0, 1}) == doctest::Approx(e.value({0, 0, -1})));
    CHECK(e.value({0, 0, 1}) < 1.0);
}

TEST_CASE("radial charge profile: potential, density and charge") {
    const auto& p = Pipeline::get().profile;
    for (double r : {0.1, 0.5, 0.999, 1.0}) CHECK(p.phi(r) == 0.0);
    for (double r : {2.0, 2.5, 7.0}) CHECK(std::abs(p.phi(r) - 1.0 / (4.0 * kPi * r)) <= 1e-10);
    for (std::size_t i = 0; i < p.radii.size(); ++i)
        if (p.radii[i] <= p.r1() || p.radii[i] >= p.r2()) CHECK(p.rho_samples[i] == 0.0);
    const double q = 4.0 * kPi * oracle::integrate([&](double r) { return p.rho(r) * r * r; }, p.r1(), p.r2());
    CHECK(std::abs(q - 1.0) <= 1e-5);
    CHECK(std::abs(charge_of(Pipeline::get().gamma) - 1.0) <= 1e-5);
}

TEST_CASE("u^C split: eta carries no Y00 and the remainder vanishes at k = 0") {
    const auto& P = Pipeline::get();
    const auto& s = P.split;
    CHECK(std::abs(s.eta[0]) <= 1e-12);
    CHECK(std::abs(s.R_at_0) <= 1e-6);
    CHECK(TestVector::from_parts(s.u_c, s.u_c.zeros_like()).reality_defect() <= 1e-12);

    const auto& w = P.grid->nodes();
    std::size_t j = 0;
    while (w[j] < 1e-3) ++j;
    double diff = 0, eta = 0;
    for (std::size_t k = 0; k < P.modes->size(); ++k) {
        diff = std::max(diff, std::abs(s.u_c.at(k, j) - s.eta[k]));
        eta = std::max(eta, std::abs(s.eta[k]));
    }
    CHECK(diff <= 1e-4);
    CHECK(eta > 1.0);
    // |u - eta - R(0)| <= c w at the lowest nodes, c fitted at w ~ 1e-3
    const double c = diff / w[j];
    for (std::size_t jj = 0; jj < 3; ++jj) {
        double d = 0;
        for (std::size_t k = 0; k < P.modes->size(); ++k) d = std::max(d, std::abs(P.split.u_c.at(k, jj) - s.eta[k]));
        CHECK(d <= c * w[jj] + 1e-13);
    }
}

TEST_CASE("u^C with chi = 1 reduces to rho^") {
    const auto& P = Pipeline::get();
    const auto s = build_u_c(P.profile, ConeProfile::constant_one(24), P.grid, P.modes, 1.0);
    for (const auto& e : s.eta) CHECK(e == 0.0);
    CHECK(std::abs(s.R_at_0 - 1.0) <= 1e-6);
    double d = 0, m = 0;
    for (std::size_t j = 0; j < P.grid->size(); ++j) {
        d = std::max(d, std::abs(s.u_c.at(0, j) - P.gamma.rho_hat.at(0, j)));
        m = std::max(m, std::abs(P.gamma.rho_hat.at(0, j)));
    }
    CHECK(d <= 1e-12 * m);
}

TEST_CASE("u^C refuses a cone profile whose L^2 tail is not resolved") {
    const auto& P = Pipeline::get();
    CHECK(P.cone.laplacian_tail > 1e-6);
    CHECK_THROWS_AS(build_u_c(P.profile, P.cone, P.grid, P.modes), NumericalError);
    CHECK_THROWS_AS(build_u_c(P.profile, build_chi({0, 0, 1}, kPi / 6, {}, 8), P.grid, P.modes, 1.0), DomainError);
}

TEST_CASE("probes: band-limited, real and certified outside the cone") {
    const auto& P = Pipeline::get();
    for (const auto& p : outside_family()) {
        CHECK(p.mass_inside(P.cone) <= 1e-10);
        const auto f = p.test_vector(P.grid, P.modes);
        CHECK(f.reality_defect() <= 1e-12);
    }
    CHECK(probe_at(0, 0).mass_inside(P.cone) > 0.5);
    // the angular factor integrates to 4 pi/(p+1)
    ProbeSpec p = probe_at(90, 0);
    p.power = 2;
    const auto big = build_chi({0, 0, 1}, 1.5, {0.5, 1.0}, 4);
    const double inside = 2.0 * kPi * oracle::integrate(
                                          [&](double t) {
                                              double s = 0;
                                              for (int k = 0; k < 400; ++k) {
                                                  const double b = 2.0 * kPi * (k + 0.5) / 400;
                                                  s += std::pow(0.5 * (1.0 + std::sin(t) * std::cos(b)), 2) / 400;
                                              }
                                              return s * std::sin(t);
                                          },
                                          0.0, 1.5);
    CHECK(p.mass_inside(big) == doctest::Approx(inside / (4.0 * kPi / 3.0)).epsilon(1e-8));
    CHECK(ProbeSpec::from_json(p.to_json()).power == 2);
    CHECK_THROWS_AS(probe_at(180, 0).test_vector(P.grid, std::make_shared<const ModeSet>(4)), DomainError);
}

TEST_CASE("approximate linear form converges for probes outside the cone") {
    const auto& P = Pipeline::get();
    const auto f = probe_at(180, 0).test_vector(P.grid, P.modes);
    const std::vector<double> eps{std::ldexp(1.0, -10), std::ldexp(1.0, -20), std::ldexp(1.0, -30)};
    const auto t = approx_linear_form(P.split.u_c, eps, f, P.gamma);
    CHECK(std::abs(t.l_value) > 1.0);
    CHECK(t.rows[2].error <= 1e-4);
    CHECK(t.rows[1].error < t.rows[0].error);
    CHECK(t.rows[2].error < t.rows[1].error);

    const auto none = RadialChargeProfile::make(0.0, 1.0, 2.0);
    const auto z = approx_linear_form(build_u_c(none, P.cone, P.grid, P.modes, 1.0).u_c, eps, f, none.charge(P.grid, P.modes));
    for (const auto& r : z.rows) CHECK(r.error <= 1e-12);

    ProbeSpec g = probe_at(180, 0);
    g.g_part = true;
    const auto tg = approx_linear_form(P.split.u_c, eps, g.test_vector(P.grid, P.modes), P.gamma);
    for (const auto& r : tg.rows) CHECK(r.error <= 1e-12);
}

TEST_CASE("intertwiner sequence is Cauchy and stays on the odd branch") {
    const auto& P = Pipeline::get();
    const auto r = build_intertwiner(P.op, P.split.u_c, 5, 35);
    CHECK(r.verdict == "Cauchy");
    CHECK(r.ratio < 1e-3);
    CHECK(r.v_T.has_value());
    CHECK(r.parity_defect <= 1e-10);
    CHECK(r.branch_defect <= 1e-12);
    CHECK(r.trace.size() == 30);

    // a schedule whose projections also contain Y00
    KprSchedule s = KprSchedule::geometric(40, 0.5, 4.0);
    s.filter = EllFilter::with_zero;
    const KprOperator with_zero(s, P.grid, P.modes);
    CHECK(build_intertwiner(with_zero, P.split.u_c, 5, 35).verdict == "Cauchy");

    // b_i = 1/(i+1) damps too slowly for the 1e-3 ratio over 30 shells
    const KprOperator slow(KprSchedule::default_schedule(), P.grid, P.modes);
    const auto rs = build_intertwiner(slow, P.split.u_c, 5, 35);
    CHECK(rs.verdict != "Cauchy");
    CHECK(rs.ratio < 0.1);
}

TEST_CASE("intertwining identity on probes outside the cone, negative control inside") {
    const auto& P = Pipeline::get();
    const auto r = build_intertwiner(P.op, P.split.u_c, 5, 35);
    REQUIRE(r.v_T.has_value());
    std::vector<TestVector> probes;
    for (const auto& p : outside_family()) probes.push_back(p.test_vector(P.grid, P.modes));
    probes.push_back(probe_at(0, 0).test_vector(P.grid, P.modes));
    const auto rows = verify_intertwining(P.op, *r.v_T, P.gamma, probes);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(rows[i].residual <= 1e-4);
        CHECK(rows[i].localized);
    }
    CHECK(rows[8].residual > 10 * 1e-4);
    CHECK(rows[8].residual > 0.1 * std::abs(rows[8].l_value));
    CHECK_FALSE(rows[8].localized);

    // linear in the charge
    const Charge g2 = scaled(P.gamma, 2.0);
    WaveFunction v2 = *r.v_T;
    v2 *= 2.0;
    const auto rows2 = verify_intertwining(P.op, v2, g2, {probes[0], probes[8]});
    CHECK(rows2[0].pairing == doctest::Approx(2.0 * rows[0].pairing).epsilon(1e-12));
    CHECK(rows2[1].residual == doctest::Approx(2.0 * rows[8].residual).epsilon(1e-10));
}

TEST_CASE("opposite-cone variants") {
    const auto& P = Pipeline::get();
    const auto rep = opposite_cone_experiment(KprSchedule::geometric(40, 0.5, 4.0), P.profile, P.cone, P.grid, P.modes, 5, 35, 1.0);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].verdict == "divergent");
    CHECK(rep.rows[1].verdict == "Cauchy");
    // Gamma with an odd-l schedule leaves the even-l part of v_n undamped,
    // so the increments stay at |eta_even| sqrt(ln 2).
    CHECK(rep.rows[2].expected == "Cauchy");
    CHECK(rep.rows[2].verdict == "divergent");
    CHECK(rep.rows[2].ratio == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("vacuum obstruction") {
    auto grid = std::make_shared<const RadialGrid>(RadialGrid::default_grid());
    auto ms = std::make_shared<const ModeSet>(2);
    const auto unit = ProfileSpec::gaussian(std::pow(kPi, -1.5), 1.0);
    const auto gamma = Charge::from_profiles(ProfileSpec::zero(), unit, grid, ms);
    const auto f = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::zero(), grid, ms);
    const auto rep = vacuum_obstruction(gamma, f, {1.0, 10.0, 100.0, 1000.0});
    CHECK(rep.verdict == "OBSTRUCTED");
    CHECK(rep.deviation < 1e-3);
    CHECK(rep.target == doctest::Approx(4.0 * kPi * kPi * kPi).epsilon(1e-5));
    // dilations preserve the norm up to the finite grid span
    for (const auto& r : rep.rows) CHECK(r.norm == doctest::Approx(rep.rows[0].norm).epsilon(5e-3));

    const auto neutral = gamma + scaled(Charge::from_profiles(ProfileSpec::zero(), ProfileSpec::gaussian(std::pow(kPi, -1.5) / 8, 2.0), grid, ms), -1.0);
    CHECK(vacuum_obstruction(neutral, f, {1.0, 10.0, 100.0, 1000.0}).verdict == "NOT-OBSTRUCTED");

    // the same under a KPR state: rotation-invariant f_lambda is left alone by T
    const auto& P = Pipeline::get();
    auto small = std::make_shared<const ModeSet>(2);
    const KprOperator op(KprSchedule::geometric(40, 0.5, 4.0), P.grid, small);
    const auto gk = Charge::from_profiles(ProfileSpec::zero(), unit, P.grid, small);
    const auto fk = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::zero(), P.grid, small);
    const auto rk = vacuum_obstruction(gk, fk, {1.0, 10.0, 100.0, 1000.0}, &op);
    CHECK(rk.verdict == "SECTOR-DISTINGUISHED");
    for (const auto& r : rk.rows) CHECK(r.t_defect == 0.0);
}

TEST_CASE("residuals are stable under radial refinement") {
    const auto& P = Pipeline::get();
    auto fine = std::make_shared<const RadialGrid>(RadialGrid::dyadic(-44, 6, 32));
    const auto split = build_u_c(P.profile, P.cone, fine, P.modes, 1.0);
    const auto gamma = P.profile.charge(fine, P.modes);
    const double eps = std::ldexp(1.0, -30);
    for (const auto& p : {probe_at(180, 0), probe_at(150, 60, 2.5)}) {
        const auto a = approx_linear_form(P.split.u_c, {eps}, p.test_vector(P.grid, P.modes), P.gamma);
        const auto b = approx_linear_form(split.u_c, {eps}, p.test_vector(fine, P.modes), gamma);
        CHECK(std::abs(a.rows[0].error - b.rows[0].error) < 10 * 1e-4);
        CHECK(a.l_value == doctest::Approx(b.l_value).epsilon(1e-8));
    }
}
