#include "doctest.h"
#include "oracles.hpp"

#include "lab/charges.hpp"
#include "lab/errors.hpp"

#include <cmath>
#include <numbers>

using namespace lab;

namespace {

constexpr double kPi = std::numbers::pi;
const double kPi3 = kPi * kPi * kPi;

GridPtr default_grid() {
    static GridPtr g = std::make_shared<const RadialGrid>(RadialGrid::default_grid());
    return g;
}

ModesPtr modes(int L) { return std::make_shared<const ModeSet>(L); }

// Gaussian bump with unit integral.
ProfileSpec unit_bump(double s = 1.0) { return ProfileSpec::gaussian(1.0 / std::pow(kPi * s * s, 1.5), s); }

Charge rho_only(const ProfileSpec& rho, int L = 2) {
    return Charge::from_profiles(ProfileSpec::zero(), rho, default_grid(), modes(L));
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double max_abs(const WaveFunction& v) {
    double m = 0;
    for (auto z : v.coeffs()) m = std::max(m, std::abs(z));
    return m;
}

}  // namespace

TEST_CASE("linear form vanishes for the zero charge and for sigma-free charges against g-only vectors") {
    auto ms = modes(2);
    const auto f = make_test_vector(ProfileSpec::gaussian(1.0, 0.7), ProfileSpec::gaussian(-0.4, 1.3), default_grid(), ms);
    CHECK(linear_form(Charge::zero(default_grid(), ms), f) == 0.0);
    const auto g_only = make_test_vector(ProfileSpec::zero(), ProfileSpec::gaussian(1.0, 0.8), default_grid(), ms);
    CHECK(std::abs(linear_form(rho_only(unit_bump(), 2), g_only)) <= 1e-14);
}

TEST_CASE("Gaussian charge against a Gaussian h matches the erf potential in position space") {
    for (double s : {0.5, 1.0, 1.7}) {
        const double hw = 0.8;
        const auto rho = unit_bump(s);
        const auto f = make_test_vector(ProfileSpec::gaussian(1.0, hw), ProfileSpec::zero(), default_grid(), modes(2));
        const double l = linear_form(rho_only(rho), f);
        // (2 pi)^3 int Phi h d^3x with Phi = erf(r/s)/(4 pi r)
        const double ref = 8.0 * kPi3 * 4.0 * kPi *
                           oracle::integrate_to_inf(
                               [&](double r) {
                                   return r == 0 ? 0.0 : std::erf(r / s) / (4.0 * kPi * r) * std::exp(-r * r / (hw * hw)) * r * r;
                               },
                               0.0);
        CHECK(rel(l, ref) <= 1e-5);
    }
}

TEST_CASE("linear form is additive in the charge and linear in f") {
    auto ms = modes(2);
    const auto c1 = Charge::from_profiles(ProfileSpec::gaussian(0.3, 0.9), unit_bump(0.6), default_grid(), ms);
    const auto c2 = Charge::from_profiles(ProfileSpec::gaussian(-0.2, 1.4), ProfileSpec::gaussian(0.5, 1.1), default_grid(), ms);
    const auto f = make_test_vector(ProfileSpec::gaussian(1.0, 0.7), ProfileSpec::gaussian(0.6, 1.2), default_grid(), ms);
    const auto sum = c1 + c2;
    CHECK(sum.q == doctest::Approx(c1.q + c2.q).epsilon(1e-14));
    CHECK(linear_form(sum, f) == doctest::Approx(linear_form(c1, f) + linear_form(c2, f)).epsilon(1e-12));
    const auto f2 = make_test_vector(ProfileSpec::gaussian(-3.0, 0.7), ProfileSpec::gaussian(-1.8, 1.2), default_grid(), ms);
    CHECK(linear_form(c1, f2) == doctest::Approx(-3.0 * linear_form(c1, f)).epsilon(1e-12));
    CHECK(linear_form(scaled(c1, 2.5), f) == doctest::Approx(2.5 * linear_form(c1, f)).epsilon(1e-12));
}

TEST_CASE("charge_of recovers the integral of rho") {
    const auto c = rho_only(unit_bump(0.8));
    CHECK(std::abs(charge_of(c) - 1.0) <= 1e-4);
    CHECK(std::abs(charge_of(c) - c.q) <= 1e-4);

    const auto shell = rho_only(ProfileSpec::shell(2.5, 1.0, 2.0));
    CHECK(std::abs(charge_of(shell) - 2.5) <= 1e-4 * 2.5);

    // odd under parity
    const auto odd = rho_only(ProfileSpec::gaussian(1.0, 1.0, {0, 0, 0}, 1));
    CHECK(odd.q == 0.0);
    CHECK(std::abs(charge_of(odd)) <= 1e-12);

    // a shifted bump still carries its charge
    const auto shifted = Charge::from_profiles(ProfileSpec::zero(), ProfileSpec::gaussian(1.0 / std::pow(kPi, 1.5), 1.0, {0.5, -0.3, 1.1}),
                                               default_grid(), modes(6));
    CHECK(std::abs(charge_of(shifted) - 1.0) <= 1e-4);
    CHECK(make_test_vector(*shifted.rho, ProfileSpec::zero(), default_grid(), modes(6)).reality_defect() <= 1e-12);
}

TEST_CASE("charge_of reports an unresolved low-frequency limit") {
    auto g = std::make_shared<const RadialGrid>(RadialGrid::log_spaced(0.8, 50.0, 256));
    const auto c = Charge::from_profiles(ProfileSpec::zero(), ProfileSpec::gaussian(1.0, 2.0), g, modes(0));
    CHECK_THROWS_AS(charge_of(c), NumericalError);
}

TEST_CASE("stored q must match the generating profile") {
    auto ms = modes(2);
    const auto c = Charge::from_profiles(ProfileSpec::gaussian(0.2, 1.0), ProfileSpec::shell(1.5, 0.5, 1.5), default_grid(), ms);
    const auto j = c.to_json();
    const auto back = Charge::from_json(j, default_grid(), ms);
    CHECK(back.q == c.q);
    CHECK(*back.rho == *c.rho);
    CHECK(*back.sigma == *c.sigma);
    CHECK(back.rho_hat.coeffs() == c.rho_hat.coeffs());
    auto bad = j;
    bad["q"] = 2.0;
    CHECK_THROWS_AS(Charge::from_json(bad, default_grid(), ms), ConfigError);
    auto unknown = j;
    unknown["rho"]["family"] = "cube";
    CHECK_THROWS_AS(Charge::from_json(unknown, default_grid(), ms), ConfigError);
}

TEST_CASE("profile JSON round trip") {
    for (const auto& p : {ProfileSpec::gaussian(0.7, 1.3, {0.1, 0.2, -0.5}), ProfileSpec::gaussian(1.0, 0.4, {0, 0, 0}, 2),
                          ProfileSpec::shell(-1.0, 0.5, 3.0), ProfileSpec::difference(2.0, 0.5, 1.5), ProfileSpec::zero()}) {
        CHECK(ProfileSpec::from_json(p.to_json()) == p);
    }
    CHECK_THROWS_AS(ProfileSpec::shell(1.0, 2.0, 1.0), DomainError);
}

TEST_CASE("shell profile: smooth, compact and generated by its potential") {
    const auto p = ProfileSpec::shell(1.0, 1.0, 2.0);
    CHECK(p.radial(0.99) == 0.0);
    CHECK(p.radial(2.01) == 0.0);
    CHECK(p.shell_potential(3.0) == doctest::Approx(1.0 / (4.0 * kPi * 3.0)).epsilon(1e-15));
    CHECK(p.shell_potential(0.5) == 0.0);
    // -Laplace Phi = -(r Phi)''/r by central differences
    for (double r : {1.2, 1.5, 1.8}) {
        const double d = 1e-4;
        auto u = [&](double x) { return x * p.shell_potential(x); };
        const double lap = (u(r + d) - 2 * u(r) + u(r - d)) / (d * d) / r;
        CHECK(p.radial(r) == doctest::Approx(-lap).epsilon(1e-5));
    }
    const double total = 4.0 * kPi * oracle::integrate([&](double r) { return p.radial(r) * r * r; }, 1.0, 2.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Coulomb potential: far-field monopole, dipole decay and the zero density") {
    const auto bump = ChargeSamples::from_profile(unit_bump(0.5), 2.5, 40);
    CHECK(bump.total() == doctest::Approx(1.0).epsilon(1e-6));
    for (const Vec3& x : {Vec3{25.0, 0.0, 0.0}, Vec3{0.0, 14.0, 14.0}, Vec3{-10.0, 12.0, 18.0}}) {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        const auto phi = coulomb_potential(bump, x);
        CHECK_FALSE(phi.regularized);
        CHECK(rel(phi.value, 1.0 / (4.0 * kPi * r)) <= 1e-4);
    }
    CHECK(coulomb_potential(bump, {0.01, 0.02, 0.03}).regularized);

    const auto dipole = ChargeSamples::from_profile(ProfileSpec::gaussian(1.0, 0.5, {0, 0, 0}, 1), 2.5, 40);
    CHECK(std::abs(dipole.total()) <= 1e-14);
    const Vec3 dir{0.3, 0.2, 0.932737905};
    const double r1 = 10.0, r2 = 40.0;
    const double p1 = std::abs(coulomb_potential(dipole, {r1 * dir[0], r1 * dir[1], r1 * dir[2]}).value);
    const double p2 = std::abs(coulomb_potential(dipole, {r2 * dir[0], r2 * dir[1], r2 * dir[2]}).value);
    CHECK(std::log(p2 / p1) / std::log(r2 / r1) <= -2.0 + 1e-3);

    const auto zero = ChargeSamples::from_profile(ProfileSpec::zero(), 1.0, 8);
    CHECK(coulomb_potential(zero, {3.0, 0.0, 0.0}).value == 0.0);
}

TEST_CASE("Gauss flux agrees with the low-frequency limit of rho^ on the shell family") {
    for (const auto& sh : {ProfileSpec::shell(1.0, 1.0, 2.0), ProfileSpec::shell(-2.0, 0.5, 1.5)}) {
        const auto samples = ChargeSamples::from_profile(sh, sh.r2 * 1.05, 96);
        const double flux = gauss_flux_charge(samples, 2.0 * sh.r2);
        const double q = charge_of(rho_only(sh));
        CHECK(rel(flux, q) <= 1e-4);
    }
}

TEST_CASE("kappa: Gaussian value, null profile, position-space agreement and dilation invariance") {
    auto ms = modes(2);
    const auto h = ProfileSpec::gaussian(1.0, 1.0);
    const auto f = make_test_vector(h, ProfileSpec::zero(), default_grid(), ms);
    // 2 pi^2 4 pi int r e^{-r^2} dr
    const double ref = 2.0 * kPi * kPi * 4.0 * kPi * oracle::integrate_to_inf([](double r) { return r * std::exp(-r * r); }, 0.0);
    CHECK(ref == doctest::Approx(4.0 * kPi3).epsilon(1e-12));
    CHECK(rel(kappa(f), ref) <= 1e-5);
    CHECK(rel(kappa_position(h), ref) <= 1e-10);

    const auto null = ProfileSpec::difference(1.0, 0.6, 1.4);
    CHECK(std::abs(kappa(make_test_vector(null, ProfileSpec::zero(), default_grid(), ms))) <= 1e-6);
    CHECK(std::abs(kappa_position(null)) <= 1e-10);

    const auto shifted = ProfileSpec::gaussian(0.8, 0.7, {0.4, 0.0, -0.9});
    CHECK(rel(kappa(make_test_vector(shifted, ProfileSpec::zero(), default_grid(), modes(8))), kappa_position(shifted)) <= 1e-5);
    // the shell potential vanishes at the origin, so kappa does too; the
    // scale is 2 pi^2 q / r1
    const auto sh = ProfileSpec::shell(1.0, 0.5, 1.5);
    CHECK(std::abs(kappa_position(sh)) <= 1e-10);
    CHECK(std::abs(kappa(make_test_vector(sh, ProfileSpec::zero(), default_grid(), ms))) <= 1e-5 * 2.0 * kPi * kPi / 0.5);

    for (double lambda : {0.5, 2.0, 7.3}) {
        const auto d = dilate(f, lambda);
        CHECK(rel(kappa(d.tv), kappa(f)) <= 1e-8);
    }
}

TEST_CASE("scaling limit approaches q kappa") {
    auto ms = modes(2);
    const auto f = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::zero(), default_grid(), ms);
    const auto r = scaling_sequence(rho_only(unit_bump()), f, {1.0, 10.0, 100.0, 1000.0});
    CHECK(r.target == doctest::Approx(4.0 * kPi3).epsilon(1e-5));
    CHECK(r.deviation <= 1e-3);
    for (std::size_t i = 1; i < r.increments.size(); ++i) CHECK(r.increments[i] < r.increments[i - 1]);
    CHECK(rel(r.extrapolated, r.target) <= 1e-3);

    // q = 0: a unit bump minus a wider bump of the same integral
    const auto neutral = rho_only(unit_bump(1.0)) + scaled(rho_only(unit_bump(2.0)), -1.0);
    CHECK(neutral.q == doctest::Approx(0.0));
    const auto z = scaling_sequence(neutral, f, {1.0, 10.0, 100.0, 1000.0});
    CHECK(std::abs(z.rows.back().l_value) <= 1e-3 * std::abs(z.rows.front().l_value));
    CHECK(std::abs(z.rows.back().l_value) < std::abs(z.rows[2].l_value));
}

TEST_CASE("sigma contribution decays like 1/lambda") {
    auto ms = modes(2);
    const auto c = Charge::from_profiles(ProfileSpec::gaussian(1.0, 0.8), ProfileSpec::zero(), default_grid(), ms);
    const auto f = make_test_vector(ProfileSpec::zero(), ProfileSpec::gaussian(1.0, 1.2), default_grid(), ms);
    const auto r = scaling_sequence(c, f, {10.0, 100.0, 1000.0});
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        const double slope = std::log(std::abs(r.rows[i].sigma_term / r.rows[i - 1].sigma_term)) /
                             std::log(r.rows[i].lambda / r.rows[i - 1].lambda);
        CHECK(std::abs(slope + 1.0) <= 0.05);
    }
}

TEST_CASE("Weyl expectations") {
    auto ms = modes(2);
    const auto vac = QuasifreeStateLabel::vacuum();
    const TestVector zero_f = make_test_vector(ProfileSpec::zero(), ProfileSpec::zero(), default_grid(), ms);
    CHECK(weyl_expectation(vac, zero_f) == cplx(1.0, 0.0));

    auto f = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::gaussian(0.5, 0.8), default_grid(), ms);
    const double n2 = norm2(f.wf);
    const double s = std::sqrt(4.0 / n2);
    f = make_test_vector(ProfileSpec::gaussian(s, 1.0), ProfileSpec::gaussian(0.5 * s, 0.8), default_grid(), ms);
    CHECK(std::abs(weyl_expectation(vac, f) - std::exp(-1.0)) <= 1e-12);

    const auto gamma = rho_only(unit_bump());
    const cplx charged = weyl_expectation(vac, f, &gamma);
    CHECK(std::abs(std::abs(charged) - std::exp(-1.0)) <= 1e-12);
    CHECK(std::arg(charged) == doctest::Approx(std::remainder(linear_form(gamma, f), 2.0 * kPi)).epsilon(1e-12));

    const cplx lim = weyl_scaling_limit(f, gamma);
    CHECK(std::abs(std::abs(lim) - std::exp(-1.0)) <= 1e-12);

    // rotation invariant f: the KPR state agrees with the vacuum
    auto grid = std::make_shared<const RadialGrid>(RadialGrid::dyadic(-44, 6, 8));
    const KprOperator op(KprSchedule::default_schedule(), grid, ms);
    const auto state = QuasifreeStateLabel::kpr(op);
    const auto fr = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::gaussian(0.3, 0.5), grid, ms);
    CHECK(weyl_expectation(state, fr) == weyl_expectation(vac, fr));

    // a vector reaching below the last shell is outside the domain of T
    const auto fa = make_test_vector(ProfileSpec::gaussian(1.0, 1.0, {0, 0, 0}, 1), ProfileSpec::zero(), grid, ms);
    CHECK_THROWS_AS(weyl_expectation(state, fa), DomainError);
}

TEST_CASE("Weyl product phase") {
    auto ms = modes(2);
    const auto u = make_test_vector(ProfileSpec::gaussian(1.0, 1.0), ProfileSpec::gaussian(0.5, 0.8), default_grid(), ms).wf;
    const auto v = make_test_vector(ProfileSpec::gaussian(-0.4, 0.6, {0.3, 0, 0}), ProfileSpec::gaussian(0.9, 1.1), default_grid(), ms).wf;
    const WeylElement a{u, 1.0}, b{v, 1.0};
    const auto ab = weyl_product(a, b);
    const auto ba = weyl_product(b, a);
    CHECK(std::abs(std::abs(ab.phase) - 1.0) <= 1e-12);
    // W(u)W(v) = e^{-i Im<u,v>} W(v)W(u)
    const cplx comm = ab.phase / ba.phase;
    CHECK(std::abs(comm - std::polar(1.0, -inner_product(u, v).imag())) <= 1e-12);
}

TEST_CASE("time translation preserves q and the pointwise modulus of gamma") {
    auto ms = modes(2);
    const auto c = Charge::from_profiles(ProfileSpec::gaussian(0.4, 0.9), unit_bump(0.7), default_grid(), ms);
    const auto c0 = time_translate(c, 0.0);
    CHECK(c0.rho_hat.coeffs() == c.rho_hat.coeffs());
    const auto t1 = time_translate(time_translate(c, 0.7), 1.1);
    const auto t2 = time_translate(c, 1.8);
    double e = 0;
    for (std::size_t k = 0; k < t1.rho_hat.coeffs().size(); ++k)
        e = std::max(e, std::abs(t1.rho_hat.coeffs()[k] - t2.rho_hat.coeffs()[k]));
    CHECK(e <= 1e-12 * max_abs(c.rho_hat) * 1e4);
    CHECK(t2.q == c.q);
    const auto a = c.momentum(), b = t2.momentum();
    for (std::size_t k = 0; k < a.coeffs().size(); ++k)
        CHECK(std::abs(std::abs(a.coeffs()[k]) - std::abs(b.coeffs()[k])) <= 1e-9 * std::abs(a.coeffs()[k]) + 1e-300);
}

TEST_CASE("partial norms of a charged gamma diverge logarithmically") {
    const auto c = rho_only(unit_bump());
    const auto pn = partial_norms(c, {1e-2, 1e-3});
    // |gamma|^2 w^2 -> 4 pi q^2 / w near 0
    CHECK(rel(pn[1] - pn[0], 4.0 * kPi * std::log(10.0)) <= 1e-3);
    const auto neutral = rho_only(unit_bump(1.0)) + scaled(rho_only(unit_bump(2.0)), -1.0);
    const auto pz = partial_norms(neutral, {1e-2, 1e-3});
    CHECK(pz[1] - pz[0] <= 1e-4 * pz[0]);
}

TEST_CASE("local implementer: zero charge, multiplier bound and probe residuals") {
    auto ms = modes(2);
    const auto none = local_implementer(Charge::zero(default_grid(), ms), 2.0, 3.0);
    CHECK(max_abs(none.v) == 0.0);
    CHECK(none.T == 5.0);
    CHECK(none.multiplier_sup <= none.T);
    CHECK(none.multiplier_sup >= none.T * (1.0 - 1e-6));

    const auto gamma = Charge::from_profiles(ProfileSpec::gaussian(0.3, 0.5), unit_bump(0.5), default_grid(), ms);
    const auto im = local_implementer(gamma, 2.0, 3.0);
    for (const auto& [h, g] : std::vector<std::pair<ProfileSpec, ProfileSpec>>{
             {ProfileSpec::gaussian(1.0, 0.5), ProfileSpec::zero()},
             {ProfileSpec::zero(), ProfileSpec::gaussian(1.0, 0.5)},
             {ProfileSpec::gaussian(0.7, 0.4, {0.3, 0.2, 0.0}), ProfileSpec::gaussian(-0.5, 0.45)},
             {ProfileSpec::difference(1.0, 0.3, 0.5), ProfileSpec::gaussian(0.2, 0.3, {0, 0, 0}, 1)}}) {
        const auto f = make_test_vector(h, g, default_grid(), ms);
        const double l = linear_form(gamma, f);
        CHECK(implementer_residual(gamma, im, f) <= 1e-5 * std::max(1.0, std::abs(l)));
    }
}
