#pragma once

#include "lab/hilbert.hpp"
#include "lab/kpr.hpp"

#include "json.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace lab {

using Vec3 = std::array<double, 3>;

// Parametric real position-space profiles.  The position function is
// p(|x - center|) sqrt(4 pi) Y_l0(x/|x|); for l = 0 that is just p(r).
//   gaussian:   amplitude exp(-r^2 / width^2)
//   shell:      -Laplace Phi for Phi = q/(4 pi r) S((r - r1)/(r2 - r1)),
//               S a smooth step from 0 to 1; integrates to q
//   difference: amplitude (exp(-r^2/width^2) - (width/width2)^2 exp(-r^2/width2^2)),
//               so that int p(r)/r d^3x = 0
//   zero
struct ProfileSpec {
    std::string family = "zero";
    double amplitude = 1.0;
    double width = 1.0;
    double width2 = 2.0;
    double q = 0.0;
    double r1 = 1.0, r2 = 2.0;
    int ell = 0;
    Vec3 center{0.0, 0.0, 0.0};

    static ProfileSpec zero() { return {}; }
    static ProfileSpec gaussian(double amplitude, double width, Vec3 center = {0, 0, 0}, int ell = 0);
    static ProfileSpec shell(double q, double r1, double r2);
    static ProfileSpec difference(double amplitude, double width, double width2);

    bool is_zero() const { return family == "zero"; }
    bool centered() const { return center == Vec3{0.0, 0.0, 0.0}; }
    // Radial factor p(r) about the center.
    double radial(double r) const;
    double value(const Vec3& x) const;
    // Radius about the center beyond which |p| < 1e-18 relative (exactly 0 for shells).
    double extent() const;
    // int p d^3x for l = 0, 0 otherwise.
    double integral() const;
    // The potential Phi of the shell family, q/(4 pi r) S(.).
    double shell_potential(double r) const;

    nlohmann::json to_json() const;
    static ProfileSpec from_json(const nlohmann::json& j);
    bool operator==(const ProfileSpec&) const = default;
};

// Momentum mode arrays of the profile's Fourier transform.  Centered profiles
// go through the radial transform; shifted Gaussians use the plane-wave
// expansion of exp(-ik.c) in closed form.
WaveFunction profile_transform(const ProfileSpec& p, const GridPtr& grid, const ModesPtr& modes);

TestVector make_test_vector(const ProfileSpec& h, const ProfileSpec& g, const GridPtr& grid, const ModesPtr& modes,
                            std::optional<std::string> locality = {});

// gamma = w^{-1/2} sigma^ + i w^{-3/2} rho^.
struct Charge {
    WaveFunction sigma_hat, rho_hat;
    double q = 0.0;
    std::optional<ProfileSpec> sigma, rho;

    static Charge from_profiles(const ProfileSpec& sigma, const ProfileSpec& rho, const GridPtr& grid,
                                const ModesPtr& modes);
    static Charge zero(const GridPtr& grid, const ModesPtr& modes);
    WaveFunction momentum() const;

    // {sigma: spec, rho: spec, q: number}; q is recomputed and checked on load.
    nlohmann::json to_json() const;
    static Charge from_json(const nlohmann::json& j, const GridPtr& grid, const ModesPtr& modes);

    Charge& operator+=(const Charge& o);
};

Charge operator+(Charge a, const Charge& b);
Charge scaled(const Charge& c, double s);

struct LinearFormParts {
    double rho_term = 0.0;    // int w^-2 conj(rho^) h^ d^3k
    double sigma_term = 0.0;  // -int conj(sigma^) g^ d^3k
    double total() const { return rho_term + sigma_term; }
};

// l_gamma(f) = -Im int conj(gamma) f d^3k.
LinearFormParts linear_form_parts(const Charge& gamma, const TestVector& f);
double linear_form(const Charge& gamma, const TestVector& f);

// rho^(0) from a fit a + b w^2 + c w^4 through the three lowest nodes of the
// l = 0 row.  Throws NumericalError when the two- and three-node fits differ
// by more than rel_tol.
double charge_of(const Charge& gamma, double rel_tol = 1e-4);

// gamma -> e^{i w t} gamma, written back in (sigma^, rho^) form.
Charge time_translate(const Charge& gamma, double t);

// |P_eps gamma|^2 for each eps.
std::vector<double> partial_norms(const Charge& gamma, const std::vector<double>& eps);

// rho sampled at cell centers of the cube [-L, L]^3 with n cells per side.
struct ChargeSamples {
    double L = 0.0, h = 0.0;
    int n = 0;
    std::vector<double> rho;

    static ChargeSamples from_profile(const ProfileSpec& p, double L, int n);
    Vec3 center(int i, int j, int k) const;
    double total() const;
};

struct Potential {
    double value = 0.0;
    bool regularized = false;  // x fell inside a sampling cell
};

// (1/4 pi) int rho(y)/|x - y| d^3y by direct summation over cells.  A cell
// containing x contributes with the cube average of 1/|x - y|.
Potential coulomb_potential(const ChargeSamples& rho, const Vec3& x);
// -(sphere integral of dPhi/dr) at radius R, i.e. the enclosed charge.
double gauss_flux_charge(const ChargeSamples& rho, double R, int degree = 8);

// kappa_f = int h^/w^2 d^3k.
double kappa(const TestVector& f);
// 2 pi^2 int h(x)/|x| d^3x evaluated from the profile.
double kappa_position(const ProfileSpec& h);

struct ScalingRow {
    double lambda = 0.0;
    double l_value = 0.0;
    double rho_term = 0.0, sigma_term = 0.0;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    std::vector<double> increments;  // |l_{k+1} - l_k|
    double target = 0.0;             // q kappa_f
    double extrapolated = 0.0;       // Richardson in 1/lambda from the last two rows
    double deviation = 0.0;          // |l_last - target| / |target|, or absolute when target = 0
    std::vector<std::string> warnings;
};

ScalingReport scaling_sequence(const Charge& gamma, const TestVector& f, const std::vector<double>& lambdas,
                               unsigned jobs = 0);

struct QuasifreeStateLabel {
    enum class Kind { vacuum, kpr };
    Kind kind = Kind::vacuum;
    const KprOperator* op = nullptr;
    std::string description = "vacuum";

    static QuasifreeStateLabel vacuum() { return {}; }
    static QuasifreeStateLabel kpr(const KprOperator& op, std::string description = "kpr");
};

struct WeylElement {
    WaveFunction vector;
    cplx phase = 1.0;
};

// W(u) W(v) = e^{-(i/2) Im<u,v>} W(u + v).
WeylElement weyl_product(const WeylElement& a, const WeylElement& b);

// e^{-|f|^2/4} or e^{-|Tf|^2/4}, times e^{i l_gamma(f)} when gamma is given.
cplx weyl_expectation(const QuasifreeStateLabel& state, const TestVector& f, const Charge* gamma = nullptr);
// The lambda -> infinity value e^{i q kappa_f} e^{-|f|^2/4}.
cplx weyl_scaling_limit(const TestVector& f, const Charge& gamma);

struct Implementer {
    WaveFunction v;
    double T = 0.0;
    double multiplier_sup = 0.0;  // max_j |(1 - e^{i w_j T})/(i w_j)|
};

// v = ((1 - e^{i w T})/(i w)) (i w gamma) with T = margin + region_diameter.
Implementer local_implementer(const Charge& gamma, double region_diameter, double margin = 1.0);
// |l_gamma(f) + Im<v, f>|.
double implementer_residual(const Charge& gamma, const Implementer& v, const TestVector& f);

}  // namespace lab
