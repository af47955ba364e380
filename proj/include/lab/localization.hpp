#pragma once

#include "lab/charges.hpp"
#include "lab/kpr.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lab {

// Bump exp(-1/(1 - (angle/theta_s)^2)) on the cap of half-angle
// theta_s = support_fraction * opening about the cone axis.
struct BumpParams {
    double support_fraction = 0.8;
    double amplitude = 1.0;
};

// chi = 1 - a phi with phi the bump and a = <Y00, 1>/<Y00, phi>.
struct ConeProfile {
    Vec3 axis{0.0, 0.0, 1.0};
    double opening = 0.0;
    BumpParams bump;
    double a = 0.0;
    int ell_max = 0;
    std::vector<cplx> chi;  // Y_lm coefficients, ModeSet ordering
    // a times the zonal bump coefficients in the axis frame, up to 4 ell_max;
    // chi_lm = sqrt(4 pi) delta_l0 - zonal_l sqrt(4 pi/(2l+1)) conj(Y_lm(axis)).
    std::vector<double> zonal;
    bool even_only = false;  // chi replaced by its even part

    // Diagnostics filled by build_chi.
    double y00_overlap = 0.0;        // <Y00, chi>
    double outside_defect = 0.0;     // max |chi - 1| on quadrature nodes outside the cone
    double laplacian_tail = 0.0;     // |L^2 chi above ell_max| / |L^2 chi|
    double coefficient_decay = 0.0;  // |chi_l| at ell_max relative to the largest |chi_l|

    // Exact chi at a unit vector (not the truncated expansion).
    double value(const Vec3& n) const;
    double bump_value(double angle) const;
    // chi^{+-C}: (chi(x) + chi(-x))/2, equal to 1 outside C u -C.
    ConeProfile even_part() const;
    bool inside(const Vec3& n) const;

    // Test-only: chi = 1, which violates <Y00, chi> = 0.
    static ConeProfile constant_one(int ell_max);

    nlohmann::json to_json() const;
};

ConeProfile build_chi(const Vec3& axis, double opening, const BumpParams& bump, int ell_max);

// The potential Phi and density rho = -Laplace Phi of the shell family.
struct RadialChargeProfile {
    ProfileSpec spec;
    std::vector<double> radii, phi_samples, rho_samples;

    static RadialChargeProfile make(double q, double r1, double r2, std::size_t samples = 401);
    double q() const { return spec.q; }
    double r1() const { return spec.r1; }
    double r2() const { return spec.r2; }
    double phi(double r) const { return spec.shell_potential(r); }
    double rho(double r) const { return spec.radial(r); }
    Charge charge(const GridPtr& grid, const ModesPtr& modes) const;
};

struct UcSplit {
    WaveFunction u_c;
    std::vector<cplx> eta;  // angular coefficients of the w -> 0 limit
    cplx R_at_0 = 0.0;      // (u - eta) at k = 0
    double laplacian_tail = 0.0;
};

// u^C = F[rho chi + (Phi/r^2) L^2 chi] per (l, m).  Throws NumericalError when
// the L^2 chi tail above the mode cutoff exceeds max_tail.
UcSplit build_u_c(const RadialChargeProfile& profile, const ConeProfile& cone, const GridPtr& grid,
                  const ModesPtr& modes, double max_tail = 1e-6);

// v_n = i w^{-3/2} P_{eps} u^C.
WaveFunction v_n(const WaveFunction& u_c, double eps);

// h(x) = amplitude exp(-(r - r0)^2/width^2) ((1 + x.n/|x|)/2)^power, used as
// the h or the g part of a test vector.  Band-limited to l <= power.
struct ProbeSpec {
    std::string name = "probe";
    double r0 = 3.0, width = 0.5;
    Vec3 direction{0.0, 0.0, -1.0};
    int power = 24;
    double amplitude = 1.0;
    bool g_part = false;

    TestVector test_vector(const GridPtr& grid, const ModesPtr& modes) const;
    // Share of int |h| inside the cone (and inside -C when opposite is set).
    double mass_inside(const ConeProfile& cone, bool opposite = false) const;

    nlohmann::json to_json() const;
    static ProbeSpec from_json(const nlohmann::json& j);
};

struct ErrorRow {
    double eps = 0.0;
    double pairing = 0.0;  // -Im<v_n, f>
    double error = 0.0;    // |l_gamma(f) + Im<v_n, f>|
};

struct ErrorTable {
    double l_value = 0.0;
    std::vector<ErrorRow> rows;
};

ErrorTable approx_linear_form(const WaveFunction& u_c, const std::vector<double>& eps, const TestVector& f,
                              const Charge& gamma);

struct TraceRow {
    int n = 0;
    double increment = 0.0;  // |T v_n - T v_{n-1}|
    double distance = 0.0;   // |T v_n - T v_{n0}|
};

struct IntertwinerResult {
    std::optional<WaveFunction> v_T;
    std::vector<TraceRow> trace;
    std::string verdict;  // "Cauchy", "divergent" or "inconclusive"
    double ratio = 0.0;   // last increment / first increment
    double parity_defect = 0.0;  // |Gamma v + v| / |v| at n1
    double branch_defect = 0.0;  // |T v - T1 v| at n1 (T only)
    bool truncated = false;
};

// Iterates T v_n for n = n0 .. n1 with T (Gamma) or T_hat.
IntertwinerResult build_intertwiner(const KprOperator& op, const WaveFunction& u_c, int n0, int n1,
                                    TSelect which = TSelect::T, double cauchy_ratio = 1e-3);

struct ResidualRow {
    std::string name;
    double l_value = 0.0;
    double pairing = 0.0;  // -Im<v_T, T f>
    double residual = 0.0;
    double mass_inside = 0.0;
    bool localized = true;
};

std::vector<ResidualRow> verify_intertwining(const KprOperator& op, const WaveFunction& v_T, const Charge& gamma,
                                             const std::vector<TestVector>& probes, TSelect which = TSelect::T,
                                             double tol = 1e-4);

struct VariantVerdict {
    std::string variant;
    std::string chi;       // "full" or "even"
    std::string filter;    // schedule ell filter
    std::string conjugation;  // "Gamma" or "Gamma_hat"
    std::string expected;
    std::string verdict;
    double ratio = 0.0;
};

struct VerdictReport {
    std::vector<VariantVerdict> rows;
};

// Runs the three variants: Gamma_hat with full chi, Gamma_hat with the even
// part, and Gamma with an odd-l schedule and the even part.
VerdictReport opposite_cone_experiment(const KprSchedule& base, const RadialChargeProfile& profile, const ConeProfile& cone,
                                       const GridPtr& grid, const ModesPtr& modes, int n0, int n1,
                                       double max_tail = 1e-6);

struct ObstructionRow {
    double lambda = 0.0;
    double norm = 0.0;  // |f_lambda|
    double l_value = 0.0;
    double t_defect = -1.0;  // max |T f_lambda - f_lambda| when a KPR state is given
};

struct ObstructionReport {
    std::vector<ObstructionRow> rows;
    double target = 0.0;  // q kappa_f
    double deviation = 0.0;
    std::string verdict;  // OBSTRUCTED, NOT-OBSTRUCTED or SECTOR-DISTINGUISHED
};

ObstructionReport vacuum_obstruction(const Charge& gamma, const TestVector& f, const std::vector<double>& lambdas,
                                     const KprOperator* op = nullptr, double tol = 1e-3);

}  // namespace lab
