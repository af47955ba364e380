#pragma once

#include "lab/hilbert.hpp"

#include "json.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace lab {

// Which angular momenta the shell projections Q~_i may contain.
enum class EllFilter { positive, odd_only, with_zero };

// Shell boundaries eps_1 > ... > eps_{N+1}, amplitudes b_1..b_N and the
// per-shell angular cutoff.  Index i is 1-based in the accessors.  The
// boundaries are kept as ln(eps_i) so that long geometric schedules do not
// underflow.
struct KprSchedule {
    std::vector<double> log_eps;  // N + 1 values
    std::vector<double> bs;        // N values
    std::vector<int> ell_cut;      // N values
    EllFilter filter = EllFilter::positive;

    int shells() const { return static_cast<int>(bs.size()); }
    double log_eps_at(int i) const { return log_eps[static_cast<std::size_t>(i - 1)]; }
    double eps(int i) const { return std::exp(log_eps_at(i)); }
    // ln(eps_i / eps_{i+1})
    double log_ratio(int i) const { return log_eps_at(i) - log_eps_at(i + 1); }
    double b(int i) const { return bs[static_cast<std::size_t>(i - 1)]; }
    int cut(int i) const { return ell_cut[static_cast<std::size_t>(i - 1)]; }
    bool includes(int i, int l) const;
    // Number of (l, m) pairs in Q~_i; (cut+1)^2 - 1 for the plain filter.
    int rank(int i) const;

    // eps_i = ratio^i, b_i = (i + offset)^-exponent, ell_cut(i) = i.
    static KprSchedule geometric(int shells, double ratio = 0.5, double exponent = 1.0, double offset = 1.0);
    static KprSchedule default_schedule() { return geometric(40); }

    static KprSchedule from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
    bool eps_decreasing = true;
    bool b_in_range = true;
    bool b_trend = true;
    bool kpr_like = true;
    std::vector<int> ranks;
    std::vector<double> energy_terms, energy_partial;
    std::vector<double> kpr_terms, kpr_partial;
    // Smallest p with ln(eps_i/eps_{i+1}) <= ln(eps_1/eps_2) i^p for all i.
    double log_ratio_exponent = 0.0;
    bool kpr_sum_cauchy = true;
};

// kpr_tol bounds the last increment of sum b_i^2 ln(eps_i/eps_{i+1})
// relative to its partial sum.
ValidationReport validate_schedule(const KprSchedule& s, double kpr_tol = 1e-2);

enum class TSelect { T1, T2, T, T_hat };

struct Applied {
    WaveFunction wf;
    // Input had weight below eps_{N+1} in a mode the untruncated operator acts on.
    bool truncated = false;
    // |omega_r^{-1/2} (1+G)/2 v|: finite for every grid vector, kept as a
    // record of how deep into the T2 domain the input reaches.
    double domain_norm = 0.0;
};

class KprOperator {
public:
    // require_admissible = false accepts b_i outside (0,1); only the boundary
    // checks on eps are kept.  Used for degenerate reference cases.
    KprOperator(KprSchedule s, GridPtr grid, ModesPtr modes, bool require_admissible = true);

    const KprSchedule& schedule() const { return s_; }
    const RadialGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const ModesPtr& modes_ptr() const { return modes_; }
    int shells() const { return s_.shells(); }

    // 0 above eps_1, i in 1..N on [eps_{i+1}, eps_i), N + 1 below eps_{N+1}.
    int shell_of(std::size_t node) const { return shell_[node]; }
    const std::vector<int>& shell_index() const { return shell_; }
    // ln(eps_i/eps_{i+1}), the closed form of int w^2 w^-3 dw over shell i.
    double xi_norm(int i) const { return xi_norm_[static_cast<std::size_t>(i - 1)]; }
    // sum_j w_j w_j^-3 over the nodes of shell i.
    double xi_norm_discrete(int i) const { return xi_disc_[static_cast<std::size_t>(i - 1)]; }

    // Q_i v.
    WaveFunction project(int i, const WaveFunction& v) const;
    Applied apply(const WaveFunction& v, TSelect which) const;
    // omega_r^p v with omega_r = w below eps_1 and eps_1 above.
    WaveFunction omega_r(const WaveFunction& v, double power = 1.0) const;

private:
    // out += sum_i c_i Q_i v with c_i from coef(i).
    template <class C>
    void add_projected(const WaveFunction& v, WaveFunction& out, C&& coef) const;

    KprSchedule s_;
    GridPtr grid_;
    ModesPtr modes_;
    std::vector<int> shell_;
    std::vector<std::size_t> shell_begin_, shell_end_;  // node ranges per shell
    std::vector<double> xi_norm_, xi_disc_;
    std::vector<double> xi_, wxi_;  // w^-3/2 and weight * w^-3/2 per node
};

Applied apply_t(const KprOperator& op, const WaveFunction& v, TSelect which);
WaveFunction omega_r(const KprOperator& op, const WaveFunction& v, double power = 1.0);

struct NormBound {
    double computed_norm = 0.0;
    double analytic_bound = 0.0;
    int iterations = 0;
};

// Power iteration for |(T2 - 1) omega_r^{1/2}| against
// sqrt(sum_i (1/b_i - 1)^2 rk Q_i eps_i).
NormBound t2_bound(const KprOperator& op, unsigned seed = 1, int max_iter = 500);
// Exact value of the same norm from the rank-one shell blocks.
double t2_block_norm(const KprOperator& op);
// Power iteration for |T1|.
double t1_norm_estimate(const KprOperator& op, unsigned seed = 1, int max_iter = 200);

struct ProbeRow {
    int n = 0;
    double partial_norm = 0.0;  // |T1 w^{-3/2} (P_{eps_n} - P_{eps_m0}) u|
    double increment = 0.0;     // contribution of shell n - 1
    double bound = 0.0;         // sqrt of the shellwise estimate
};

struct ProbeReport {
    std::vector<ProbeRow> rows;
    std::string verdict;  // "Cauchy", "divergent" or "zero"
    double first_increment = 0.0, last_increment = 0.0;
    double y00_weight = 0.0;  // |<Y00, eta>|
};

// u = c (x) eta with c = 1 below eps_1; rows for n = m0+1 .. n1.
ProbeReport convergence_probe(const KprOperator& op, const std::vector<cplx>& eta, int m0, int n1,
                              double cauchy_ratio = 1e-3);
// The same increments evaluated on the grid instead of from the closed form.
std::vector<double> probe_increments_on_grid(const KprOperator& op, const std::vector<cplx>& eta, int m0, int n1);

std::string probe_csv(const ProbeReport& r);

}  // namespace lab
