#include "lab/errors.hpp"
#include "lab/jld.hpp"
#include "lab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lab {

// Cells are lattice points (u, v) = (i + j, i - j) in units of the spacing
// h.  A double cone O_{a,b} with vertices on the lattice is the rectangle
// (u_b, u_a) x (v_b, v_a), and (x, sigma) lies in its lift iff
// sigma^2 < min((a - x)^2, (x - b)^2) = h^2 min(p1 p2, m1 m2) with p, m the
// u/v extents above and below x.  H(x) is the largest such minimum over the
// rectangles inside G; on each u-line the admissible v extent only depends
// on the first missing lattice point, so the search runs over (m1, p1).
std::vector<long> lift_heights(const Region& g, bool closed) {
    if (g.grid.dim != 2) throw DomainError("breve lift: only 1+1 regions are supported");
    if (!g.grid.uniform()) throw DomainError("breve lift: needs equal spacing on both axes");
    const int n0 = g.grid.cells[0], n1 = g.grid.cells[1];
    auto good = [&](int i, int j) { return i >= 0 && i < n0 && j >= 0 && j < n1 && g.mask[static_cast<std::size_t>(i) * n1 + j]; };

    // runs of present cells along +v (i+1, j-1) and -v (i-1, j+1)
    std::vector<int> run_up(static_cast<std::size_t>(n0) * n1, 0), run_dn(run_up.size(), 0);
    for (int i = n0 - 1; i >= 0; --i)
        for (int j = 0; j < n1; ++j)
            if (good(i, j)) run_up[static_cast<std::size_t>(i) * n1 + j] = 1 + (good(i + 1, j - 1) ? run_up[static_cast<std::size_t>(i + 1) * n1 + j - 1] : 0);
    for (int i = 0; i < n0; ++i)
        for (int j = n1 - 1; j >= 0; --j)
            if (good(i, j)) run_dn[static_cast<std::size_t>(i) * n1 + j] = 1 + (good(i - 1, j + 1) ? run_dn[static_cast<std::size_t>(i - 1) * n1 + j + 1] : 0);

    const int T = n0 + n1 + 2;
    auto row = [&](std::size_t i0) {
        const int i = static_cast<int>(i0);
        std::vector<long> out(static_cast<std::size_t>(n1), 0);
        std::vector<long> up(2 * T + 1), dn(2 * T + 1);
        for (int j = 0; j < n1; ++j) {
            if (!good(i, j)) continue;
            for (int t = -T; t <= T; ++t) {
                const int tau = std::abs(t) % 2;
                const int iu = i + (t + tau) / 2, ju = j + (t - tau) / 2;
                up[static_cast<std::size_t>(t + T)] = tau + (good(iu, ju) ? 2L * run_up[static_cast<std::size_t>(iu) * n1 + ju] : 0);
                const int id = i + (t - tau) / 2, jd = j + (t + tau) / 2;
                dn[static_cast<std::size_t>(t + T)] = tau + (good(id, jd) ? 2L * run_dn[static_cast<std::size_t>(id) * n1 + jd] : 0);
            }
            auto U = [&](int t) { return up[static_cast<std::size_t>(t + T)]; };
            auto D = [&](int t) { return dn[static_cast<std::size_t>(t + T)]; };
            const int off = closed ? 0 : 1;  // open rectangles stop one line short of the vertex
            const long cut = closed ? 1 : 0;
            long best = 0;
            long lu = std::numeric_limits<long>::max(), ld = lu;
            int lo_t = 1;
            for (int m1 = 1; m1 < T; ++m1) {
                while (lo_t > -(m1 - off)) {
                    --lo_t;
                    lu = std::min(lu, U(lo_t));
                    ld = std::min(ld, D(lo_t));
                }
                if (lu - cut <= 0 || ld - cut <= 0) break;
                long ru = std::numeric_limits<long>::max(), rd = ru;
                int hi_t = -1;
                for (int p1 = 1; p1 < T; ++p1) {
                    while (hi_t < p1 - off) {
                        ++hi_t;
                        ru = std::min(ru, U(hi_t));
                        rd = std::min(rd, D(hi_t));
                    }
                    const long P2 = std::min(lu, ru) - cut, M2 = std::min(ld, rd) - cut;
                    if (P2 <= 0 || M2 <= 0) break;
                    best = std::max(best, std::min(static_cast<long>(p1) * P2, static_cast<long>(m1) * M2));
                }
            }
            out[static_cast<std::size_t>(j)] = best;
        }
        return out;
    };
    const auto rows = parallel_map(static_cast<std::size_t>(n0), row);
    std::vector<long> H;
    H.reserve(static_cast<std::size_t>(n0) * n1);
    for (const auto& r : rows) H.insert(H.end(), r.begin(), r.end());
    return H;
}

Region breve_lift(const Region& g, int sigma_cells, bool closed, std::size_t cell_budget) {
    const auto H = lift_heights(g, closed);
    const long hmax = H.empty() ? 0 : *std::max_element(H.begin(), H.end());
    if (sigma_cells == 0) {
        long k = 0;
        while (k * k < hmax) ++k;
        sigma_cells = static_cast<int>(2 * k + 1);
    }
    if (sigma_cells < 1 || sigma_cells % 2 == 0) throw DomainError("breve lift: sigma_cells must be odd");
    const std::size_t total = g.grid.size() * static_cast<std::size_t>(sigma_cells);
    if (total > cell_budget) throw DomainError("breve lift: " + std::to_string(total) + " cells exceed the budget");
    const double h = g.grid.spacing(0);
    MinkowskiGrid lg;
    lg.dim = 3;
    lg.lo = {g.grid.lo[0], g.grid.lo[1], -0.5 * sigma_cells * h};
    lg.hi = {g.grid.hi[0], g.grid.hi[1], 0.5 * sigma_cells * h};
    lg.cells = {g.grid.cells[0], g.grid.cells[1], sigma_cells};
    Region out = Region::empty(lg);
    const long half = sigma_cells / 2;
    for (std::size_t c = 0; c < H.size(); ++c)
        for (long k = -half; k <= half; ++k)
            if (k * k < H[c]) out.mask[c * static_cast<std::size_t>(sigma_cells) + static_cast<std::size_t>(k + half)] = 1;
    return out;
}

}  // namespace lab
