#include "lab/errors.hpp"
#include "lab/jld.hpp"
#include "lab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bounds {
    double lo, hi;
};

// Sutherland-Hodgman clip of a convex polygon against a*x + b*y <= c.
using Poly = std::vector<std::pair<double, double>>;

Poly clip(const Poly& in, double a, double b, double c) {
    Poly out;
    const std::size_t n = in.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& P = in[k];
        const auto& Q = in[(k + 1) % n];
        const double fp = a * P.first + b * P.second - c;
        const double fq = a * Q.first + b * Q.second - c;
        if (fp <= 0.0) out.push_back(P);
        if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
            const double t = fp / (fp - fq);
            out.emplace_back(P.first + t * (Q.first - P.first), P.second + t * (Q.second - P.second));
        }
    }
    return out;
}

// Point in [a_lo, a_hi] x [b_lo, b_hi] with alpha + beta in S and
// alpha - beta in T, or nothing.
std::optional<std::pair<double, double>> pick(Bounds a, Bounds b, Bounds S, Bounds T) {
    if (!(a.lo <= a.hi) || !(b.lo <= b.hi)) return std::nullopt;
    Poly p{{a.lo, b.lo}, {a.hi, b.lo}, {a.hi, b.hi}, {a.lo, b.hi}};
    p = clip(p, 1, 1, S.hi);
    p = clip(p, -1, -1, -S.lo);
    p = clip(p, 1, -1, T.hi);
    p = clip(p, -1, 1, -T.lo);
    if (p.empty()) return std::nullopt;
    double x = 0.0, y = 0.0;
    for (const auto& q : p) {
        x += q.first;
        y += q.second;
    }
    return std::make_pair(x / p.size(), y / p.size());
}

struct Item {
    double A, B, C, D;
};

// Apex alpha = a0 + a1, beta = a0 - a1 of a+ for fixed transverse offsets e.
std::optional<std::pair<double, double>> solve_plane(std::vector<Item> items, Bounds S, Bounds T, double tol) {
    const double alo = 0.5 * (S.lo + T.lo), ahi = 0.5 * (S.hi + T.hi);
    const double blo = 0.5 * (S.lo - T.hi), bhi = 0.5 * (S.hi - T.lo);
    if (items.empty()) return pick({alo, ahi}, {blo, bhi}, S, T);
    std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.A < y.A; });
    const std::size_t n = items.size();
    std::vector<double> suffix_minB(n + 1, kInf);
    for (std::size_t k = n; k-- > 0;) suffix_minB[k] = std::min(suffix_minB[k + 1], items[k].B);
    // Gaps between merged intervals [A, C]; L = intervals left of the gap.
    double maxD = -kInf, reachC = -kInf;
    for (std::size_t k = 0; k <= n; ++k) {
        const double gl = reachC, gr = k < n ? items[k].A : kInf;
        if (gl < gr) {
            const Bounds a{std::max(gl + tol, alo), std::min(gr - tol, ahi)};
            const Bounds b{std::max(maxD + tol, blo), std::min(suffix_minB[k] - tol, bhi)};
            if (auto w = pick(a, b, S, T)) return w;
        }
        if (k < n) {
            reachC = std::max(reachC, items[k].C);
            maxD = std::max(maxD, items[k].D);
        }
    }
    return std::nullopt;
}

}  // namespace

Feasibility two_cone_feasible(const std::vector<Point>& points, const Window& win, const FeasibilityOptions& opt) {
    const int dim = win.dim;
    const double h = win.cell;
    const double g = opt.min_gap > 0.0 ? opt.min_gap : h;
    const double margin = opt.apex_margin >= 0.0 ? opt.apex_margin : h;
    const double tol = 1e-9 * h;
    Feasibility out;
    if (points.empty()) {
        Point c{};
        for (int k = 0; k < dim; ++k) c[k] = 0.5 * (win.lo[k] + win.hi[k]);
        Point ap = c, am = c;
        ap[0] += 0.5 * g;
        am[0] -= 0.5 * g;
        out.feasible = true;
        out.witness = std::make_pair(ap, am);
        return out;
    }
    const Bounds S{2.0 * (win.lo[0] + margin + g), 2.0 * (win.hi[0] - margin)};
    const Bounds T{2.0 * (win.lo[1] + margin), 2.0 * (win.hi[1] - margin)};

    // transverse apex candidates on the cell centres of the window, so that
    // a subset of a feasible set is feasible with the same candidates
    std::vector<Point> cands{Point{}};
    for (int k = 2; k < dim; ++k) {
        const double lo = win.lo[k] + 0.5 * h, hi = std::max(lo, win.hi[k] - 0.5 * h);
        const int m = std::max(1, opt.apex_samples);
        std::vector<Point> next;
        for (const auto& c : cands)
            for (int s = 0; s < m; ++s) {
                Point d = c;
                d[k] = m == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * s / (m - 1);
                next.push_back(d);
            }
        cands.swap(next);
    }

    std::vector<Item> items(points.size());
    for (const auto& c : cands) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Point& p = points[i];
            double e = 0.0;
            for (int k = 2; k < dim; ++k) e += (p[k] - c[k]) * (p[k] - c[k]);
            e = std::sqrt(e);
            if (opt.depth_rule)
                for (int k = 0; k < 2; ++k)
                    if (p[k] - win.lo[k] < h || win.hi[k] - p[k] < h) {
                        e += std::sqrt(2.0) * h;
                        break;
                    }
            const double u = p[0] + p[1], v = p[0] - p[1];
            items[i] = {u - e, v - e, u + e + g, v + e + g};
        }
        if (auto w = solve_plane(items, S, T, tol)) {
            Point ap = c, am = c;
            ap[0] = 0.5 * (w->first + w->second);
            ap[1] = 0.5 * (w->first - w->second);
            am[0] = ap[0] - g;
            am[1] = ap[1];
            out.feasible = true;
            out.witness = std::make_pair(ap, am);
            return out;
        }
    }
    return out;
}

namespace {

// Transverse boxes: every perp cell index as centre, clipped to the grid.
struct Box {
    std::array<int, kMaxDim> lo{}, hi{}, inner_lo{}, inner_hi{}, centre{};
};

std::vector<Box> perp_boxes(const MinkowskiGrid& grid, const std::vector<int>& radii) {
    std::vector<Box> boxes;
    if (grid.dim == 2) {
        boxes.push_back({});
        return boxes;
    }
    std::size_t centres = 1;
    for (int a = 2; a < grid.dim; ++a) centres *= static_cast<std::size_t>(grid.cells[a]);
    for (int r : radii) {
        if (r < 1) throw DomainError("neighborhood radius must be at least one cell");
        for (std::size_t idx = 0; idx < centres; ++idx) {
            Box b;
            std::size_t rest = idx;
            for (int a = grid.dim - 1; a >= 2; --a) {
                const int n = grid.cells[a];
                const int c = static_cast<int>(rest % static_cast<std::size_t>(n));
                rest /= static_cast<std::size_t>(n);
                b.centre[a] = c;
                b.lo[a] = std::max(0, c - r);
                b.hi[a] = std::min(n - 1, c + r);
                b.inner_lo[a] = std::max(0, c - r + 1);
                b.inner_hi[a] = std::min(n - 1, c + r - 1);
            }
            boxes.push_back(b);
        }
    }
    return boxes;
}

bool in_rows(const std::array<int, kMaxDim>& c, const std::array<int, kMaxDim>& lo, const std::array<int, kMaxDim>& hi, int dim) {
    for (int a = 2; a < dim; ++a)
        if (c[a] < lo[a] || c[a] > hi[a]) return false;
    return true;
}

Region finish(const Region& g, const Region& gf, const std::vector<std::vector<std::size_t>>& removals, const WedgeFrame& w) {
    Region kept = gf;
    for (const auto& r : removals)
        for (std::size_t i : r) kept.mask[i] = 0;
    Region out = g & from_frame(kept, w);
    out.scene.reset();
    return out;
}

void check_frame(const Region& g, const WedgeFrame& w) {
    if (g.grid.dim != w.dim) throw FrameError("wedge and region dimensions differ");
    if (!g.grid.uniform()) throw FrameError("reduction needs equal spacing on every axis");
}

}  // namespace

Region r_w_step(const Region& g, const WedgeFrame& w, const NeighborhoodDictionary& dict) {
    check_frame(g, w);
    const Region gf = to_frame(g, w);
    const MinkowskiGrid& grid = gf.grid;
    const int dim = grid.dim;
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < gf.mask.size(); ++i)
        if (gf.mask[i]) present.push_back(i);
    const auto boxes = perp_boxes(grid, dict.radii);
    Window win;
    win.dim = dim;
    win.cell = grid.spacing(0);
    for (int a = 0; a < dim; ++a) {
        win.lo[a] = grid.lo[a];
        win.hi[a] = grid.hi[a];
    }
    auto run = [&](std::size_t k) {
        const Box& b = boxes[k];
        std::vector<Point> pts;
        std::vector<std::size_t> inner;
        for (std::size_t i : present) {
            const auto c = grid.coords(i);
            if (!in_rows(c, b.lo, b.hi, dim)) continue;
            pts.push_back(grid.point(i));
            if (in_rows(c, b.inner_lo, b.inner_hi, dim)) inner.push_back(i);
        }
        if (inner.empty()) return inner;
        Window wb = win;
        for (int a = 2; a < dim; ++a) {
            wb.lo[a] = grid.center(a, b.lo[a]) - 0.5 * win.cell;
            wb.hi[a] = grid.center(a, b.hi[a]) + 0.5 * win.cell;
        }
        if (!two_cone_feasible(pts, wb, dict.feasibility).feasible) inner.clear();
        return inner;
    };
    const auto removals = parallel_map(boxes.size(), run, dict.jobs);
    return finish(g, gf, removals, w);
}

Region r_tilde_step(const Region& g, const WedgeFrame& w, const BandDictionary& dict) {
    check_frame(g, w);
    const Region gf = to_frame(g, w);
    const MinkowskiGrid& grid = gf.grid;
    const int dim = grid.dim;
    const double h = grid.spacing(0);
    std::vector<double> masses = dict.masses;
    if (masses.empty()) {
        double diag = 0.0;
        for (int a = 0; a < dim; ++a) diag += (grid.hi[a] - grid.lo[a]) * (grid.hi[a] - grid.lo[a]);
        diag = std::sqrt(diag);
        for (double m = h; m <= diag; m *= 2.0) masses.push_back(m);
    }
    std::sort(masses.begin(), masses.end());
    if (dict.b_stride < 1) throw DomainError("band dictionary stride must be positive");
    auto lattice = [&](int axis) {
        std::vector<int> out;
        const int c = grid.cells[axis] / 2;
        for (int k = c % dict.b_stride; k < grid.cells[axis]; k += dict.b_stride) out.push_back(k);
        return out;
    };
    const auto b0 = lattice(0), b1 = lattice(1);
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < gf.mask.size(); ++i)
        if (gf.mask[i]) present.push_back(i);
    const auto boxes = perp_boxes(grid, dict.radii);
    // largest list mass <= m, 0 when none
    auto band_top = [&](double m) {
        if (m == kInf) return kInf;
        auto it = std::upper_bound(masses.begin(), masses.end(), m * (1.0 + 1e-12));
        return it == masses.begin() ? 0.0 : *(it - 1);
    };
    auto run = [&](std::size_t k) {
        const Box& box = boxes[k];
        std::vector<Point> pts;
        std::vector<std::pair<std::size_t, Point>> inner;
        for (std::size_t i : present) {
            const auto c = grid.coords(i);
            if (!in_rows(c, box.lo, box.hi, dim)) continue;
            pts.push_back(grid.point(i));
            if (in_rows(c, box.inner_lo, box.inner_hi, dim)) inner.emplace_back(i, pts.back());
        }
        std::vector<std::uint8_t> hit(inner.size(), 0);
        if (inner.empty()) return std::vector<std::size_t>{};
        const double tol = 1e-9 * h * h;
        for (int i0 : b0)
            for (int i1 : b1) {
                Point b{};
                b[0] = grid.center(0, i0);
                b[1] = grid.center(1, i1);
                for (int a = 2; a < dim; ++a) b[a] = grid.center(a, box.centre[a]);
                double mp = kInf, mm = kInf;
                bool inside = true;
                for (const auto& p : pts) {
                    Point d{};
                    for (int a = 0; a < dim; ++a) d[a] = p[a] - b[a];
                    const double q = minkowski(d, d, dim);
                    if (q < -tol) {
                        inside = false;
                        break;
                    }
                    const double m = std::sqrt(std::max(q, 0.0));
                    if (d[0] >= 0.0) mp = std::min(mp, m);
                    if (d[0] <= 0.0) mm = std::min(mm, m);
                }
                if (!inside) continue;
                const double M = std::max(band_top(mp), band_top(mm));
                if (!(M > 0.0)) continue;
                for (std::size_t t = 0; t < inner.size(); ++t) {
                    Point d{};
                    for (int a = 0; a < dim; ++a) d[a] = inner[t].second[a] - b[a];
                    const double q = minkowski(d, d, dim);
                    if (q >= -tol && std::sqrt(std::max(q, 0.0)) < M) hit[t] = 1;
                }
            }
        std::vector<std::size_t> out;
        for (std::size_t t = 0; t < inner.size(); ++t)
            if (hit[t]) out.push_back(inner[t].first);
        return out;
    };
    const auto removals = parallel_map(boxes.size(), run, dict.jobs);
    return finish(g, gf, removals, w);
}

FixpointResult r_fixpoint(const Region& g, const std::vector<WedgeFrame>& wedges, ReduceMode mode, int cap,
                          const NeighborhoodDictionary& dict, const BandDictionary& bands) {
    if (wedges.empty()) throw DomainError("fixpoint: wedge list is empty");
    if (cap < 1) throw DomainError("fixpoint: iteration cap must be positive");
    FixpointResult res;
    res.region = g;
    res.region.scene.reset();
    res.trace.push_back(g.count());
    while (res.iterations < cap) {
        Region next = res.region;
        for (const auto& w : wedges)
            next = next & (mode == ReduceMode::plain ? r_w_step(res.region, w, dict) : r_tilde_step(res.region, w, bands));
        ++res.iterations;
        res.trace.push_back(next.count());
        const bool same = next == res.region;
        res.region = std::move(next);
        if (same || res.region.count() == 0) {
            res.stabilized = true;
            break;
        }
    }
    return res;
}

}  // namespace lab
