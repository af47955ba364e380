#include "doctest.h"

#include "lab/errors.hpp"
#include "lab/jld.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lab;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

json halfline(double a0, double a1, int sign, json range) {
    return {{"kind", "halfline_cone"}, {"apex", {a0, a1, 0.0}}, {"sign", sign}, {"axis", 2}, {"range", range}};
}

// G1 u G2 u G3 with G1 on x2 > 0 at x1 = 2, G2 on x2 < 0 at x1 = -2 and G3
// along the whole x2 axis at x1 = 0.
json example_scene() {
    return {{"primitives",
             {halfline(1, 2, 1, {0, nullptr}), halfline(-1, 2, -1, {0, nullptr}), halfline(1, -2, 1, {nullptr, 0}),
              halfline(-1, -2, -1, {nullptr, 0}), halfline(3, 0, 1, {nullptr, nullptr}), halfline(-3, 0, -1, {nullptr, nullptr})}}};
}

// Independent per-cell evaluation of the same scene.
bool example_oracle(double x0, double x1, double x2) {
    auto up = [](double a0, double a1, double y0, double y1) { return y0 - a0 > std::abs(y1 - a1); };
    auto dn = [](double a0, double a1, double y0, double y1) { return a0 - y0 > std::abs(y1 - a1); };
    const bool g1 = x2 > 0 && (up(1, 2, x0, x1) || dn(-1, 2, x0, x1));
    const bool g2 = x2 < 0 && (up(1, -2, x0, x1) || dn(-1, -2, x0, x1));
    const bool g3 = up(3, 0, x0, x1) || dn(-3, 0, x0, x1);
    return g1 || g2 || g3;
}

const MinkowskiGrid& example_grid() {
    static const MinkowskiGrid g = MinkowskiGrid::cube(2, 6.125, 49);
    return g;
}

Region g3_slice() {
    return make_region(example_grid(), json{{"primitives", {halfline(3, 0, 1, {-0.1, 0.1}), halfline(-3, 0, -1, {-0.1, 0.1})}}});
}

json dc(double a0, double a1, double b0, double b1) { return {{"kind", "double_cone"}, {"a", {a0, a1}}, {"b", {b0, b1}}}; }

// Random unions of lattice-vertex double cones and boxes inside [-2.5, 2.5]^2,
// at least six cells from the edge of a [-4, 4]^2 window.
json random_scene(std::mt19937& rng) {
    std::uniform_int_distribution<int> coord(-6, 6), ext(1, 4), kind(0, 3);
    json prims = json::array();
    const int count = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < count; ++k) {
        const double c0 = coord(rng) * 0.25, c1 = coord(rng) * 0.25;
        const double r = ext(rng) * 0.25;
        if (kind(rng) == 0) {
            const double w = ext(rng) * 0.25;
            prims.push_back({{"kind", "box"}, {"lo", {c0 - r, c1 - w}}, {"hi", {c0 + r, c1 + w}}});
        } else {
            const double s = r > 0.25 ? 0.25 * (coord(rng) % 2) : 0.0;
            prims.push_back(dc(c0 + r, c1 + s, c0 - r, c1 - s));
        }
    }
    return {{"primitives", prims}};
}

// Two-sheeted band of masses in (1.5, 2.5) restricted to |x2| < 0.5, so that
// every slab meets both sheets well inside the window.
json symmetric_band() {
    return {{"primitives",
             {{{"kind", "mass_band"}, {"apex", {0.0, 0.0, 0.0}}, {"sign", 0}, {"mass", {1.5, 2.5}}},
              {{"kind", "box"}, {"lo", {-9.0, -9.0, -0.5}}, {"hi", {9.0, 9.0, 0.5}}}}},
            {"ops", {{"intersect", {0, 1}}}}};
}

bool witness_covers(const std::vector<Point>& pts, const Feasibility& f) {
    if (!f.witness) return false;
    const auto [ap, am] = *f.witness;
    if (!(ap[0] - am[0] > std::abs(ap[1] - am[1]))) return false;
    for (const auto& p : pts)
        if (!(p[0] - ap[0] > std::abs(p[1] - ap[1])) && !(am[0] - p[0] > std::abs(p[1] - am[1]))) return false;
    return true;
}

Region lifted_double_cone(const MinkowskiGrid& lg, double a0, double a1, double b0, double b1) {
    return make_region(lg, json{{"primitives", {{{"kind", "double_cone"}, {"a", {a0, a1, 0.0}}, {"b", {b0, b1, 0.0}}}}}});
}

Region shift(const Region& r, int d0, int d1) { return r.translated({d0, d1, 0, 0}); }

}  // namespace

TEST_CASE("primitives: forward cone and diamond") {
    const auto g = MinkowskiGrid::cube(1, 2.0, 16);
    const Region vp = make_region(g, json{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0}}}}}});
    const Region dia = make_region(g, json{{"primitives", {dc(1, 0, -1, 0)}}});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point p = g.point(i);
        CHECK((vp.mask[i] != 0) == (p[0] > std::abs(p[1])));
        CHECK((dia.mask[i] != 0) == (std::abs(p[0]) + std::abs(p[1]) < 1.0));
    }
    CHECK(vp.scene.has_value());
    CHECK(make_region(g, *vp.scene) == vp);
}

TEST_CASE("primitives: ops tree, closed flag and wedges") {
    const auto g = MinkowskiGrid::cube(1, 2.0, 16);
    const json scene{{"primitives",
                      {{{"kind", "cone"}, {"apex", {0.0, 0.0}}},
                       {{"kind", "box"}, {"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}},
                       {{"kind", "wedge"}, {"k_plus", {1.0, 1.0}}, {"k_minus", {-1.0, 1.0}}}}},
                     {"ops", {{"minus", {{{"intersect", {0, 1}}}, {{"complement", 2}}}}}}};
    const Region r = make_region(g, scene);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point p = g.point(i);
        const bool cone = p[0] > std::abs(p[1]), box = std::abs(p[0]) < 1 && std::abs(p[1]) < 1, wedge = p[1] > std::abs(p[0]);
        CHECK((r.mask[i] != 0) == (cone && box && wedge));
    }
    // cells centred exactly on the light cone are in the closed cone only
    const auto g2 = MinkowskiGrid::cube(1, 2.125, 17);
    const Region open = make_region(g2, json{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0}}}}}});
    const Region closed = make_region(g2, json{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0}}, {"closed", true}}}}});
    CHECK(open.subset_of(closed));
    CHECK(closed.count() - open.count() == 17);
}

TEST_CASE("primitives: mass bands") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    const Region up = make_region(g, json{{"primitives", {{{"kind", "mass_band"}, {"apex", {0.0, 0.0}}, {"sign", 1}, {"mass", {1.0, 2.0}}}}}});
    const Region both = make_region(g, json{{"primitives", {{{"kind", "mass_band"}, {"apex", {0.0, 0.0}}, {"sign", 0}, {"mass", {1.0, 2.0}}}}}});
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point p = g.point(i);
        const double q = p[0] * p[0] - p[1] * p[1];
        const bool in = q > 1.0 && q < 4.0;
        CHECK((up.mask[i] != 0) == (in && p[0] > 0));
        CHECK((both.mask[i] != 0) == in);
        n += in;
    }
    CHECK(both.count() == n);
    CHECK(2 * up.count() == both.count());
}

TEST_CASE("example scene matches a per-cell evaluator on 32^3") {
    const auto g = MinkowskiGrid::cube(2, 6.0, 32);
    const Region r = make_region(g, example_scene());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point p = g.point(i);
        mismatches += (r.mask[i] != 0) != example_oracle(p[0], p[1], p[2]);
    }
    CHECK(mismatches == 0);
    CHECK(r.count() > 0);
}

TEST_CASE("scene errors") {
    const auto g = MinkowskiGrid::cube(1, 2.0, 8);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {{{"kind", "torus"}}}}}), ConfigError);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0, 0.0}}}}}}), ConfigError);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {dc(-1, 0, 1, 0)}}}), ConfigError);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {dc(1, 0, -1, 0)}}, {"ops", {{"xor", {0}}}}}), ConfigError);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {dc(1, 0, -1, 0)}}, {"ops", 3}}), ConfigError);
    CHECK_THROWS_AS(make_region(g, json{{"primitives", {halfline(0, 0, 1, nullptr)}}}), ConfigError);
    CHECK_THROWS_AS(make_region(json{{"primitives", json::array()}}), ConfigError);
    CHECK_THROWS_AS(MinkowskiGrid::from_json(json{{"lo", {0.0, 0.0}}, {"hi", {-1.0, 1.0}}, {"cells", {4, 4}}}), ConfigError);
}

TEST_CASE("region layers, translation and bitmap") {
    const auto g = MinkowskiGrid::cube(1, 2.0, 16);
    const Region dia = make_region(g, json{{"primitives", {dc(1, 0, -1, 0)}}});
    const Region moved = shift(dia, 0, 1);
    CHECK(moved.count() == dia.count());
    CHECK(!(moved == dia));
    CHECK(dia.equal_up_to_layer(moved, 1));
    CHECK(dia.window_layer(1).count() == 16 * 16 - 14 * 14);
    const std::string pbm = dia.to_pbm();
    CHECK(pbm.rfind("P1\n", 0) == 0);
    CHECK(pbm.find("16 16") != std::string::npos);
    CHECK(MinkowskiGrid::from_json(g.to_json()) == g);
}

TEST_CASE("wedge frames") {
    SUBCASE("standard wedge") {
        const auto w = WedgeFrame::standard(3);
        CHECK(w.residual <= 1e-12);
        CHECK(w.aligned());
        CHECK(w.contains({0.0, 1.0, 5.0, 0.0}));
        CHECK(!w.contains({2.0, 1.0, 0.0, 0.0}));
        const Point xi = w.to_frame({0.3, 0.7, -0.2, 0.0});
        CHECK(xi[0] == doctest::Approx(0.3));
        CHECK(xi[1] == doctest::Approx(0.7));
        CHECK(std::abs(xi[2]) == doctest::Approx(0.2));
    }
    SUBCASE("boosted and rotated wedges reconstruct to 1e-12") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> ang(-kPi, kPi), rap(-1.5, 1.5);
        for (int t = 0; t < 50; ++t) {
            const double th = ang(rng), ph = ang(rng), s1 = std::exp(rap(rng)), s2 = std::exp(rap(rng));
            const Point n{0.0, std::cos(th) * std::cos(ph), std::sin(th) * std::cos(ph), std::sin(ph)};
            // k+ = s1 (1, n), k- = s2 (-1, n): W = {x | n.x > |x0|} up to boost
            const Point kp{s1, s1 * n[1], s1 * n[2], s1 * n[3]}, km{-s2, s2 * n[1], s2 * n[2], s2 * n[3]};
            const auto w = WedgeFrame::make(kp, km, 4, {0.1, -0.2, 0.3, 0.0});
            CHECK(w.residual <= 1e-12);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const double want = a == b ? (a == 0 ? 1.0 : -1.0) : 0.0;
                    CHECK(std::abs(minkowski(w.basis[a], w.basis[b], 4) - want) <= 1e-12);
                }
            const Point x{0.4, -1.0, 2.0, 0.5};
            const Point xi = w.to_frame(x);
            CHECK(w.contains(x) == (xi[1] > std::abs(xi[0])));
        }
    }
    SUBCASE("invalid null vectors") {
        CHECK_THROWS_AS(WedgeFrame::make({1, 0.5, 0, 0}, {-1, 1, 0, 0}, 2), FrameError);
        CHECK_THROWS_AS(WedgeFrame::make({1, 1, 0, 0}, {1, 1, 0, 0}, 2), FrameError);
        CHECK_THROWS_AS(WedgeFrame::make({1, 1, 0, 0}, {-1, -1, 0, 0}, 2), FrameError);
        CHECK_THROWS_AS(WedgeFrame::along(3, 0), FrameError);
    }
    SUBCASE("frame resampling") {
        const auto g = MinkowskiGrid::cube(2, 3.0, 24);
        const Region r = make_region(g, json{{"primitives", {{{"kind", "cone"}, {"apex", {-1.0, 0.5, 0.25}}}}}});
        const auto w2 = WedgeFrame::along(3, 2);
        CHECK(w2.aligned());
        CHECK(from_frame(to_frame(r, w2), w2) == r);
        const double c = std::cos(0.4), s = std::sin(0.4);
        const auto wr = WedgeFrame::make({1, c, s, 0}, {-1, c, s, 0}, 3);
        CHECK(!wr.aligned());
        const Region back = from_frame(to_frame(r, wr), wr);
        const Region inner = r.window_layer(6).complement();
        CHECK((r & inner).equal_up_to_layer(back & inner, 2));
    }
}

TEST_CASE("breve lift: single double cone is reproduced exactly") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    for (const auto& [a0, a1, b0, b1] : std::vector<std::array<double, 4>>{{1.5, 0, -1.5, 0}, {2.0, 0.5, -1.0, -0.5}, {3.0, -1.0, 0.5, 0.0}}) {
        const Region G = make_region(g, json{{"primitives", {dc(a0, a1, b0, b1)}}});
        const Region L = breve_lift(G);
        CHECK(L == lifted_double_cone(L.grid, a0, a1, b0, b1));
    }
}

TEST_CASE("breve lift: cones within a double-cone window") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    for (int sign : {1, -1}) {
        const json scene{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0}}, {"sign", sign}}, dc(3, 0, -3, 0)}},
                         {"ops", {{"intersect", {0, 1}}}}};
        const Region L = breve_lift(make_region(g, scene), 25);
        // V-breve n O-breve for the window O: x0 sign > sqrt(x1^2 + s^2) inside |x0| + sqrt(x1^2 + s^2) < 3
        Region want = Region::empty(L.grid);
        for (std::size_t i = 0; i < want.mask.size(); ++i) {
            const Point p = L.grid.point(i);
            const double r = std::hypot(p[1], p[2]);
            want.mask[i] = sign * p[0] > r && std::abs(p[0]) + r < 3.0;
        }
        CHECK(L.equal_up_to_layer(want, 2));
        CHECK(L == want);
    }
}

TEST_CASE("breve lift: union of translates along x1 stays below the half-height") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    const double R = 1.0;
    json prims = json::array();
    for (int k = 0; k < 5; ++k) prims.push_back(dc(R, -1.0 + 0.5 * k, -R, -1.0 + 0.5 * k));
    json tall = prims;
    tall.push_back(dc(2 * R, 2.0, -2 * R, 2.0));
    auto max_sigma = [](const Region& L) {
        double m = 0.0;
        for (std::size_t i = 0; i < L.mask.size(); ++i)
            if (L.mask[i]) m = std::max(m, std::abs(L.grid.point(i)[2]));
        return m;
    };
    const Region side = breve_lift(make_region(g, json{{"primitives", prims}}), 17);
    const Region up = breve_lift(make_region(g, json{{"primitives", tall}}), 17);
    CHECK(max_sigma(side) < R);
    CHECK(max_sigma(up) >= 2.0 * R - 0.25);
    // the larger values sit inside the lift of the larger double cone
    const Region big = lifted_double_cone(up.grid, 2 * R, 2.0, -2 * R, 2.0);
    for (std::size_t i = 0; i < up.mask.size(); ++i)
        if (up.mask[i] && std::abs(up.grid.point(i)[2]) >= R) CHECK(big.mask[i]);
}

TEST_CASE("breve lift: isotony, union, intersection and translation on random scenes") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    std::mt19937 rng(2024);
    for (int t = 0; t < 20; ++t) {
        const Region A = make_region(g, random_scene(rng));
        const Region B = make_region(g, random_scene(rng));
        const int sc = 41;
        const Region LA = breve_lift(A, sc), LB = breve_lift(B, sc);
        CHECK(LA.subset_of(breve_lift(A | B, sc)));
        CHECK((LA | LB).subset_of(breve_lift(A | B, sc)));
        CHECK(breve_lift(A & B, sc).subset_of(LA & LB));
        const int d0 = static_cast<int>(rng() % 7) - 3, d1 = static_cast<int>(rng() % 7) - 3;
        CHECK(breve_lift(shift(A, d0, d1), sc) == shift(LA, d0, d1));
        // the sigma = 0 slice is G itself
        std::size_t bad = 0;
        for (std::size_t c = 0; c < A.mask.size(); ++c) bad += (A.mask[c] != 0) != (LA.mask[c * sc + sc / 2] != 0);
        CHECK(bad == 0);
    }
}

TEST_CASE("breve lift: closed double cones agree with open ones up to one cell") {
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    std::mt19937 rng(99);
    for (int t = 0; t < 20; ++t) {
        const Region A = make_region(g, random_scene(rng));
        const Region open = breve_lift(A, 41), closed = breve_lift(A, 41, true);
        CHECK(closed.subset_of(open));
        CHECK(open.equal_up_to_layer(closed, 1));
    }
}

TEST_CASE("breve lift: guards") {
    CHECK_THROWS_AS(breve_lift(Region::empty(MinkowskiGrid::cube(2, 1.0, 4))), DomainError);
    const auto g = MinkowskiGrid::cube(1, 4.0, 32);
    const Region G = make_region(g, json{{"primitives", {dc(3, 0, -3, 0)}}});
    CHECK_THROWS_AS(breve_lift(G, 0, false, 1000), DomainError);
    CHECK_THROWS_AS(breve_lift(G, 4), DomainError);
    CHECK(breve_lift(Region::empty(g)).count() == 0);
}

TEST_CASE("two-cone feasibility") {
    Window win;
    win.dim = 2;
    win.lo = {-10, -10, 0, 0};
    win.hi = {10, 10, 0, 0};
    win.cell = 0.25;
    SUBCASE("empty and single point") {
        const auto e = two_cone_feasible({}, win);
        CHECK(e.feasible);
        REQUIRE(e.witness);
        CHECK(e.witness->first[0] > e.witness->second[0]);
        const auto f = two_cone_feasible({{0.5, 0.2, 0, 0}}, win);
        CHECK(f.feasible);
    }
    SUBCASE("two points split by a threshold") {
        // (u, v) = (1, 1) and (-1, -1)
        const std::vector<Point> pts{{1, 0, 0, 0}, {-1, 0, 0, 0}};
        const auto f = two_cone_feasible(pts, win);
        CHECK(f.feasible);
        CHECK(witness_covers(pts, f));
    }
    SUBCASE("a row across the window is infeasible") {
        Window tight = win;
        tight.lo = {-4.5, -4.5, 0, 0};
        tight.hi = {4.5, 4.5, 0, 0};
        std::vector<Point> row;
        for (int k = -16; k <= 16; ++k) row.push_back({0.0, 0.25 * k, 0, 0});
        CHECK(!two_cone_feasible(row, tight).feasible);
        row.resize(5);
        CHECK(two_cone_feasible(row, tight).feasible);
    }
    SUBCASE("agrees with a brute-force partition search in 1+1") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-4.4, 4.4);
        FeasibilityOptions opt;
        opt.depth_rule = false;
        opt.apex_margin = 0.0;
        Window tight = win;
        tight.lo = {-4.5, -4.5, 0, 0};
        tight.hi = {4.5, 4.5, 0, 0};
        // apex strips alpha + beta in S, alpha - beta in T
        const double s1 = 2 * (-4.5 + 0.25), s2 = 9.0, t1 = -9.0, t2 = 9.0;
        int yes = 0;
        for (int t = 0; t < 300; ++t) {
            const int n = 3 + static_cast<int>(rng() % 6);
            std::vector<Point> pts(n);
            for (auto& p : pts) p = {u(rng), u(rng), 0, 0};
            bool brute = false;
            for (int mask = 0; mask < (1 << n) && !brute; ++mask) {
                double minA = 1e9, minB = 1e9, maxC = -1e9, maxD = -1e9;
                for (int k = 0; k < n; ++k) {
                    const double uu = pts[k][0] + pts[k][1], vv = pts[k][0] - pts[k][1];
                    if (mask >> k & 1) {
                        minA = std::min(minA, uu);
                        minB = std::min(minB, vv);
                    } else {
                        maxC = std::max(maxC, uu + win.cell);
                        maxD = std::max(maxD, vv + win.cell);
                    }
                }
                // separating axes of the (alpha, beta) rectangle and the apex parallelogram
                const double a1 = maxC, a2 = minA, b1 = maxD, b2 = minB;
                brute = a1 < a2 && b1 < b2 && a1 < (s2 + t2) / 2 && a2 > (s1 + t1) / 2 && b1 < (s2 - t1) / 2 &&
                        b2 > (s1 - t2) / 2 && a1 + b1 < s2 && a2 + b2 > s1 && a1 - b2 < t2 && a2 - b1 > t1;
            }
            const auto f = two_cone_feasible(pts, tight, opt);
            CHECK(f.feasible == brute);
            if (f.feasible) CHECK(witness_covers(pts, f));
            yes += brute;
        }
        CHECK(yes > 20);
        CHECK(yes < 280);
    }
    SUBCASE("slab around the middle row of the example is infeasible") {
        const auto& g = example_grid();
        const Region G = make_region(g, example_scene());
        std::vector<Point> pts;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto c = g.coords(i);
            if (G.mask[i] && std::abs(c[2] - 24) <= 1) pts.push_back(g.point(i));
        }
        Window w3;
        w3.dim = 3;
        w3.cell = 0.25;
        w3.lo = {-6.125, -6.125, -0.375, 0};
        w3.hi = {6.125, 6.125, 0.375, 0};
        CHECK(!two_cone_feasible(pts, w3).feasible);
        std::vector<Point> upper;
        for (const auto& p : pts)
            if (p[2] >= 0) upper.push_back(p);
        CHECK(two_cone_feasible(upper, w3).feasible);
    }
}

TEST_CASE("r_W on the example: middle slice, then empty") {
    const Region G = make_region(example_grid(), example_scene());
    const auto w = WedgeFrame::standard(3);
    const Region r1 = r_w_step(G, w);
    const Region want = g3_slice();
    CHECK(want.count() > 0);
    CHECK(r1.equal_up_to_layer(want, 1));
    CHECK(r1 == want);
    const Region r2 = r_w_step(r1, w);
    CHECK(r2.count() == 0);
    // not idempotent
    CHECK(r2.subset_of(r1));
    CHECK(r2.count() < r1.count());
}

TEST_CASE("r_W removes a timelike-separated pair of cones along the edge") {
    const auto g = MinkowskiGrid::cube(2, 4.0, 32);
    const json scene{{"primitives",
                      {{{"kind", "halfline_cone"}, {"apex", {1.0, 0.5, 0.0}}, {"sign", 1}, {"closed", true}},
                       {{"kind", "halfline_cone"}, {"apex", {-1.0, 0.0, 0.0}}, {"sign", -1}, {"closed", true}}}}};
    const Region G = make_region(g, scene);
    CHECK(G.count() > 0);
    const Region r = r_w_step(G, WedgeFrame::standard(3));
    CHECK(r.count() == 0);
    CHECK(r_w_step(Region::empty(g), WedgeFrame::standard(3)).count() == 0);
}

TEST_CASE("r_W is contracting and isotone") {
    const auto g = MinkowskiGrid::cube(2, 3.0, 24);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-2, 2);
    const auto w = WedgeFrame::standard(3);
    for (int t = 0; t < 6; ++t) {
        json prims = json::array();
        for (int k = 0; k < 3; ++k)
            prims.push_back({{"kind", "cone"}, {"apex", {u(rng), u(rng), u(rng)}}, {"sign", k % 2 ? -1 : 1}});
        const Region small = make_region(g, json{{"primitives", {prims[0], prims[1]}}});
        const Region big = make_region(g, json{{"primitives", prims}});
        const Region rs = r_w_step(small, w), rb = r_w_step(big, w);
        CHECK(rs.subset_of(small));
        CHECK(rb.subset_of(big));
        CHECK(rs.subset_of(rb));
    }
}

TEST_CASE("r~_W on mass bands") {
    const auto g = MinkowskiGrid::cube(2, 3.0, 24);
    const auto w = WedgeFrame::standard(3);
    SUBCASE("one-sided band is removed") {
        const json scene{{"primitives", {{{"kind", "mass_band"}, {"apex", {-1.5, 0.0, 0.0}}, {"sign", 1}, {"mass", {0.75, 1.5}}}}}};
        const Region G = make_region(g, scene);
        CHECK(G.count() > 0);
        CHECK(r_tilde_step(G, w).count() == 0);
    }
    SUBCASE("symmetric band is kept") {
        const Region G = make_region(g, symmetric_band());
        CHECK(G.count() > 0);
        CHECK(r_tilde_step(G, w) == G);
    }
    SUBCASE("empty, contracting, isotone") {
        CHECK(r_tilde_step(Region::empty(g), w).count() == 0);
        const json a{{"kind", "mass_band"}, {"apex", {0.0, 0.0, 0.0}}, {"sign", 1}, {"mass", {1.0, 2.0}}};
        const json b{{"kind", "mass_band"}, {"apex", {0.0, 0.0, 0.0}}, {"sign", -1}, {"mass", {0.5, 1.0}}};
        const Region small = make_region(g, json{{"primitives", {a}}});
        const Region big = make_region(g, json{{"primitives", {a, b}}});
        const Region rs = r_tilde_step(small, w), rb = r_tilde_step(big, w);
        CHECK(rs.subset_of(small));
        CHECK(rb.subset_of(big));
        CHECK(rs.subset_of(rb));
        CHECK(rb.count() < big.count());
    }
}

TEST_CASE("fixed point iteration") {
    SUBCASE("example stabilizes at the empty set after two steps") {
        const Region G = make_region(example_grid(), example_scene());
        const auto res = r_fixpoint(G, {WedgeFrame::standard(3)});
        CHECK(res.iterations == 2);
        CHECK(res.stabilized);
        CHECK(res.region.count() == 0);
        REQUIRE(res.trace.size() == 3);
        CHECK(res.trace[0] == G.count());
        CHECK(res.trace[1] == g3_slice().count());
    }
    SUBCASE("fixed points take one step") {
        const auto g = MinkowskiGrid::cube(2, 3.0, 24);
        const Region G = make_region(g, symmetric_band());
        const auto res = r_fixpoint(G, {WedgeFrame::standard(3)}, ReduceMode::tilde);
        CHECK(res.iterations == 1);
        CHECK(res.region == G);
        const auto g2 = MinkowskiGrid::cube(1, 3.0, 24);
        const Region cones = make_region(g2, json{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0}}, {"sign", 1}},
                                                                  {{"kind", "cone"}, {"apex", {0.0, 0.0}}, {"sign", -1}}}}});
        const auto r2 = r_fixpoint(cones, {WedgeFrame::standard(2)});
        CHECK(r2.iterations == 1);
        CHECK(r2.region == cones);
        // idempotent under one more step
        CHECK(r_w_step(r2.region, WedgeFrame::standard(2)) == r2.region);
    }
    SUBCASE("more wedges remove more") {
        const auto g = MinkowskiGrid::cube(2, 3.0, 24);
        const json scene{{"primitives", {{{"kind", "cone"}, {"apex", {0.0, 0.0, 0.0}}, {"sign", 1}},
                                         {{"kind", "cone"}, {"apex", {0.0, 0.0, 0.0}}, {"sign", -1}}}}};
        const Region G = make_region(g, scene);
        const auto one = r_fixpoint(G, {WedgeFrame::standard(3)});
        const auto two = r_fixpoint(G, {WedgeFrame::standard(3), WedgeFrame::along(3, 2)});
        CHECK(two.region.subset_of(one.region));
        CHECK(one.region.subset_of(G));
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(r_fixpoint(Region::empty(example_grid()), {}), DomainError);
    }
}

TEST_CASE("transform: wave residual is second order") {
    double prev = 0.0;
    for (int n : {32, 64, 128}) {
        const auto f = momentum_bump(n, 0.5, 3.0, 1.0, 1.5);
        const auto [F, rep] = jld_transform_1p1(f, sigma_grid(f.dx(), 8));
        CHECK(rep.symmetry_defect <= 1e-10);
        CHECK(rep.restriction_defect <= 1e-8);
        if (prev > 0.0) CHECK(std::log2(prev / rep.wave_residual) >= 1.8);
        prev = rep.wave_residual;
    }
}

TEST_CASE("transform: point values, zero input and support violation") {
    const auto f = momentum_bump(32, 0.5, 3.0, -1.0, 1.5);
    const auto [F, rep] = jld_transform_1p1(f, sigma_grid(0.3, 3));
    for (auto [s, j0, j1] : std::vector<std::array<int, 3>>{{0, 3, 5}, {3, 16, 16}, {6, 30, 1}}) {
        const cplx direct = jld_field_at(f, f.x(j0), f.x(j1), F.sigma[static_cast<std::size_t>(s)]);
        CHECK(std::abs(F.at(static_cast<std::size_t>(s), j0, j1) - direct) <= 1e-12 * rep.max_abs);
    }
    MomentumSamples zero = f;
    std::fill(zero.values.begin(), zero.values.end(), cplx{});
    const auto [Z, zr] = jld_transform_1p1(zero, sigma_grid(0.3, 3));
    CHECK(zr.max_abs == 0.0);
    CHECK(zr.wave_residual == 0.0);
    MomentumSamples bad = f;
    bad.at(16, 20) = 1.0;  // p = (0, 2) is spacelike
    CHECK_THROWS_AS(jld_transform_1p1(bad, sigma_grid(0.3, 3)), DomainError);
    CHECK_THROWS_AS(jld_transform_1p1(f, {0.0, 0.1}), DomainError);
    CHECK_THROWS_AS(jld_transform_1p1(f, {-0.1, 0.0, 0.2}), DomainError);
}

TEST_CASE("transform: f vanishing on a double cone gives F vanishing on its lift") {
    const auto seed = momentum_bump(32, 1.0, 6.0, 2.0, 5.0);
    const double R = 3.0 * seed.dx();
    const auto f = double_cone_null_projection(seed, R);
    const auto [F, rep] = jld_transform_1p1(f, sigma_grid(seed.dx(), 4));
    const auto v = measure_cone_vanishing(f, R);
    const auto s = measure_cone_vanishing(seed, R);
    CHECK(rep.max_abs > 0.1);
    CHECK(s.on_double_cone > 0.1);
    CHECK(v.on_double_cone < 1e-12);
    CHECK(v.on_lift <= 10.0 * std::max(rep.restriction_defect, v.on_double_cone));
    CHECK(v.samples > 1000);
}

TEST_CASE("lts spot check: two-cone momentum support does not vanish on a wedge") {
    // bumps in (a+ + V+) and (a- + V-) with a+ = (1, 0), a- = (-1, 0)
    auto f = momentum_bump(32, 0.5, 4.0, 1.0, 1.5);
    const auto g = momentum_bump(32, 0.5, -4.0, -1.5, 1.5);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] += 0.7 * g.values[k];
    const auto x = direct_position_samples(f);
    double top = 0.0;
    for (const auto& v : x) top = std::max(top, std::abs(v));
    for (int sign : {1, -1})
        for (int o0 = -8; o0 <= 8; o0 += 4)
            for (int o1 = -8; o1 <= 8; o1 += 4) {
                double m = 0.0;
                for (int j0 = 0; j0 < f.n; ++j0)
                    for (int j1 = 0; j1 < f.n; ++j1) {
                        const int d0 = j0 - f.n / 2 - o0, d1 = sign * (j1 - f.n / 2 - o1);
                        if (d1 > std::abs(d0)) m = std::max(m, std::abs(x[static_cast<std::size_t>(j0) * f.n + j1]));
                    }
                CHECK(m > 1e-8 * top);
            }
}
