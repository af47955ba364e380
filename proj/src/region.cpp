#include "lab/jld.hpp"

#include "lab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace lab {

double minkowski(const Point& a, const Point& b, int dim) {
    double s = a[0] * b[0];
    for (int k = 1; k < dim; ++k) s -= a[k] * b[k];
    return s;
}

MinkowskiGrid MinkowskiGrid::cube(int s, double half_width, int cells) {
    if (s < 1 || s > kMaxDim - 1) throw DomainError("grid: s must be 1, 2 or 3");
    if (!(half_width > 0.0) || cells < 1) throw DomainError("grid: positive extent and cell count required");
    MinkowskiGrid g;
    g.dim = s + 1;
    g.lo.assign(g.dim, -half_width);
    g.hi.assign(g.dim, half_width);
    g.cells.assign(g.dim, cells);
    return g;
}

std::size_t MinkowskiGrid::size() const {
    std::size_t n = 1;
    for (int c : cells) n *= static_cast<std::size_t>(c);
    return n;
}

std::size_t MinkowskiGrid::index(const std::array<int, kMaxDim>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * static_cast<std::size_t>(cells[a]) + static_cast<std::size_t>(c[a]);
    return idx;
}

std::array<int, kMaxDim> MinkowskiGrid::coords(std::size_t idx) const {
    std::array<int, kMaxDim> c{};
    for (int a = dim - 1; a >= 0; --a) {
        c[a] = static_cast<int>(idx % static_cast<std::size_t>(cells[a]));
        idx /= static_cast<std::size_t>(cells[a]);
    }
    return c;
}

Point MinkowskiGrid::point(std::size_t idx) const {
    const auto c = coords(idx);
    Point p{};
    for (int a = 0; a < dim; ++a) p[a] = center(a, c[a]);
    return p;
}

int MinkowskiGrid::nearest(int axis, double x) const {
    const double t = (x - lo[axis]) / spacing(axis);
    if (t < 0.0 || t >= cells[axis]) return -1;
    return std::min(cells[axis] - 1, static_cast<int>(std::floor(t)));
}

bool MinkowskiGrid::uniform() const {
    for (int a = 1; a < dim; ++a)
        if (std::abs(spacing(a) - spacing(0)) > 1e-12 * spacing(0)) return false;
    return true;
}

nlohmann::json MinkowskiGrid::to_json() const { return {{"lo", lo}, {"hi", hi}, {"cells", cells}}; }

MinkowskiGrid MinkowskiGrid::from_json(const nlohmann::json& j) {
    try {
        if (j.contains("half_width")) return cube(j.at("s").get<int>(), j.at("half_width").get<double>(), j.at("cells").get<int>());
        MinkowskiGrid g;
        g.lo = j.at("lo").get<std::vector<double>>();
        g.hi = j.at("hi").get<std::vector<double>>();
        g.cells = j.at("cells").get<std::vector<int>>();
        g.dim = static_cast<int>(g.lo.size());
        if (g.dim < 2 || g.dim > kMaxDim || g.hi.size() != g.lo.size() || g.cells.size() != g.lo.size())
            throw ConfigError("grid: lo, hi and cells need 2 to 4 matching entries");
        for (int a = 0; a < g.dim; ++a)
            if (!(g.hi[a] > g.lo[a]) || g.cells[a] < 1) throw ConfigError("grid: empty axis " + std::to_string(a));
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

Region Region::empty(const MinkowskiGrid& g) {
    Region r;
    r.grid = g;
    r.mask.assign(g.size(), 0);
    return r;
}

std::size_t Region::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

namespace {

void same_grid(const Region& a, const Region& b) {
    if (!(a.grid == b.grid)) throw DomainError("region: grids differ");
}

template <class Op>
Region combine(const Region& a, const Region& b, Op op) {
    same_grid(a, b);
    Region r = Region::empty(a.grid);
    for (std::size_t i = 0; i < r.mask.size(); ++i) r.mask[i] = op(a.mask[i] != 0, b.mask[i] != 0) ? 1 : 0;
    return r;
}

// Max filter of radius k along every axis.
std::vector<std::uint8_t> dilate(const MinkowskiGrid& g, std::vector<std::uint8_t> m, int k) {
    if (k <= 0) return m;
    std::size_t stride = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
        const int n = g.cells[a];
        std::vector<std::uint8_t> out(m.size(), 0);
        for (std::size_t idx = 0; idx < m.size(); ++idx) {
            if (!m[idx]) continue;
            const int c = static_cast<int>((idx / stride) % static_cast<std::size_t>(n));
            const std::size_t base = idx - static_cast<std::size_t>(c) * stride;
            for (int d = std::max(0, c - k); d <= std::min(n - 1, c + k); ++d) out[base + static_cast<std::size_t>(d) * stride] = 1;
        }
        m.swap(out);
        stride *= static_cast<std::size_t>(n);
    }
    return m;
}

}  // namespace

Region Region::operator|(const Region& o) const { return combine(*this, o, [](bool a, bool b) { return a || b; }); }
Region Region::operator&(const Region& o) const { return combine(*this, o, [](bool a, bool b) { return a && b; }); }
Region Region::operator-(const Region& o) const { return combine(*this, o, [](bool a, bool b) { return a && !b; }); }

Region Region::complement() const {
    Region r = empty(grid);
    for (std::size_t i = 0; i < mask.size(); ++i) r.mask[i] = mask[i] ? 0 : 1;
    return r;
}

bool Region::subset_of(const Region& o) const {
    same_grid(*this, o);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && !o.mask[i]) return false;
    return true;
}

Region Region::translated(const std::array<int, kMaxDim>& shift) const {
    Region r = empty(grid);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        auto c = grid.coords(i);
        bool inside = true;
        for (int a = 0; a < grid.dim; ++a) {
            c[a] += shift[a];
            inside = inside && c[a] >= 0 && c[a] < grid.cells[a];
        }
        if (inside) r.mask[grid.index(c)] = 1;
    }
    return r;
}

Region Region::boundary_layer(int k) const {
    std::vector<std::uint8_t> edge(mask.size(), 0);
    const std::vector<std::uint8_t> inv = complement().mask;
    const auto near_in = dilate(grid, mask, 1);
    const auto near_out = dilate(grid, inv, 1);
    for (std::size_t i = 0; i < mask.size(); ++i) edge[i] = (mask[i] ? near_out[i] : near_in[i]) ? 1 : 0;
    Region r = empty(grid);
    r.mask = dilate(grid, edge, k - 1);
    return r;
}

bool Region::equal_up_to_layer(const Region& o, int k) const {
    same_grid(*this, o);
    const Region layer = boundary_layer(k);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if ((mask[i] != 0) != (o.mask[i] != 0) && !layer.mask[i]) return false;
    return true;
}

Region Region::window_layer(int k) const {
    Region r = empty(grid);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto c = grid.coords(i);
        for (int a = 0; a < grid.dim; ++a)
            if (c[a] < k || c[a] >= grid.cells[a] - k) r.mask[i] = 1;
    }
    return r;
}

std::string Region::to_pbm() const {
    const int w = grid.cells[1];
    std::size_t slices = 1;
    for (int a = 2; a < grid.dim; ++a) slices *= static_cast<std::size_t>(grid.cells[a]);
    const std::size_t h = static_cast<std::size_t>(grid.cells[0]) * slices;
    std::ostringstream os;
    os << "P1\n# axes x1 across, x0 up";
    if (grid.dim > 2) os << ", one block per slice of the remaining axes";
    os << "\n" << w << " " << h << "\n";
    for (std::size_t s = 0; s < slices; ++s)
        for (int i0 = grid.cells[0] - 1; i0 >= 0; --i0) {
            for (int i1 = 0; i1 < w; ++i1) {
                // the slice index enumerates axes 2.. in row-major order
                std::size_t idx = (static_cast<std::size_t>(i0) * static_cast<std::size_t>(w) + static_cast<std::size_t>(i1)) * slices + s;
                os << (mask[idx] ? '1' : '0') << (i1 + 1 < w ? " " : "");
            }
            os << "\n";
        }
    return os.str();
}

nlohmann::json Region::to_json() const {
    nlohmann::json j{{"grid", grid.to_json()}, {"cells", count()}};
    if (scene) j["scene"] = *scene;
    return j;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Point vec(const nlohmann::json& j, const char* key, int dim) {
    if (!j.contains(key)) throw ConfigError(std::string("scene: missing '") + key + "'");
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<int>(v.size()) != dim)
        throw ConfigError(std::string("scene: '") + key + "' needs " + std::to_string(dim) + " entries");
    Point p{};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
}

double spatial_norm(const Point& d, int dim) {
    double s = 0.0;
    for (int k = 1; k < dim; ++k) s += d[k] * d[k];
    return std::sqrt(s);
}

Point diff(const Point& a, const Point& b) {
    Point d{};
    for (int k = 0; k < kMaxDim; ++k) d[k] = a[k] - b[k];
    return d;
}

using Pred = std::function<bool(const Point&)>;

Pred parse_primitive(const nlohmann::json& j, int dim) {
    const std::string kind = j.value("kind", "");
    const bool closed = j.value("closed", false);
    auto gt = [closed](double a, double b) { return closed ? a >= b : a > b; };
    if (kind == "cone") {
        const Point a = vec(j, "apex", dim);
        const int sign = j.value("sign", 1);
        if (sign != 1 && sign != -1) throw ConfigError("scene: cone sign must be +1 or -1");
        return [=](const Point& x) {
            const Point d = diff(x, a);
            return gt(sign * d[0], spatial_norm(d, dim));
        };
    }
    if (kind == "double_cone") {
        const Point a = vec(j, "a", dim), b = vec(j, "b", dim);
        const Point ab = diff(a, b);
        if (!(ab[0] > spatial_norm(ab, dim))) throw ConfigError("scene: double_cone needs a - b future timelike");
        return [=](const Point& x) {
            const Point da = diff(a, x), db = diff(x, b);
            return gt(da[0], spatial_norm(da, dim)) && gt(db[0], spatial_norm(db, dim));
        };
    }
    if (kind == "wedge") {
        const WedgeFrame w = WedgeFrame::make(vec(j, "k_plus", dim), vec(j, "k_minus", dim), dim,
                                              j.contains("offset") ? vec(j, "offset", dim) : Point{});
        return [=](const Point& x) {
            const Point d = diff(x, w.offset);
            return gt(0.0, minkowski(w.k_plus, d, dim)) && gt(0.0, minkowski(w.k_minus, d, dim));
        };
    }
    if (kind == "halfline_cone") {
        // (l + C) or (l - C): C the forward cone of the (x0, x1) plane and l a
        // line along `axis` through the apex, restricted to `range`.
        if (dim < 3) throw ConfigError("scene: halfline_cone needs s >= 2");
        const Point a = vec(j, "apex", dim);
        const int sign = j.value("sign", 1);
        const int axis = j.value("axis", 2);
        if (axis < 2 || axis >= dim) throw ConfigError("scene: halfline_cone axis must be transverse");
        double lo = -kInf, hi = kInf;
        if (j.contains("range")) {
            const auto& r = j.at("range");
            if (!r.is_array() || r.size() != 2) throw ConfigError("scene: range must be [lo, hi]");
            if (!r[0].is_null()) lo = r[0].get<double>();
            if (!r[1].is_null()) hi = r[1].get<double>();
        }
        return [=](const Point& x) {
            const double t = x[axis] - a[axis];
            return gt(sign * (x[0] - a[0]), std::abs(x[1] - a[1])) && gt(t, lo) && gt(hi, t);
        };
    }
    if (kind == "mass_band") {
        const Point b = vec(j, "apex", dim);
        const int sign = j.value("sign", 0);
        const auto m = j.at("mass").get<std::vector<double>>();
        if (m.size() != 2 || !(m[0] >= 0.0) || !(m[1] > m[0])) throw ConfigError("scene: mass must be [m1, m2] with m2 > m1 >= 0");
        return [=](const Point& x) {
            const Point d = diff(x, b);
            if (sign != 0 && !(sign * d[0] > 0.0)) return false;
            if (sign == 0 && d[0] == 0.0) return false;
            const double q = minkowski(d, d, dim);
            if (q < 0.0) return false;
            const double mass = std::sqrt(q);
            return gt(mass, m[0]) && gt(m[1], mass);
        };
    }
    if (kind == "box") {
        const Point lo = vec(j, "lo", dim), hi = vec(j, "hi", dim);
        return [=](const Point& x) {
            for (int k = 0; k < dim; ++k)
                if (!gt(x[k], lo[k]) || !gt(hi[k], x[k])) return false;
            return true;
        };
    }
    throw ConfigError("scene: unknown primitive kind '" + kind + "'");
}

Pred parse_node(const nlohmann::json& node, const std::vector<Pred>& prims) {
    if (node.is_number_integer()) {
        const auto i = node.get<long>();
        if (i < 0 || i >= static_cast<long>(prims.size())) throw ConfigError("scene: primitive index out of range");
        return prims[static_cast<std::size_t>(i)];
    }
    if (!node.is_object() || node.size() != 1) throw ConfigError("scene: op node must be an index or a single-key object");
    const std::string key = node.begin().key();
    const nlohmann::json& val = node.begin().value();
    auto list = [&](const nlohmann::json& arr) {
        if (!arr.is_array() || arr.empty()) throw ConfigError("scene: '" + key + "' needs a nonempty list");
        std::vector<Pred> out;
        for (const auto& n : arr) out.push_back(parse_node(n, prims));
        return out;
    };
    if (key == "union") {
        auto ps = list(val);
        return [ps](const Point& x) { return std::any_of(ps.begin(), ps.end(), [&](const Pred& p) { return p(x); }); };
    }
    if (key == "intersect") {
        auto ps = list(val);
        return [ps](const Point& x) { return std::all_of(ps.begin(), ps.end(), [&](const Pred& p) { return p(x); }); };
    }
    if (key == "minus") {
        auto ps = list(val);
        if (ps.size() != 2) throw ConfigError("scene: minus needs two operands");
        return [ps](const Point& x) { return ps[0](x) && !ps[1](x); };
    }
    if (key == "complement") {
        auto p = parse_node(val, prims);
        return [p](const Point& x) { return !p(x); };
    }
    throw ConfigError("scene: unknown op '" + key + "'");
}

}  // namespace

Region make_region(const MinkowskiGrid& grid, const nlohmann::json& scene) {
    try {
        if (!scene.contains("primitives") || !scene.at("primitives").is_array())
            throw ConfigError("scene: 'primitives' must be a list");
        std::vector<Pred> prims;
        for (const auto& p : scene.at("primitives")) prims.push_back(parse_primitive(p, grid.dim));
        Pred root;
        if (scene.contains("ops")) {
            root = parse_node(scene.at("ops"), prims);
        } else {
            root = [prims](const Point& x) { return std::any_of(prims.begin(), prims.end(), [&](const Pred& p) { return p(x); }); };
        }
        Region r = Region::empty(grid);
        for (std::size_t i = 0; i < r.mask.size(); ++i) r.mask[i] = root(grid.point(i)) ? 1 : 0;
        nlohmann::json stored{{"primitives", scene.at("primitives")}};
        if (scene.contains("ops")) stored["ops"] = scene.at("ops");
        r.scene = stored;
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene: ") + e.what());
    }
}

Region make_region(const nlohmann::json& scene_file) {
    if (!scene_file.contains("grid")) throw ConfigError("scene: missing 'grid'");
    return make_region(MinkowskiGrid::from_json(scene_file.at("grid")), scene_file);
}

WedgeFrame WedgeFrame::make(const Point& kp, const Point& km, int dim, const Point& offset) {
    if (dim < 2 || dim > kMaxDim) throw FrameError("wedge: dimension must be 2 to 4");
    auto scale = [&](const Point& k) {
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += k[a] * k[a];
        return s;
    };
    if (std::abs(minkowski(kp, kp, dim)) > 1e-10 * scale(kp) || !(kp[0] > 0.0))
        throw FrameError("wedge: k+ must be future lightlike");
    if (std::abs(minkowski(km, km, dim)) > 1e-10 * scale(km) || !(km[0] < 0.0))
        throw FrameError("wedge: k- must be past lightlike");
    const double kk = minkowski(kp, km, dim);
    if (!(kk < 0.0)) throw FrameError("wedge: k+ k- must be negative");
    WedgeFrame w;
    w.dim = dim;
    w.k_plus = kp;
    w.k_minus = km;
    w.offset = offset;
    const double N = std::sqrt(-2.0 * kk);
    for (int a = 0; a < dim; ++a) {
        w.basis[0][a] = (kp[a] - km[a]) / N;
        w.basis[1][a] = (kp[a] + km[a]) / N;
    }
    int have = 2;
    for (int u = 0; u < dim && have < dim; ++u) {
        Point v{};
        v[u] = 1.0;
        for (int m = 0; m < have; ++m) {
            const double c = minkowski(w.basis[m], v, dim) / minkowski(w.basis[m], w.basis[m], dim);
            for (int a = 0; a < dim; ++a) v[a] -= c * w.basis[m][a];
        }
        const double q = -minkowski(v, v, dim);
        if (q < 1e-8) continue;
        for (int a = 0; a < dim; ++a) v[a] /= std::sqrt(q);
        w.basis[have++] = v;
    }
    if (have != dim) throw FrameError("wedge: could not complete the frame");
    for (int u = 0; u < dim; ++u) {
        Point x = offset;
        x[u] += 1.0;
        const Point y = w.from_frame(w.to_frame(x));
        for (int a = 0; a < dim; ++a) w.residual = std::max(w.residual, std::abs(y[a] - x[a]));
    }
    if (w.residual > 1e-12) throw FrameError("wedge: frame reconstruction residual " + std::to_string(w.residual));
    return w;
}

WedgeFrame WedgeFrame::standard(int dim) { return along(dim, 1); }

WedgeFrame WedgeFrame::along(int dim, int axis) {
    if (axis < 1 || axis >= dim) throw FrameError("wedge: axis must be spatial");
    Point kp{}, km{};
    kp[0] = 1.0;
    kp[axis] = 1.0;
    km[0] = -1.0;
    km[axis] = 1.0;
    return make(kp, km, dim);
}

Point WedgeFrame::to_frame(const Point& x) const {
    const Point d = diff(x, offset);
    Point xi{};
    for (int m = 0; m < dim; ++m) xi[m] = (m == 0 ? 1.0 : -1.0) * minkowski(basis[m], d, dim);
    return xi;
}

Point WedgeFrame::from_frame(const Point& xi) const {
    Point x = offset;
    for (int m = 0; m < dim; ++m)
        for (int a = 0; a < dim; ++a) x[a] += xi[m] * basis[m][a];
    return x;
}

bool WedgeFrame::contains(const Point& x) const {
    const Point d = diff(x, offset);
    return minkowski(k_plus, d, dim) < 0.0 && minkowski(k_minus, d, dim) < 0.0;
}

bool WedgeFrame::aligned() const {
    for (int m = 0; m < dim; ++m) {
        int big = 0;
        for (int a = 0; a < dim; ++a) {
            const double v = std::abs(basis[m][a]);
            if (std::abs(v - 1.0) <= 1e-12) ++big;
            else if (v > 1e-12) return false;
        }
        if (big != 1) return false;
    }
    return true;
}

nlohmann::json WedgeFrame::to_json() const {
    return {{"k_plus", std::vector<double>(k_plus.begin(), k_plus.begin() + dim)},
            {"k_minus", std::vector<double>(k_minus.begin(), k_minus.begin() + dim)},
            {"offset", std::vector<double>(offset.begin(), offset.begin() + dim)}};
}

WedgeFrame WedgeFrame::from_json(const nlohmann::json& j, int dim) {
    try {
        if (j.is_string()) {
            if (j.get<std::string>() == "standard") return standard(dim);
            throw ConfigError("wedge: unknown name '" + j.get<std::string>() + "'");
        }
        if (j.contains("along")) return along(dim, j.at("along").get<int>());
        return make(vec(j, "k_plus", dim), vec(j, "k_minus", dim), dim, j.contains("offset") ? vec(j, "offset", dim) : Point{});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("wedge: ") + e.what());
    }
}

namespace {

// Linear part only: the wedge offset does not act on momentum space.
Region resample(const Region& g, const WedgeFrame& w, bool into_frame) {
    WedgeFrame lin = w;
    lin.offset = Point{};
    Region r = Region::empty(g.grid);
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
        const Point p = g.grid.point(i);
        const Point q = into_frame ? lin.from_frame(p) : lin.to_frame(p);
        std::array<int, kMaxDim> c{};
        bool inside = true;
        for (int a = 0; a < g.grid.dim && inside; ++a) {
            c[a] = g.grid.nearest(a, q[a]);
            inside = c[a] >= 0;
        }
        if (inside) r.mask[i] = g.mask[g.grid.index(c)];
    }
    return r;
}

bool identity_frame(const WedgeFrame& w) {
    for (int m = 0; m < w.dim; ++m)
        for (int a = 0; a < w.dim; ++a)
            if (std::abs(w.basis[m][a] - (m == a ? 1.0 : 0.0)) > 1e-12) return false;
    return true;
}

}  // namespace

Region to_frame(const Region& g, const WedgeFrame& w) {
    if (g.grid.dim != w.dim) throw FrameError("wedge and region dimensions differ");
    if (identity_frame(w)) return g;
    return resample(g, w, true);
}

Region from_frame(const Region& g, const WedgeFrame& w) {
    if (g.grid.dim != w.dim) throw FrameError("wedge and region dimensions differ");
    if (identity_frame(w)) return g;
    return resample(g, w, false);
}

}  // namespace lab
