#pragma once

#include "json.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lab {

using cplx = std::complex<double>;

constexpr int kMaxDim = 4;
using Point = std::array<double, kMaxDim>;

// Minkowski product with signature (+, -, ..., -) on the first dim entries.
double minkowski(const Point& a, const Point& b, int dim);

// Cell-centred raster over a box in R^{1+s}; axis 0 is time.
struct MinkowskiGrid {
    int dim = 2;  // 1 + s
    std::vector<double> lo, hi;
    std::vector<int> cells;

    static MinkowskiGrid cube(int s, double half_width, int cells);

    int s() const { return dim - 1; }
    double spacing(int axis) const { return (hi[axis] - lo[axis]) / cells[axis]; }
    double center(int axis, int i) const { return lo[axis] + (i + 0.5) * spacing(axis); }
    std::size_t size() const;
    std::size_t index(const std::array<int, kMaxDim>& c) const;
    std::array<int, kMaxDim> coords(std::size_t idx) const;
    Point point(std::size_t idx) const;
    // Nearest cell along an axis, -1 when outside the window.
    int nearest(int axis, double x) const;
    bool uniform() const;  // equal spacing on every axis
    bool operator==(const MinkowskiGrid&) const = default;

    nlohmann::json to_json() const;
    static MinkowskiGrid from_json(const nlohmann::json& j);
};

// A boolean raster, optionally with the scene it was rasterized from.
struct Region {
    MinkowskiGrid grid;
    std::vector<std::uint8_t> mask;
    std::optional<nlohmann::json> scene;

    static Region empty(const MinkowskiGrid& g);
    std::size_t count() const;
    bool at(const std::array<int, kMaxDim>& c) const { return mask[grid.index(c)] != 0; }

    Region operator|(const Region& o) const;
    Region operator&(const Region& o) const;
    Region operator-(const Region& o) const;
    Region complement() const;
    bool subset_of(const Region& o) const;
    bool operator==(const Region& o) const { return grid == o.grid && mask == o.mask; }

    // Shift by whole cells; cells moved in from outside the window are empty.
    Region translated(const std::array<int, kMaxDim>& shift) const;
    // Cells within Chebyshev distance k of a cell where the mask changes value.
    Region boundary_layer(int k) const;
    // The symmetric difference lies in the k-layer of this region's boundary.
    bool equal_up_to_layer(const Region& o, int k) const;
    // Cells within k cells of the window boundary.
    Region window_layer(int k) const;

    // Portable bitmap; higher-dimensional masks are stacked slices of the
    // first two axes along the remaining ones.
    std::string to_pbm() const;
    nlohmann::json to_json() const;
};

// Scene: {primitives: [...], ops: node}.  Primitive kinds: cone, double_cone,
// wedge, halfline_cone, mass_band, box.  An op node is a primitive index or
// {union: [...]}, {intersect: [...]}, {minus: [a, b]}, {complement: node};
// without ops the primitives are united.  Unknown kinds raise ConfigError.
Region make_region(const MinkowskiGrid& grid, const nlohmann::json& scene);
// Scene file form {grid: {...}, primitives: [...], ops: ...}.
Region make_region(const nlohmann::json& scene_file);

// W = w + {x | k+ x < 0, k- x < 0}.  Basis e_0 = (k+ - k-)/N, e_1 = (k+ + k-)/N
// spans M_par; e_2.. span M_perp.  Frame coordinates xi satisfy
// x = w + sum xi_mu e_mu, and W reads xi_1 > |xi_0|.
struct WedgeFrame {
    int dim = 2;
    Point k_plus{}, k_minus{}, offset{};
    std::array<Point, kMaxDim> basis{};
    double residual = 0.0;  // max |sum xi e - x| over the unit vectors

    static WedgeFrame make(const Point& k_plus, const Point& k_minus, int dim, const Point& offset = {});
    // x^1 > |x^0|.
    static WedgeFrame standard(int dim);
    // x^axis > |x^0| for a spatial axis.
    static WedgeFrame along(int dim, int axis);

    Point to_frame(const Point& x) const;
    Point from_frame(const Point& xi) const;
    bool contains(const Point& x) const;
    // Basis is a signed permutation of the unit vectors.
    bool aligned() const;

    nlohmann::json to_json() const;
    static WedgeFrame from_json(const nlohmann::json& j, int dim);
};

// Nearest-cell resampling into and out of frame coordinates on the same
// raster shape.  Identity for aligned frames.
Region to_frame(const Region& g, const WedgeFrame& w);
Region from_frame(const Region& g, const WedgeFrame& w);

// Breve lift of a 1+1 region to 1+2 with axes (x0, x1, sigma).  sigma_cells
// must be odd (0 picks the smallest odd count holding the lift); closed uses
// double cones whose closure lies in G.  Requires equal spacing on both axes.
Region breve_lift(const Region& g, int sigma_cells = 0, bool closed = false, std::size_t cell_budget = std::size_t{1} << 26);
// Height function: (x, sigma) lies in the lift iff (sigma/h)^2 < H(x).
std::vector<long> lift_heights(const Region& g, bool closed = false);

struct FeasibilityOptions {
    double min_gap = 0.0;       // a+ - a- = (min_gap, 0, ...); 0 means one cell
    double apex_margin = -1.0;  // apex distance from the window edge; < 0 means one cell
    bool depth_rule = true;     // boundary points at depth >= one cell
    int apex_samples = 3;       // transverse apex candidates per perp axis, spread over the window
};

struct Feasibility {
    bool feasible = false;
    std::optional<std::pair<Point, Point>> witness;  // (a+, a-)
};

struct Window {
    int dim = 2;
    Point lo{}, hi{};
    double cell = 1.0;
};

// Decides whether the points lie in (a+ + V+) u (a- + V-) with a+ - a- future
// timelike and both apices inside the window.  Axes 0, 1 span M_par.
// Transverse offsets d enter through the sufficient condition "time shift by
// d", exact for s = 1.  Points touching the window in M_par directions must
// lie at depth >= one cell.
Feasibility two_cone_feasible(const std::vector<Point>& points, const Window& window, const FeasibilityOptions& opt = {});

struct NeighborhoodDictionary {
    std::vector<int> radii{1, 2, 4};  // half-widths of the perp boxes, in cells
    FeasibilityOptions feasibility;
    unsigned jobs = 0;
};

struct BandDictionary {
    std::vector<int> radii{1};
    int b_stride = 4;             // coarse lattice for b, anchored at the window centre cell
    std::vector<double> masses;   // dyadic mass list; empty means cell * 2^k up to the window diagonal
    unsigned jobs = 0;
};

// One r_W step in frame coordinates: removes the inner rows of every perp box
// whose points are two-cone feasible.
Region r_w_step(const Region& g, const WedgeFrame& w, const NeighborhoodDictionary& dict = {});
// One r~_W step: removes (M_par x N_perp) n (b + I~) for suitable (b, I).
Region r_tilde_step(const Region& g, const WedgeFrame& w, const BandDictionary& dict = {});

enum class ReduceMode { plain, tilde };

struct FixpointResult {
    Region region;
    std::vector<std::size_t> trace;  // cell count before the first step, then after each step
    int iterations = 0;
    bool stabilized = false;  // false when the cap was reached
};

// Iterates G -> n_W r_W(G) until the mask stops changing or becomes empty.
FixpointResult r_fixpoint(const Region& g, const std::vector<WedgeFrame>& wedges, ReduceMode mode = ReduceMode::plain,
                          int cap = 16, const NeighborhoodDictionary& dict = {}, const BandDictionary& bands = {});

// Samples of f-check on the lattice p = ((k0 - n/2) dp, (k1 - n/2) dp),
// row-major in (k0, k1).
struct MomentumSamples {
    int n = 0;
    double dp = 1.0;
    std::vector<cplx> values;

    double p(int k) const { return (k - n / 2) * dp; }
    double dx() const;  // 2 pi/(n dp)
    double x(int j) const { return (j - n / 2) * dx(); }
    cplx& at(int k0, int k1) { return values[static_cast<std::size_t>(k0) * n + k1]; }
    cplx at(int k0, int k1) const { return values[static_cast<std::size_t>(k0) * n + k1]; }
};

// F(x, sigma) = sum_p f(p) cos(sigma sqrt(p^2)) exp(i p.x) with p.x the
// Euclidean pairing; axes (sigma, x0, x1), sigma-major.
struct JldField {
    int n = 0;
    double dx = 0.0;
    std::vector<double> sigma;
    std::vector<cplx> F;

    cplx at(std::size_t s, int j0, int j1) const { return F[(s * n + j0) * n + j1]; }
};

struct JldReport {
    double wave_residual = 0.0;      // |Box_h F| / |F| over interior sigma rows
    double symmetry_defect = 0.0;    // max |F(., s) - F(., -s)| / max |F|
    double restriction_defect = 0.0; // |F(., 0) - f| / |f| with f from a direct DFT
    double max_abs = 0.0;
};

// sigma must be uniform and symmetric about 0 with 0 included.  Raises
// DomainError when f-check is nonzero outside the closed cone p^2 >= 0.
std::pair<JldField, JldReport> jld_transform_1p1(const MomentumSamples& f, const std::vector<double>& sigma);
// Symmetric sigma grid with spacing ds and 2 half + 1 nodes.
std::vector<double> sigma_grid(double ds, int half);
// Direct evaluation of F at one point.
cplx jld_field_at(const MomentumSamples& f, double x0, double x1, double sigma);
// f = F(., 0) on the x lattice by a separable direct DFT.
std::vector<cplx> direct_position_samples(const MomentumSamples& f);

// C-infinity bump of the given radius around a momentum point, zero outside
// the closed cone.
MomentumSamples momentum_bump(int n, double dp, double p0, double p1, double radius);

// Projects f-check onto the coefficient vectors whose Cauchy data
// (F, d_0 F) at x0 = 0 vanish on the disk x1^2 + sigma^2 < (margin R)^2,
// sampled oversample times per lattice step.  F then vanishes on the lifted
// double cone |x0| + sqrt(x1^2 + sigma^2) < R to the accuracy of the fit.
MomentumSamples double_cone_null_projection(const MomentumSamples& seed, double R, int oversample = 8,
                                            double margin = 1.2, double rcond = 1e-14);

struct ConeVanishing {
    double on_double_cone = 0.0;  // max |f| on |x0| + |x1| < R, relative to max |f|
    double on_lift = 0.0;         // max |F| on |x0| + sqrt(x1^2 + sigma^2) < R, same scale
    int samples = 0;
};
ConeVanishing measure_cone_vanishing(const MomentumSamples& f, double R, int per_axis = 25);

}  // namespace lab
