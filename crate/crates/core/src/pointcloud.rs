//! Collocation point clouds and δ-ball neighborhoods.
//!
//! Clouds are perturbed cell-centered lattices over the unit square, extended
//! by an exterior collar that carries Dirichlet (volume-constraint) data.

use std::ops::Range;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Vec2;

/// Relative slack on the squared horizon so that pairs at exactly δ (up to
/// round-off in the subtraction) are neighbors.
const HORIZON_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Centered in the unit square.
    pub fn centered(radius: f64) -> Self {
        Self::new(Vec2::new(0.5, 0.5), radius)
    }

    pub fn contains_strict(&self, p: &Vec2) -> bool {
        (p - self.center).norm() < self.radius
    }
}

/// Geometry of a run: the unit square Ω, the collar width and an optional
/// hole or inclusion interface.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    /// δ = delta_factor · h.
    pub delta_factor: f64,
    /// Collar width measured in horizons; must be at least 2.
    pub collar_factor: f64,
    pub hole: Option<Circle>,
    pub inclusion: Option<Circle>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { delta_factor: 3.5, collar_factor: 2.0, hole: None, inclusion: None }
    }
}

impl DomainSpec {
    pub fn with_hole(mut self, hole: Circle) -> Self {
        self.hole = Some(hole);
        self
    }

    pub fn with_inclusion(mut self, inclusion: Circle) -> Self {
        self.inclusion = Some(inclusion);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_factor > 0.0) {
            return Err(Error::Config(format!("delta factor must be positive, got {}", self.delta_factor)));
        }
        if !(self.collar_factor >= 2.0) {
            return Err(Error::Config(format!("collar must be at least 2 horizons wide, got {}", self.collar_factor)));
        }
        if self.hole.is_some() && self.inclusion.is_some() {
            return Err(Error::Config("hole and inclusion are mutually exclusive".into()));
        }
        for c in self.hole.iter().chain(self.inclusion.iter()) {
            if !(c.radius > 0.0) {
                return Err(Error::Config(format!("circle radius must be positive, got {}", c.radius)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Unperturbed cell center inside the open unit square: carries
    /// displacement unknowns.
    Interior,
    /// Exterior collar node with prescribed displacement.
    CollarDirichlet,
}

/// Quasi-uniform collocation points with their lattice metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec2>,
    roles: Vec<Role>,
    lattice: Vec<[i64; 2]>,
    void: Vec<bool>,
    spec: DomainSpec,
    n: usize,
    h: f64,
    delta: f64,
    perturb_frac: f64,
    seed: u64,
}

/// Maps a raw 64-bit draw to [0, 1) using its top 53 bits.
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Builds the cloud for an `n`×`n` lattice over the unit square.
///
/// Nodes sit at cell centers `((i+½)h, (j+½)h)` for every cell of the box
/// expanded by the collar, enumerated row by row (`j` outer, `i` inner).
/// Each coordinate is then shifted by `(2U − 1)·perturb_frac·h`, where `U` is
/// [`unit_interval`] applied to successive `ChaCha8Rng::seed_from_u64(seed)`
/// draws (x before y). Roles come from the unperturbed centers.
pub fn generate_perturbed_lattice(spec: &DomainSpec, n: usize, perturb_frac: f64, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    if n < 8 {
        return Err(Error::Config(format!("lattice count per side must be at least 8, got {n}")));
    }
    if !(0.0..=0.5).contains(&perturb_frac) {
        return Err(Error::Config(format!("perturbation fraction must lie in [0, 0.5], got {perturb_frac}")));
    }
    let h = 1.0 / n as f64;
    let delta = spec.delta_factor * h;
    if delta >= 0.5 {
        return Err(Error::Config(format!(
            "n = {n} is too coarse for delta factor {}: horizon {delta} spans half the domain",
            spec.delta_factor
        )));
    }
    let collar_width = spec.collar_factor * delta;
    let layers = (collar_width / h - 1e-9).ceil() as i64;
    let lo = -layers;
    let hi = n as i64 + layers;
    let side = (hi - lo) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = perturb_frac * h;
    let mut positions = Vec::with_capacity(side * side);
    let mut roles = Vec::with_capacity(side * side);
    let mut lattice = Vec::with_capacity(side * side);
    for j in lo..hi {
        for i in lo..hi {
            let cx = (i as f64 + 0.5) * h;
            let cy = (j as f64 + 0.5) * h;
            let dx = (2.0 * unit_interval(rng.next_u64()) - 1.0) * amplitude;
            let dy = (2.0 * unit_interval(rng.next_u64()) - 1.0) * amplitude;
            positions.push(Vec2::new(cx + dx, cy + dy));
            let inside = (0..n as i64).contains(&i) && (0..n as i64).contains(&j);
            roles.push(if inside { Role::Interior } else { Role::CollarDirichlet });
            lattice.push([i, j]);
        }
    }
    let void = positions.iter().map(|p| spec.hole.as_ref().is_some_and(|c| c.contains_strict(p))).collect();

    Ok(PointCloud { positions, roles, lattice, void, spec: spec.clone(), n, h, delta, perturb_frac, seed })
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Vec2 {
        self.positions[i]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.roles[i] == Role::Interior
    }

    /// Lattice index `(i, j)` of the unperturbed cell center; negative or
    /// `≥ n` for collar nodes.
    pub fn lattice_index(&self, i: usize) -> [i64; 2] {
        self.lattice[i]
    }

    pub fn cell_center(&self, i: usize) -> Vec2 {
        let [a, b] = self.lattice[i];
        Vec2::new((a as f64 + 0.5) * self.h, (b as f64 + 0.5) * self.h)
    }

    /// True for points lying strictly inside the hole. They get quadrature
    /// weights like any other point but are dropped from the material.
    pub fn is_void(&self, i: usize) -> bool {
        self.void[i]
    }

    pub fn void_mask(&self) -> &[bool] {
        &self.void
    }

    pub fn interior_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Interior).count()
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn perturb_frac(&self) -> f64 {
        self.perturb_frac
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Axis-aligned bounding box `(min, max)` of all positions.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        bounding_box(&self.positions)
    }
}

fn bounding_box(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Uniform background grid for fixed-radius and nearest-point queries.
struct CellGrid {
    origin: Vec2,
    cell: f64,
    dims: [usize; 2],
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl CellGrid {
    fn new(points: &[Vec2], cell: f64) -> Self {
        let (lo, hi) = bounding_box(points);
        let dims = [
            (((hi.x - lo.x) / cell).floor() as usize + 1).max(1),
            (((hi.y - lo.y) / cell).floor() as usize + 1).max(1),
        ];
        let mut grid =
            Self { origin: lo, cell, dims, starts: vec![0; dims[0] * dims[1] + 1], items: vec![0; points.len()] };
        let keys: Vec<usize> = points.iter().map(|p| grid.key(p)).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for c in 0..dims[0] * dims[1] {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (idx, &k) in keys.iter().enumerate() {
            grid.items[fill[k]] = idx;
            fill[k] += 1;
        }
        grid
    }

    fn coords(&self, p: &Vec2) -> [i64; 2] {
        [((p.x - self.origin.x) / self.cell).floor() as i64, ((p.y - self.origin.y) / self.cell).floor() as i64]
    }

    fn key(&self, p: &Vec2) -> usize {
        let [cx, cy] = self.coords(p);
        let cx = cx.clamp(0, self.dims[0] as i64 - 1) as usize;
        let cy = cy.clamp(0, self.dims[1] as i64 - 1) as usize;
        cy * self.dims[0] + cx
    }

    fn cell_items(&self, cx: i64, cy: i64) -> &[usize] {
        if cx < 0 || cy < 0 || cx >= self.dims[0] as i64 || cy >= self.dims[1] as i64 {
            return &[];
        }
        let k = cy as usize * self.dims[0] + cx as usize;
        &self.items[self.starts[k]..self.starts[k + 1]]
    }

    /// Visits every item in cells within `reach` cells of `p`'s cell.
    fn for_each_near(&self, p: &Vec2, reach: i64, mut f: impl FnMut(usize)) {
        let [cx, cy] = self.coords(p);
        for y in cy - reach..=cy + reach {
            for x in cx - reach..=cx + reach {
                for &idx in self.cell_items(x, y) {
                    f(idx);
                }
            }
        }
    }

    /// Distance from `p` to the nearest point, excluding index `skip`.
    fn nearest_distance(&self, points: &[Vec2], p: &Vec2, skip: Option<usize>) -> f64 {
        let [cx, cy] = self.coords(p);
        let max_ring = self.dims[0].max(self.dims[1]) as i64 + cx.abs().max(cy.abs()) + 1;
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // Everything in rings beyond `ring` is at least (ring) cells away.
            if best <= (ring as f64 - 1.0).max(0.0) * self.cell {
                break;
            }
            for y in cy - ring..=cy + ring {
                for x in cx - ring..=cx + ring {
                    if (y - cy).abs() != ring && (x - cx).abs() != ring {
                        continue;
                    }
                    for &idx in self.cell_items(x, y) {
                        if Some(idx) != skip {
                            best = best.min((points[idx] - p).norm());
                        }
                    }
                }
            }
        }
        best
    }
}

/// δ-ball neighbor lists in compressed row form, with cached bond vectors.
///
/// Entry ranges from [`Neighborhoods::range`] index every per-bond array in
/// the crate (weights, bond states, operator coefficients).
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    bonds: Vec<Vec2>,
    radius: f64,
}

impl Neighborhoods {
    /// Exact inclusive ball queries `0 < |x_j − x_i| ≤ radius`.
    pub fn build(points: &[Vec2], radius: f64) -> Self {
        let mut offsets = Vec::with_capacity(points.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut bonds = Vec::new();
        if points.is_empty() {
            return Self { offsets, indices, bonds, radius };
        }
        let grid = CellGrid::new(points, radius);
        let r2 = radius * radius * (1.0 + HORIZON_SLACK);
        let mut local = Vec::new();
        for (i, p) in points.iter().enumerate() {
            local.clear();
            grid.for_each_near(p, 1, |j| {
                if j != i && (points[j] - p).norm_squared() <= r2 {
                    local.push(j);
                }
            });
            local.sort_unstable();
            for &j in &local {
                indices.push(j);
                bonds.push(points[j] - p);
            }
            offsets.push(indices.len());
        }
        Self { offsets, indices, bonds, radius }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Total number of directed bonds.
    pub fn bond_count(&self) -> usize {
        self.indices.len()
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.range(i)]
    }

    /// Bond vectors `x_j − x_i`, aligned with [`Self::neighbors`].
    pub fn bonds(&self, i: usize) -> &[Vec2] {
        &self.bonds[self.range(i)]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Global entry index of bond `(i, j)`, if `j ∈ N(i)`.
    pub fn entry(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors(i).binary_search(&j).ok().map(|k| self.offsets[i] + k)
    }

    /// Neighbor index stored at a global entry.
    pub fn target(&self, entry: usize) -> usize {
        self.indices[entry]
    }

    pub fn bond(&self, entry: usize) -> Vec2 {
        self.bonds[entry]
    }
}

pub fn build_neighborhoods(cloud: &PointCloud) -> Neighborhoods {
    Neighborhoods::build(cloud.positions(), cloud.delta())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformityMetrics {
    /// Sampled sup-min distance from Ω to the cloud.
    pub fill_distance: f64,
    /// Half the minimum pairwise distance.
    pub separation_distance: f64,
}

impl UniformityMetrics {
    /// Ratio fill/separation, the smallest admissible quasi-uniformity constant.
    pub fn ratio(&self) -> f64 {
        self.fill_distance / self.separation_distance
    }
}

/// Half the minimum pairwise distance. Requires at least two points.
pub fn separation_distance(points: &[Vec2]) -> f64 {
    assert!(points.len() >= 2, "separation distance needs at least two points");
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let mut best = f64::INFINITY;
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if points[b].x - points[a].x >= best {
                break;
            }
            best = best.min((points[b] - points[a]).norm());
        }
    }
    0.5 * best
}

/// Fill distance over the unit square sampled at resolution h/4, and exact
/// separation distance.
pub fn uniformity_metrics(cloud: &PointCloud) -> UniformityMetrics {
    let points = cloud.positions();
    let grid = CellGrid::new(points, cloud.h());
    let samples = 4 * cloud.n();
    let step = 1.0 / samples as f64;
    let mut fill = 0.0_f64;
    for b in 0..=samples {
        for a in 0..=samples {
            let x = Vec2::new(a as f64 * step, b as f64 * step);
            fill = fill.max(grid.nearest_distance(points, &x, None));
        }
    }
    UniformityMetrics { fill_distance: fill, separation_distance: separation_distance(points) }
}
