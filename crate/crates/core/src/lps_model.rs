//! Discrete linear peridynamic solid with corrected dilitation.
//!
//! Momentum at an interior point `i`:
//!
//! ```text
//! (C_α/m) Σ_j (λ_ij − μ_ij) K_ij z_ij (θ_i + θ_j) ω̃_ji
//!   + (C_β/m) Σ_j μ_ij K_ij (z_ij ⊗ z_ij / |z_ij|²) (u_j − u_i) ω̃_ji = f_i
//! ```
//!
//! and the dilitation at every point `k` reached by a momentum stencil:
//!
//! ```text
//! θ_k = (d/m) Σ_j K_kj z_kjᵀ M_k⁻¹ (u_j − u_k) ω̃_jk,
//! M_k = (d/m) Σ_j K_kj z_kj ⊗ z_kj ω̃_jk
//! ```
//!
//! with `z_ij = x_j − x_i` and `ω̃` the quadrature weights with broken bonds
//! zeroed. Using `ω̃` in both the sum and `M` makes `θ = tr ∇u` exact for
//! affine `u` whatever the bond pattern.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::analytic::ElasticModuli;
use crate::error::{Error, Result};
use crate::pointcloud::{Circle, Neighborhoods, PointCloud};
use crate::quadrature::{KernelSpec, QuadratureFamily};
use crate::Vec2;

/// `σ_min < SINGULAR_RATIO · σ_max` selects the pseudo-inverse of `M`.
pub const SINGULAR_RATIO: f64 = 1e-8;

/// Scaling constants of the LPS model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpsConstants {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub dim: usize,
    pub weighted_volume: f64,
    pub kernel: KernelSpec,
}

impl LpsConstants {
    /// `C_α = 2`, `C_β = 16`, `m = 2πδ³/3`.
    pub fn plane_strain(kernel: KernelSpec) -> Self {
        Self { c_alpha: 2.0, c_beta: 16.0, dim: 2, weighted_volume: kernel.weighted_volume(), kernel }
    }

    /// Three-dimensional set (`C_α = 3`, `C_β = 30`, `m = πδ⁴`). Kept as data
    /// only; nothing in the crate assembles 3D systems.
    pub fn three_d(kernel: KernelSpec) -> Self {
        Self { c_alpha: 3.0, c_beta: 30.0, dim: 3, weighted_volume: PI * kernel.delta().powi(4), kernel }
    }
}

/// Per-point Lamé coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl MaterialField {
    pub fn from_fn(cloud: &PointCloud, f: impl Fn(&Vec2) -> ElasticModuli) -> Result<Self> {
        let mut lambda = Vec::with_capacity(cloud.len());
        let mut mu = Vec::with_capacity(cloud.len());
        for p in cloud.positions() {
            let m = f(p);
            if !(m.mu > 0.0) || !(m.lambda >= 0.0) {
                return Err(Error::Domain(format!("invalid moduli λ = {}, μ = {} at {p:?}", m.lambda, m.mu)));
            }
            lambda.push(m.lambda);
            mu.push(m.mu);
        }
        Ok(Self { lambda, mu })
    }

    pub fn homogeneous(cloud: &PointCloud, moduli: ElasticModuli) -> Result<Self> {
        Self::from_fn(cloud, |_| moduli)
    }
}

/// Harmonic mean `2 / (1/p_i + 1/p_j)`.
pub fn harmonic_pair(p_i: f64, p_j: f64) -> Result<f64> {
    if !(p_i > 0.0) || !(p_j > 0.0) {
        return Err(Error::Domain(format!("harmonic mean needs positive moduli, got {p_i} and {p_j}")));
    }
    Ok(pair_modulus(p_i, p_j))
}

/// Harmonic pairing extended by its limit `0` when either side vanishes, and
/// exactly `p` on equal arguments.
fn pair_modulus(p_i: f64, p_j: f64) -> f64 {
    if p_i == p_j {
        p_i
    } else if p_i <= 0.0 || p_j <= 0.0 {
        0.0
    } else {
        2.0 / (1.0 / p_i + 1.0 / p_j)
    }
}

/// Broken/unbroken state per directed neighborhood entry, kept symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct BondSet {
    broken: Vec<bool>,
}

impl BondSet {
    pub fn intact(nbrs: &Neighborhoods) -> Self {
        Self { broken: vec![false; nbrs.bond_count()] }
    }

    pub fn is_broken(&self, entry: usize) -> bool {
        self.broken[entry]
    }

    pub fn broken_count(&self) -> usize {
        self.broken.iter().filter(|b| **b).count()
    }

    /// Breaks `(i, j)` in both directions.
    pub fn break_pair(&mut self, nbrs: &Neighborhoods, i: usize, j: usize) {
        if let Some(e) = nbrs.entry(i, j) {
            self.broken[e] = true;
        }
        if let Some(e) = nbrs.entry(j, i) {
            self.broken[e] = true;
        }
    }

    /// Breaks every bond whose open segment crosses `circle`.
    pub fn break_crossing_circle(&mut self, nbrs: &Neighborhoods, positions: &[Vec2], circle: &Circle) {
        for i in 0..nbrs.len() {
            for e in nbrs.range(i) {
                let j = nbrs.target(e);
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                if segment_crosses_circle(&positions[a], &positions[b], circle) {
                    self.broken[e] = true;
                }
            }
        }
    }

    /// Breaks every bond touching a masked point.
    pub fn detach(&mut self, nbrs: &Neighborhoods, mask: &[bool]) {
        for i in 0..nbrs.len() {
            for e in nbrs.range(i) {
                if mask[i] || mask[nbrs.target(e)] {
                    self.broken[e] = true;
                }
            }
        }
    }

    /// `ω̃` at a bond entry.
    pub fn effective_weight(&self, family: &QuadratureFamily, entry: usize) -> f64 {
        if self.broken[entry] {
            0.0
        } else {
            family.weight(entry)
        }
    }
}

/// True when the segment `p → q` crosses the circle: endpoints on opposite
/// sides, or both outside with the closest point strictly inside.
pub fn segment_crosses_circle(p: &Vec2, q: &Vec2, circle: &Circle) -> bool {
    let inside_p = circle.contains_strict(p);
    let inside_q = circle.contains_strict(q);
    if inside_p != inside_q {
        return true;
    }
    if inside_p {
        return false;
    }
    let d = q - p;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return false;
    }
    let t = (circle.center - p).dot(&d) / len2;
    t > 0.0 && t < 1.0 && circle.contains_strict(&(p + d * t))
}

pub fn break_bonds_crossing_circle(
    bonds: &BondSet,
    nbrs: &Neighborhoods,
    cloud: &PointCloud,
    circle: &Circle,
) -> BondSet {
    let mut out = bonds.clone();
    out.break_crossing_circle(nbrs, cloud.positions(), circle);
    out
}

/// `d_i = 1 − Σ_j ω̃_ji / Σ_j ω_ji`, clamped to `[0, 1]`. Points without
/// quadrature weights report 0; a zero weight total reports 1.
pub fn damage_field(bonds: &BondSet, family: &QuadratureFamily, nbrs: &Neighborhoods) -> Vec<f64> {
    (0..nbrs.len())
        .map(|i| {
            if !family.is_computed(i) {
                return 0.0;
            }
            let (kept, total) = nbrs
                .range(i)
                .fold((0.0, 0.0), |(k, t), e| (k + bonds.effective_weight(family, e), t + family.weight(e)));
            if total == 0.0 {
                1.0
            } else {
                (1.0 - kept / total).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Correction tensor `M_i` with its (pseudo-)inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilitationCorrection {
    pub tensor: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    /// Set when the pseudo-inverse was used.
    pub singular: bool,
}

pub fn moment_tensor(
    i: usize,
    nbrs: &Neighborhoods,
    bonds: &BondSet,
    family: &QuadratureFamily,
    constants: &LpsConstants,
) -> DilitationCorrection {
    let scale = constants.dim as f64 / constants.weighted_volume;
    let mut tensor = Matrix2::zeros();
    for e in nbrs.range(i) {
        let w = bonds.effective_weight(family, e);
        if w == 0.0 {
            continue;
        }
        let z = nbrs.bond(e);
        let k = constants.kernel.kernel(z.norm());
        tensor += z * z.transpose() * (scale * k * w);
    }
    let svd = tensor.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = svd.singular_values;
    let s_max = s.max();
    let singular = !(s_max > 0.0) || s.min() < SINGULAR_RATIO * s_max;
    let mut inverse = Matrix2::zeros();
    for k in 0..2 {
        if s_max > 0.0 && s[k] >= SINGULAR_RATIO * s_max {
            inverse += v_t.row(k).transpose() * u.column(k).transpose() / s[k];
        }
    }
    DilitationCorrection { tensor, inverse, singular }
}

/// Coefficients `c_ij` (aligned with `N(i)`) such that
/// `θ_i = Σ_j c_ij · (u_j − u_i)`.
pub fn dilitation_row(
    i: usize,
    correction: &DilitationCorrection,
    nbrs: &Neighborhoods,
    bonds: &BondSet,
    family: &QuadratureFamily,
    constants: &LpsConstants,
) -> Vec<Vec2> {
    let scale = constants.dim as f64 / constants.weighted_volume;
    nbrs.range(i)
        .map(|e| {
            let w = bonds.effective_weight(family, e);
            if w == 0.0 {
                return Vec2::zeros();
            }
            let z = nbrs.bond(e);
            // M is symmetric, so zᵀM⁻¹ = (M⁻¹z)ᵀ.
            correction.inverse.transpose() * z * (scale * constants.kernel.kernel(z.norm()) * w)
        })
        .collect()
}

/// Sparse coupled system over `[u (2 per interior point), θ]`.
///
/// Row `r` is the equation owned by unknown `r`: momentum x/y rows for each
/// interior point, then one dilitation identity per θ unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSystem {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Slot of `u_x` (and `u_y = +1`) per point.
    pub u_slot: Vec<Option<usize>>,
    pub theta_slot: Vec<Option<usize>>,
    pub n_displacement: usize,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// Full displacement field: solved values at interior points, the given
    /// known values elsewhere.
    pub fn displacements(&self, x: &[f64], known: &[Vec2]) -> Vec<Vec2> {
        self.u_slot.iter().zip(known).map(|(s, k)| s.map_or(*k, |s| Vec2::new(x[s], x[s + 1]))).collect()
    }

    pub fn dilitation(&self, x: &[f64]) -> Vec<Option<f64>> {
        self.theta_slot.iter().map(|s| s.map(|s| x[s])).collect()
    }
}

/// Precomputed per-bond coefficients of the discrete operator.
#[derive(Clone, Debug)]
pub struct LpsOperator {
    /// Momentum rows: interior points with material.
    momentum: Vec<bool>,
    /// Dilitation rows: material points reached by a momentum stencil.
    theta: Vec<bool>,
    /// `(C_α/m)(λ_ij − μ_ij) K_ij ω̃` per entry.
    alpha: Vec<f64>,
    /// `(C_β/m) μ_ij K_ij ω̃ / |z|²` per entry.
    beta: Vec<f64>,
    /// `c_ij` per entry (θ rows only).
    dil: Vec<Vec2>,
    corrections: Vec<Option<DilitationCorrection>>,
}

impl LpsOperator {
    /// Builds the operator. `present` masks points that carry material; bonds
    /// to absent points must already be broken.
    pub fn build(
        cloud: &PointCloud,
        nbrs: &Neighborhoods,
        family: &QuadratureFamily,
        bonds: &BondSet,
        material: &MaterialField,
        constants: &LpsConstants,
        present: &[bool],
    ) -> Result<Self> {
        let n = cloud.len();
        let momentum: Vec<bool> = (0..n).map(|i| present[i] && cloud.is_interior(i)).collect();
        let mut theta = momentum.clone();
        for i in (0..n).filter(|&i| momentum[i]) {
            for &j in nbrs.neighbors(i) {
                if present[j] {
                    theta[j] = true;
                }
            }
        }

        let mut alpha = vec![0.0; nbrs.bond_count()];
        let mut beta = vec![0.0; nbrs.bond_count()];
        let mut dil = vec![Vec2::zeros(); nbrs.bond_count()];
        let mut corrections = vec![None; n];
        let m = constants.weighted_volume;
        for i in 0..n {
            if !(momentum[i] || theta[i]) {
                continue;
            }
            if !family.is_computed(i) {
                return Err(Error::Assembly(format!("point {i} carries a row but has no quadrature weights")));
            }
            for e in nbrs.range(i) {
                let w = bonds.effective_weight(family, e);
                if w == 0.0 {
                    continue;
                }
                let j = nbrs.target(e);
                if !present[j] {
                    return Err(Error::Assembly(format!("bond {i}-{j} references removed point {j}")));
                }
                if momentum[i] {
                    let z = nbrs.bond(e);
                    let k = constants.kernel.kernel(z.norm());
                    let lam = pair_modulus(material.lambda[i], material.lambda[j]);
                    let mu = pair_modulus(material.mu[i], material.mu[j]);
                    alpha[e] = constants.c_alpha / m * (lam - mu) * k * w;
                    beta[e] = constants.c_beta / m * mu * k * w / z.norm_squared();
                }
            }
            if theta[i] {
                let corr = moment_tensor(i, nbrs, bonds, family, constants);
                let row = dilitation_row(i, &corr, nbrs, bonds, family, constants);
                dil[nbrs.range(i)].copy_from_slice(&row);
                corrections[i] = Some(corr);
            }
        }
        Ok(Self { momentum, theta, alpha, beta, dil, corrections })
    }

    pub fn has_momentum_row(&self, i: usize) -> bool {
        self.momentum[i]
    }

    pub fn has_dilitation_row(&self, i: usize) -> bool {
        self.theta[i]
    }

    pub fn correction(&self, i: usize) -> Option<&DilitationCorrection> {
        self.corrections[i].as_ref()
    }

    /// Corrected dilitation of a full displacement field at θ points.
    pub fn dilitation(&self, nbrs: &Neighborhoods, u: &[Vec2]) -> Vec<Option<f64>> {
        (0..nbrs.len())
            .map(|i| self.theta[i].then(|| nbrs.range(i).map(|e| self.dil[e].dot(&(u[nbrs.target(e)] - u[i]))).sum()))
            .collect()
    }

    /// Momentum operator applied to `(u, θ)` at momentum points.
    pub fn momentum(&self, nbrs: &Neighborhoods, u: &[Vec2], theta: &[Option<f64>]) -> Vec<Option<Vec2>> {
        (0..nbrs.len())
            .map(|i| {
                self.momentum[i].then(|| {
                    let ti = theta[i].unwrap_or(0.0);
                    let mut acc = Vec2::zeros();
                    for e in nbrs.range(i) {
                        if self.alpha[e] == 0.0 && self.beta[e] == 0.0 {
                            continue;
                        }
                        let j = nbrs.target(e);
                        let z = nbrs.bond(e);
                        let tj = theta[j].unwrap_or(0.0);
                        acc += z * (self.alpha[e] * (ti + tj) + self.beta[e] * z.dot(&(u[j] - u[i])));
                    }
                    acc
                })
            })
            .collect()
    }

    /// Dilitation followed by momentum: the operator on displacement only.
    pub fn apply(&self, nbrs: &Neighborhoods, u: &[Vec2]) -> Vec<Option<Vec2>> {
        let theta = self.dilitation(nbrs, u);
        self.momentum(nbrs, u, &theta)
    }

    /// Assembles the block system. `known` supplies displacements at points
    /// without momentum rows; `forcing` is read at momentum points.
    pub fn assemble(&self, nbrs: &Neighborhoods, known: &[Vec2], forcing: &[Vec2]) -> Result<BlockSystem> {
        let n = nbrs.len();
        let mut u_slot = vec![None; n];
        let mut theta_slot = vec![None; n];
        let mut next = 0;
        for i in (0..n).filter(|&i| self.momentum[i]) {
            u_slot[i] = Some(next);
            next += 2;
        }
        let n_displacement = next;
        for i in (0..n).filter(|&i| self.theta[i]) {
            theta_slot[i] = Some(next);
            next += 1;
        }
        let dim = next;

        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut rhs = vec![0.0; dim];
        let mut rows: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];

        let flush =
            |row: &mut Vec<(usize, f64)>, cols: &mut Vec<usize>, vals: &mut Vec<f64>, row_ptr: &mut Vec<usize>| {
                row.sort_unstable_by_key(|(c, _)| *c);
                let start = cols.len();
                for &(c, v) in row.iter() {
                    if cols.len() > start && *cols.last().unwrap() == c {
                        *vals.last_mut().unwrap() += v;
                    } else {
                        cols.push(c);
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
                row.clear();
            };

        for i in (0..n).filter(|&i| self.momentum[i]) {
            let ui = u_slot[i].unwrap();
            let ti = theta_slot[i]
                .ok_or_else(|| Error::Assembly(format!("momentum point {i} lacks a dilitation unknown")))?;
            let mut self_theta = Vec2::zeros();
            let mut self_u = Matrix2::zeros();
            let mut b = forcing[i];
            for e in nbrs.range(i) {
                let (a, be) = (self.alpha[e], self.beta[e]);
                if a == 0.0 && be == 0.0 {
                    continue;
                }
                let j = nbrs.target(e);
                let z = nbrs.bond(e);
                let tj = theta_slot[j]
                    .ok_or_else(|| Error::Assembly(format!("neighbor {j} of {i} lacks a dilitation unknown")))?;
                self_theta += z * a;
                for (c, row) in rows.iter_mut().enumerate() {
                    row.push((tj, z[c] * a));
                }
                let block = z * z.transpose() * be;
                self_u -= block;
                match u_slot[j] {
                    Some(uj) => {
                        for (c, row) in rows.iter_mut().enumerate() {
                            row.push((uj, block[(c, 0)]));
                            row.push((uj + 1, block[(c, 1)]));
                        }
                    }
                    None => b -= block * known[j],
                }
            }
            for (c, row) in rows.iter_mut().enumerate() {
                row.push((ti, self_theta[c]));
                row.push((ui, self_u[(c, 0)]));
                row.push((ui + 1, self_u[(c, 1)]));
                rhs[ui + c] = b[c];
                flush(row, &mut cols, &mut vals, &mut row_ptr);
            }
        }

        let row = &mut rows[0];
        for k in (0..n).filter(|&k| self.theta[k]) {
            let tk = theta_slot[k].unwrap();
            // θ_k − Σ_j c_kj·u_j + (Σ_j c_kj)·u_k = 0
            row.push((tk, 1.0));
            let mut sum_c = Vec2::zeros();
            let mut b = 0.0;
            for e in nbrs.range(k) {
                let c = self.dil[e];
                if c == Vec2::zeros() {
                    continue;
                }
                let j = nbrs.target(e);
                sum_c += c;
                match u_slot[j] {
                    Some(uj) => {
                        row.push((uj, -c.x));
                        row.push((uj + 1, -c.y));
                    }
                    None => b += c.dot(&known[j]),
                }
            }
            match u_slot[k] {
                Some(uk) => {
                    row.push((uk, sum_c.x));
                    row.push((uk + 1, sum_c.y));
                }
                None => b -= sum_c.dot(&known[k]),
            }
            rhs[tk] = b;
            flush(row, &mut cols, &mut vals, &mut row_ptr);
        }

        Ok(BlockSystem { row_ptr, cols, vals, rhs, u_slot, theta_slot, n_displacement })
    }
}

pub fn assemble_system(
    cloud: &PointCloud,
    nbrs: &Neighborhoods,
    family: &QuadratureFamily,
    bonds: &BondSet,
    material: &MaterialField,
    constants: &LpsConstants,
    present: &[bool],
    known: &[Vec2],
    forcing: &[Vec2],
) -> Result<(LpsOperator, BlockSystem)> {
    let op = LpsOperator::build(cloud, nbrs, family, bonds, material, constants, present)?;
    let system = op.assemble(nbrs, known, forcing)?;
    Ok((op, system))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::manufactured_poly;
    use crate::pointcloud::{build_neighborhoods, generate_perturbed_lattice, DomainSpec};
    use crate::quadrature::compute_family;

    type Field = fn(&Vec2) -> Vec2;

    struct Fixture {
        cloud: PointCloud,
        nbrs: Neighborhoods,
        family: QuadratureFamily,
        constants: LpsConstants,
    }

    fn fixture(n: usize, perturb: f64, seed: u64) -> Fixture {
        let cloud = generate_perturbed_lattice(&DomainSpec::default(), n, perturb, seed).unwrap();
        let nbrs = build_neighborhoods(&cloud);
        let kernel = KernelSpec::new(cloud.delta());
        let family = compute_family(&cloud, &nbrs, &kernel).unwrap();
        Fixture { cloud, nbrs, family, constants: LpsConstants::plane_strain(kernel) }
    }

    fn half() -> ElasticModuli {
        ElasticModuli::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_pair(1.0, 1.0).unwrap(), 1.0);
        assert!((harmonic_pair(2.0, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(harmonic_pair(0.37, 0.37).unwrap(), 0.37);
        assert!(harmonic_pair(0.0, 1.0).is_err());
        assert!(harmonic_pair(-1.0, 1.0).is_err());
    }

    #[test]
    fn constants() {
        let k = KernelSpec::new(0.5);
        let c = LpsConstants::plane_strain(k);
        assert_eq!((c.c_alpha, c.c_beta, c.dim), (2.0, 16.0, 2));
        assert!((c.weighted_volume - 2.0 * PI * 0.125 / 3.0).abs() < 1e-15);
        let c3 = LpsConstants::three_d(k);
        assert_eq!((c3.c_alpha, c3.c_beta, c3.dim), (3.0, 30.0, 3));
        assert!((c3.weighted_volume - PI * 0.0625).abs() < 1e-15);
    }

    #[test]
    fn circle_crossing_examples() {
        let c = Circle::new(Vec2::new(0.5, 0.5), 0.2);
        assert!(segment_crosses_circle(&Vec2::new(0.26, 0.5), &Vec2::new(0.31, 0.5), &c));
        assert!(!segment_crosses_circle(&Vec2::new(0.22, 0.5), &Vec2::new(0.25, 0.5), &c));
        assert!(!segment_crosses_circle(&Vec2::new(0.45, 0.5), &Vec2::new(0.55, 0.52), &c));
        // Chord through the disk with both endpoints outside.
        assert!(segment_crosses_circle(&Vec2::new(0.2, 0.5), &Vec2::new(0.8, 0.5), &c));
        assert!(!segment_crosses_circle(&Vec2::new(0.2, 0.1), &Vec2::new(0.8, 0.1), &c));
    }

    #[test]
    fn bond_breaking_is_symmetric_and_idempotent() {
        let f = fixture(16, 0.2, 3);
        let circle = Circle::centered(0.2);
        let once = break_bonds_crossing_circle(&BondSet::intact(&f.nbrs), &f.nbrs, &f.cloud, &circle);
        let twice = break_bonds_crossing_circle(&once, &f.nbrs, &f.cloud, &circle);
        assert_eq!(once, twice);
        assert!(once.broken_count() > 0);
        for i in 0..f.nbrs.len() {
            for e in f.nbrs.range(i) {
                let j = f.nbrs.target(e);
                assert_eq!(once.is_broken(e), once.is_broken(f.nbrs.entry(j, i).unwrap()));
            }
        }
    }

    #[test]
    fn damage_examples() {
        let f = fixture(12, 0.2, 1);
        let mut bonds = BondSet::intact(&f.nbrs);
        assert!(damage_field(&bonds, &f.family, &f.nbrs).iter().all(|d| *d == 0.0));
        let i = (0..f.cloud.len()).find(|&i| f.cloud.lattice_index(i) == [6, 6]).unwrap();
        let mut mask = vec![false; f.cloud.len()];
        mask[i] = true;
        bonds.detach(&f.nbrs, &mask);
        let d = damage_field(&bonds, &f.family, &f.nbrs);
        assert_eq!(d[i], 1.0);

        // Break bonds carrying exactly half the summed weight.
        let f = fixture(12, 0.0, 1);
        let i = (0..f.cloud.len()).find(|&i| f.cloud.lattice_index(i) == [6, 6]).unwrap();
        let mut bonds = BondSet::intact(&f.nbrs);
        for (k, &j) in f.nbrs.neighbors(i).iter().enumerate() {
            let z = f.nbrs.bonds(i)[k];
            // Upper half plane plus the positive x axis: half by symmetry.
            if z.y > 0.0 || (z.y == 0.0 && z.x > 0.0) {
                bonds.break_pair(&f.nbrs, i, j);
            }
        }
        let d = damage_field(&bonds, &f.family, &f.nbrs);
        assert!((d[i] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn correction_tensor_cases() {
        let f = fixture(16, 0.2, 5);
        let bonds = BondSet::intact(&f.nbrs);
        for i in (0..f.cloud.len()).filter(|&i| f.cloud.is_interior(i)) {
            let c = moment_tensor(i, &f.nbrs, &bonds, &f.family, &f.constants);
            assert!((c.tensor - Matrix2::identity()).abs().max() <= 1e-12);
            assert!(!c.singular);
        }
        let i = (0..f.cloud.len()).find(|&i| f.cloud.lattice_index(i) == [8, 8]).unwrap();

        let mut all = BondSet::intact(&f.nbrs);
        for &j in f.nbrs.neighbors(i) {
            all.break_pair(&f.nbrs, i, j);
        }
        let c = moment_tensor(i, &f.nbrs, &all, &f.family, &f.constants);
        assert!(c.singular);
        assert_eq!(c.tensor, Matrix2::zeros());
        assert_eq!(c.inverse, Matrix2::zeros());

        // Keep a single bond: rank-one tensor.
        let mut line = all.clone();
        let keep = f.nbrs.range(i).start;
        line.broken[keep] = false;
        let c = moment_tensor(i, &f.nbrs, &line, &f.family, &f.constants);
        assert!(c.singular);
        let z = f.nbrs.bond(keep);
        // Pseudo-inverse of a z zᵀ is z zᵀ / (a |z|⁴).
        assert!((c.inverse * c.tensor * z - z).norm() < 1e-10 * z.norm());
    }

    #[test]
    fn dilitation_affine_special_cases() {
        let f = fixture(16, 0.2, 6);
        let bonds = BondSet::intact(&f.nbrs);
        let op = LpsOperator::build(
            &f.cloud,
            &f.nbrs,
            &f.family,
            &bonds,
            &MaterialField::homogeneous(&f.cloud, half()).unwrap(),
            &f.constants,
            &vec![true; f.cloud.len()],
        )
        .unwrap();
        let fields: [(Field, f64); 3] =
            [(|p| Vec2::new(p.x, 0.0), 1.0), (|p| Vec2::new(p.y, 0.0), 0.0), (|p| Vec2::new(-p.y, p.x), 0.0)];
        for (field, expected) in fields {
            let u: Vec<Vec2> = f.cloud.positions().iter().map(field).collect();
            for th in op.dilitation(&f.nbrs, &u).into_iter().flatten() {
                assert!((th - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patch_residual_and_linearity() {
        let f = fixture(16, 0.2, 2);
        let bonds = BondSet::intact(&f.nbrs);
        let material = MaterialField::homogeneous(&f.cloud, half()).unwrap();
        let present = vec![true; f.cloud.len()];
        let op = LpsOperator::build(&f.cloud, &f.nbrs, &f.family, &bonds, &material, &f.constants, &present).unwrap();

        let u: Vec<Vec2> = f.cloud.positions().iter().map(|p| manufactured_poly(p, &half()).0).collect();
        for (i, out) in op.apply(&f.nbrs, &u).into_iter().enumerate() {
            if let Some(v) = out {
                let target = manufactured_poly(&f.cloud.position(i), &half()).1;
                assert!((v - target).amax() <= 1e-10, "point {i}: {v:?}");
            }
        }

        let zero = vec![Vec2::zeros(); f.cloud.len()];
        assert!(op.apply(&f.nbrs, &zero).into_iter().flatten().all(|v| v == Vec2::zeros()));
        let constant = vec![Vec2::new(0.3, -1.2); f.cloud.len()];
        assert!(op.apply(&f.nbrs, &constant).into_iter().flatten().all(|v| v.amax() <= 1e-12));

        let v: Vec<Vec2> = f.cloud.positions().iter().map(|p| Vec2::new(p.y.sin(), p.x * p.y)).collect();
        let combo: Vec<Vec2> = u.iter().zip(&v).map(|(a, b)| a * 2.0 - b * 0.5).collect();
        let (ou, ov, oc) = (op.apply(&f.nbrs, &u), op.apply(&f.nbrs, &v), op.apply(&f.nbrs, &combo));
        for ((a, b), c) in ou.iter().zip(&ov).zip(&oc) {
            if let (Some(a), Some(b), Some(c)) = (a, b, c) {
                assert!((a * 2.0 - b * 0.5 - c).amax() < 1e-11);
            }
        }
    }

    #[test]
    fn assembled_system_matches_operator() {
        let f = fixture(12, 0.2, 7);
        let bonds = BondSet::intact(&f.nbrs);
        let material = MaterialField::homogeneous(&f.cloud, half()).unwrap();
        let present = vec![true; f.cloud.len()];
        let known: Vec<Vec2> = f.cloud.positions().iter().map(|p| manufactured_poly(p, &half()).0).collect();
        let forcing: Vec<Vec2> = f.cloud.positions().iter().map(|p| manufactured_poly(p, &half()).1).collect();
        let (op, sys) =
            assemble_system(&f.cloud, &f.nbrs, &f.family, &bonds, &material, &f.constants, &present, &known, &forcing)
                .unwrap();
        assert_eq!(sys.n_displacement, 2 * f.cloud.interior_count());
        // The exact field satisfies every row.
        let theta = op.dilitation(&f.nbrs, &known);
        let mut x = vec![0.0; sys.dim()];
        for i in 0..f.cloud.len() {
            if let Some(s) = sys.u_slot[i] {
                x[s] = known[i].x;
                x[s + 1] = known[i].y;
            }
            if let Some(s) = sys.theta_slot[i] {
                x[s] = theta[i].unwrap();
            }
        }
        let ax = sys.matvec(&x);
        let res = ax.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-10, "{res}");

        // Uniform grid stencil bound: ≤ 37 points' u and θ per momentum row.
        let g = fixture(12, 0.0, 1);
        let (_, sys) = assemble_system(
            &g.cloud,
            &g.nbrs,
            &g.family,
            &BondSet::intact(&g.nbrs),
            &MaterialField::homogeneous(&g.cloud, half()).unwrap(),
            &g.constants,
            &vec![true; g.cloud.len()],
            &vec![Vec2::zeros(); g.cloud.len()],
            &vec![Vec2::zeros(); g.cloud.len()],
        )
        .unwrap();
        for r in 0..sys.n_displacement {
            assert!(sys.row(r).0.len() <= 37 * 3);
        }
    }

    #[test]
    fn removed_point_reference_is_an_assembly_error() {
        let f = fixture(12, 0.2, 7);
        let mut present = vec![true; f.cloud.len()];
        let i = (0..f.cloud.len()).find(|&i| f.cloud.lattice_index(i) == [6, 6]).unwrap();
        present[i] = false;
        let err = LpsOperator::build(
            &f.cloud,
            &f.nbrs,
            &f.family,
            &BondSet::intact(&f.nbrs),
            &MaterialField::homogeneous(&f.cloud, half()).unwrap(),
            &f.constants,
            &present,
        );
        assert!(matches!(err, Err(Error::Assembly(_))));
    }
}
