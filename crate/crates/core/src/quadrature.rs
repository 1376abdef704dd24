//! Optimization-based quadrature on δ-balls.
//!
//! For every collocation point the weights `ω_{j,i}` are the minimum-norm
//! solution of `Σ_j f(x_j − x_i) ω_{j,i} = ∫_{B_δ(0)} f(z) dz` for each `f`
//! in the constraint basis. Moments are closed-form; the systems are solved in
//! nondimensional form (`z/δ`, unit-ball moments) and rescaled by `δ²`, so the
//! rank threshold is scale-free.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pointcloud::{Neighborhoods, PointCloud};
use crate::Vec2;

/// Default relative singular-value cutoff for the least-norm solve.
pub const RANK_TOL: f64 = 1e-10;

/// Points whose certified constraint residual exceeds this abort the run.
pub const RESIDUAL_TOL: f64 = 1e-11;

/// Kernel `K(r) = 1/r` on the closed ball of radius δ in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    delta: f64,
}

impl KernelSpec {
    pub const DIM: usize = 2;

    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0, "horizon must be positive");
        Self { delta }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `1/r` inside the horizon (inclusive, matching the neighbor lists).
    pub fn kernel(&self, r: f64) -> f64 {
        if r > 0.0 && r <= self.delta * (1.0 + 1e-12) {
            1.0 / r
        } else {
            0.0
        }
    }

    /// `m(δ) = ∫_{B_δ} K(|z|) |z|² dz = 2πδ³/3`.
    pub fn weighted_volume(&self) -> f64 {
        2.0 * PI * self.delta.powi(3) / 3.0
    }
}

/// Scalar integrand `z₁^a z₂^b / |z|^c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Integrand {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

impl Integrand {
    pub const fn new(a: u32, b: u32, c: u32) -> Self {
        Self { a, b, c }
    }

    /// Homogeneity degree `a + b − c`.
    pub fn degree(&self) -> i32 {
        (self.a + self.b) as i32 - self.c as i32
    }

    pub fn eval(&self, z: &Vec2) -> f64 {
        let mut v = z.x.powi(self.a as i32) * z.y.powi(self.b as i32);
        if self.c > 0 {
            v /= z.norm().powi(self.c as i32);
        }
        v
    }

    /// Exact integral over the unit ball.
    pub fn unit_ball_moment(&self) -> f64 {
        let radial_power = self.degree() + 1;
        assert!(radial_power > -1, "integrand {self:?} is not integrable at the origin");
        angular_moment(self.a, self.b) / (radial_power + 1) as f64
    }

    /// Exact integral over `B_δ(0)`.
    pub fn ball_moment(&self, delta: f64) -> f64 {
        self.unit_ball_moment() * delta.powi(self.degree() + 2)
    }
}

fn double_factorial(k: i64) -> f64 {
    let mut acc = 1.0;
    let mut m = k;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

/// `∫_0^{2π} cos^a θ sin^b θ dθ`.
pub fn angular_moment(a: u32, b: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 {
        return 0.0;
    }
    2.0 * PI * double_factorial(a as i64 - 1) * double_factorial(b as i64 - 1) / double_factorial((a + b) as i64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Shifted monomials of total degree ≤ 2.
    Polynomial,
    /// `z_i z_j m(z) / |z|³`, the tensor kernel against polynomial increments.
    TensorKernel,
    /// `z_k m(z) / |z|`, the dilitation kernel against polynomial increments.
    Dilitation,
}

/// Increment monomials `m(z)` of `p(x+z) − p(x)` for quadratic `p`.
const INCREMENTS: [(u32, u32); 5] = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// The integrands the quadrature must reproduce, with exact moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintBasis {
    delta: f64,
    rows: Vec<(Family, Integrand)>,
}

impl ConstraintBasis {
    /// Polynomial, tensor-kernel and (optionally) dilitation families.
    pub fn new(spec: &KernelSpec, with_dilitation: bool) -> Self {
        let mut rows = Vec::with_capacity(36);
        for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            rows.push((Family::Polynomial, Integrand::new(a, b, 0)));
        }
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (ma, mb) in INCREMENTS {
                let a = ma + (i == 0) as u32 + (j == 0) as u32;
                let b = mb + (i == 1) as u32 + (j == 1) as u32;
                rows.push((Family::TensorKernel, Integrand::new(a, b, 3)));
            }
        }
        if with_dilitation {
            for k in 0..2 {
                for (ma, mb) in INCREMENTS {
                    let a = ma + (k == 0) as u32;
                    let b = mb + (k == 1) as u32;
                    rows.push((Family::Dilitation, Integrand::new(a, b, 1)));
                }
            }
        }
        Self { delta: spec.delta(), rows }
    }

    /// Only the polynomial and tensor-kernel families.
    pub fn strict_vh(spec: &KernelSpec) -> Self {
        Self::new(spec, false)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(Family, Integrand)] {
        &self.rows
    }

    pub fn integrand(&self, r: usize) -> Integrand {
        self.rows[r].1
    }

    pub fn family(&self, r: usize) -> Family {
        self.rows[r].0
    }

    pub fn moment(&self, r: usize) -> f64 {
        self.rows[r].1.ball_moment(self.delta)
    }

    pub fn has_dilitation(&self) -> bool {
        self.rows.iter().any(|(f, _)| *f == Family::Dilitation)
    }
}

/// All 36 constraint integrands with their closed-form moments over `B_δ`.
pub fn exact_ball_moments(spec: &KernelSpec) -> ConstraintBasis {
    ConstraintBasis::new(spec, true)
}

/// Equality constraints `B ω = g` for one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Builds the physical constraint system of point `i`: column `j` holds every
/// basis integrand evaluated at the bond `x_j − x_i`.
pub fn assemble_constraints(i: usize, nbrs: &Neighborhoods, basis: &ConstraintBasis) -> Result<ConstraintSystem> {
    let bonds = nbrs.bonds(i);
    if bonds.is_empty() {
        return Err(Error::Quadrature { point: i, residual: 1.0 });
    }
    let matrix = DMatrix::from_fn(basis.len(), bonds.len(), |r, j| basis.integrand(r).eval(&bonds[j]));
    let rhs = DVector::from_fn(basis.len(), |r, _| basis.moment(r));
    Ok(ConstraintSystem { matrix, rhs })
}

/// Unit-ball form of point `i`'s system. Weights solving it must be scaled by
/// `δ²`.
fn assemble_nondimensional(i: usize, nbrs: &Neighborhoods, basis: &ConstraintBasis) -> Result<ConstraintSystem> {
    let bonds = nbrs.bonds(i);
    if bonds.is_empty() {
        return Err(Error::Quadrature { point: i, residual: 1.0 });
    }
    let inv = 1.0 / basis.delta();
    let scaled: Vec<Vec2> = bonds.iter().map(|z| z * inv).collect();
    let matrix = DMatrix::from_fn(basis.len(), scaled.len(), |r, j| basis.integrand(r).eval(&scaled[j]));
    let rhs = DVector::from_fn(basis.len(), |r, _| basis.integrand(r).unit_ball_moment());
    Ok(ConstraintSystem { matrix, rhs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastNorm {
    pub weights: DVector<f64>,
    /// Number of singular values kept.
    pub rank: usize,
    /// `‖Bω − g‖ / ‖g‖` recomputed from `B` and `g`.
    pub residual: f64,
}

/// Minimum-2-norm solution of `Bω = g` on the numerically consistent subspace:
/// singular directions below `rank_tol · σ_max` are dropped.
pub fn least_norm_weights(matrix: &DMatrix<f64>, rhs: &DVector<f64>, rank_tol: f64) -> Result<LeastNorm> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::Domain("least-norm solve on an empty constraint matrix".into()));
    }
    assert_eq!(matrix.nrows(), rhs.len(), "constraint matrix and moments disagree in length");
    let svd = matrix.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let cutoff = rank_tol * sigma_max;
    let mut weights = DVector::zeros(matrix.ncols());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coef = u.column(k).dot(rhs) / s;
            weights.axpy(coef, &v_t.row(k).transpose(), 1.0);
        }
    }
    let g_norm = rhs.norm();
    let r_norm = (matrix * &weights - rhs).norm();
    let residual = if g_norm > 0.0 { r_norm / g_norm } else { r_norm };
    Ok(LeastNorm { weights, rank, residual })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointDiagnostics {
    /// Relative residual of the nondimensional system.
    pub residual: f64,
    pub rank: usize,
    pub min_weight: f64,
    pub max_weight: f64,
    pub weight_sum: f64,
}

/// Quadrature weights for every row-carrying point, aligned with the
/// neighborhood entries.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureFamily {
    weights: Vec<f64>,
    diagnostics: Vec<Option<PointDiagnostics>>,
    delta: f64,
}

impl QuadratureFamily {
    /// `ω_{j,i}` for `j ∈ N(i)` in neighbor order; empty slice semantics for
    /// points without weights are avoided by returning zeros.
    pub fn weights<'a>(&'a self, nbrs: &Neighborhoods, i: usize) -> &'a [f64] {
        &self.weights[nbrs.range(i)]
    }

    /// Weight at a global bond entry.
    pub fn weight(&self, entry: usize) -> f64 {
        self.weights[entry]
    }

    pub fn all_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diagnostics(&self, i: usize) -> Option<&PointDiagnostics> {
        self.diagnostics[i].as_ref()
    }

    pub fn is_computed(&self, i: usize) -> bool {
        self.diagnostics[i].is_some()
    }

    pub fn computed_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.diagnostics.iter().enumerate().filter_map(|(i, d)| d.as_ref().map(|_| i))
    }

    pub fn max_residual(&self) -> f64 {
        self.diagnostics.iter().flatten().map(|d| d.residual).fold(0.0, f64::max)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Points that will carry a momentum or dilitation row: interior points and
/// every neighbor of one.
pub fn row_carrying_points(cloud: &PointCloud, nbrs: &Neighborhoods) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..cloud.len()).map(|i| cloud.is_interior(i)).collect();
    for i in (0..cloud.len()).filter(|&i| cloud.is_interior(i)) {
        for &j in nbrs.neighbors(i) {
            mask[j] = true;
        }
    }
    mask
}

/// Weights for every row-carrying point using the full constraint basis.
pub fn compute_family(cloud: &PointCloud, nbrs: &Neighborhoods, spec: &KernelSpec) -> Result<QuadratureFamily> {
    let basis = exact_ball_moments(spec);
    compute_family_with(nbrs, &basis, &row_carrying_points(cloud, nbrs))
}

/// Weights for the masked points against an arbitrary basis.
pub fn compute_family_with(nbrs: &Neighborhoods, basis: &ConstraintBasis, mask: &[bool]) -> Result<QuadratureFamily> {
    assert_eq!(mask.len(), nbrs.len());
    let scale = basis.delta() * basis.delta();
    let mut weights = vec![0.0; nbrs.bond_count()];
    let mut diagnostics = vec![None; nbrs.len()];
    for i in (0..nbrs.len()).filter(|&i| mask[i]) {
        let system = assemble_nondimensional(i, nbrs, basis)?;
        let sol = least_norm_weights(&system.matrix, &system.rhs, RANK_TOL)?;
        if !(sol.residual <= RESIDUAL_TOL) {
            return Err(Error::Quadrature { point: i, residual: sol.residual });
        }
        let out = &mut weights[nbrs.range(i)];
        let mut min_weight = f64::INFINITY;
        let mut max_weight = f64::NEG_INFINITY;
        let mut weight_sum = 0.0;
        for (w, &w_hat) in out.iter_mut().zip(sol.weights.iter()) {
            *w = w_hat * scale;
            min_weight = min_weight.min(*w);
            max_weight = max_weight.max(*w);
            weight_sum += *w;
        }
        diagnostics[i] =
            Some(PointDiagnostics { residual: sol.residual, rank: sol.rank, min_weight, max_weight, weight_sum });
    }
    Ok(QuadratureFamily { weights, diagnostics, delta: basis.delta() })
}

/// Random quadratic vector field increment `p(x+z) − p(x) = Gz + ½ (zᵀH₁z, zᵀH₂z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticIncrement {
    pub gradient: [[f64; 2]; 2],
    /// `hessian[c]` is the symmetric Hessian of component `c`.
    pub hessian: [[[f64; 2]; 2]; 2],
}

impl QuadraticIncrement {
    pub fn eval(&self, z: &Vec2) -> Vec2 {
        let zz = [z.x, z.y];
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            for k in 0..2 {
                *o += self.gradient[c][k] * zz[k];
                for l in 0..2 {
                    *o += 0.5 * self.hessian[c][k][l] * zz[k] * zz[l];
                }
            }
        }
        Vec2::new(out[0], out[1])
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut draw = || 2.0 * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 1.0;
        let mut gradient = [[0.0; 2]; 2];
        let mut hessian = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for g in gradient[c].iter_mut() {
                *g = draw();
            }
            let (d0, d1, off) = (draw(), draw(), draw());
            hessian[c] = [[d0, off], [off, d1]];
        }
        Self { gradient, hessian }
    }

    /// Monomial expansion of `p(x+z) − p(x)` component `c`: `(a, b, coef)`.
    fn terms(&self, c: usize) -> Vec<(u32, u32, f64)> {
        let mut t = vec![
            (1, 0, self.gradient[c][0]),
            (0, 1, self.gradient[c][1]),
            (2, 0, 0.5 * self.hessian[c][0][0]),
            (0, 2, 0.5 * self.hessian[c][1][1]),
        ];
        t.push((1, 1, self.hessian[c][0][1]));
        t
    }

    /// Exact `∫_{B_δ} z⊗z/|z|³ (p(x+z) − p(x)) dz`.
    pub fn exact_tensor_integral(&self, delta: f64) -> Vec2 {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..2 {
                for (a, b, coef) in self.terms(j) {
                    let f =
                        Integrand::new(a + (i == 0) as u32 + (j == 0) as u32, b + (i == 1) as u32 + (j == 1) as u32, 3);
                    *o += coef * f.ball_moment(delta);
                }
            }
        }
        Vec2::new(out[0], out[1])
    }

    /// Exact `∫_{B_δ} z·(p(x+z) − p(x)) / |z| dz`.
    pub fn exact_dilitation_integral(&self, delta: f64) -> f64 {
        let mut out = 0.0;
        for k in 0..2 {
            for (a, b, coef) in self.terms(k) {
                let f = Integrand::new(a + (k == 0) as u32, b + (k == 1) as u32, 1);
                out += coef * f.ball_moment(delta);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerificationReport {
    pub probes: usize,
    /// Largest relative error of the tensor-kernel integral.
    pub max_tensor_residual: f64,
    /// Largest relative error of the dilitation integral.
    pub max_dilitation_residual: f64,
}

/// Integrates `probe_count` random quadratic vector fields at random computed
/// points and compares with the analytic values. Errors are relative to
/// `Σ_j |ω_j| |f(z_j)|`.
pub fn verify_family(
    family: &QuadratureFamily,
    nbrs: &Neighborhoods,
    probe_count: usize,
    seed: u64,
) -> VerificationReport {
    let computed: Vec<usize> = family.computed_points().collect();
    let mut report = VerificationReport { probes: 0, max_tensor_residual: 0.0, max_dilitation_residual: 0.0 };
    if computed.is_empty() {
        return report;
    }
    let delta = family.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probe_count {
        let i = computed[(rng.next_u64() % computed.len() as u64) as usize];
        let p = QuadraticIncrement::random(&mut rng);
        let (tensor, scale_t, dil, scale_d) = integrate_increment(&p, nbrs.bonds(i), family.weights(nbrs, i));
        let err_t = (tensor - p.exact_tensor_integral(delta)).norm() / scale_t.max(f64::MIN_POSITIVE);
        let err_d = (dil - p.exact_dilitation_integral(delta)).abs() / scale_d.max(f64::MIN_POSITIVE);
        report.probes += 1;
        report.max_tensor_residual = report.max_tensor_residual.max(err_t);
        report.max_dilitation_residual = report.max_dilitation_residual.max(err_d);
    }
    report
}

/// Quadrature of the tensor and dilitation integrands with their magnitude
/// scales.
pub fn integrate_increment(p: &QuadraticIncrement, bonds: &[Vec2], weights: &[f64]) -> (Vec2, f64, f64, f64) {
    let mut tensor = Vec2::zeros();
    let mut dil = 0.0;
    let mut scale_t = 0.0;
    let mut scale_d = 0.0;
    for (z, &w) in bonds.iter().zip(weights) {
        let r = z.norm();
        let inc = p.eval(z);
        let t = z * (z.dot(&inc) / (r * r * r));
        let d = z.dot(&inc) / r;
        tensor += t * w;
        dil += d * w;
        scale_t += t.norm() * w.abs();
        scale_d += d.abs() * w.abs();
    }
    (tensor, scale_t, dil, scale_d)
}
