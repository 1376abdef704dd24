//! Direct sparse solve of the block system and the RMS error norm.

use std::time::{Duration, Instant};

use faer::prelude::*;
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};

use crate::error::{Error, Result};
use crate::lps_model::BlockSystem;
use crate::Vec2;

/// Certified relative residual required for success.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_REFINEMENT: usize = 4;

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `‖Ax − b‖/‖b‖` from the original matrix.
    pub relative_residual: f64,
    pub unknowns: usize,
    pub nnz: usize,
    pub refinement_steps: usize,
    pub wall_time: Duration,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(system: &BlockSystem, x: &[f64]) -> Vec<f64> {
    system.matvec(x).iter().zip(&system.rhs).map(|(ax, b)| b - ax).collect()
}

/// Rows or columns without a nonzero entry make the system singular; report
/// the first one found.
fn structural_check(system: &BlockSystem) -> Result<()> {
    let n = system.dim();
    let mut col_seen = vec![false; n];
    for r in 0..n {
        let (cols, vals) = system.row(r);
        let mut any = false;
        for (&c, &v) in cols.iter().zip(vals) {
            if v != 0.0 {
                any = true;
                col_seen[c] = true;
            }
        }
        if !any {
            return Err(Error::Solve(format!(
                "row {r} is identically zero (suspected floating subdomain or unloaded point)"
            )));
        }
    }
    if let Some(c) = col_seen.iter().position(|s| !s) {
        return Err(Error::Solve(format!("unknown {c} appears in no equation (suspected floating subdomain)")));
    }
    Ok(())
}

/// LU factorization with partial pivoting, followed by a few steps of
/// iterative refinement against the original matrix.
pub fn solve(system: &BlockSystem) -> Result<SolveReport> {
    let start = Instant::now();
    let n = system.dim();
    if system.row_ptr.len() != n + 1 {
        return Err(Error::Solve("matrix is not square".into()));
    }
    structural_check(system)?;

    let symbolic = SymbolicSparseRowMatRef::new_checked(n, n, &system.row_ptr, None, &system.cols);
    let matrix = SparseRowMatRef::new(symbolic, &system.vals);
    let lu = matrix.sp_lu().map_err(|e| Error::Solve(format!("LU factorization failed: {e}")))?;

    let b_norm = norm(&system.rhs);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut x = vec![0.0; n];
    let mut r = system.rhs.clone();
    let mut rel = norm(&r) / scale;
    let mut steps = 0;
    while steps <= MAX_REFINEMENT {
        let mut dx = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(dx.as_mut());
        let candidate: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi + dx[(i, 0)]).collect();
        if candidate.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve("factorization produced non-finite values (numerically singular matrix)".into()));
        }
        let r_new = residual(system, &candidate);
        let rel_new = norm(&r_new) / scale;
        if steps > 0 && rel_new >= rel {
            break;
        }
        x = candidate;
        r = r_new;
        rel = rel_new;
        steps += 1;
        if rel < 1e-15 {
            break;
        }
    }
    if !(rel <= RESIDUAL_TOL) {
        return Err(Error::Solve(format!(
            "relative residual {rel:.3e} exceeds {RESIDUAL_TOL:e} (near-singular system)"
        )));
    }
    Ok(SolveReport {
        solution: x,
        relative_residual: rel,
        unknowns: n,
        nnz: system.nnz(),
        refinement_steps: steps.saturating_sub(1),
        wall_time: start.elapsed(),
    })
}

/// `√(Σ_i |v_i|² / N)` with `N` the number of points.
pub fn rms_norm(values: &[Vec2]) -> f64 {
    assert!(!values.is_empty(), "RMS norm over zero points");
    (values.iter().map(|v| v.norm_squared()).sum::<f64>() / values.len() as f64).sqrt()
}
