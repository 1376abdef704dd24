//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let sum = left + right;
    if depth == 0 || (b - a) < 1e-7 || (sum - whole).abs() <= 15.0 * tol {
        return sum + (sum - whole) / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`,
/// started from 64 panels so periodic integrands cannot fool the first
/// error estimate.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    let w = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adapt(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 30)
        })
        .sum()
}

/// `∫_{B_δ(0)} z₁^a z₂^b / |z|^c dz` by nested polar Simpson quadrature.
pub fn polar_moment(a: u32, b: u32, c: u32, delta: f64) -> f64 {
    let p = (a + b) as i32 - c as i32 + 1;
    assert!(p >= 0, "radial integrand r^{p} is not bounded");
    let radial = adaptive_simpson(&|r: f64| r.powi(p), 0.0, delta, 1e-16);
    let angular = adaptive_simpson(&|t: f64| t.cos().powi(a as i32) * t.sin().powi(b as i32), 0.0, 2.0 * PI, 1e-14);
    radial * angular
}

/// Small deterministic generator for test data (SplitMix64).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Quadratic vector field increment with its monomial expansion
/// `p_c(z) = Σ coef · z₁^a z₂^b`.
#[derive(Clone, Debug)]
pub struct QuadraticField {
    pub terms: [Vec<(u32, u32, f64)>; 2],
}

impl QuadraticField {
    pub fn random(rng: &mut TestRng) -> Self {
        let mut comp = || {
            [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
                .iter()
                .map(|&(a, b)| (a, b, rng.uniform(-1.0, 1.0)))
                .collect::<Vec<_>>()
        };
        Self { terms: [comp(), comp()] }
    }

    pub fn eval(&self, z: [f64; 2]) -> [f64; 2] {
        let e = |t: &Vec<(u32, u32, f64)>| {
            t.iter().map(|&(a, b, c)| c * z[0].powi(a as i32) * z[1].powi(b as i32)).sum::<f64>()
        };
        [e(&self.terms[0]), e(&self.terms[1])]
    }
}

/// Memoised oracle moments on one ball.
pub struct MomentTable {
    delta: f64,
    cache: std::collections::HashMap<(u32, u32, u32), f64>,
}

impl MomentTable {
    pub fn new(delta: f64) -> Self {
        Self { delta, cache: Default::default() }
    }

    pub fn get(&mut self, a: u32, b: u32, c: u32) -> f64 {
        let delta = self.delta;
        *self.cache.entry((a, b, c)).or_insert_with(|| polar_moment(a, b, c, delta))
    }

    /// `∫ z⊗z/|z|³ · p(z) dz`.
    pub fn tensor_integral(&mut self, p: &QuadraticField) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..2 {
                for &(a, b, coef) in &p.terms[j] {
                    let ea = a + (i == 0) as u32 + (j == 0) as u32;
                    let eb = b + (i == 1) as u32 + (j == 1) as u32;
                    *o += coef * self.get(ea, eb, 3);
                }
            }
        }
        out
    }

    /// `∫ z·p(z)/|z| dz`.
    pub fn dilitation_integral(&mut self, p: &QuadraticField) -> f64 {
        let mut out = 0.0;
        for k in 0..2 {
            for &(a, b, coef) in &p.terms[k] {
                out += coef * self.get(a + (k == 0) as u32, b + (k == 1) as u32, 1);
            }
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
