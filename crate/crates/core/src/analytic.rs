//! Exact solutions for the benchmark problems.
//!
//! Forcing terms follow the sign convention of the discrete operator:
//! `f = ∇·σ(u)` with `σ = λ(∇·u)I + μ(∇u + ∇uᵀ)`.

use crate::error::{Error, Result};
use crate::pointcloud::Circle;
use crate::Vec2;

/// Lamé coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticModuli {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticModuli {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda >= 0.0) {
            return Err(Error::Domain(format!("invalid Lamé pair λ = {lambda}, μ = {mu}")));
        }
        Ok(Self { lambda, mu })
    }

    /// From the plane-strain bulk modulus `K = λ + μ` and Poisson ratio
    /// `ν = λ / (2(λ + μ))`.
    pub fn from_k_nu(k: f64, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        if !(k > 0.0) {
            return Err(Error::Domain(format!("bulk modulus must be positive, got {k}")));
        }
        Self::new(2.0 * k * nu, k * (1.0 - 2.0 * nu))
    }

    pub fn from_e_nu(e: f64, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        if !(e > 0.0) {
            return Err(Error::Domain(format!("Young's modulus must be positive, got {e}")));
        }
        Self::new(e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Shear modulus `mu` with the λ implied by `nu`.
    pub fn from_mu_nu(mu: f64, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Self::new(2.0 * mu * nu / (1.0 - 2.0 * nu), mu)
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    pub fn bulk_2d(&self) -> f64 {
        self.lambda + self.mu
    }

    /// Plane-strain Kolosov constant `3 − 4ν`.
    pub fn kolosov(&self) -> f64 {
        3.0 - 4.0 * self.poisson_ratio()
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::Domain(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
    }
    Ok(())
}

pub fn moduli_from_k_nu(k: f64, nu: f64) -> Result<ElasticModuli> {
    ElasticModuli::from_k_nu(k, nu)
}

pub fn moduli_from_e_nu(e: f64, nu: f64) -> Result<ElasticModuli> {
    ElasticModuli::from_e_nu(e, nu)
}

/// Quadratic patch-test field `u = (x², 4y²)` with its constant forcing.
pub fn manufactured_poly(x: &Vec2, moduli: &ElasticModuli) -> (Vec2, Vec2) {
    let (l, m) = (moduli.lambda, moduli.mu);
    (Vec2::new(x.x * x.x, 4.0 * x.y * x.y), Vec2::new(2.0 * l + 4.0 * m, 8.0 * l + 16.0 * m))
}

/// Smooth field `u = (sin x sin y, −cos x cos y)`, `f = −2(λ + 2μ) u`.
pub fn manufactured_trig(x: &Vec2, moduli: &ElasticModuli) -> (Vec2, Vec2) {
    let u = Vec2::new(x.x.sin() * x.y.sin(), -x.x.cos() * x.y.cos());
    (u, u * (-2.0 * (moduli.lambda + 2.0 * moduli.mu)))
}

/// Circular hole in an infinite plate under uniaxial tension along x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoleParams {
    pub tension: f64,
    pub hole: Circle,
    pub kappa: f64,
    pub moduli: ElasticModuli,
}

impl HoleParams {
    pub fn new(moduli: ElasticModuli, hole: Circle, tension: f64) -> Self {
        Self { tension, hole, kappa: moduli.kolosov(), moduli }
    }
}

/// Michell solution for the hole, plane-strain κ.
pub fn hole_displacement(x: &Vec2, params: &HoleParams) -> Result<Vec2> {
    let d = x - params.hole.center;
    let r = d.norm();
    let a = params.hole.radius;
    if r < a {
        return Err(Error::Domain(format!("point at radius {r} lies inside the hole of radius {a}")));
    }
    let t = d.y.atan2(d.x);
    let k = params.kappa;
    let pre = params.tension * a / (8.0 * params.moduli.mu);
    let (ar, ar3) = (a / r, (a / r).powi(3));
    let ux = pre
        * ((r / a) * (k + 1.0) * t.cos() + 2.0 * ar * ((1.0 + k) * t.cos() + (3.0 * t).cos())
            - 2.0 * ar3 * (3.0 * t).cos());
    let uy = pre
        * ((r / a) * (k - 3.0) * t.sin() + 2.0 * ar * ((1.0 - k) * t.sin() + (3.0 * t).sin())
            - 2.0 * ar3 * (3.0 * t).sin());
    Ok(Vec2::new(ux, uy))
}

/// Hydrostatically loaded cylindrical inclusion (phase 1 inside, phase 2
/// outside).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InclusionParams {
    pub p_inf: f64,
    pub interface: Circle,
    pub inner: ElasticModuli,
    pub outer: ElasticModuli,
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
}

impl InclusionParams {
    pub fn new(inner: ElasticModuli, outer: ElasticModuli, p_inf: f64, interface: Circle) -> Self {
        let (c_a, c_b, c_c) = inclusion_coefficients(&inner, &outer, p_inf, interface.radius);
        Self { p_inf, interface, inner, outer, c_a, c_b, c_c }
    }

    pub fn moduli_at(&self, x: &Vec2) -> ElasticModuli {
        if self.interface.contains_strict(x) {
            self.inner
        } else {
            self.outer
        }
    }
}

/// `(C_A, C_B, C_C)` of the radial inclusion solution.
pub fn inclusion_coefficients(inner: &ElasticModuli, outer: &ElasticModuli, p_inf: f64, a: f64) -> (f64, f64, f64) {
    let (l1, m1, l2, m2) = (inner.lambda, inner.mu, outer.lambda, outer.mu);
    let denom = 2.0 * (l1 + m1) * (l2 + 2.0 * m2);
    (p_inf / (2.0 * (l1 + m1)), p_inf * (l1 + m1 + m2) / denom, -p_inf * a * a * (l1 - l2 + m1 - m2) / denom)
}

/// `u_r = C_A r` inside, `C_B r + C_C / r` outside, `u_θ = 0`.
pub fn inclusion_displacement(x: &Vec2, params: &InclusionParams) -> Vec2 {
    let d = x - params.interface.center;
    let r = d.norm();
    if r == 0.0 {
        return Vec2::zeros();
    }
    let ur = if r < params.interface.radius { params.c_a * r } else { params.c_b * r + params.c_c / r };
    d * (ur / r)
}

/// Benchmark oracle: exact displacement, forcing and material field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticCase {
    Patch(ElasticModuli),
    Smooth(ElasticModuli),
    SmoothNearIncompressible(ElasticModuli),
    Hole(HoleParams),
    Inclusion(InclusionParams),
}

impl AnalyticCase {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Patch(_) => "patch",
            Self::Smooth(_) => "smooth",
            Self::SmoothNearIncompressible(_) => "smooth-nearinc",
            Self::Hole(_) => "hole",
            Self::Inclusion(_) => "inclusion",
        }
    }

    pub fn displacement(&self, x: &Vec2) -> Result<Vec2> {
        Ok(match self {
            Self::Patch(m) => manufactured_poly(x, m).0,
            Self::Smooth(m) | Self::SmoothNearIncompressible(m) => manufactured_trig(x, m).0,
            Self::Hole(p) => hole_displacement(x, p)?,
            Self::Inclusion(p) => inclusion_displacement(x, p),
        })
    }

    pub fn forcing(&self, x: &Vec2) -> Vec2 {
        match self {
            Self::Patch(m) => manufactured_poly(x, m).1,
            Self::Smooth(m) | Self::SmoothNearIncompressible(m) => manufactured_trig(x, m).1,
            Self::Hole(_) | Self::Inclusion(_) => Vec2::zeros(),
        }
    }

    pub fn moduli_at(&self, x: &Vec2) -> ElasticModuli {
        match self {
            Self::Patch(m) | Self::Smooth(m) | Self::SmoothNearIncompressible(m) => *m,
            Self::Hole(p) => p.moduli,
            Self::Inclusion(p) => p.moduli_at(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn half() -> ElasticModuli {
        ElasticModuli::from_k_nu(1.0, 0.25).unwrap()
    }

    /// `∇·σ(u)` by nested central differences.
    fn fd_div_stress(u: &dyn Fn(&Vec2) -> Vec2, m: &ElasticModuli, x: &Vec2, step: f64) -> Vec2 {
        let grad = |p: &Vec2| {
            let ex = Vec2::new(step, 0.0);
            let ey = Vec2::new(0.0, step);
            let dx = (u(&(p + ex)) - u(&(p - ex))) / (2.0 * step);
            let dy = (u(&(p + ey)) - u(&(p - ey))) / (2.0 * step);
            [[dx.x, dy.x], [dx.y, dy.y]]
        };
        let stress = |p: &Vec2| {
            let g = grad(p);
            let div = g[0][0] + g[1][1];
            [
                [m.lambda * div + 2.0 * m.mu * g[0][0], m.mu * (g[0][1] + g[1][0])],
                [m.mu * (g[0][1] + g[1][0]), m.lambda * div + 2.0 * m.mu * g[1][1]],
            ]
        };
        let ex = Vec2::new(step, 0.0);
        let ey = Vec2::new(0.0, step);
        let (sxp, sxm, syp, sym) = (stress(&(x + ex)), stress(&(x - ex)), stress(&(x + ey)), stress(&(x - ey)));
        Vec2::new(
            (sxp[0][0] - sxm[0][0] + syp[0][1] - sym[0][1]) / (2.0 * step),
            (sxp[1][0] - sxm[1][0] + syp[1][1] - sym[1][1]) / (2.0 * step),
        )
    }

    #[test]
    fn moduli_constructors() {
        let m = half();
        assert!((m.lambda - 0.5).abs() < 1e-15 && (m.mu - 0.5).abs() < 1e-15);
        let m = ElasticModuli::from_k_nu(2.0, 0.25).unwrap();
        assert!((m.lambda - 1.0).abs() < 1e-15 && (m.mu - 1.0).abs() < 1e-15);
        assert!((m.poisson_ratio() - 0.25).abs() < 1e-15);
        assert!((m.bulk_2d() - 2.0).abs() < 1e-15);

        let m = ElasticModuli::from_e_nu(1.0, 0.495).unwrap();
        assert!((m.lambda - 33.110367892976).abs() < 1e-9);
        assert!((m.mu - 0.334448160535).abs() < 1e-9);
        assert!((m.poisson_ratio() - 0.495).abs() < 1e-12);
        let m = ElasticModuli::from_e_nu(1.0, 0.25).unwrap();
        assert!((m.lambda - 0.4).abs() < 1e-15 && (m.mu - 0.4).abs() < 1e-15);
        let m = ElasticModuli::from_e_nu(3.0, 0.0).unwrap();
        assert_eq!(m.lambda, 0.0);
        assert_eq!(m.mu, 1.5);

        assert!(ElasticModuli::from_k_nu(1.0, 0.5).is_err());
        assert!(ElasticModuli::from_e_nu(1.0, 0.7).is_err());
        assert!(ElasticModuli::from_k_nu(-1.0, 0.2).is_err());
    }

    #[test]
    fn k_nu_round_trip() {
        for nu in [0.0, 0.1, 0.25, 0.4, 0.49] {
            let m = ElasticModuli::from_k_nu(1.7, nu).unwrap();
            assert!((m.poisson_ratio() - nu).abs() < 1e-14);
        }
    }

    #[test]
    fn manufactured_examples() {
        let (u, f) = manufactured_poly(&Vec2::new(1.0, 1.0), &half());
        assert_eq!(u, Vec2::new(1.0, 4.0));
        assert_eq!(f, Vec2::new(3.0, 12.0));
        assert_eq!(manufactured_poly(&Vec2::zeros(), &half()).0, Vec2::zeros());
        assert_eq!(manufactured_poly(&Vec2::new(0.3, 0.9), &half()).1, f);

        let (u, f) = manufactured_trig(&Vec2::new(PI / 2.0, PI / 2.0), &half());
        assert!((u - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f + u * 3.0).norm() < 1e-15);
    }

    #[test]
    fn forcings_match_finite_difference_stress() {
        let x = Vec2::new(0.37, 0.61);
        for m in [half(), ElasticModuli::from_e_nu(1.0, 0.495).unwrap()] {
            let poly = |p: &Vec2| manufactured_poly(p, &m).0;
            let trig = |p: &Vec2| manufactured_trig(p, &m).0;
            let scale = m.lambda + 2.0 * m.mu;
            assert!((fd_div_stress(&poly, &m, &x, 1e-3) - manufactured_poly(&x, &m).1).norm() < 1e-5 * scale);
            let coarse = (fd_div_stress(&trig, &m, &x, 1e-2) - manufactured_trig(&x, &m).1).norm();
            let fine = (fd_div_stress(&trig, &m, &x, 5e-3) - manufactured_trig(&x, &m).1).norm();
            assert!(fine < 1e-4 * scale);
            // Second order in the step.
            assert!(coarse / fine > 3.5);
        }
    }

    #[test]
    fn hole_solution() {
        let m = ElasticModuli::from_e_nu(1.0, 0.25).unwrap();
        let p = HoleParams::new(m, Circle::new(Vec2::zeros(), 0.2), 1.0);
        assert!((p.kappa - 2.0).abs() < 1e-15);
        let c = p.hole.center;
        let at_rim = hole_displacement(&(c + Vec2::new(0.2, 0.0)), &p).unwrap();
        assert!((at_rim.x - 3.0 * 0.2 * (p.kappa + 1.0) / (8.0 * m.mu)).abs() < 1e-14);
        assert!(at_rim.y.abs() < 1e-15);
        let far = 1e4;
        let u_far = hole_displacement(&(c + Vec2::new(far, 0.0)), &p).unwrap();
        assert!((u_far.x / (far * (p.kappa + 1.0) / (8.0 * m.mu)) - 1.0).abs() < 1e-6);
        for r in [0.25, 0.4, 0.8] {
            assert!(hole_displacement(&(c + Vec2::new(r, 0.0)), &p).unwrap().y.abs() < 1e-15);
        }
        assert!(hole_displacement(&c, &p).is_err());

        let u = |x: &Vec2| hole_displacement(x, &p).unwrap();
        for x in [Vec2::new(0.3, 0.05), Vec2::new(-0.2, -0.3), Vec2::new(0.0, 0.45)] {
            let fine = fd_div_stress(&u, &m, &x, 1e-3).norm();
            let coarse = fd_div_stress(&u, &m, &x, 2e-3).norm();
            // Pure truncation error: vanishes at second order in the step.
            assert!(fine < 1e-3 && coarse / fine > 3.5, "{fine} {coarse}");
        }
    }

    #[test]
    fn inclusion_solution() {
        let inner = ElasticModuli::from_k_nu(2.0, 0.25).unwrap();
        let outer = ElasticModuli::from_k_nu(1.0, 0.25).unwrap();
        let a = 0.2;
        let p = InclusionParams::new(inner, outer, 1.0, Circle::centered(a));
        assert!((p.c_a * a - (p.c_b * a + p.c_c / a)).abs() < 1e-14);
        assert_eq!(inclusion_displacement(&p.interface.center, &p), Vec2::zeros());

        let same = InclusionParams::new(outer, outer, 1.0, Circle::centered(a));
        assert!((same.c_a - 0.5).abs() < 1e-15);
        assert!((same.c_b - same.c_a).abs() < 1e-15);
        assert_eq!(same.c_c, 0.0);
        let x = Vec2::new(0.9, 0.1);
        assert!((inclusion_displacement(&x, &same) - (x - same.interface.center) * 0.5).norm() < 1e-15);

        let doubled = InclusionParams::new(inner, outer, 1.0, Circle::centered(2.0 * a));
        assert!((doubled.c_c / p.c_c - 4.0).abs() < 1e-12);

        // Zero body force in each phase, away from the interface.
        let u = |x: &Vec2| inclusion_displacement(x, &p);
        assert!(fd_div_stress(&u, &inner, &Vec2::new(0.52, 0.47), 1e-3).norm() < 1e-5);
        assert!(fd_div_stress(&u, &outer, &Vec2::new(0.85, 0.3), 1e-3).norm() < 1e-4);
    }
}
