//! End-to-end benchmark runs and their artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analytic::{AnalyticCase, ElasticModuli, HoleParams, InclusionParams};
use crate::error::{Error, Result};
use crate::lps_model::{damage_field, BondSet, LpsConstants, LpsOperator, MaterialField};
use crate::pointcloud::{
    build_neighborhoods, generate_perturbed_lattice, uniformity_metrics, Circle, DomainSpec, Neighborhoods, PointCloud,
    UniformityMetrics,
};
use crate::quadrature::{
    compute_family_with, exact_ball_moments, row_carrying_points, verify_family, ConstraintBasis, KernelSpec,
    QuadratureFamily, VerificationReport,
};
use crate::solver::{rms_norm, solve};
use crate::Vec2;

/// Radius of the hole and of the inclusion interface.
pub const FEATURE_RADIUS: f64 = 0.2;

pub const FIELDS_HEADER: &str = "x,y,ux,uy,theta,damage,ux_exact,uy_exact,err";
pub const CONVERGENCE_HEADER: &str = "n,h,N_interior,rms_error";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Patch,
    Smooth,
    SmoothNearInc,
    Hole,
    Inclusion,
}

impl CaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Patch => "patch",
            Self::Smooth => "smooth",
            Self::SmoothNearInc => "smooth-nearinc",
            Self::Hole => "hole",
            Self::Inclusion => "inclusion",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "patch" => Self::Patch,
            "smooth" => Self::Smooth,
            "smooth-nearinc" => Self::SmoothNearInc,
            "hole" => Self::Hole,
            "inclusion" => Self::Inclusion,
            other => return Err(Error::Config(format!("unknown case '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridKind {
    Perturbed,
    Uniform,
}

impl GridKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Perturbed => "perturbed",
            Self::Uniform => "uniform",
        }
    }
}

/// Parameters of one run. Material fields not used by the case are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: CaseKind,
    pub n: usize,
    pub delta_factor: f64,
    pub perturb_frac: f64,
    pub grid: GridKind,
    pub seed: u64,
    /// Poisson ratio of homogeneous cases; defaults to 0.25 (0.495 for the
    /// near-incompressible manufactured case).
    pub nu: Option<f64>,
    pub nu1: f64,
    pub nu2: f64,
    pub k1: f64,
    pub k2: f64,
    /// `μ₂/μ₁` for the inclusion; overrides `k1`.
    pub mu_ratio: Option<f64>,
    /// Restrict the quadrature to the polynomial and tensor-kernel families.
    pub strict_vh: bool,
}

impl RunConfig {
    pub fn new(case: CaseKind, n: usize) -> Self {
        Self {
            case,
            n,
            delta_factor: 3.5,
            perturb_frac: 0.2,
            grid: GridKind::Perturbed,
            seed: 7,
            nu: None,
            nu1: 0.25,
            nu2: 0.25,
            k1: 2.0,
            k2: 1.0,
            mu_ratio: None,
            strict_vh: false,
        }
    }

    pub fn with_grid(mut self, grid: GridKind) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn effective_perturbation(&self) -> f64 {
        match self.grid {
            GridKind::Perturbed => self.perturb_frac,
            GridKind::Uniform => 0.0,
        }
    }

    pub fn domain(&self) -> DomainSpec {
        let spec = DomainSpec { delta_factor: self.delta_factor, ..DomainSpec::default() };
        match self.case {
            CaseKind::Hole => spec.with_hole(Circle::centered(FEATURE_RADIUS)),
            CaseKind::Inclusion => spec.with_inclusion(Circle::centered(FEATURE_RADIUS)),
            _ => spec,
        }
    }

    pub fn analytic_case(&self) -> Result<AnalyticCase> {
        Ok(match self.case {
            CaseKind::Patch => AnalyticCase::Patch(ElasticModuli::from_k_nu(1.0, self.nu.unwrap_or(0.25))?),
            CaseKind::Smooth => AnalyticCase::Smooth(ElasticModuli::from_k_nu(1.0, self.nu.unwrap_or(0.25))?),
            CaseKind::SmoothNearInc => {
                AnalyticCase::SmoothNearIncompressible(ElasticModuli::from_e_nu(1.0, self.nu.unwrap_or(0.495))?)
            }
            CaseKind::Hole => AnalyticCase::Hole(HoleParams::new(
                ElasticModuli::from_e_nu(1.0, self.nu.unwrap_or(0.25))?,
                Circle::centered(FEATURE_RADIUS),
                1.0,
            )),
            CaseKind::Inclusion => {
                let outer = ElasticModuli::from_k_nu(self.k2, self.nu2)?;
                let inner = match self.mu_ratio {
                    Some(r) if r > 0.0 => ElasticModuli::from_mu_nu(outer.mu / r, self.nu1)?,
                    Some(r) => return Err(Error::Config(format!("shear modulus ratio must be positive, got {r}"))),
                    None => ElasticModuli::from_k_nu(self.k1, self.nu1)?,
                };
                AnalyticCase::Inclusion(InclusionParams::new(inner, outer, 1.0, Circle::centered(FEATURE_RADIUS)))
            }
        })
    }
}

/// Reference RMS errors matching a configuration, for self-describing
/// summaries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceValues {
    pub label: &'static str,
    pub n: Vec<usize>,
    pub rms_error: Vec<f64>,
}

pub fn reference_values(config: &RunConfig) -> Option<ReferenceValues> {
    let manufactured = vec![24, 48, 96, 192];
    let inclusion = vec![16, 32, 64, 128, 256];
    let uniform = config.grid == GridKind::Uniform;
    Some(match config.case {
        CaseKind::Patch => ReferenceValues {
            label: "quadratic patch test, perturbed grid",
            n: manufactured,
            rms_error: vec![4.11e-14, 2.47e-13, 2.69e-12, 4.01e-13],
        },
        CaseKind::Smooth => ReferenceValues {
            label: "smooth manufactured solution, lambda = mu = 1/2, perturbed grid",
            n: manufactured,
            rms_error: vec![0.02207, 0.00506, 0.00117, 0.00028],
        },
        CaseKind::SmoothNearInc => ReferenceValues {
            label: "smooth manufactured solution, E = 1, nu = 0.495, perturbed grid",
            n: manufactured,
            rms_error: vec![0.13057, 0.02597, 0.00632, 0.00158],
        },
        CaseKind::Hole => return None,
        CaseKind::Inclusion => {
            if config.mu_ratio.is_some() || config.k1 != 2.0 || config.k2 != 1.0 {
                return None;
            }
            let soft = config.nu1 == 0.25 && config.nu2 == 0.25;
            let near = config.nu1.max(config.nu2) == 0.49 && config.nu1.min(config.nu2) == 0.25;
            match (soft, near, uniform) {
                (true, _, true) => ReferenceValues {
                    label: "inclusion K1 = 2, K2 = 1, nu = 0.25, uniform grid",
                    n: inclusion,
                    rms_error: vec![0.00569, 0.00201, 0.00099, 0.00045, 0.00023],
                },
                (_, true, true) => ReferenceValues {
                    label: "inclusion K1 = 2, K2 = 1, one phase nu = 0.49, uniform grid",
                    n: inclusion,
                    rms_error: vec![0.04463, 0.03926, 0.02260, 0.01205, 0.00595],
                },
                (true, _, false) => ReferenceValues {
                    label: "inclusion K1 = 2, K2 = 1, nu = 0.25, perturbed grid",
                    n: inclusion,
                    rms_error: vec![0.00661, 0.00242, 0.00144, 0.00055, 0.00044],
                },
                (_, true, false) => ReferenceValues {
                    label: "inclusion K1 = 2, K2 = 1, one phase nu = 0.49, perturbed grid",
                    n: inclusion,
                    rms_error: vec![0.04629, 0.03941, 0.02304, 0.01211, 0.00614],
                },
                _ => return None,
            }
        }
    })
}

/// One line of `fields.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRow {
    pub position: Vec2,
    pub displacement: Vec2,
    pub theta: f64,
    pub damage: f64,
    pub exact: Vec2,
    pub lattice: [i64; 2],
}

impl FieldRow {
    pub fn error(&self) -> f64 {
        (self.displacement - self.exact).norm()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub h: f64,
    pub delta: f64,
    pub n_interior: usize,
    pub rms_error: f64,
    pub solver_residual: f64,
    pub unknowns: usize,
    pub max_quadrature_residual: f64,
    pub broken_bonds: usize,
    /// Interior material points in cloud order.
    pub fields: Vec<FieldRow>,
    pub wall_time: Duration,
}

/// Cloud, neighborhoods and quadrature weights for a configuration.
pub struct Discretization {
    pub cloud: PointCloud,
    pub nbrs: Neighborhoods,
    pub kernel: KernelSpec,
    pub family: QuadratureFamily,
}

pub fn discretize(config: &RunConfig) -> Result<Discretization> {
    let cloud = generate_perturbed_lattice(&config.domain(), config.n, config.effective_perturbation(), config.seed)?;
    let nbrs = build_neighborhoods(&cloud);
    let kernel = KernelSpec::new(cloud.delta());
    let basis = if config.strict_vh { ConstraintBasis::strict_vh(&kernel) } else { exact_ball_moments(&kernel) };
    let family = compute_family_with(&nbrs, &basis, &row_carrying_points(&cloud, &nbrs))?;
    Ok(Discretization { cloud, nbrs, kernel, family })
}

/// cloud → neighborhoods → weights → bonds/material → assembly → solve →
/// damage and errors.
pub fn run_case(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let case = config.analytic_case()?;
    let Discretization { cloud, nbrs, kernel, family } = discretize(config)?;

    let mut bonds = BondSet::intact(&nbrs);
    if let Some(hole) = cloud.spec().hole {
        bonds.break_crossing_circle(&nbrs, cloud.positions(), &hole);
        bonds.detach(&nbrs, cloud.void_mask());
    }
    let present: Vec<bool> = cloud.void_mask().iter().map(|v| !v).collect();
    let material = MaterialField::from_fn(&cloud, |x| case.moduli_at(x))?;
    let constants = LpsConstants::plane_strain(kernel);
    let op = LpsOperator::build(&cloud, &nbrs, &family, &bonds, &material, &constants, &present)?;

    let mut exact = vec![Vec2::zeros(); cloud.len()];
    let mut forcing = vec![Vec2::zeros(); cloud.len()];
    for i in (0..cloud.len()).filter(|&i| present[i]) {
        let x = cloud.position(i);
        exact[i] = case.displacement(&x)?;
        forcing[i] = case.forcing(&x);
    }
    let system = op.assemble(&nbrs, &exact, &forcing)?;
    let report = solve(&system)?;
    let u = system.displacements(&report.solution, &exact);
    let theta = system.dilitation(&report.solution);
    let damage = damage_field(&bonds, &family, &nbrs);

    let fields: Vec<FieldRow> = (0..cloud.len())
        .filter(|&i| op.has_momentum_row(i))
        .map(|i| FieldRow {
            position: cloud.position(i),
            displacement: u[i],
            theta: theta[i].unwrap_or(f64::NAN),
            damage: damage[i],
            exact: exact[i],
            lattice: cloud.lattice_index(i),
        })
        .collect();
    if fields.is_empty() {
        return Err(Error::Assembly("no interior material points".into()));
    }
    let errors: Vec<Vec2> = fields.iter().map(|r| r.displacement - r.exact).collect();
    Ok(RunOutcome {
        config: config.clone(),
        h: cloud.h(),
        delta: cloud.delta(),
        n_interior: fields.len(),
        rms_error: rms_norm(&errors),
        solver_residual: report.relative_residual,
        unknowns: report.unknowns,
        max_quadrature_residual: family.max_residual(),
        broken_bonds: bonds.broken_count(),
        fields,
        wall_time: start.elapsed(),
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    case: &'a str,
    n: usize,
    h: f64,
    delta: f64,
    #[serde(rename = "N_interior")]
    n_interior: usize,
    rms_error: f64,
    solver_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    paper_reference_values: Option<ReferenceValues>,
    grid: &'a str,
    seed: u64,
    delta_factor: f64,
    perturb: f64,
    strict_vh: bool,
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn fields_csv(outcome: &RunOutcome) -> String {
    let mut s = String::with_capacity(outcome.fields.len() * 160);
    s.push_str(FIELDS_HEADER);
    s.push('\n');
    for r in &outcome.fields {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.position.x,
            r.position.y,
            r.displacement.x,
            r.displacement.y,
            r.theta,
            r.damage,
            r.exact.x,
            r.exact.y,
            r.error()
        );
    }
    s
}

fn summary_json(outcome: &RunOutcome, slope: Option<f64>) -> Result<String> {
    let c = &outcome.config;
    let summary = Summary {
        case: c.case.name(),
        n: c.n,
        h: outcome.h,
        delta: outcome.delta,
        n_interior: outcome.n_interior,
        rms_error: outcome.rms_error,
        solver_residual: outcome.solver_residual,
        slope,
        paper_reference_values: reference_values(c),
        grid: c.grid.name(),
        seed: c.seed,
        delta_factor: c.delta_factor,
        perturb: c.effective_perturbation(),
        strict_vh: c.strict_vh,
    };
    Ok(serde_json::to_string_pretty(&summary)? + "\n")
}

/// Writes `fields.csv` and `summary.json` into `dir`.
pub fn write_run(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("fields.csv"), fields_csv(outcome).as_bytes())?;
    write_atomic(&dir.join("summary.json"), summary_json(outcome, None)?.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderRow {
    pub n: usize,
    pub h: f64,
    pub n_interior: usize,
    pub rms_error: f64,
    pub solver_residual: f64,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub case: CaseKind,
    pub rows: Vec<LadderRow>,
    /// Least-squares slope of `log(error)` against `log(h)`; needs ≥ 3 rows.
    pub slope: Option<f64>,
}

impl ConvergenceReport {
    pub fn from_rows(case: CaseKind, rows: Vec<LadderRow>) -> Self {
        let slope = (rows.len() >= 3).then(|| {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.h.ln(), r.rms_error.ln())).collect();
            least_squares_slope(&pts)
        });
        Self { case, rows, slope }
    }

    /// Error ratios between successive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].rms_error / w[1].rms_error).collect()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(CONVERGENCE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.n, r.h, r.n_interior, r.rms_error);
        }
        s
    }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs `config` at each `n` with the seed held fixed.
pub fn convergence_ladder(config: &RunConfig, n_list: &[usize]) -> Result<(ConvergenceReport, Vec<RunOutcome>)> {
    if n_list.len() < 2 {
        return Err(Error::Config("a convergence ladder needs at least two resolutions".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("resolutions must be strictly ascending, got {n_list:?}")));
    }
    let mut outcomes = Vec::with_capacity(n_list.len());
    for &n in n_list {
        outcomes.push(run_case(&RunConfig { n, ..config.clone() })?);
    }
    let rows = outcomes
        .iter()
        .map(|o| LadderRow {
            n: o.config.n,
            h: o.h,
            n_interior: o.n_interior,
            rms_error: o.rms_error,
            solver_residual: o.solver_residual,
            wall_time: o.wall_time,
        })
        .collect();
    Ok((ConvergenceReport::from_rows(config.case, rows), outcomes))
}

/// Writes `convergence.csv`, a `summary.json` for the finest level (with the
/// slope), and per-level run outputs under `n<value>/`.
pub fn write_ladder(report: &ConvergenceReport, outcomes: &[RunOutcome], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("convergence.csv"), report.csv().as_bytes())?;
    for o in outcomes {
        write_run(o, &dir.join(format!("n{}", o.config.n)))?;
    }
    if let Some(finest) = outcomes.last() {
        write_atomic(&dir.join("summary.json"), summary_json(finest, report.slope)?.as_bytes())?;
    }
    Ok(())
}

/// Centerline x-displacement profile of one contrast level.
#[derive(Clone, Debug)]
pub struct ContrastProfile {
    pub mu_ratio: f64,
    /// `(x, u_x, u_x exact)` sorted by x.
    pub samples: Vec<(f64, f64, f64)>,
    pub rms_error: f64,
    pub max_abs: f64,
    pub slope_inside: f64,
}

impl ContrastProfile {
    pub fn relative_error(&self) -> f64 {
        self.rms_error / self.max_abs
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("x,ux,ux_exact\n");
        for (x, u, e) in &self.samples {
            let _ = writeln!(s, "{x},{u},{e}");
        }
        s
    }
}

/// Lattice row used for centerline profiles: the one whose unperturbed
/// centers are nearest `y = 0.5` (the upper one when two tie).
pub fn centerline_row(n: usize) -> i64 {
    (n / 2) as i64
}

pub fn contrast_profile(outcome: &RunOutcome) -> Result<ContrastProfile> {
    let row = centerline_row(outcome.config.n);
    let mut samples: Vec<(f64, f64, f64)> = outcome
        .fields
        .iter()
        .filter(|r| r.lattice[1] == row)
        .map(|r| (r.position.x, r.displacement.x, r.exact.x))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    if samples.is_empty() {
        return Err(Error::Assembly("centerline row is empty".into()));
    }
    let rms_error = (samples.iter().map(|s| (s.1 - s.2).powi(2)).sum::<f64>() / samples.len() as f64).sqrt();
    let max_abs = samples.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
    let case = outcome.config.analytic_case()?;
    let slope_inside = match case {
        AnalyticCase::Inclusion(p) => {
            let inside: Vec<(f64, f64)> = samples
                .iter()
                .filter(|s| (s.0 - p.interface.center.x).abs() < 0.5 * p.interface.radius)
                .map(|s| (s.0, s.1))
                .collect();
            if inside.len() >= 2 {
                least_squares_slope(&inside)
            } else {
                f64::NAN
            }
        }
        _ => f64::NAN,
    };
    let mu_ratio = outcome.config.mu_ratio.unwrap_or(f64::NAN);
    Ok(ContrastProfile { mu_ratio, samples, rms_error, max_abs, slope_inside })
}

/// Solves the inclusion at each shear-modulus ratio `μ₂/μ₁` and extracts the
/// centerline profile.
pub fn sweep_contrast(config: &RunConfig, ratios: &[f64]) -> Result<Vec<ContrastProfile>> {
    ratios
        .iter()
        .map(|&r| {
            let cfg = RunConfig { case: CaseKind::Inclusion, mu_ratio: Some(r), ..config.clone() };
            contrast_profile(&run_case(&cfg)?)
        })
        .collect()
}

pub fn write_sweep(profiles: &[ContrastProfile], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut table = String::from("mu_ratio,rms_error,max_abs,relative_error,slope_inside\n");
    for p in profiles {
        write_atomic(&dir.join(format!("profile_mu{}.csv", p.mu_ratio)), p.csv().as_bytes())?;
        let _ =
            writeln!(table, "{},{},{},{},{}", p.mu_ratio, p.rms_error, p.max_abs, p.relative_error(), p.slope_inside);
    }
    write_atomic(&dir.join("sweep.csv"), table.as_bytes())
}

/// Per-point quadrature diagnostics of one cloud.
#[derive(Clone, Debug)]
pub struct QuadratureCheck {
    pub metrics: UniformityMetrics,
    pub verification: VerificationReport,
    pub max_residual: f64,
    pub computed_points: usize,
    pub csv: String,
}

pub fn check_quadrature(config: &RunConfig, probes: usize) -> Result<QuadratureCheck> {
    let d = discretize(config)?;
    let mut csv = String::from("point,x,y,neighbors,rank,residual,min_weight,max_weight,weight_sum\n");
    let mut computed = 0;
    for i in d.family.computed_points() {
        let diag = d.family.diagnostics(i).expect("computed point has diagnostics");
        let p = d.cloud.position(i);
        computed += 1;
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{:e},{},{},{}",
            p.x,
            p.y,
            d.nbrs.degree(i),
            diag.rank,
            diag.residual,
            diag.min_weight,
            diag.max_weight,
            diag.weight_sum
        );
    }
    Ok(QuadratureCheck {
        metrics: uniformity_metrics(&d.cloud),
        verification: verify_family(&d.family, &d.nbrs, probes, config.seed),
        max_residual: d.family.max_residual(),
        computed_points: computed,
        csv,
    })
}

pub fn write_quadrature_check(check: &QuadratureCheck, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("quadrature.csv"), check.csv.as_bytes())
}
