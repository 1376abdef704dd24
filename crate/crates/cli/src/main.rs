use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use obq_lps::driver::{
    check_quadrature, convergence_ladder, run_case, sweep_contrast, write_ladder, write_quadrature_check, write_run,
    write_sweep,
};
use obq_lps::{CaseKind, Error, GridKind, RunConfig};

#[derive(Parser)]
#[command(name = "obq-lps", version, about = "Meshfree linear peridynamic solid benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one benchmark case and write fields.csv and summary.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 24)]
        n: usize,
    },
    /// Run a case at several resolutions and fit the convergence slope.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "24,48,96")]
        n_list: Vec<usize>,
    },
    /// Write per-point quadrature diagnostics for one cloud.
    CheckQuadrature {
        #[arg(long, default_value_t = 24)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3.5)]
        delta_factor: f64,
        #[arg(long, default_value_t = 0.2)]
        perturb: f64,
        #[arg(long, value_enum, default_value_t = Grid::Perturbed)]
        grid: Grid,
        #[arg(long)]
        strict_vh: bool,
        /// Random quadratic fields integrated per point.
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Centerline profiles of the inclusion over a range of shear-modulus ratios.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0.015625,0.125,1,8,64")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Grid::Uniform)]
        grid: Grid,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        nu1: f64,
        #[arg(long, default_value_t = 0.25)]
        nu2: f64,
        #[arg(long, default_value_t = 1.0)]
        k2: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum)]
    case: Case,
    #[arg(long, default_value_t = 3.5)]
    delta_factor: f64,
    #[arg(long, default_value_t = 0.2)]
    perturb: f64,
    #[arg(long, value_enum, default_value_t = Grid::Perturbed)]
    grid: Grid,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    nu1: f64,
    #[arg(long, default_value_t = 0.25)]
    nu2: f64,
    #[arg(long, default_value_t = 2.0)]
    k1: f64,
    #[arg(long, default_value_t = 1.0)]
    k2: f64,
    /// Outer-to-inner shear modulus ratio for the inclusion.
    #[arg(long)]
    mu_ratio: Option<f64>,
    #[arg(long)]
    strict_vh: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Patch,
    Smooth,
    SmoothNearinc,
    Hole,
    Inclusion,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Perturbed,
    Uniform,
}

impl From<Case> for CaseKind {
    fn from(c: Case) -> Self {
        match c {
            Case::Patch => CaseKind::Patch,
            Case::Smooth => CaseKind::Smooth,
            Case::SmoothNearinc => CaseKind::SmoothNearInc,
            Case::Hole => CaseKind::Hole,
            Case::Inclusion => CaseKind::Inclusion,
        }
    }
}

impl From<Grid> for GridKind {
    fn from(g: Grid) -> Self {
        match g {
            Grid::Perturbed => GridKind::Perturbed,
            Grid::Uniform => GridKind::Uniform,
        }
    }
}

impl Common {
    fn config(&self, n: usize) -> RunConfig {
        RunConfig {
            delta_factor: self.delta_factor,
            perturb_frac: self.perturb,
            grid: self.grid.into(),
            seed: self.seed,
            nu: self.nu,
            nu1: self.nu1,
            nu2: self.nu2,
            k1: self.k1,
            k2: self.k2,
            mu_ratio: self.mu_ratio,
            strict_vh: self.strict_vh,
            ..RunConfig::new(self.case.into(), n)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Quadrature { .. } => 3,
        Error::Assembly(_) => 4,
        Error::Solve(_) => 5,
        Error::Io(_) | Error::Json(_) => 6,
        Error::Domain(_) => 7,
    }
}

fn execute(cli: Cli) -> obq_lps::Result<()> {
    match cli.command {
        Command::Run { common, n } => {
            let outcome = run_case(&common.config(n))?;
            write_run(&outcome, &common.out)?;
            println!(
                "{} n={} N_interior={} rms_error={:.6e} solver_residual={:.3e} time={:.2}s",
                outcome.config.case.name(),
                n,
                outcome.n_interior,
                outcome.rms_error,
                outcome.solver_residual,
                outcome.wall_time.as_secs_f64()
            );
        }
        Command::Converge { common, n_list } => {
            let (report, outcomes) = convergence_ladder(&common.config(n_list[0]), &n_list)?;
            write_ladder(&report, &outcomes, &common.out)?;
            for r in &report.rows {
                println!(
                    "n={} h={:.6} N_interior={} rms_error={:.6e} time={:.2}s",
                    r.n,
                    r.h,
                    r.n_interior,
                    r.rms_error,
                    r.wall_time.as_secs_f64()
                );
            }
            let ratios: Vec<String> = report.ratios().iter().map(|r| format!("{r:.3}")).collect();
            println!("ratios=[{}]", ratios.join(", "));
            match report.slope {
                Some(s) => println!("slope={s:.4}"),
                None => println!("slope=n/a (fewer than three resolutions)"),
            }
        }
        Command::CheckQuadrature { n, seed, delta_factor, perturb, grid, strict_vh, probes, out } => {
            let config = RunConfig {
                delta_factor,
                perturb_frac: perturb,
                grid: grid.into(),
                seed,
                strict_vh,
                ..RunConfig::new(CaseKind::Patch, n)
            };
            let check = check_quadrature(&config, probes)?;
            write_quadrature_check(&check, &out)?;
            println!(
                "points={} max_residual={:.3e} tensor_probe={:.3e} dilitation_probe={:.3e} fill={:.5} separation={:.5} ratio={:.3}",
                check.computed_points,
                check.max_residual,
                check.verification.max_tensor_residual,
                check.verification.max_dilitation_residual,
                check.metrics.fill_distance,
                check.metrics.separation_distance,
                check.metrics.ratio()
            );
        }
        Command::Sweep { ratios, n, grid, seed, nu1, nu2, k2, out } => {
            let config = RunConfig { grid: grid.into(), seed, nu1, nu2, k2, ..RunConfig::new(CaseKind::Inclusion, n) };
            let profiles = sweep_contrast(&config, &ratios)?;
            write_sweep(&profiles, &out)?;
            for p in &profiles {
                println!(
                    "mu_ratio={} profile_rms={:.4e} max_abs={:.4e} relative={:.4} inner_slope={:.5}",
                    p.mu_ratio,
                    p.rms_error,
                    p.max_abs,
                    p.relative_error(),
                    p.slope_inside
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
