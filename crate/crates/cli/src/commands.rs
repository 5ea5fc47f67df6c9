//! Subcommand implementations. Each returns the reports it produced and the
//! files it wrote; the caller turns that into an exit code.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use multicoag_core::composition::{Composition, RadialFn, WeightParams};
use multicoag_core::diagnostics::{
    self, mass_conservation_residual, mean_direction_check, moment_agreement, phi_moment_check,
    sublinear_moment_check, theta0, time_lipschitz_check, trajectory_distance, uniqueness_compare,
    variance_trend_check, weak_solution_residual, CheckReport, LocalisationParams, SuiteConfig,
};
use multicoag_core::grid::{GridSolver, GridSpec, SourceSpec};
use multicoag_core::io::{format_number, write_trajectory_csv};
use multicoag_core::kernels::Kernel;
use multicoag_core::measures::SignedMeasure;
use multicoag_core::ssa::{self, SsaConfig, SsaRun};
use multicoag_core::trajectory::Trajectory;
use serde::Serialize;

use crate::config::{DiagnosticConfig, RunConfig, SolverChoice};
use crate::error::CliError;

/// Report tagged with the trajectory it was computed on.
#[derive(Clone, Debug, Serialize)]
pub struct LabeledReport {
    pub solver: String,
    #[serde(flatten)]
    pub report: CheckReport,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<LabeledReport>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn push(&mut self, solver: &str, report: CheckReport) {
        self.reports.push(LabeledReport {
            solver: solver.to_string(),
            report,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.report.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Grid,
    /// Grid with half the time step.
    GridHalf,
    Ssa,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "grid" => Ok(Method::Grid),
            "grid_half" => Ok(Method::GridHalf),
            "ssa" => Ok(Method::Ssa),
            other => Err(CliError::Config(format!(
                "unknown solver '{other}' (expected grid, grid_half or ssa)"
            ))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::GridHalf => "grid_half",
            Method::Ssa => "ssa",
        }
    }
}

/// Everything a command needs, resolved from the config.
struct Problem {
    kernel: Kernel<f64>,
    spec: GridSpec<f64>,
    f0: SignedMeasure<f64>,
    source: SourceSpec<f64>,
    seed: u64,
}

impl Problem {
    fn new(cfg: &RunConfig, seed: u64) -> Result<Self, CliError> {
        Ok(Self {
            kernel: cfg.kernel()?,
            spec: cfg.grid_spec()?,
            f0: cfg.initial_measure()?,
            source: cfg.source()?,
            seed,
        })
    }

    fn grid(&self) -> Result<Trajectory<f64>, CliError> {
        info!("grid run: N = {}, dt = {}", self.spec.extent, self.spec.dt);
        Ok(GridSolver::new(&self.spec, &self.kernel, &self.source)?.simulate(&self.f0)?)
    }

    /// Same snapshot times at half the step.
    fn grid_half(&self) -> Result<Trajectory<f64>, CliError> {
        let spec = GridSpec::new(
            self.spec.dim,
            self.spec.extent,
            self.spec.truncation,
            self.spec.dt / 2.0,
            self.spec.t_end,
            self.spec.output_every * 2,
        )?;
        info!("grid run: N = {}, dt = {}", spec.extent, spec.dt);
        Ok(GridSolver::new(&spec, &self.kernel, &self.source)?.simulate(&self.f0)?)
    }

    fn ssa(&self, cfg: &RunConfig) -> Result<SsaRun, CliError> {
        let block = cfg
            .ssa
            .as_ref()
            .ok_or_else(|| CliError::Config("the particle method needs an [ssa] block".into()))?;
        let sc = SsaConfig {
            volume: block.volume,
            replicas: block.replicas,
            seed: self.seed,
            lattice: self.spec.lattice()?,
            times: self.spec.snapshot_times()?,
        };
        info!(
            "particle run: V = {}, {} replicas, seed {}",
            sc.volume, sc.replicas, sc.seed
        );
        Ok(ssa::run(&sc, &self.kernel, &self.source, &self.f0)?)
    }
}

fn write_csv(
    out: &Path,
    name: &str,
    traj: &Trajectory<f64>,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let path = out.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    write_trajectory_csv(traj, &mut w)?;
    std::io::Write::flush(&mut w)?;
    files.push(path);
    Ok(())
}

/// Runs the checks that apply to a single grid trajectory. Particle runs
/// carry sampling noise and are checked through comparisons instead.
fn single_trajectory_checks(
    label: &str,
    traj: &Trajectory<f64>,
    p: &Problem,
    checks: &[DiagnosticConfig],
    out: &mut Outcome,
) -> Result<(), CliError> {
    for d in checks {
        let report = match d {
            DiagnosticConfig::MassConservation { tolerance } => {
                mass_conservation_residual(traj, &p.f0, &p.source, *tolerance)?
            }
            DiagnosticConfig::SublinearMoment {
                alpha,
                beta,
                tolerance,
            } => sublinear_moment_check(
                traj,
                &p.f0,
                &p.source,
                &WeightParams::new(*alpha, *beta),
                *tolerance,
            )?,
            DiagnosticConfig::PhiMoment {
                power,
                alpha,
                tolerance,
            } => phi_moment_check(
                traj,
                &p.f0,
                &p.source,
                &RadialFn::power(*power),
                *alpha,
                *tolerance,
            )?,
            DiagnosticConfig::TimeLipschitz {
                alpha,
                beta,
                ratio_limit,
            } => {
                let w = WeightParams::new(
                    alpha.unwrap_or((-p.kernel.theta1()).max(0.0)),
                    beta.unwrap_or(0.0),
                );
                time_lipschitz_check(traj, &w, *ratio_limit)?
            }
            DiagnosticConfig::WeakResidual { cap } => {
                let cap = *cap;
                let phi = move |x: &Composition<f64>| x.l1_norm().min(cap);
                weak_solution_residual(traj, &p.kernel, &p.f0, &p.source, &phi, p.spec.dt)?
            }
            _ => continue,
        };
        out.push(label, report);
    }
    Ok(())
}

fn localisation_checks(
    label: &str,
    traj: &Trajectory<f64>,
    p: &Problem,
    gamma: f64,
    delta: f64,
    out_dir: Option<&Path>,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let th = theta0(&p.f0)?;
    if p.source.total_rate() == 0.0 {
        out.push(label, mean_direction_check(traj, &th, 1e-10)?);
    }
    let t_end = traj.snapshots.last().map_or(0.0, |s| s.t);
    if t_end > 1.0 {
        out.push(label, variance_trend_check(traj, &th, 1.0)?);
    }
    if let Some(dir) = out_dir {
        let params = LocalisationParams::new(gamma, delta, th.clone())?;
        let path = dir.join(format!("localisation_{label}.csv"));
        let mut text = String::from("t");
        for l in 1..=traj.dim() {
            text.push_str(&format!(",mean_direction_{l}"));
        }
        text.push_str(",directional_variance,localisation_fraction\n");
        for (i, (t, s)) in diagnostics::direction_series(traj, &th)?
            .into_iter()
            .enumerate()
        {
            let fraction = if t > 0.0 {
                diagnostics::localisation_fraction(&traj.measure(i), t, &params)?
            } else {
                f64::NAN
            };
            let mut row = vec![format_number(t)];
            row.extend(s.mean_direction.iter().map(|&v| format_number(v)));
            row.push(format_number(s.directional_variance));
            row.push(format_number(fraction));
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        out.files.push(path);
    }
    Ok(())
}

fn solver_runs(
    cfg: &RunConfig,
    p: &Problem,
    out_dir: Option<&Path>,
    out: &mut Outcome,
) -> Result<Runs, CliError> {
    let mut runs = Runs::default();
    if matches!(cfg.solver, SolverChoice::Grid | SolverChoice::Both) {
        runs.grid = Some(p.grid()?);
    }
    if matches!(cfg.solver, SolverChoice::Ssa | SolverChoice::Both) {
        runs.ssa = Some(p.ssa(cfg)?);
    }
    if let Some(dir) = out_dir {
        if let Some(g) = &runs.grid {
            write_csv(dir, "trajectory_grid.csv", g, &mut out.files)?;
        }
        if let Some(s) = &runs.ssa {
            write_csv(dir, "trajectory_ssa.csv", &s.ensemble, &mut out.files)?;
        }
    }
    Ok(runs)
}

fn grid_run(
    p: &Problem,
    out_dir: Option<&Path>,
    out: &mut Outcome,
) -> Result<Trajectory<f64>, CliError> {
    let traj = p.grid()?;
    if let Some(dir) = out_dir {
        write_csv(dir, "trajectory_grid.csv", &traj, &mut out.files)?;
    }
    Ok(traj)
}

#[derive(Default)]
struct Runs {
    grid: Option<Trajectory<f64>>,
    ssa: Option<SsaRun>,
}

/// `simulate`: run the configured solvers and every configured check.
/// Single-trajectory checks apply to the grid run; with both solvers, the
/// comparison checks run when configured.
pub fn simulate(cfg: &RunConfig, seed: u64, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let p = Problem::new(cfg, seed)?;
    let mut out = Outcome::default();
    let runs = solver_runs(cfg, &p, out_dir, &mut out)?;
    if let Some(traj) = &runs.grid {
        single_trajectory_checks("grid", traj, &p, &cfg.diagnostics, &mut out)?;
        for d in &cfg.diagnostics {
            if let DiagnosticConfig::Localisation { gamma, delta } = d {
                let gamma = gamma.unwrap_or(p.kernel.gamma());
                localisation_checks("grid", traj, &p, gamma, *delta, out_dir, &mut out)?;
            }
        }
    }
    let wants_comparison = cfg.diagnostics.iter().any(|d| {
        matches!(
            d,
            DiagnosticConfig::Uniqueness { .. } | DiagnosticConfig::MomentAgreement { .. }
        )
    });
    if wants_comparison && runs.grid.is_some() && runs.ssa.is_some() {
        compare_pair(cfg, &p, (Method::Grid, Method::Ssa), runs, None, &mut out)?;
    }
    Ok(out)
}

/// `moments`: the moment and regularity checks on the grid run, with a
/// default set when none is configured.
pub fn moments(cfg: &RunConfig, seed: u64, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let p = Problem::new(cfg, seed)?;
    let mut checks: Vec<DiagnosticConfig> = cfg
        .diagnostics
        .iter()
        .filter(|d| {
            matches!(
                d,
                DiagnosticConfig::MassConservation { .. }
                    | DiagnosticConfig::SublinearMoment { .. }
                    | DiagnosticConfig::PhiMoment { .. }
                    | DiagnosticConfig::TimeLipschitz { .. }
            )
        })
        .cloned()
        .collect();
    if checks.is_empty() {
        checks = default_moment_checks();
    }
    let mut out = Outcome::default();
    let traj = grid_run(&p, out_dir, &mut out)?;
    single_trajectory_checks("grid", &traj, &p, &checks, &mut out)?;
    Ok(out)
}

pub fn default_moment_checks() -> Vec<DiagnosticConfig> {
    let mut v: Vec<DiagnosticConfig> = [(1.0, 1.0), (0.5, 0.9), (0.0, 0.0)]
        .into_iter()
        .map(|(alpha, beta)| DiagnosticConfig::SublinearMoment {
            alpha,
            beta,
            tolerance: 1e-8,
        })
        .collect();
    v.push(DiagnosticConfig::PhiMoment {
        power: 2.0,
        alpha: 1.0,
        tolerance: 1e-8,
    });
    v.push(DiagnosticConfig::TimeLipschitz {
        alpha: None,
        beta: None,
        ratio_limit: 2.0,
    });
    v
}

/// `localise`: direction statistics and the localisation trend checks on
/// the grid run.
pub fn localise(cfg: &RunConfig, seed: u64, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let p = Problem::new(cfg, seed)?;
    let (gamma, delta) = cfg
        .diagnostics
        .iter()
        .find_map(|d| match d {
            DiagnosticConfig::Localisation { gamma, delta } => Some((*gamma, *delta)),
            _ => None,
        })
        .unwrap_or((None, 0.5));
    let gamma = gamma.unwrap_or(p.kernel.gamma());
    let mut out = Outcome::default();
    let traj = grid_run(&p, out_dir, &mut out)?;
    localisation_checks("grid", &traj, &p, gamma, delta, out_dir, &mut out)?;
    Ok(out)
}

/// `compare`: runs two methods on the same problem and compares them in the
/// uniqueness norm, and by size moments when particles are involved.
pub fn compare(
    cfg: &RunConfig,
    seed: u64,
    methods: (Method, Method),
    out_dir: Option<&Path>,
) -> Result<Outcome, CliError> {
    let p = Problem::new(cfg, seed)?;
    if p.kernel.is_outside_class() {
        return Err(CliError::Config(format!(
            "kernel {} is outside the uniqueness class",
            p.kernel.label()
        )));
    }
    p.kernel.check_class()?;
    let mut out = Outcome::default();
    compare_pair(cfg, &p, methods, Runs::default(), out_dir, &mut out)?;
    Ok(out)
}

/// The grid run and its half-step companion are always computed: the
/// latter gives the default error budget and the grid moment error.
fn compare_pair(
    cfg: &RunConfig,
    p: &Problem,
    (a, b): (Method, Method),
    runs: Runs,
    out_dir: Option<&Path>,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let grid = match runs.grid {
        Some(g) => g,
        None => p.grid()?,
    };
    let half = p.grid_half()?;
    let particles = match runs.ssa {
        Some(s) => Some(s),
        None if a == Method::Ssa || b == Method::Ssa => Some(p.ssa(cfg)?),
        None => None,
    };
    let pick = |m: Method| -> &Trajectory<f64> {
        match m {
            Method::Grid => &grid,
            Method::GridHalf => &half,
            Method::Ssa => &particles.as_ref().expect("particle run").ensemble,
        }
    };
    let (mut alpha, mut beta, mut budget, mut orders) = (None, None, None, None);
    for d in &cfg.diagnostics {
        match d {
            DiagnosticConfig::Uniqueness {
                alpha: a,
                beta: b,
                budget: c,
            } => {
                (alpha, beta, budget) = (*a, *b, *c);
            }
            DiagnosticConfig::MomentAgreement { orders: o } => orders = Some(o.clone()),
            _ => {}
        }
    }
    let default_w = cfg.uniqueness_weights()?;
    let w = WeightParams::new(
        alpha.unwrap_or(default_w.alpha),
        beta.unwrap_or(default_w.beta),
    );
    let budget = match budget {
        Some(b) => b,
        None => {
            // RK4: ‖f_dt − f‖ ≈ (16/15)‖f_dt − f_{dt/2}‖
            let d = trajectory_distance(&grid, &half, &w)?
                .iter()
                .fold(0.0f64, |m, s| m.max(s.value));
            let allowance = |m: Method| match m {
                Method::Grid => d * 16.0 / 15.0,
                Method::GridHalf => d / 15.0,
                Method::Ssa => 0.0,
            };
            allowance(a) + allowance(b)
        }
    };
    let label = format!("{}_vs_{}", a.label(), b.label());
    if let Some(dir) = out_dir {
        for m in [a, b] {
            let name = format!("trajectory_{}.csv", m.label());
            if !out.files.contains(&dir.join(&name)) {
                write_csv(dir, &name, pick(m), &mut out.files)?;
            }
        }
    }
    out.push(&label, uniqueness_compare(pick(a), pick(b), &w, budget)?);
    if let Some(s) = &particles {
        let orders = orders.unwrap_or_else(|| vec![1.0, 2.0]);
        out.push(
            &label,
            moment_agreement(&grid, Some(&half), &s.replicas, &orders)?,
        );
    }
    Ok(())
}

/// `validate`: the weight-construction suites plus the operator suites.
pub fn validate(seed: u64, samples: usize, operator_samples: usize) -> Result<Outcome, CliError> {
    let cfg = SuiteConfig {
        samples,
        seed,
        ..SuiteConfig::default()
    };
    let mut out = Outcome::default();
    for r in diagnostics::run_all_suites(&cfg)? {
        out.push("property", r);
    }
    let ops = SuiteConfig {
        samples: operator_samples,
        ..cfg
    };
    out.push("operator", diagnostics::operator_identity_suite(&ops)?);
    out.push("operator", diagnostics::operator_bound_suite(&ops)?);
    Ok(out)
}
