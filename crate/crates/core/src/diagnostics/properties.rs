//! Randomised property suites for the weight constructions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::composition::{
    power_defect_majorant, subadditivity_defect, Composition, RadialFn, RegularizedWeight,
    WeightParams,
};
use crate::error::Result;
use crate::sampling::{composition_with_size, log_uniform, SIZE_RANGE};

use super::CheckReport;

/// `C_2` in the defect bound for the `k = 2` power regularisation.
pub const POWER_DEFECT_CONSTANT: f64 = 2.0;

const CHUNK: usize = 4096;
const SIZES: [&str; 2] = ["|x|", "|y|"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteConfig {
    pub samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    pub max_dim: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0x5eed,
            rel_tol: 1e-12,
            max_dim: 3,
        }
    }
}

/// Outcome of one sample: the largest relative excess over its checks.
#[derive(Clone, Copy, Debug)]
pub(super) struct Sample {
    excess: f64,
    check: &'static str,
    x: f64,
    y: f64,
    params: [f64; 4],
}

impl Sample {
    fn new(params: [f64; 4], x: &Composition<f64>, y: &Composition<f64>) -> Self {
        Self::with_sizes(params, x.l1_norm(), y.l1_norm())
    }

    pub(super) fn with_sizes(params: [f64; 4], x: f64, y: f64) -> Self {
        Self {
            excess: f64::NEG_INFINITY,
            check: "",
            x,
            y,
            params,
        }
    }

    /// Records `lhs ≤ rhs` relative to `scale`.
    pub(super) fn le(&mut self, check: &'static str, lhs: f64, rhs: f64, scale: f64) {
        let scale = scale.abs().max(f64::MIN_POSITIVE);
        let e = (lhs - rhs) / scale;
        let e = if e.is_nan() { f64::INFINITY } else { e };
        if e > self.excess {
            self.excess = e;
            self.check = check;
        }
    }

    fn subadditive(&mut self, check: &'static str, sum: f64, a: f64, b: f64) {
        self.le(check, sum, a + b, sum.abs().max(a.abs() + b.abs()));
    }
}

fn any_size<R: Rng>(rng: &mut R) -> f64 {
    log_uniform(rng, SIZE_RANGE.0, SIZE_RANGE.1)
}

/// Half the draws cluster within three decades of `center`.
fn size_near<R: Rng>(rng: &mut R, center: f64) -> f64 {
    if rng.random_bool(0.5) {
        log_uniform(rng, center * 1e-3, center * 1e3)
    } else {
        any_size(rng)
    }
}

fn pair<R: Rng>(
    rng: &mut R,
    max_dim: usize,
    center: f64,
) -> Result<(Composition<f64>, Composition<f64>)> {
    let dim = rng.random_range(1..=max_dim);
    let (a, b) = (size_near(rng, center), size_near(rng, center));
    Ok((
        composition_with_size(rng, dim, a)?,
        composition_with_size(rng, dim, b)?,
    ))
}

pub(super) fn run_suite(
    name: &str,
    cfg: &SuiteConfig,
    sizes: [&str; 2],
    labels: [&str; 4],
    sample: impl Fn(&mut ChaCha8Rng) -> Result<Sample> + Sync,
) -> Result<CheckReport> {
    let chunks = cfg.samples.div_ceil(CHUNK);
    let results = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(c as u64));
            let count = CHUNK.min(cfg.samples - c * CHUNK);
            let mut worst: Option<Sample> = None;
            let mut violations = 0usize;
            for _ in 0..count {
                let s = sample(&mut rng)?;
                if s.excess > cfg.rel_tol {
                    violations += 1;
                }
                if worst.is_none_or(|w| s.excess > w.excess) {
                    worst = Some(s);
                }
            }
            Ok((worst, violations))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: Option<Sample> = None;
    let mut violations = 0;
    for (w, v) in results {
        violations += v;
        if let Some(w) = w {
            if worst.is_none_or(|cur| w.excess > cur.excess) {
                worst = Some(w);
            }
        }
    }
    let (excess, at) = match worst {
        Some(w) => {
            let params = labels
                .iter()
                .zip(w.params)
                .filter(|(l, _)| !l.is_empty())
                .map(|(l, v)| format!("{l}={v:.6e}"))
                .collect::<Vec<_>>()
                .join(", ");
            (
                w.excess.max(0.0),
                Some(format!(
                    "{}: {}={:.6e}, {}={:.6e}, {params}",
                    w.check, sizes[0], w.x, sizes[1], w.y
                )),
            )
        }
        None => (0.0, None),
    };
    Ok(CheckReport::new(name, excess, cfg.rel_tol)
        .at(None, at)
        .with_context(format!("{} samples, {violations} violations", cfg.samples)))
}

/// `ω_{α,β}` for `α, β ≤ 1`: sublinear radial profile, subadditive weight,
/// and the truncations `min{ω, n}` subadditive and below `ω`.
pub fn weight_subadditivity_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "weight_subadditivity",
        cfg,
        SIZES,
        ["alpha", "beta", "n", "lambda"],
        |rng| {
            let (alpha, beta) = (rng.random_range(-2.0..=1.0), rng.random_range(-2.0..=1.0));
            let level = log_uniform(rng, 1.0 + 1e-9, 1e3);
            let lambda = log_uniform(rng, 1.0, 1e3);
            let (x, y) = pair(rng, cfg.max_dim, 1.0)?;
            let w = WeightParams::new(alpha, beta);
            let trunc = RegularizedWeight::truncated(w, level)?;
            let mut s = Sample::new([alpha, beta, level, lambda], &x, &y);
            let sum = x.checked_add(&y)?;
            s.subadditive("omega subadditive", w.eval(&sum), w.eval(&x), w.eval(&y));
            s.subadditive(
                "truncation subadditive",
                trunc.eval(&sum),
                trunc.eval(&x),
                trunc.eval(&y),
            );
            s.le(
                "truncation below omega",
                trunc.eval(&x),
                w.eval(&x),
                w.eval(&x),
            );
            let r = x.l1_norm();
            let (lhs, rhs) = (w.radial(lambda * r), lambda * w.radial(r));
            s.le("profile sublinear", lhs, rhs, lhs.max(rhs));
            Ok(s)
        },
    )
}

fn sublinear_base(choice: u32, alpha: f64, beta: f64) -> RadialFn<f64> {
    match choice {
        0 => RadialFn::from_weight(WeightParams::new(alpha, beta)),
        1 => RadialFn::new("r/(1+r)", |r: f64| r / (1.0 + r)),
        _ => RadialFn::new("ln(1+r)", |r: f64| r.ln_1p()),
    }
}

/// `φ_{ε,R}` built from a sublinear profile: subadditive and below the
/// profile.
pub fn regularized_sublinear_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "regularized_sublinear_weight",
        cfg,
        SIZES,
        ["eps", "R", "alpha", "beta"],
        |rng| {
            let eps = log_uniform(rng, 1e-3, 0.99);
            let cap = log_uniform(rng, 1.01, 1e3);
            let (alpha, beta) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            let base = sublinear_base(rng.random_range(0..3), alpha, beta);
            let phi = RegularizedWeight::sublinear(base, eps, cap)?;
            let (x, y) = pair(rng, cfg.max_dim, eps)?;
            let mut s = Sample::new([eps, cap, alpha, beta], &x, &y);
            let sum = x.checked_add(&y)?;
            s.subadditive(
                "regularisation subadditive",
                phi.eval(&sum),
                phi.eval(&x),
                phi.eval(&y),
            );
            s.le(
                "regularisation below profile",
                phi.eval(&x),
                phi.majorant(&x),
                phi.majorant(&x),
            );
            Ok(s)
        },
    )
}

/// `ω_{α,β}(x+y) ≤ max{2^α, 2^β}(ω(x) + ω(y))` for `α, β ≥ 0`.
pub fn weight_growth_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "weight_sum_growth",
        cfg,
        SIZES,
        ["alpha", "beta", "", ""],
        |rng| {
            let (alpha, beta) = (rng.random_range(0.0..=4.0), rng.random_range(0.0..=4.0));
            let w = WeightParams::new(alpha, beta);
            let (x, y) = pair(rng, cfg.max_dim, 1.0)?;
            let mut s = Sample::new([alpha, beta, 0.0, 0.0], &x, &y);
            let lhs = w.eval(&(&x + &y));
            let rhs = w.sum_growth_factor() * (w.eval(&x) + w.eval(&y));
            s.le("growth bound", lhs, rhs, lhs.max(rhs));
            Ok(s)
        },
    )
}

fn convex_profile(choice: u32, p: f64) -> RadialFn<f64> {
    match choice {
        0 => RadialFn::power(p),
        1 => RadialFn::new("r^2", |r: f64| r * r),
        _ => RadialFn::new("r ln(1+r)", |r: f64| r * r.ln_1p()),
    }
}

/// `Φ_ε` from a convex nondecreasing `Φ` with `Φ(0) = 0`: subadditive and
/// below `Φ(|x|^{-α})`.
pub fn convex_moment_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "convex_negative_moment_weight",
        cfg,
        SIZES,
        ["eps", "alpha", "p", ""],
        |rng| {
            let eps = log_uniform(rng, 1e-3, 0.99);
            let alpha = rng.random_range(0.05..=2.0);
            let p = rng.random_range(1.0..=3.0);
            let phi = RegularizedWeight::convex_moment(
                convex_profile(rng.random_range(0..3), p),
                alpha,
                eps,
            )?;
            let (x, y) = pair(rng, cfg.max_dim, eps)?;
            let mut s = Sample::new([eps, alpha, p, 0.0], &x, &y);
            let sum = x.checked_add(&y)?;
            s.subadditive(
                "regularisation subadditive",
                phi.eval(&sum),
                phi.eval(&x),
                phi.eval(&y),
            );
            s.le(
                "regularisation below Phi(|x|^-alpha)",
                phi.eval(&x),
                phi.majorant(&x),
                phi.majorant(&x),
            );
            Ok(s)
        },
    )
}

/// `k = 2` power regularisation: the subadditivity defect stays below
/// `C_2 |x|^μ min{|y|,R}² |y|^{-μ}` (`|x| ≤ |y|`, mirrored otherwise) for
/// `μ ∈ [0,1]`, and the function stays below `ω_{-θ1,2}` whenever
/// `-θ1 ≤ 1`.
pub fn power_defect_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "power_weight_defect",
        cfg,
        SIZES,
        ["eps", "R", "mu", "theta1"],
        |rng| {
            let k = 2.0;
            let eps = log_uniform(rng, 1e-3, 0.99);
            let cap = log_uniform(rng, 1.01, 1e3);
            let mu = rng.random_range(0.0..=1.0);
            let theta1 = rng.random_range(-1.0..=1.0);
            let phi = RegularizedWeight::power(eps, cap, k)?;
            let center = if rng.random_bool(0.5) { eps } else { cap };
            let (x, y) = pair(rng, cfg.max_dim, center)?;
            let mut s = Sample::new([eps, cap, mu, theta1], &x, &y);
            let sum = x.checked_add(&y)?;
            let defect = subadditivity_defect(&phi, &x, &y)?;
            let bound = POWER_DEFECT_CONSTANT * power_defect_majorant(k, mu, cap, &x, &y);
            let scale = phi.eval(&sum).max(phi.eval(&x) + phi.eval(&y)).max(bound);
            s.le("defect bound", defect, bound, scale);
            let upper = WeightParams::new(-theta1, k).eval(&x);
            s.le("below omega(-theta1, k)", phi.eval(&x), upper, upper);
            Ok(s)
        },
    )
}

pub fn run_all_suites(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    Ok(vec![
        weight_subadditivity_suite(cfg)?,
        regularized_sublinear_suite(cfg)?,
        weight_growth_suite(cfg)?,
        convex_moment_suite(cfg)?,
        power_defect_suite(cfg)?,
    ])
}
