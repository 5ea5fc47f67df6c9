//! Randomised checks of the coagulation operator on signed measures.

use rand::Rng;

use crate::coagulation::{
    difference_bound_check, operator_norm_bound_check, strong_apply, strong_gain, weak_apply,
    NormBoundReport, NORM_BOUND_SLACK,
};
use crate::composition::{Composition, WeightParams};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::measures::SignedMeasure;
use crate::sampling::random_signed_measure;

use super::properties::{run_suite, Sample, SuiteConfig};
use super::CheckReport;

/// Largest atom count of the sampled measures.
pub const MAX_ATOMS: usize = 20;

/// `(α, β)` choices for the operator bounds.
pub const BOUND_WEIGHTS: [(f64, f64); 3] = [(0.0, 0.0), (0.5, 1.0), (2.0, 0.3)];

const SIZES: [&str; 2] = ["atoms(mu)", "atoms(nu)"];

fn kernel(choice: usize) -> Result<Kernel<f64>> {
    Ok(match choice {
        0 => Kernel::constant(2.0)?,
        1 => Kernel::brownian(),
        _ => Kernel::product_envelope(0.3, 0.5)?,
    })
}

fn test_function(choice: usize, x: &Composition<f64>) -> f64 {
    match choice {
        0 => x.l1_norm().min(2.0),
        1 => x.l1_norm().sqrt(),
        2 => x.coords()[0],
        _ => WeightParams::new(0.5, 0.5).eval(x),
    }
}

/// `½ ΣΣ K (|φ(x+y)| + |φ(x)| + |φ(y)|) |μ(x)||μ(y)|`.
fn weak_scale(
    k: &Kernel<f64>,
    mu: &SignedMeasure<f64>,
    phi: &impl Fn(&Composition<f64>) -> f64,
) -> f64 {
    let mut s = 0.0;
    for (x, a) in mu.atoms() {
        for (y, b) in mu.atoms() {
            s += k.evaluate(x, y)
                * (phi(&(x + y)).abs() + phi(x).abs() + phi(y).abs())
                * (a * b).abs();
        }
    }
    0.5 * s
}

/// For random measures `μ` (`d ≤ 3`, at most [`MAX_ATOMS`] atoms): the
/// strong form paired with `φ` equals the weak form, and `strong_apply`
/// carries no mass. Both discrepancies are relative.
pub fn operator_identity_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    run_suite(
        "weak_strong_equivalence",
        cfg,
        SIZES,
        ["dim", "kernel", "phi", ""],
        |rng| {
            let dim = rng.random_range(1..=cfg.max_dim);
            let (kc, fc) = (rng.random_range(0..3), rng.random_range(0..4));
            let k = kernel(kc)?;
            let mu = random_signed_measure(rng, dim, MAX_ATOMS)?;
            let phi = |x: &Composition<f64>| test_function(fc, x);
            let mut s = Sample::with_sizes(
                [dim as f64, kc as f64, fc as f64, 0.0],
                mu.len() as f64,
                mu.len() as f64,
            );
            let weak = weak_apply(&k, &mu, &mu, &phi)?;
            let q = strong_apply(&k, &mu)?;
            let strong = q.pair(&phi);
            let diff = (weak - strong).abs();
            s.le(
                "weak equals strong pairing",
                diff,
                0.0,
                weak_scale(&k, &mu, &phi),
            );
            let gross = strong_gain(&k, &mu, &mu)?.total_variation().mass_vector();
            for (m, g) in q.mass_vector().iter().zip(gross) {
                s.le("strong form mass neutral", m.abs(), 0.0, g);
            }
            Ok(s)
        },
    )
}

fn record(s: &mut Sample, gain: &'static str, loss: &'static str, r: &NormBoundReport<f64>) {
    s.le(
        gain,
        r.gain_norm,
        r.gain_bound,
        r.gain_bound.max(r.gain_norm),
    );
    s.le(
        loss,
        r.loss_norm,
        r.loss_bound,
        r.loss_bound.max(r.loss_norm),
    );
}

/// For random pairs `μ, ν` and every `(α, β)` in [`BOUND_WEIGHTS`]: the
/// gain and loss norm bounds and their difference forms.
pub fn operator_bound_suite(cfg: &SuiteConfig) -> Result<CheckReport> {
    let cfg = SuiteConfig {
        rel_tol: cfg.rel_tol.max(NORM_BOUND_SLACK),
        ..*cfg
    };
    let report = run_suite(
        "operator_norm_bounds",
        &cfg,
        SIZES,
        ["dim", "kernel", "", ""],
        |rng| {
            let dim = rng.random_range(1..=cfg.max_dim);
            let kc = rng.random_range(0..3);
            let k = kernel(kc)?;
            let mu = random_signed_measure(rng, dim, MAX_ATOMS)?;
            let nu = random_signed_measure(rng, dim, MAX_ATOMS)?;
            let mut s = Sample::with_sizes(
                [dim as f64, kc as f64, 0.0, 0.0],
                mu.len() as f64,
                nu.len() as f64,
            );
            for (alpha, beta) in BOUND_WEIGHTS {
                let p = WeightParams::new(alpha, beta);
                record(
                    &mut s,
                    "gain bound",
                    "loss bound",
                    &operator_norm_bound_check(&k, &mu, &nu, &p)?,
                );
                record(
                    &mut s,
                    "gain difference bound",
                    "loss difference bound",
                    &difference_bound_check(&k, &mu, &nu, &p)?,
                );
            }
            Ok(s)
        },
    )?;
    let context = format!("{}, weights {:?}", report.context, BOUND_WEIGHTS);
    Ok(report.with_context(context))
}
