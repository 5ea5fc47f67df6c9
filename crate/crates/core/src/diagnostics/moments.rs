use crate::composition::{Composition, RadialFn, WeightParams};
use crate::error::{Error, Result};
use crate::grid::SourceSpec;
use crate::measures::SignedMeasure;
use crate::trajectory::Trajectory;

use super::uniqueness::{dense_distance, lattice_weights};
use super::{CheckReport, SeriesPoint, Worst};

/// Checks `∫w df_t ≤ ∫w df₀ + t∫w dζ` at every snapshot, relative to the
/// right-hand side.
fn moment_bound_check(
    name: &str,
    traj: &Trajectory<f64>,
    f0: &SignedMeasure<f64>,
    source: &SourceSpec<f64>,
    w: &dyn Fn(&Composition<f64>) -> f64,
    tolerance: f64,
) -> CheckReport {
    let initial = f0.pair(&w);
    let rate = source.measure().pair(&w);
    let mut worst = Worst::new();
    let mut min_slack = f64::INFINITY;
    let mut series = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let t = traj.snapshots[i].t;
        let lhs = traj.pair(i, &w);
        let rhs = initial + t * rate;
        let scale = rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
        let excess = (lhs - rhs) / scale;
        worst.offer(excess, Some(t), || None);
        if t > 0.0 {
            min_slack = min_slack.min(-excess);
        }
        series.push(SeriesPoint { t, value: lhs });
    }
    worst
        .report(name, tolerance)
        .with_series(series)
        .with_context(format!(
            "initial moment {initial:.6e}, source rate {rate:.6e}, smallest relative slack for t > 0 {min_slack:.3e}"
        ))
}

/// `∫ω_{α,β} df_t ≤ ∫ω_{α,β} df₀ + t∫ω_{α,β} dζ` for `α, β ≤ 1`.
pub fn sublinear_moment_check(
    traj: &Trajectory<f64>,
    f0: &SignedMeasure<f64>,
    source: &SourceSpec<f64>,
    p: &WeightParams<f64>,
    tolerance: f64,
) -> Result<CheckReport> {
    if p.alpha > 1.0 || p.beta > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "sublinear moments need alpha, beta <= 1 (got {}, {})",
            p.alpha, p.beta
        )));
    }
    let name = format!("sublinear_moment({}, {})", p.alpha, p.beta);
    Ok(moment_bound_check(
        &name,
        traj,
        f0,
        source,
        &|x| p.eval(x),
        tolerance,
    ))
}

/// `∫Φ(|x|^{-α}) df_t ≤ ∫Φ(|x|^{-α}) df₀ + t∫Φ(|x|^{-α}) dζ` for convex
/// nondecreasing `Φ` with `Φ(0) = 0` and `α > 0`.
pub fn phi_moment_check(
    traj: &Trajectory<f64>,
    f0: &SignedMeasure<f64>,
    source: &SourceSpec<f64>,
    phi: &RadialFn<f64>,
    alpha: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if phi.call(0.0) != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{} does not vanish at 0",
            phi.label()
        )));
    }
    let initial = f0.pair(&|x: &Composition<f64>| phi.call(x.l1_norm().powf(-alpha)));
    if !initial.is_finite() {
        return Err(Error::InvalidParameter(
            "initial moment is not finite".into(),
        ));
    }
    let name = format!("phi_moment({}, alpha={alpha})", phi.label());
    let w = |x: &Composition<f64>| phi.call(x.l1_norm().powf(-alpha));
    Ok(moment_bound_check(&name, traj, f0, source, &w, tolerance))
}

/// Estimates the Lipschitz constant of `t ↦ f_t` in `‖·‖_p` from consecutive
/// snapshots (fine) and from every other snapshot (coarse). The violation is
/// the ratio between the two, passing below `ratio_limit`.
pub fn time_lipschitz_check(
    traj: &Trajectory<f64>,
    p: &WeightParams<f64>,
    ratio_limit: f64,
) -> Result<CheckReport> {
    if traj.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 snapshots, got {}",
            traj.len()
        )));
    }
    let w = lattice_weights(&traj.lattice, p);
    let dens: Vec<Vec<f64>> = (0..traj.len()).map(|i| traj.density(i)).collect();
    let times = traj.times();
    let slope = |i: usize, j: usize| dense_distance(&dens[i], &dens[j], &w) / (times[j] - times[i]);
    let mut fine = 0.0f64;
    let mut worst_t = times[0];
    let mut series = Vec::with_capacity(traj.len() - 1);
    for i in 0..traj.len() - 1 {
        let s = slope(i, i + 1);
        if s > fine || s.is_nan() {
            fine = s;
            worst_t = times[i];
        }
        series.push(SeriesPoint {
            t: times[i],
            value: s,
        });
    }
    let mut coarse = 0.0f64;
    let mut i = 0;
    while i + 2 < traj.len() {
        coarse = coarse.max(slope(i, i + 2));
        i += 2;
    }
    let ratio = if !fine.is_finite() || !coarse.is_finite() {
        f64::INFINITY
    } else if fine == 0.0 && coarse == 0.0 {
        1.0
    } else if fine == 0.0 || coarse == 0.0 {
        f64::INFINITY
    } else {
        (fine / coarse).max(coarse / fine)
    };
    Ok(CheckReport::new("time_lipschitz", ratio, ratio_limit)
        .at(Some(worst_t), None)
        .with_fitted(fine)
        .with_series(series)
        .with_context(format!(
            "fine estimate {fine:.6e}, coarse estimate {coarse:.6e}, weights ({}, {})",
            p.alpha, p.beta
        )))
}
