use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::SignedMeasure;
use crate::trajectory::Trajectory;

use super::{CheckReport, SeriesPoint, Worst};

/// `θ0 = ∫x df₀ / ∫|x| df₀`.
pub fn theta0(f0: &SignedMeasure<f64>) -> Result<Vec<f64>> {
    if !f0.is_nonnegative() {
        return Err(Error::InvalidParameter(
            "initial measure must be nonnegative".into(),
        ));
    }
    let m = f0.mass_vector();
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(m.into_iter().map(|v| v / total).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalisationParams {
    pub gamma: f64,
    pub delta: f64,
    pub theta0: Vec<f64>,
}

impl LocalisationParams {
    pub fn new(gamma: f64, delta: f64, theta0: Vec<f64>) -> Result<Self> {
        if !(gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be below 1"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} not in (0, 1)"
            )));
        }
        let sum: f64 = theta0.iter().sum();
        if theta0.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "theta0 = {theta0:?} is not on the simplex"
            )));
        }
        Ok(Self {
            gamma,
            delta,
            theta0,
        })
    }
}

fn direction_distance(x: &[f64], size: f64, theta0: &[f64]) -> f64 {
    x.iter()
        .zip(theta0)
        .map(|(c, t)| (c / size - t).abs())
        .sum()
}

/// Share of `∫|x| df` carried by the closed set
/// `δ s ≤ |x| ≤ s/δ`, `‖x/|x| − θ0‖₁ ≤ δ`, where `s = t^{1/(1−γ)}`.
pub fn localisation_fraction(
    f: &SignedMeasure<f64>,
    t: f64,
    p: &LocalisationParams,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive")));
    }
    if p.theta0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: p.theta0.len(),
        });
    }
    let s = t.powf(1.0 / (1.0 - p.gamma));
    let (lo, hi) = (p.delta * s, s / p.delta);
    let mut inside = 0.0;
    let mut total = 0.0;
    for (x, w) in f.atoms() {
        let size = x.l1_norm();
        let share = size * w;
        total += share;
        if size >= lo && size <= hi && direction_distance(x.coords(), size, &p.theta0) <= p.delta {
            inside += share;
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(inside / total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionStats {
    /// `∫x df / ∫|x| df`.
    pub mean_direction: Vec<f64>,
    /// `∫|x| ‖x/|x| − θ0‖₁² df / ∫|x| df`.
    pub directional_variance: f64,
}

pub fn direction_stats(f: &SignedMeasure<f64>, theta0: &[f64]) -> Result<DirectionStats> {
    direction_stats_with(f, theta0, None)
}

fn direction_stats_with(
    f: &SignedMeasure<f64>,
    theta0: &[f64],
    extra_mass: Option<&[f64]>,
) -> Result<DirectionStats> {
    if theta0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: theta0.len(),
        });
    }
    let mut m = f.mass_vector();
    let in_domain: f64 = m.iter().sum();
    if !(in_domain > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mut spread = 0.0;
    for (x, w) in f.atoms() {
        let size = x.l1_norm();
        spread += size * w * direction_distance(x.coords(), size, theta0).powi(2);
    }
    if let Some(extra) = extra_mass {
        for (a, b) in m.iter_mut().zip(extra) {
            *a += b;
        }
    }
    let total: f64 = m.iter().sum();
    Ok(DirectionStats {
        mean_direction: m.into_iter().map(|v| v / total).collect(),
        directional_variance: spread / in_domain,
    })
}

/// Direction statistics at every snapshot. The mean direction includes the
/// mass that has left the lattice; the variance is over the lattice only.
pub fn direction_series(
    traj: &Trajectory<f64>,
    theta0: &[f64],
) -> Result<Vec<(f64, DirectionStats)>> {
    (0..traj.len())
        .map(|i| {
            let lost: Vec<f64> = traj.snapshots[i]
                .lost_mass
                .iter()
                .map(|l| l * traj.unit)
                .collect();
            Ok((
                traj.snapshots[i].t,
                direction_stats_with(&traj.measure(i), theta0, Some(&lost))?,
            ))
        })
        .collect()
}

/// Largest `‖mean_direction(t) − θ0‖_∞` over the snapshots; with no source
/// the mean direction is conserved exactly.
pub fn mean_direction_check(
    traj: &Trajectory<f64>,
    theta0: &[f64],
    tolerance: f64,
) -> Result<CheckReport> {
    let mut worst = Worst::new();
    for (t, s) in direction_series(traj, theta0)? {
        for (l, (m, th)) in s.mean_direction.iter().zip(theta0).enumerate() {
            worst.offer((m - th).abs(), Some(t), || {
                Some(format!("component {}", l + 1))
            });
        }
    }
    Ok(worst
        .report("mean_direction_conserved", tolerance)
        .with_context(format!("theta0 = {theta0:?}")))
}

/// `directional_variance(t_end) < directional_variance(t_ref)`, with `t_ref`
/// the first snapshot at or after the requested time. The violation is the
/// ratio of the two, passing strictly below 1.
pub fn variance_trend_check(
    traj: &Trajectory<f64>,
    theta0: &[f64],
    t_ref: f64,
) -> Result<CheckReport> {
    let series = direction_series(traj, theta0)?;
    let (t_end, last) = series
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let (t0, first) = series
        .iter()
        .find(|(t, _)| *t >= t_ref - 1e-12)
        .ok_or_else(|| Error::InvalidParameter(format!("no snapshot at or after t = {t_ref}")))?;
    if t0 >= t_end {
        return Err(Error::InvalidParameter(format!(
            "reference time {t0} is not before the final time {t_end}"
        )));
    }
    let (v0, v1) = (first.directional_variance, last.directional_variance);
    let ratio = if v0 > 0.0 { v1 / v0 } else { f64::INFINITY };
    let points = series
        .iter()
        .map(|(t, s)| SeriesPoint {
            t: *t,
            value: s.directional_variance,
        })
        .collect();
    // largest double below 1, so that `pass` means a strict decrease
    let strict = 1.0 - f64::EPSILON / 2.0;
    Ok(
        CheckReport::new("directional_variance_trend", ratio, strict)
            .at(Some(*t_end), None)
            .with_series(points)
            .with_context(format!(
                "variance {v0:.6e} at t = {t0}, {v1:.6e} at t = {t_end}"
            )),
    )
}
