use crate::coagulation::weak_apply;
use crate::composition::Observable;
use crate::error::{Error, Result};
use crate::grid::SourceSpec;
use crate::kernels::Kernel;
use crate::measures::SignedMeasure;
use crate::trajectory::Trajectory;

use super::{CheckReport, SeriesPoint, Worst};

/// `C` in the relative tolerance `C·(dt⁴ + h⁴)` (Simpson) or `C·(dt⁴ + h²)`
/// (trapezoid), with `h` the snapshot spacing.
pub const WEAK_RESIDUAL_CONSTANT: f64 = 1.0;

const ROUNDOFF: f64 = 1e-12;

/// Residual of the integrated weak identity
/// `∫φ df_t = ∫φ df₀ + ∫₀ᵗ <Q(f_s,f_s), φ> ds + t∫φ dζ`
/// at the snapshots, with the time integral by composite Simpson over an
/// even number of snapshot intervals. With an odd number of intervals the
/// trapezoid rule is used at every snapshot and the tolerance widens to
/// `C·(dt⁴ + h²)`. Residuals are relative to
/// `|∫φ df_t| + |∫φ df₀| + t·max|<Q,φ>| + t|∫φ dζ|`; `fitted` holds the
/// largest absolute residual.
///
/// `phi` should pass [`crate::composition::is_valid_test_function`].
pub fn weak_solution_residual(
    traj: &Trajectory<f64>,
    k: &Kernel<f64>,
    f0: &SignedMeasure<f64>,
    source: &SourceSpec<f64>,
    phi: &(impl Observable<f64> + Sync),
    dt: f64,
) -> Result<CheckReport> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 snapshots".into()));
    }
    let times = traj.times();
    if times[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "first snapshot must be at t = 0".into(),
        ));
    }
    let h = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "snapshots are not equally spaced (interval {i} has width {})",
                w[1] - w[0]
            )));
        }
    }
    let measures: Vec<SignedMeasure<f64>> = (0..n).map(|i| traj.measure(i)).collect();
    let g = measures
        .iter()
        .map(|m| weak_apply(k, m, m, phi))
        .collect::<Result<Vec<f64>>>()?;
    let initial = f0.pair(phi);
    let rate = source.measure().pair(phi);
    let simpson = (n - 1).is_multiple_of(2);
    let tolerance = if simpson {
        WEAK_RESIDUAL_CONSTANT * (dt.powi(4) + h.powi(4)) + ROUNDOFF
    } else {
        WEAK_RESIDUAL_CONSTANT * (dt.powi(4) + h.powi(2)) + ROUNDOFF
    };
    let mut worst = Worst::new();
    let mut largest = 0.0f64;
    let mut series = Vec::new();
    let mut g_max = g[0].abs();
    let mut trapezoid = 0.0;
    let mut simpson_sum = 0.0;
    for i in 1..n {
        g_max = g_max.max(g[i].abs());
        trapezoid += 0.5 * h * (g[i - 1] + g[i]);
        let integral = if simpson {
            if i % 2 == 1 {
                continue;
            }
            simpson_sum += h / 3.0 * (g[i - 2] + 4.0 * g[i - 1] + g[i]);
            simpson_sum
        } else {
            trapezoid
        };
        let t = times[i];
        let lhs = measures[i].pair(phi);
        let residual = (lhs - initial - integral - t * rate).abs();
        let scale = (lhs.abs() + initial.abs() + t * g_max + t * rate.abs()).max(f64::MIN_POSITIVE);
        largest = largest.max(residual);
        worst.offer(residual / scale, Some(t), || None);
        series.push(SeriesPoint { t, value: residual });
    }
    Ok(worst
        .report("weak_solution_residual", tolerance)
        .with_fitted(largest)
        .with_series(series)
        .with_context(format!(
            "{} quadrature, snapshot spacing {h}, solver step {dt}",
            if simpson { "Simpson" } else { "trapezoid" }
        )))
}
