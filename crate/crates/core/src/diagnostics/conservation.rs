use crate::error::{Error, Result};
use crate::grid::SourceSpec;
use crate::measures::SignedMeasure;
use crate::trajectory::Trajectory;

use super::{CheckReport, SeriesPoint, Worst};

/// `max_t max_ℓ |m_ℓ(t) − m_ℓ(0) − t·m_ℓ(ζ)| / (|m_ℓ(0)| + t·|m_ℓ(ζ)|)`,
/// with the mass that has left the lattice added back. Components with zero
/// reference mass are measured absolutely.
pub fn mass_conservation_residual(
    traj: &Trajectory<f64>,
    f0: &SignedMeasure<f64>,
    source: &SourceSpec<f64>,
    tolerance: f64,
) -> Result<CheckReport> {
    if f0.dim() != traj.dim() || source.measure().dim() != traj.dim() {
        return Err(Error::DimensionMismatch {
            expected: traj.dim(),
            found: if f0.dim() != traj.dim() {
                f0.dim()
            } else {
                source.measure().dim()
            },
        });
    }
    let m0 = f0.mass_vector();
    let mz = source.measure().mass_vector();
    let mut worst = Worst::new();
    let mut series = Vec::with_capacity(traj.len());
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let t = snap.t;
        let m = traj.accounted_mass_vector(i);
        let mut row = 0.0f64;
        for l in 0..m.len() {
            let expected = m0[l] + t * mz[l];
            let scale = m0[l].abs() + t * mz[l].abs();
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let r = (m[l] - expected).abs() / scale;
            row = row.max(r);
            worst.offer(r, Some(t), || Some(format!("component {}", l + 1)));
        }
        series.push(SeriesPoint { t, value: row });
    }
    let report = worst
        .report("mass_conservation_residual", tolerance)
        .with_series(series)
        .with_context(format!(
            "initial mass {m0:?}, source mass rate {mz:?}; relative per component"
        ));
    Ok(report)
}
