//! File formats: trajectory CSV and pretty JSON.
//!
//! CSV numbers are written as `{:.16e}` (17 significant digits), which
//! round-trips every `f64` exactly.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::trajectory::Trajectory;

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header: `t`, one `c_<point>` column per lattice point, `lost_<ℓ>` per
/// component, then `se_<point>` columns when standard errors are present.
pub fn csv_header(traj: &Trajectory<f64>) -> Vec<String> {
    let lattice = &traj.lattice;
    let mut cols = vec!["t".to_string()];
    cols.extend(lattice.indices().map(|i| format!("c_{}", lattice.label(i))));
    cols.extend((1..=traj.dim()).map(|l| format!("lost_{l}")));
    if traj.snapshots.iter().any(|s| s.std_err.is_some()) {
        cols.extend(
            lattice
                .indices()
                .map(|i| format!("se_{}", lattice.label(i))),
        );
    }
    cols
}

/// Writes densities (already multiplied by the trajectory unit), one row per
/// snapshot.
pub fn write_trajectory_csv(traj: &Trajectory<f64>, mut out: impl Write) -> Result<()> {
    let header = csv_header(traj);
    let with_se = header.last().is_some_and(|h| h.starts_with("se_"));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..traj.len() {
        let snap = &traj.snapshots[i];
        let mut row = vec![format_number(snap.t)];
        let dens = traj.density(i);
        row.extend(traj.lattice.indices().map(|j| format_number(dens[j])));
        row.extend(snap.lost_mass.iter().map(|&m| format_number(m * traj.unit)));
        if with_se {
            let se = traj
                .std_err(i)
                .unwrap_or_else(|| vec![0.0; traj.lattice.len()]);
            row.extend(traj.lattice.indices().map(|j| format_number(se[j])));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json(value: &impl Serialize, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
