use crate::composition::{Composition, WeightParams};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::ssa::replica_stats;
use crate::trajectory::Trajectory;

use super::{CheckReport, SeriesPoint, Worst};

/// Number of standard errors in the statistical band.
const SIGMAS: f64 = 3.0;

/// `ω_{α,β}` at every lattice slot; the origin slot gets 0.
pub(crate) fn lattice_weights(lattice: &Lattice, p: &WeightParams<f64>) -> Vec<f64> {
    let mut w = vec![0.0; lattice.len()];
    for i in lattice.indices() {
        w[i] = p.radial(lattice.size_of(i) as f64);
    }
    w
}

pub(crate) fn dense_distance(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), w)| w * (x - y).abs())
        .sum()
}

/// `‖f_t − g_t‖_p` at every common snapshot.
pub fn trajectory_distance(
    a: &Trajectory<f64>,
    b: &Trajectory<f64>,
    p: &WeightParams<f64>,
) -> Result<Vec<SeriesPoint>> {
    a.check_compatible(b)?;
    let w = lattice_weights(&a.lattice, p);
    Ok((0..a.len())
        .map(|i| SeriesPoint {
            t: a.snapshots[i].t,
            value: dense_distance(&a.density(i), &b.density(i), &w),
        })
        .collect())
}

/// Distance series `D(t) = ‖f_t − g_t‖_p` against the band
/// `budget + 3 Σ_x ω(x)(σ_f(x) + σ_g(x))`, where `σ` are per-cell standard
/// errors of replica ensembles (zero for deterministic trajectories) and
/// `budget` is the deterministic discretisation allowance. The violation is
/// the largest `D/band`, so the check passes at ratio 1.
pub fn uniqueness_compare(
    a: &Trajectory<f64>,
    b: &Trajectory<f64>,
    p: &WeightParams<f64>,
    budget: f64,
) -> Result<CheckReport> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} must be nonnegative"
        )));
    }
    a.check_compatible(b)?;
    let w = lattice_weights(&a.lattice, p);
    let band_of = |t: &Trajectory<f64>, i: usize| {
        t.std_err(i)
            .map(|se| SIGMAS * se.iter().zip(&w).map(|(s, w)| s * w).sum::<f64>())
            .unwrap_or(0.0)
    };
    let mut worst = Worst::new();
    let mut series = Vec::with_capacity(a.len());
    let mut last = (0.0, 0.0);
    for i in 0..a.len() {
        let (da, db) = (a.density(i), b.density(i));
        let d = dense_distance(&da, &db, &w);
        let scale: f64 = da
            .iter()
            .chain(&db)
            .zip(w.iter().chain(&w))
            .map(|(v, w)| (v * w).abs())
            .sum();
        let band = budget + band_of(a, i) + band_of(b, i) + 1e-12 * scale;
        let ratio = if band > 0.0 {
            d / band
        } else if d > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let t = a.snapshots[i].t;
        worst.offer(ratio, Some(t), || None);
        series.push(SeriesPoint { t, value: d });
        last = (d, band);
    }
    Ok(worst
        .report("uniqueness_compare", 1.0)
        .with_series(series)
        .with_context(format!(
            "weights ({}, {}); final distance {:.6e} within band {:.6e}",
            p.alpha, p.beta, last.0, last.1
        )))
}

/// `‖f_dt − f_{dt/2}‖ / ‖f_{dt/2} − f_{dt/4}‖` at the final snapshot; about
/// 16 for a fourth-order scheme.
pub fn richardson_ratio(
    coarse: &Trajectory<f64>,
    mid: &Trajectory<f64>,
    fine: &Trajectory<f64>,
    p: &WeightParams<f64>,
) -> Result<f64> {
    for t in [mid, fine] {
        if t.lattice != coarse.lattice {
            return Err(Error::IncompatibleGrids(
                "Richardson runs use different lattices".into(),
            ));
        }
    }
    let last = |t: &Trajectory<f64>| -> Result<(f64, Vec<f64>)> {
        let i = t
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
        Ok((t.snapshots[i].t, t.density(i)))
    };
    let (tc, c) = last(coarse)?;
    let (tm, m) = last(mid)?;
    let (tf, f) = last(fine)?;
    if (tc - tm).abs() > 1e-9 * tc.max(1.0) || (tm - tf).abs() > 1e-9 * tm.max(1.0) {
        return Err(Error::IncompatibleGrids(
            "Richardson runs end at different times".into(),
        ));
    }
    let w = lattice_weights(&coarse.lattice, p);
    Ok(dense_distance(&c, &m, &w) / dense_distance(&m, &f, &w))
}

/// `∫|x|^k df` at snapshot `i`.
fn size_moment(traj: &Trajectory<f64>, i: usize, k: f64) -> f64 {
    traj.pair(i, &|x: &Composition<f64>| x.l1_norm().powf(k))
}

/// Compares `∫|x|^k df_T` at the final snapshot between a grid trajectory
/// and particle replicas, for every order `k`. The grid error is estimated
/// by `|M_grid − M_ref|` against a finer reference run when one is given.
/// The violation is the largest `|M_grid − M_ssa| / (3·sqrt(SE_grid² +
/// SE_ssa²))`, passing at 1.
pub fn moment_agreement(
    grid: &Trajectory<f64>,
    reference: Option<&Trajectory<f64>>,
    replicas: &[Trajectory<f64>],
    orders: &[f64],
) -> Result<CheckReport> {
    let first = replicas
        .first()
        .ok_or_else(|| Error::InvalidParameter("no replicas".into()))?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid trajectory".into()));
    }
    let last = grid.len() - 1;
    let t = grid.snapshots[last].t;
    let slast = first
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidParameter("empty replica".into()))?;
    if (first.snapshots[slast].t - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::IncompatibleGrids(format!(
            "final times differ: grid {t}, particles {}",
            first.snapshots[slast].t
        )));
    }
    let ref_last = match reference {
        Some(r) => {
            let i = r
                .len()
                .checked_sub(1)
                .ok_or_else(|| Error::InvalidParameter("empty reference".into()))?;
            if (r.snapshots[i].t - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::IncompatibleGrids(
                    "reference run ends at a different time".into(),
                ));
            }
            Some((r, i))
        }
        None => None,
    };
    let mut worst = Worst::new();
    let mut parts = Vec::new();
    for &k in orders {
        let m_grid = size_moment(grid, last, k);
        let se_grid = ref_last.map_or(0.0, |(r, i)| (m_grid - size_moment(r, i, k)).abs());
        let (m_ssa, se_ssa) = replica_stats(replicas, slast, |r, i| size_moment(r, i, k));
        let band = SIGMAS * (se_grid * se_grid + se_ssa * se_ssa).sqrt();
        let diff = (m_grid - m_ssa).abs();
        let z = if band > 0.0 {
            diff / band
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst.offer(z, Some(t), || Some(format!("order {k}")));
        parts.push(format!(
            "k={k}: grid {m_grid:.8e} (err {se_grid:.2e}), particles {m_ssa:.8e} (se {se_ssa:.2e})"
        ));
    }
    Ok(worst.report("moment_agreement", 1.0).with_context(format!(
        "{} replicas; {}",
        replicas.len(),
        parts.join("; ")
    )))
}
