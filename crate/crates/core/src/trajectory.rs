//! Time series of lattice densities shared by both solvers.
//!
//! Values are stored in raw units and converted to densities by multiplying
//! with [`Trajectory::unit`]. The grid solver uses unit 1; the particle
//! solver stores particle counts with unit `1/V` (or `1/(V·R)` for a replica
//! ensemble) so that mass sums stay exact integers.

use serde::Serialize;

use crate::composition::Observable;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::measures::SignedMeasure;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot<F> {
    pub t: F,
    /// Dense lattice array, origin slot included.
    pub values: Vec<F>,
    /// Mass vector that has left the lattice (open truncation leak or
    /// particles binned past the extent).
    pub lost_mass: Vec<F>,
    /// Per-cell standard error, for replica ensembles.
    pub std_err: Option<Vec<F>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory<F> {
    #[serde(skip)]
    pub lattice: Lattice,
    pub unit: F,
    pub snapshots: Vec<Snapshot<F>>,
    /// Mass removed by clamping negative densities, summed over the run.
    pub clamped_mass: F,
}

impl<F: Scalar> Trajectory<F> {
    pub fn new(lattice: Lattice, unit: F) -> Self {
        Self {
            lattice,
            unit,
            snapshots: Vec::new(),
            clamped_mass: F::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn times(&self) -> Vec<F> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn density(&self, i: usize) -> Vec<F> {
        self.snapshots[i]
            .values
            .iter()
            .map(|&v| v * self.unit)
            .collect()
    }

    pub fn std_err(&self, i: usize) -> Option<Vec<F>> {
        self.snapshots[i]
            .std_err
            .as_ref()
            .map(|se| se.iter().map(|&v| v * self.unit).collect())
    }

    pub fn measure(&self, i: usize) -> SignedMeasure<F> {
        SignedMeasure::from_lattice(&self.lattice, &self.density(i))
    }

    /// In-lattice mass vector.
    pub fn mass_vector(&self, i: usize) -> Vec<F> {
        let snap = &self.snapshots[i];
        let d = self.dim();
        let mut raw = vec![F::zero(); d];
        for idx in self.lattice.indices() {
            let v = snap.values[idx];
            if v == F::zero() {
                continue;
            }
            for (l, p) in self.lattice.point(idx).into_iter().enumerate() {
                raw[l] += F::from_usize_exact(p) * v;
            }
        }
        raw.into_iter().map(|m| m * self.unit).collect()
    }

    /// In-lattice mass plus the mass that has left the lattice.
    pub fn accounted_mass_vector(&self, i: usize) -> Vec<F> {
        let snap = &self.snapshots[i];
        self.mass_vector(i)
            .into_iter()
            .zip(&snap.lost_mass)
            .map(|(m, &l)| m + l * self.unit)
            .collect()
    }

    /// `∫φ df_t` at snapshot `i`.
    pub fn pair(&self, i: usize, phi: &impl Observable<F>) -> F {
        self.measure(i).pair(phi)
    }

    /// Checks that two trajectories live on the same lattice and share
    /// snapshot times.
    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::IncompatibleGrids(format!(
                "lattices differ: d={} N={} vs d={} N={}",
                self.dim(),
                self.lattice.extent(),
                other.dim(),
                other.lattice.extent()
            )));
        }
        if self.len() != other.len() {
            return Err(Error::IncompatibleGrids(format!(
                "snapshot counts differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            let scale = F::one().max(a.t.abs());
            if (a.t - b.t).abs() > F::lit(1e-9) * scale {
                return Err(Error::IncompatibleGrids(format!(
                    "snapshot times differ: {} vs {}",
                    a.t, b.t
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_uses_unit_and_lost_mass() {
        let lattice = Lattice::new(2, 2).unwrap();
        let mut traj = Trajectory::new(lattice.clone(), 0.5);
        let mut values = vec![0.0; lattice.len()];
        values[lattice.index(&[1, 0]).unwrap()] = 4.0;
        values[lattice.index(&[1, 2]).unwrap()] = 2.0;
        traj.snapshots.push(Snapshot {
            t: 0.0,
            values,
            lost_mass: vec![1.0, 3.0],
            std_err: None,
        });
        assert_eq!(traj.mass_vector(0), vec![3.0, 2.0]);
        assert_eq!(traj.accounted_mass_vector(0), vec![3.5, 3.5]);
        assert_eq!(traj.measure(0).number(), 3.0);
    }

    #[test]
    fn incompatible_lattices_rejected() {
        let a = Trajectory::<f64>::new(Lattice::new(1, 4).unwrap(), 1.0);
        let b = Trajectory::<f64>::new(Lattice::new(1, 5).unwrap(), 1.0);
        assert!(matches!(
            a.check_compatible(&b),
            Err(Error::IncompatibleGrids(_))
        ));
    }
}
