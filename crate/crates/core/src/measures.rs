//! Signed discrete measures on composition space: weighted norms, the dual
//! pairing with test functions, mass vectors and lattice binning.
//!
//! A measure is kept canonical at all times: atoms sorted lexicographically
//! by point, equal points (bit-equal coordinates) merged, zero weights
//! dropped. The total variation of a canonical measure is then the same
//! atoms with absolute weights.

use crate::composition::{Composition, Observable, WeightParams};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SignedMeasure<F> {
    dim: usize,
    atoms: Vec<(Composition<F>, F)>,
}

impl<F: Scalar> SignedMeasure<F> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
        }
    }

    pub fn new(dim: usize, atoms: Vec<(Composition<F>, F)>) -> Result<Self> {
        for (x, w) in &atoms {
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.dim(),
                });
            }
            if !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite weight {w} at {x}"
                )));
            }
        }
        Ok(Self::canonical(dim, atoms))
    }

    pub fn dirac(x: Composition<F>, weight: F) -> Self {
        let dim = x.dim();
        Self::canonical(dim, vec![(x, weight)])
    }

    /// Measure with weight `dense[i]` at each lattice point `i`.
    pub fn from_lattice(lattice: &Lattice, dense: &[F]) -> Self {
        debug_assert_eq!(dense.len(), lattice.len());
        // row-major order is lexicographic order, so the atoms come out sorted
        let atoms = lattice
            .indices()
            .filter(|&i| dense[i] != F::zero())
            .map(|i| {
                let p: Vec<F> = lattice
                    .point(i)
                    .into_iter()
                    .map(F::from_usize_exact)
                    .collect();
                (
                    Composition::new(p).expect("nonzero lattice point"),
                    dense[i],
                )
            })
            .collect();
        Self {
            dim: lattice.dim(),
            atoms,
        }
    }

    fn canonical(dim: usize, mut atoms: Vec<(Composition<F>, F)>) -> Self {
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Composition<F>, F)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some((last, acc)) if *last == x => *acc += w,
                _ => merged.push((x, w)),
            }
        }
        merged.retain(|(_, w)| *w != F::zero());
        Self { dim, atoms: merged }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(Composition<F>, F)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|(_, w)| *w >= F::zero())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let atoms = self
            .atoms
            .iter()
            .chain(other.atoms.iter())
            .cloned()
            .collect();
        Ok(Self::canonical(self.dim, atoms))
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.plus(&other.scaled(-F::one()))
    }

    pub fn scaled(&self, factor: F) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|(x, w)| (x.clone(), *w * factor))
            .collect();
        Self::canonical(self.dim, atoms)
    }

    /// `|μ|`, atomwise absolute weights.
    pub fn total_variation(&self) -> Self {
        Self {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|(x, w)| (x.clone(), w.abs()))
                .collect(),
        }
    }

    /// `∫ ω_{α,β} d|μ|`.
    pub fn weighted_norm(&self, p: &WeightParams<F>) -> F {
        self.norm_with(p)
    }

    /// `∫ w d|μ|` for an arbitrary nonnegative weight.
    pub fn norm_with(&self, w: &impl Observable<F>) -> F {
        self.atoms
            .iter()
            .map(|(x, weight)| w.observe(x) * weight.abs())
            .sum()
    }

    /// `∫ φ dμ`.
    pub fn pair(&self, phi: &impl Observable<F>) -> F {
        self.atoms
            .iter()
            .map(|(x, weight)| phi.observe(x) * *weight)
            .sum()
    }

    /// `(∫ x_ℓ dμ)_ℓ`.
    pub fn mass_vector(&self) -> Vec<F> {
        let mut mass = vec![F::zero(); self.dim];
        for (x, w) in &self.atoms {
            for (m, &c) in mass.iter_mut().zip(x.coords()) {
                *m += c * *w;
            }
        }
        mass
    }

    /// `∫ |x| dμ`.
    pub fn total_mass(&self) -> F {
        self.atoms.iter().map(|(x, w)| x.l1_norm() * *w).sum()
    }

    /// `∫ 1 dμ`.
    pub fn number(&self) -> F {
        self.atoms.iter().map(|(_, w)| *w).sum()
    }

    /// Assigns every atom to the lattice cell containing it
    /// (`floor(x_ℓ / cell)` per coordinate, so boundary points go to the
    /// upper cell). Atoms beyond the extent land in the overflow bucket;
    /// atoms whose cell is the origin land in a separate bucket, since the
    /// origin is not a lattice point.
    pub fn bin_to_lattice(&self, cell: F, lattice: &Lattice) -> Result<LatticeBins<F>> {
        if !(cell > F::zero()) || !cell.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cell width {cell} must be positive"
            )));
        }
        if lattice.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: lattice.dim(),
                found: self.dim,
            });
        }
        let extent = F::from_usize_exact(lattice.extent());
        let mut bins = LatticeBins {
            lattice: lattice.clone(),
            cell,
            weights: vec![F::zero(); lattice.len()],
            overflow_weight: F::zero(),
            overflow_mass: vec![F::zero(); self.dim],
            origin_weight: F::zero(),
        };
        let mut point = vec![0usize; self.dim];
        'atoms: for (x, w) in &self.atoms {
            for (p, &c) in point.iter_mut().zip(x.coords()) {
                let q = (c / cell).floor();
                if q > extent {
                    bins.overflow_weight += *w;
                    for (m, &c) in bins.overflow_mass.iter_mut().zip(x.coords()) {
                        *m += c * *w;
                    }
                    continue 'atoms;
                }
                *p = q.to_usize().expect("cell index within extent");
            }
            match lattice.index(&point) {
                Some(0) => bins.origin_weight += *w,
                Some(i) => bins.weights[i] += *w,
                None => unreachable!("point checked against extent"),
            }
        }
        Ok(bins)
    }
}

/// `‖μ − ν‖_{α,β}`.
pub fn weighted_distance<F: Scalar>(
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
    p: &WeightParams<F>,
) -> Result<F> {
    Ok(mu.minus(nu)?.weighted_norm(p))
}

/// Dense lattice image of a measure, laid out like a grid state.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeBins<F> {
    pub lattice: Lattice,
    pub cell: F,
    pub weights: Vec<F>,
    pub overflow_weight: F,
    /// Mass vector of the atoms that overflowed.
    pub overflow_mass: Vec<F>,
    pub origin_weight: F,
}

impl<F: Scalar> LatticeBins<F> {
    /// Weight summed over lattice cells and both buckets.
    pub fn total_weight(&self) -> F {
        self.weights.iter().copied().sum::<F>() + self.overflow_weight + self.origin_weight
    }

    /// In-lattice part as a measure with atoms at `index · cell`.
    pub fn to_measure(&self) -> SignedMeasure<F> {
        let unit = SignedMeasure::from_lattice(&self.lattice, &self.weights);
        if self.cell == F::one() {
            return unit;
        }
        let atoms = unit
            .atoms
            .into_iter()
            .map(|(x, w)| (x.scaled(self.cell).expect("positive cell"), w))
            .collect();
        SignedMeasure::canonical(self.lattice.dim(), atoms)
    }
}
