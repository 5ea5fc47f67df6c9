//! Point samplers shared by the property suites and sampled checks.

use rand::Rng;

use crate::composition::Composition;
use crate::error::Result;
use crate::measures::SignedMeasure;
use crate::scalar::Scalar;

/// Size range for sampled compositions: log-uniform over twelve decades.
pub const SIZE_RANGE: (f64, f64) = (1e-6, 1e6);

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi >= lo);
    if hi == lo {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Uniform point of the probability simplex in `dim` coordinates.
pub fn simplex_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..dim)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = e.iter().sum();
        if total > 0.0 {
            return e.into_iter().map(|v| v / total).collect();
        }
    }
}

/// Composition with (approximately, up to rounding) the given ℓ¹ size and a
/// uniformly random direction.
pub fn composition_with_size<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    size: f64,
) -> Result<Composition<F>> {
    let dir = simplex_direction(rng, dim);
    let coords: Vec<F> = dir.iter().map(|&c| F::lit(c * size)).collect();
    match Composition::new(coords) {
        Ok(p) => Ok(p),
        // every coordinate underflowed: put the whole size on one axis
        Err(_) => Composition::along_axis(dim, rng.random_range(0..dim), F::lit(size)),
    }
}

/// Log-uniform size in [`SIZE_RANGE`] with a uniform direction.
pub fn random_composition<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
) -> Result<Composition<F>> {
    let size = log_uniform(rng, SIZE_RANGE.0, SIZE_RANGE.1);
    composition_with_size(rng, dim, size)
}

/// Signed measure with `1..=max_atoms` atoms of size log-uniform in
/// `[1e-2, 1e2]` and weights uniform in `[-2, 2]`; about a third of the atoms
/// sit on a coordinate axis.
pub fn random_signed_measure<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_atoms: usize,
) -> Result<SignedMeasure<f64>> {
    let n = rng.random_range(1..=max_atoms.max(1));
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let size = log_uniform(rng, 1e-2, 1e2);
        let x = if rng.random_bool(1.0 / 3.0) {
            Composition::along_axis(dim, rng.random_range(0..dim), size)?
        } else {
            composition_with_size(rng, dim, size)?
        };
        atoms.push((x, rng.random_range(-2.0..=2.0)));
    }
    SignedMeasure::new(dim, atoms)
}
