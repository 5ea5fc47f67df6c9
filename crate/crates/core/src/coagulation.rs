//! Weak and strong forms of the coagulation operator on discrete measures.
//!
//! Weak form, for a test function `φ`:
//!
//! ```text
//! <Q(μ,ν), φ> = ½ ΣΣ K(x,y) [φ(x+y) − φ(x) − φ(y)] μ(x) ν(y)
//! ```
//!
//! Strong gain and loss are the raw bilinear forms, with no ½:
//!
//! ```text
//! Q⁺(μ,ν) = ΣΣ K(x,y) μ(x) ν(y) δ_{x+y}
//! Q⁻(μ,ν) = ΣΣ K(x,y) μ(x) ν(y) δ_x
//! ```
//!
//! The strong operator that agrees with the weak form on the diagonal is
//! `½ Q⁺(μ,μ) − Q⁻(μ,μ)`; [`strong_apply`] returns that combination.
//!
//! Double sums run in parallel over the outer atoms and are merged in atom
//! order, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::composition::{Composition, Observable, WeightParams};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measures::SignedMeasure;
use crate::scalar::Scalar;

fn check_dims<F: Scalar>(mu: &SignedMeasure<F>, nu: &SignedMeasure<F>) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

pub fn weak_apply<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
    phi: &(impl Observable<F> + Sync),
) -> Result<F> {
    check_dims(mu, nu)?;
    let phi_nu: Vec<F> = nu.atoms().iter().map(|(y, _)| phi.observe(y)).collect();
    let rows: Vec<F> = mu
        .atoms()
        .par_iter()
        .map(|(x, wx)| {
            let phi_x = phi.observe(x);
            let mut acc = F::zero();
            for ((y, wy), &phi_y) in nu.atoms().iter().zip(&phi_nu) {
                let bracket = phi.observe(&(x + y)) - phi_x - phi_y;
                acc += k.evaluate(x, y) * bracket * *wy;
            }
            acc * *wx
        })
        .collect();
    Ok(F::half() * rows.into_iter().sum::<F>())
}

fn pair_atoms<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
    place: impl Fn(&Composition<F>, &Composition<F>) -> Composition<F> + Sync,
) -> Vec<(Composition<F>, F)> {
    mu.atoms()
        .par_iter()
        .map(|(x, wx)| {
            nu.atoms()
                .iter()
                .map(|(y, wy)| (place(x, y), k.evaluate(x, y) * *wx * *wy))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// `Q⁺(μ,ν)`.
pub fn strong_gain<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
) -> Result<SignedMeasure<F>> {
    check_dims(mu, nu)?;
    SignedMeasure::new(mu.dim(), pair_atoms(k, mu, nu, |x, y| x + y))
}

/// `Q⁻(μ,ν)`.
pub fn strong_loss<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
) -> Result<SignedMeasure<F>> {
    check_dims(mu, nu)?;
    SignedMeasure::new(mu.dim(), pair_atoms(k, mu, nu, |x, _| x.clone()))
}

/// Gain, loss and their combination on the diagonal `μ = ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorOutput<F> {
    pub gain: SignedMeasure<F>,
    pub loss: SignedMeasure<F>,
    /// `½·gain − loss`.
    pub combined: SignedMeasure<F>,
}

pub fn operator<F: Scalar>(k: &Kernel<F>, mu: &SignedMeasure<F>) -> Result<OperatorOutput<F>> {
    let gain = strong_gain(k, mu, mu)?;
    let loss = strong_loss(k, mu, mu)?;
    let combined = gain.scaled(F::half()).minus(&loss)?;
    Ok(OperatorOutput {
        gain,
        loss,
        combined,
    })
}

/// `½ Q⁺(μ,μ) − Q⁻(μ,μ)`, the measure whose pairing with any `φ` equals
/// [`weak_apply`]`(μ, μ, φ)`.
pub fn strong_apply<F: Scalar>(k: &Kernel<F>, mu: &SignedMeasure<F>) -> Result<SignedMeasure<F>> {
    Ok(operator(k, mu)?.combined)
}

/// Relative slack on the operator norm bounds.
pub const NORM_BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NormBoundReport<F> {
    pub gain_norm: F,
    pub gain_bound: F,
    pub loss_norm: F,
    pub loss_bound: F,
    pub pass: bool,
}

impl<F: Scalar> NormBoundReport<F> {
    fn new(gain_norm: F, gain_bound: F, loss_norm: F, loss_bound: F) -> Self {
        let slack = F::one() + F::lit(NORM_BOUND_SLACK);
        let pass = gain_norm <= gain_bound * slack && loss_norm <= loss_bound * slack;
        Self {
            gain_norm,
            gain_bound,
            loss_norm,
            loss_bound,
            pass,
        }
    }

    fn ratio(norm: F, bound: F) -> F {
        if bound > F::zero() {
            norm / bound
        } else if norm > F::zero() {
            F::infinity()
        } else {
            F::zero()
        }
    }

    pub fn gain_ratio(&self) -> F {
        Self::ratio(self.gain_norm, self.gain_bound)
    }

    pub fn loss_ratio(&self) -> F {
        Self::ratio(self.loss_norm, self.loss_bound)
    }
}

fn bound_weights<F: Scalar>(k: &Kernel<F>, p: &WeightParams<F>) -> Result<WeightParams<F>> {
    if p.alpha < F::zero() || p.beta < F::zero() {
        return Err(Error::InvalidParameter(format!(
            "operator bounds need alpha, beta >= 0 (got {}, {})",
            p.alpha, p.beta
        )));
    }
    Ok(WeightParams::new(-k.theta1(), p.beta + k.theta2()))
}

/// `‖Q⁺(μ,ν)‖_{α,β} ≤ 4 max{2^α,2^β} c_u ‖μ‖‖ν‖` and
/// `‖Q⁻(μ,ν)‖_{α,β} ≤ c_u ‖μ‖‖ν‖`, both right-hand norms in
/// `‖·‖_{-θ1, β+θ2}`.
pub fn operator_norm_bound_check<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
    p: &WeightParams<F>,
) -> Result<NormBoundReport<F>> {
    let q = bound_weights(k, p)?;
    let product = mu.weighted_norm(&q) * nu.weighted_norm(&q);
    let gain = strong_gain(k, mu, nu)?.weighted_norm(p);
    let loss = strong_loss(k, mu, nu)?.weighted_norm(p);
    Ok(NormBoundReport::new(
        gain,
        F::lit(4.0) * p.sum_growth_factor() * k.c_u() * product,
        loss,
        k.c_u() * product,
    ))
}

/// Difference form of the same bounds:
/// `‖Q±(μ,μ) − Q±(ν,ν)‖_{α,β} ≤ C± ‖μ−ν‖ ‖μ+ν‖` with the constants above.
pub fn difference_bound_check<F: Scalar>(
    k: &Kernel<F>,
    mu: &SignedMeasure<F>,
    nu: &SignedMeasure<F>,
    p: &WeightParams<F>,
) -> Result<NormBoundReport<F>> {
    let q = bound_weights(k, p)?;
    let product = mu.minus(nu)?.weighted_norm(&q) * mu.plus(nu)?.weighted_norm(&q);
    let gain = strong_gain(k, mu, mu)?
        .minus(&strong_gain(k, nu, nu)?)?
        .weighted_norm(p);
    let loss = strong_loss(k, mu, mu)?
        .minus(&strong_loss(k, nu, nu)?)?
        .weighted_norm(p);
    Ok(NormBoundReport::new(
        gain,
        F::lit(4.0) * p.sum_growth_factor() * k.c_u() * product,
        loss,
        k.c_u() * product,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> Composition<f64> {
        Composition::new(v.to_vec()).unwrap()
    }

    fn dirac(p: &[f64], w: f64) -> SignedMeasure<f64> {
        SignedMeasure::dirac(c(p), w)
    }

    #[test]
    fn weak_apply_examples() {
        let k = Kernel::constant(2.0).unwrap();
        let mu = dirac(&[1.0], 1.0);
        let phi = |x: &Composition<f64>| x.l1_norm().min(1.5);
        assert_eq!(weak_apply(&k, &mu, &mu, &phi).unwrap(), -0.5);

        let mu = SignedMeasure::new(2, vec![(c(&[1.0, 2.0]), 0.5), (c(&[0.3, 0.0]), 2.0)]).unwrap();
        let coord = |x: &Composition<f64>| x.coords()[1];
        assert!(
            weak_apply(&Kernel::brownian(), &mu, &mu, &coord)
                .unwrap()
                .abs()
                < 1e-15
        );

        let sub = |x: &Composition<f64>| x.l1_norm().sqrt();
        assert!(weak_apply(&Kernel::brownian(), &mu, &mu, &sub).unwrap() <= 0.0);
    }

    #[test]
    fn strong_gain_loss_examples() {
        let k = Kernel::constant(2.0).unwrap();
        let (a, b) = (c(&[1.0, 0.0]), c(&[0.0, 2.0]));
        let mu = SignedMeasure::dirac(a.clone(), 2.0);
        let nu = SignedMeasure::dirac(b.clone(), 3.0);
        assert_eq!(
            strong_gain(&k, &mu, &nu).unwrap(),
            SignedMeasure::dirac(&a + &b, 12.0)
        );
        assert_eq!(
            strong_loss(&k, &mu, &nu).unwrap(),
            SignedMeasure::dirac(a, 12.0)
        );
        let empty = SignedMeasure::empty(2);
        assert!(strong_gain(&k, &mu, &empty).unwrap().is_empty());
        assert!(strong_loss(&k, &mu, &empty).unwrap().is_empty());
    }

    #[test]
    fn strong_apply_examples() {
        let k = Kernel::constant(2.0).unwrap();
        let q = strong_apply(&k, &dirac(&[1.0, 0.0], 1.0)).unwrap();
        let expected =
            SignedMeasure::new(2, vec![(c(&[2.0, 0.0]), 1.0), (c(&[1.0, 0.0]), -2.0)]).unwrap();
        assert_eq!(q, expected);
        assert_eq!(q.mass_vector(), vec![0.0, 0.0]);

        let cval = 0.7;
        let q = strong_apply(&k, &dirac(&[0.4, 0.1], cval)).unwrap();
        assert!((q.number() + cval * cval).abs() < 1e-15);
    }

    #[test]
    fn norm_bound_examples() {
        let k = Kernel::constant(2.0).unwrap();
        let p = WeightParams::new(0.0, 0.0);
        let r =
            operator_norm_bound_check(&k, &dirac(&[0.5], 3.0), &dirac(&[4.0], 0.5), &p).unwrap();
        assert!(r.pass && r.gain_ratio() <= 1.0 && r.loss_ratio() <= 1.0);

        let atoms = vec![(c(&[0.1]), 1.0), (c(&[1.0]), 0.5), (c(&[10.0]), 0.2)];
        let mu = SignedMeasure::new(1, atoms).unwrap();
        let r = operator_norm_bound_check(&Kernel::brownian(), &mu, &mu, &p).unwrap();
        assert!(r.pass, "{r:?}");

        let r = operator_norm_bound_check(&k, &mu, &SignedMeasure::empty(1), &p).unwrap();
        assert_eq!(
            (r.gain_norm, r.gain_bound, r.loss_norm, r.loss_bound),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert!(r.pass);

        assert!(operator_norm_bound_check(&k, &mu, &mu, &WeightParams::new(-0.5, 0.0)).is_err());
    }

    // Direct substitution: single atoms μ = aδ_x, ν = bδ_y with a constant
    // kernel give ‖Q⁺‖ = K|ab|ω(x+y) and ‖Q⁻‖ = K|ab|ω(x).
    #[test]
    fn single_atom_constant_kernel_substitution() {
        let k = Kernel::constant(2.0).unwrap();
        for (alpha, beta) in [(0.0, 0.0), (0.5, 1.0), (2.0, 0.3)] {
            let p = WeightParams::new(alpha, beta);
            let q = WeightParams::new(0.0, beta);
            for (xs, ys, a, b) in [
                (0.2, 3.0, 1.5, -0.5),
                (5.0, 5.0, 2.0, 2.0),
                (0.01, 0.02, -1.0, 4.0),
            ] {
                let (x, y) = (c(&[xs]), c(&[ys]));
                let r = operator_norm_bound_check(
                    &k,
                    &SignedMeasure::dirac(x.clone(), a),
                    &SignedMeasure::dirac(y.clone(), b),
                    &p,
                )
                .unwrap();
                let gain = 2.0 * (a * b).abs() * p.eval(&(&x + &y));
                let loss = 2.0 * (a * b).abs() * p.eval(&x);
                let prod = a.abs() * q.eval(&x) * b.abs() * q.eval(&y);
                assert!((r.gain_norm - gain).abs() <= 1e-14 * gain);
                assert!((r.loss_norm - loss).abs() <= 1e-14 * loss);
                assert!(
                    (r.gain_bound - 8.0 * p.sum_growth_factor() * prod).abs()
                        <= 1e-14 * r.gain_bound
                );
                assert!(r.gain_ratio() <= 1.0 && r.loss_ratio() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn difference_bound_on_signed_pair() {
        let k = Kernel::brownian();
        let mu =
            SignedMeasure::new(2, vec![(c(&[1.0, 0.5]), 1.0), (c(&[0.2, 0.0]), -0.3)]).unwrap();
        let nu = SignedMeasure::new(2, vec![(c(&[1.0, 0.5]), 0.4), (c(&[3.0, 3.0]), 0.8)]).unwrap();
        let r = difference_bound_check(&k, &mu, &nu, &WeightParams::new(0.5, 0.5)).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
