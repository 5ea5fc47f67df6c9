//! Composition space geometry and the weight / test-function constructions
//! built on the ℓ¹ size `|x|`.
//!
//! A cluster is a point of `[0, ∞)^d \ {0}`. Everything here depends on the
//! point through its coordinates (for the partial order and sums) or through
//! its ℓ¹ size (for every weight).

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampling;
use crate::scalar::Scalar;

/// Point of `[0, ∞)^d \ {0}`: per-component volumes of one cluster.
#[derive(Clone, PartialEq)]
pub struct Composition<F> {
    coords: Box<[F]>,
}

impl<F: Scalar> Composition<F> {
    /// Validates and stores the coordinates. Negative zero is normalised to
    /// `+0.0` so that equal points compare bit-equal.
    pub fn new(coords: impl Into<Vec<F>>) -> Result<Self> {
        let mut coords = coords.into();
        if coords.is_empty() {
            return Err(Error::InvalidComposition(
                "dimension must be positive".into(),
            ));
        }
        for c in coords.iter_mut() {
            if !c.is_finite() || *c < F::zero() {
                return Err(Error::InvalidComposition(format!(
                    "coordinate {c} is not a finite nonnegative number"
                )));
            }
            if c.is_zero() {
                *c = F::zero();
            }
        }
        if coords.iter().all(|c| c.is_zero()) {
            return Err(Error::InvalidComposition(
                "at least one coordinate must be positive".into(),
            ));
        }
        Ok(Self {
            coords: coords.into_boxed_slice(),
        })
    }

    /// `size · e_axis` in dimension `dim`.
    pub fn along_axis(dim: usize, axis: usize, size: F) -> Result<Self> {
        if axis >= dim {
            return Err(Error::InvalidComposition(format!(
                "axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut coords = vec![F::zero(); dim];
        coords[axis] = size;
        Self::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[F] {
        &self.coords
    }

    /// Total size `|x| = Σ x_ℓ`.
    pub fn l1_norm(&self) -> F {
        self.coords.iter().copied().sum()
    }

    /// The order `x < y`: componentwise `≤` and `x ≠ y`.
    pub fn strictly_below(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        let le = self
            .coords
            .iter()
            .zip(other.coords.iter())
            .all(|(a, b)| a <= b);
        Ok(le && self != other)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.add_unchecked(other))
    }

    pub(crate) fn add_unchecked(&self, other: &Self) -> Self {
        let coords: Vec<F> = self
            .coords
            .iter()
            .zip(other.coords.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Self {
            coords: coords.into_boxed_slice(),
        }
    }

    /// `x / |x|`, a point of the unit simplex.
    pub fn direction(&self) -> Vec<F> {
        let size = self.l1_norm();
        self.coords.iter().map(|&c| c / size).collect()
    }

    pub fn scaled(&self, factor: F) -> Result<Self> {
        Self::new(self.coords.iter().map(|&c| c * factor).collect::<Vec<_>>())
    }

    pub(crate) fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl<F: Scalar> Add for &Composition<F> {
    type Output = Composition<F>;

    fn add(self, rhs: Self) -> Composition<F> {
        assert_eq!(self.dim(), rhs.dim(), "composition dimension mismatch");
        self.add_unchecked(rhs)
    }
}

// Coordinates are finite by construction, so the lexicographic order is total.
impl<F: Scalar> Eq for Composition<F> {}

impl<F: Scalar> PartialOrd for Composition<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<F: Scalar> Ord for Composition<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.coords.iter().zip(other.coords.iter()) {
            match a.partial_cmp(b).expect("finite coordinates") {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl<F: fmt::Debug> fmt::Debug for Composition<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:?}")?;
        }
        write!(f, ")")
    }
}

impl<F: fmt::Display> fmt::Display for Composition<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Anything that can be evaluated at a composition: weights, test functions,
/// coordinate projections.
pub trait Observable<F> {
    fn observe(&self, x: &Composition<F>) -> F;
}

impl<F, T> Observable<F> for T
where
    T: Fn(&Composition<F>) -> F,
{
    fn observe(&self, x: &Composition<F>) -> F {
        self(x)
    }
}

/// Two-branch power weight: `|x|^α` for `|x| ≤ 1`, `|x|^β` above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightParams<F> {
    pub alpha: F,
    pub beta: F,
}

impl<F: Scalar> WeightParams<F> {
    pub fn new(alpha: F, beta: F) -> Self {
        Self { alpha, beta }
    }

    /// The weight as a function of the size. `r = 1` takes the α branch;
    /// both branches equal one there.
    #[inline]
    pub fn radial(&self, r: F) -> F {
        if r <= F::one() {
            r.powf(self.alpha)
        } else {
            r.powf(self.beta)
        }
    }

    #[inline]
    pub fn eval(&self, x: &Composition<F>) -> F {
        self.radial(x.l1_norm())
    }

    /// `ω_{-α,-β} = 1 / ω_{α,β}`.
    pub fn reciprocal(&self) -> Self {
        Self::new(-self.alpha, -self.beta)
    }

    /// `max{2^α, 2^β}`, the growth factor of `ω(x+y)` against `ω(x)+ω(y)`
    /// for nonnegative exponents.
    pub fn sum_growth_factor(&self) -> F {
        F::two().powf(self.alpha).max(F::two().powf(self.beta))
    }
}

impl<F: Scalar> Observable<F> for WeightParams<F> {
    fn observe(&self, x: &Composition<F>) -> F {
        self.eval(x)
    }
}

/// Named scalar function `(0, ∞) → [0, ∞)` supplied by the caller
/// (a sublinear base weight, or a convex moment function).
#[derive(Clone)]
pub struct RadialFn<F> {
    label: String,
    f: Arc<dyn Fn(F) -> F + Send + Sync>,
}

impl<F: Scalar> RadialFn<F> {
    pub fn new(label: impl Into<String>, f: impl Fn(F) -> F + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// `r ↦ r^p`.
    pub fn power(p: F) -> Self {
        Self::new(format!("r^{p}"), move |r: F| r.powf(p))
    }

    /// `r ↦ ω̄_{α,β}(r)`.
    pub fn from_weight(w: WeightParams<F>) -> Self {
        Self::new(format!("omega[{}, {}]", w.alpha, w.beta), move |r: F| {
            w.radial(r)
        })
    }

    #[inline]
    pub fn call(&self, r: F) -> F {
        (self.f)(r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<F> fmt::Debug for RadialFn<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialFn({})", self.label)
    }
}

/// Bounded or near-zero-linear approximations of the power weights.
#[derive(Clone, Debug)]
pub enum RegularizedWeight<F> {
    /// `min{ω_{α,β}(x), n}`.
    Truncated { base: WeightParams<F>, level: F },
    /// `ε⁻¹ ω̄(ε)|x|` below `ε`, `min{ω̄(|x|), R}` from `ε` on.
    Sublinear { base: RadialFn<F>, eps: F, cap: F },
    /// `Φ(ε^{-α})|x|/ε` below `ε`, `Φ(|x|^{-α})` from `ε` on.
    ConvexMoment { phi: RadialFn<F>, alpha: F, eps: F },
    /// `ε^{k-1}|x|` below `ε`, `min{|x|, R}^k` from `ε` on.
    Power { eps: F, cap: F, k: F },
}

fn check_eps<F: Scalar>(eps: F) -> Result<()> {
    if !(eps > F::zero() && eps < F::one()) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} not in (0, 1)"
        )));
    }
    Ok(())
}

fn check_cap<F: Scalar>(cap: F) -> Result<()> {
    if !(cap > F::one()) || !cap.is_finite() {
        return Err(Error::InvalidParameter(format!("R = {cap} must exceed 1")));
    }
    Ok(())
}

impl<F: Scalar> RegularizedWeight<F> {
    pub fn truncated(base: WeightParams<F>, level: F) -> Result<Self> {
        if !(level > F::one()) {
            return Err(Error::InvalidParameter(format!(
                "n = {level} must exceed 1"
            )));
        }
        Ok(Self::Truncated { base, level })
    }

    /// `base` must be sublinear; that is the caller's contract.
    pub fn sublinear(base: RadialFn<F>, eps: F, cap: F) -> Result<Self> {
        check_eps(eps)?;
        check_cap(cap)?;
        Ok(Self::Sublinear { base, eps, cap })
    }

    /// `phi` must be continuous and nondecreasing with `phi(0) = 0`; only the
    /// value at zero is checked here.
    pub fn convex_moment(phi: RadialFn<F>, alpha: F, eps: F) -> Result<Self> {
        check_eps(eps)?;
        if !(alpha > F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        if phi.call(F::zero()) != F::zero() {
            return Err(Error::InvalidParameter(format!(
                "{} does not vanish at 0",
                phi.label()
            )));
        }
        Ok(Self::ConvexMoment { phi, alpha, eps })
    }

    pub fn power(eps: F, cap: F, k: F) -> Result<Self> {
        check_eps(eps)?;
        check_cap(cap)?;
        if !(k > F::one()) {
            return Err(Error::InvalidParameter(format!("k = {k} must exceed 1")));
        }
        Ok(Self::Power { eps, cap, k })
    }

    pub fn radial(&self, r: F) -> F {
        match self {
            Self::Truncated { base, level } => base.radial(r).min(*level),
            Self::Sublinear { base, eps, cap } => {
                if r < *eps {
                    base.call(*eps) / *eps * r
                } else {
                    base.call(r).min(*cap)
                }
            }
            Self::ConvexMoment { phi, alpha, eps } => {
                if r < *eps {
                    phi.call(eps.powf(-*alpha)) * r / *eps
                } else {
                    phi.call(r.powf(-*alpha))
                }
            }
            Self::Power { eps, cap, k } => {
                if r < *eps {
                    eps.powf(*k - F::one()) * r
                } else {
                    r.min(*cap).powf(*k)
                }
            }
        }
    }

    pub fn eval(&self, x: &Composition<F>) -> F {
        self.radial(x.l1_norm())
    }

    /// The unregularised function this construction stays below.
    ///
    /// For [`RegularizedWeight::Power`] this is `ω_{1,k}`, the smallest of the
    /// weights `ω_{-θ1,k}` with `-θ1 ≤ 1`.
    pub fn majorant_radial(&self, r: F) -> F {
        match self {
            Self::Truncated { base, .. } => base.radial(r),
            Self::Sublinear { base, .. } => base.call(r),
            Self::ConvexMoment { phi, alpha, .. } => phi.call(r.powf(-*alpha)),
            Self::Power { k, .. } => WeightParams::new(F::one(), *k).radial(r),
        }
    }

    pub fn majorant(&self, x: &Composition<F>) -> F {
        self.majorant_radial(x.l1_norm())
    }

    /// Radius below which the construction is linear in `|x|`, if any.
    pub fn linearity_radius(&self) -> Option<F> {
        match self {
            Self::Truncated { .. } => None,
            Self::Sublinear { eps, .. }
            | Self::ConvexMoment { eps, .. }
            | Self::Power { eps, .. } => Some(*eps),
        }
    }
}

impl<F: Scalar> Observable<F> for RegularizedWeight<F> {
    fn observe(&self, x: &Composition<F>) -> F {
        self.eval(x)
    }
}

/// `w(x+y) − w(x) − w(y)`; nonpositive exactly when `w` is subadditive on
/// the pair.
pub fn subadditivity_defect<F: Scalar>(
    w: &impl Observable<F>,
    x: &Composition<F>,
    y: &Composition<F>,
) -> Result<F> {
    let sum = x.checked_add(y)?;
    Ok(w.observe(&sum) - w.observe(x) - w.observe(y))
}

/// Right-hand side (without the constant `C_k`) of the defect bound for the
/// k-power regularisation:
/// `|x|^μ min{|y|,R}^k |y|^{-μ}` when `|x| ≤ |y|`, mirrored otherwise.
pub fn power_defect_majorant<F: Scalar>(
    k: F,
    mu: F,
    cap: F,
    x: &Composition<F>,
    y: &Composition<F>,
) -> F {
    let (a, b) = (x.l1_norm(), y.l1_norm());
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    small.powf(mu) * large.min(cap).powf(k) * large.powf(-mu)
}

/// Sampling parameters for [`is_valid_test_function`].
#[derive(Clone, Copy, Debug)]
pub struct SampleBudget {
    pub samples: usize,
    pub seed: u64,
    pub dim: usize,
}

impl Default for SampleBudget {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0x5eed,
            dim: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdditivityWitness<F> {
    pub x: Composition<F>,
    pub y: Composition<F>,
    pub defect: F,
}

#[derive(Clone, Debug)]
pub struct TestFunctionReport<F> {
    pub valid: bool,
    pub bounded: bool,
    pub sup_abs: F,
    pub lipschitz_estimate: F,
    pub additivity_witness: Option<AdditivityWitness<F>>,
}

/// Radii probed along fixed rays when looking for unbounded growth.
const GROWTH_PROBE_RADII: [f64; 3] = [1e6, 1e9, 1e12];

/// Sampled membership test for the class of bounded Lipschitz functions that
/// are additive on pairs with `|x+y| < eps_lin`.
///
/// Sizes are log-uniform on `[1e-6, 1e6]`, directions uniform on the
/// simplex. A function is reported unbounded when it is non-finite somewhere
/// or keeps at least doubling along a ray across the radii `1e6, 1e9, 1e12`.
pub fn is_valid_test_function<F: Scalar>(
    phi: &impl Observable<F>,
    eps_lin: F,
    budget: &SampleBudget,
) -> Result<TestFunctionReport<F>> {
    if !(eps_lin > F::zero()) {
        return Err(Error::InvalidParameter(format!(
            "linearity radius {eps_lin} must be positive"
        )));
    }
    let dim = budget.dim.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let (lo, hi) = sampling::SIZE_RANGE;
    let rel_tol = F::epsilon() * F::lit(1024.0);

    let mut sup_abs = F::zero();
    let mut lipschitz = F::zero();
    let mut finite = true;
    let mut witness: Option<AdditivityWitness<F>> = None;

    let eps = eps_lin.as_f64();
    for _ in 0..budget.samples {
        // additivity below the linearity radius
        let s = sampling::log_uniform(&mut rng, (lo * eps).min(lo), eps * (1.0 - 1e-9));
        let u: f64 = rng.random_range(1e-3..1.0 - 1e-3);
        let x: Composition<F> = sampling::composition_with_size(&mut rng, dim, s * u)?;
        let y: Composition<F> = sampling::composition_with_size(&mut rng, dim, s * (1.0 - u))?;
        let sum = &x + &y;
        if sum.l1_norm() < eps_lin {
            let (fs, fx, fy) = (phi.observe(&sum), phi.observe(&x), phi.observe(&y));
            let defect = fs - fx - fy;
            let scale = fs.abs() + fx.abs() + fy.abs();
            if !defect.is_finite() || defect.abs() > rel_tol * scale {
                let worse = witness
                    .as_ref()
                    .is_none_or(|w| defect.abs() > w.defect.abs() || !defect.is_finite());
                if worse {
                    witness = Some(AdditivityWitness { x, y, defect });
                }
            }
        }

        // sup and local Lipschitz quotient over the full size range
        let size = sampling::log_uniform(&mut rng, lo, hi);
        let x: Composition<F> = sampling::composition_with_size(&mut rng, dim, size)?;
        let h: Composition<F> = sampling::composition_with_size(&mut rng, dim, size * 1e-6)?;
        let xh = &x + &h;
        let (fx, fxh) = (phi.observe(&x), phi.observe(&xh));
        if !fx.is_finite() || !fxh.is_finite() {
            finite = false;
            continue;
        }
        sup_abs = sup_abs.max(fx.abs()).max(fxh.abs());
        let dist: F = x
            .coords()
            .iter()
            .zip(xh.coords())
            .map(|(&a, &b)| (b - a).abs())
            .sum();
        if dist > F::zero() {
            lipschitz = lipschitz.max((fxh - fx).abs() / dist);
        }
    }

    let mut growing = false;
    for _ in 0..4 {
        let dir: Vec<f64> = sampling::simplex_direction(&mut rng, dim);
        let values: Vec<F> = GROWTH_PROBE_RADII
            .iter()
            .map(|&r| {
                let p: Vec<F> = dir.iter().map(|&c| F::lit(c * r)).collect();
                Composition::new(p).map(|p| phi.observe(&p).abs())
            })
            .collect::<Result<_>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            finite = false;
        } else if values
            .windows(2)
            .all(|w| w[1] >= F::two() * w[0] && w[1] > F::zero())
        {
            growing = true;
        }
    }

    let bounded = finite && !growing;
    let valid = bounded && lipschitz.is_finite() && witness.is_none();
    Ok(TestFunctionReport {
        valid,
        bounded,
        sup_abs,
        lipschitz_estimate: lipschitz,
        additivity_witness: witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> Composition<f64> {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(c(&[1.0, 2.0, 3.0]).l1_norm(), 6.0);
        assert_eq!(c(&[0.5, 0.0]).l1_norm(), 0.5);
        let (x, y) = (c(&[1.0, 0.0]), c(&[0.0, 3.0]));
        assert_eq!((&x + &y).l1_norm(), 4.0);
        assert_eq!(x.l1_norm() + y.l1_norm(), 4.0);
    }

    #[test]
    fn rejects_invalid_points() {
        assert!(Composition::<f64>::new(vec![0.0, 0.0]).is_err());
        assert!(Composition::<f64>::new(vec![-1.0, 2.0]).is_err());
        assert!(Composition::<f64>::new(vec![f64::NAN]).is_err());
        assert!(Composition::<f64>::new(Vec::new()).is_err());
        let p = Composition::new(vec![-0.0f64, 1.0]).unwrap();
        assert_eq!(p.coords()[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn strictly_below_examples() {
        assert!(c(&[1.0, 1.0]).strictly_below(&c(&[2.0, 1.0])).unwrap());
        assert!(!c(&[1.0, 1.0]).strictly_below(&c(&[1.0, 1.0])).unwrap());
        assert!(!c(&[2.0, 0.0]).strictly_below(&c(&[1.0, 3.0])).unwrap());
        assert!(matches!(
            c(&[1.0]).strictly_below(&c(&[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weight_eval_examples() {
        let w = WeightParams::new(-1.0 / 3.0, 1.0 / 3.0);
        assert!((w.eval(&c(&[0.5])) - 0.5f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((w.eval(&c(&[0.5])) - 1.259921).abs() < 1e-6);
        assert_eq!(WeightParams::new(-1.0, 1.0).eval(&c(&[4.0])), 4.0);
        for (a, b) in [(-3.0, 7.0), (0.5, -2.0), (0.0, 0.0)] {
            assert_eq!(WeightParams::new(a, b).eval(&c(&[0.25, 0.75])), 1.0);
        }
    }

    #[test]
    fn regularized_weight_examples() {
        let sub = RegularizedWeight::sublinear(RadialFn::power(0.5), 0.04, 10.0).unwrap();
        assert!((sub.eval(&c(&[0.01])) - 0.05).abs() < 1e-15);

        let phi = RadialFn::new("r^2", |r: f64| r * r);
        let cm = RegularizedWeight::convex_moment(phi, 1.0, 0.5).unwrap();
        assert_eq!(cm.eval(&c(&[0.25])), 2.0);

        let pw = RegularizedWeight::power(0.1, 10.0, 2.0).unwrap();
        assert_eq!(pw.eval(&c(&[3.0])), 9.0);
        assert_eq!(pw.eval(&c(&[30.0])), 100.0);
    }

    #[test]
    fn regularized_weight_rejects_bad_parameters() {
        let base = WeightParams::new(0.5, 0.5);
        assert!(RegularizedWeight::truncated(base, 1.0).is_err());
        assert!(RegularizedWeight::sublinear(RadialFn::power(0.5), 1.0, 10.0).is_err());
        assert!(RegularizedWeight::sublinear(RadialFn::power(0.5), 0.1, 1.0).is_err());
        assert!(RegularizedWeight::power(0.1, 10.0, 1.0).is_err());
        assert!(RegularizedWeight::power(0.0, 10.0, 2.0).is_err());
        let shifted = RadialFn::new("r+1", |r: f64| r + 1.0);
        assert!(RegularizedWeight::convex_moment(shifted, 1.0, 0.5).is_err());
        assert!(RegularizedWeight::convex_moment(RadialFn::power(2.0), -1.0, 0.5).is_err());
    }

    #[test]
    fn subadditivity_defect_examples() {
        let w = WeightParams::new(0.5, 0.5);
        let d = subadditivity_defect(&w, &c(&[1.0]), &c(&[1.0])).unwrap();
        assert!((d - (2f64.sqrt() - 2.0)).abs() < 1e-15);

        let trunc = RegularizedWeight::truncated(WeightParams::new(-1.0, 1.0), 2.0).unwrap();
        let d = subadditivity_defect(&trunc, &c(&[0.1]), &c(&[0.1])).unwrap();
        assert_eq!(d, -2.0);

        // k = 2: defect is 2|x||y| away from the eps/R branches.
        let pw = RegularizedWeight::power(0.1, 10.0, 2.0).unwrap();
        let (x, y) = (c(&[1.0]), c(&[3.0]));
        let d = subadditivity_defect(&pw, &x, &y).unwrap();
        assert_eq!(d, 6.0);
        assert_eq!(d, 2.0 * x.l1_norm() * y.l1_norm());
        assert_eq!(2.0 * power_defect_majorant(2.0, 1.0, 10.0, &x, &y), 6.0);
    }

    #[test]
    fn test_function_examples() {
        let budget = SampleBudget {
            samples: 2_000,
            ..SampleBudget::default()
        };
        let cm = RegularizedWeight::convex_moment(RadialFn::power(2.0), 1.0, 0.5).unwrap();
        let report = is_valid_test_function(&cm, 0.5, &budget).unwrap();
        assert!(report.valid, "{report:?}");

        let quad = |x: &Composition<f64>| x.l1_norm().powi(2);
        let report = is_valid_test_function(&quad, 0.3, &budget).unwrap();
        assert!(!report.valid);
        let w = report.additivity_witness.expect("witness");
        assert!((&w.x + &w.y).l1_norm() < 0.3);

        let sub = RegularizedWeight::sublinear(RadialFn::<f64>::power(0.5), 0.04, 10.0).unwrap();
        let report = is_valid_test_function(&sub, 0.04, &budget).unwrap();
        assert!(report.valid, "{report:?}");
        assert!((report.lipschitz_estimate - 5.0).abs() < 1e-3);
    }

    #[test]
    fn unbounded_linear_function_is_rejected() {
        let budget = SampleBudget {
            samples: 500,
            ..SampleBudget::default()
        };
        let size = |x: &Composition<f64>| x.l1_norm();
        let report = is_valid_test_function(&size, 1.0, &budget).unwrap();
        assert!(report.additivity_witness.is_none());
        assert!(!report.bounded);
        assert!(!report.valid);
    }

    #[test]
    fn truncation_increases_to_the_weight() {
        let base = WeightParams::new(-1.0, 1.0);
        let x = c(&[0.01, 0.02]);
        let mut prev = 0.0;
        for n in [2.0, 5.0, 20.0, 50.0, 1e3] {
            let v = RegularizedWeight::truncated(base, n).unwrap().eval(&x);
            assert!(v >= prev && v <= base.eval(&x));
            prev = v;
        }
        assert_eq!(prev, base.eval(&x));
    }

    #[test]
    fn generic_over_f32() {
        let x = Composition::<f32>::new(vec![0.25f32, 0.25]).unwrap();
        let w = WeightParams::new(-1.0f32, 1.0);
        assert_eq!(w.eval(&x), 2.0);
    }
}
