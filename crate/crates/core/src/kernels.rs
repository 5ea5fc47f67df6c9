//! Coagulation kernels and their two-branch envelope
//!
//! ```text
//! K(x,y) ≤ c_u |x|^{-θ1} |y|^{θ2}   if |x| ≤ |y|
//! K(x,y) ≤ c_u |x|^{θ2} |y|^{-θ1}   if |y| ≤ |x|
//! ```
//!
//! with `-θ1 ≤ θ2`, `θ2 < 1` and `γ = θ2 − θ1 < 1` for kernels in the
//! uniqueness class. Kernels outside the class (the multiplicative kernel)
//! can still drive the solvers but are refused by the comparison harness.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::sampling;
use crate::scalar::Scalar;

type RateFn<F> = dyn Fn(&[F], &[F]) -> F + Send + Sync;

/// User kernel on coordinate slices.
#[derive(Clone)]
pub struct CustomRate<F> {
    label: String,
    size_only: bool,
    f: Arc<RateFn<F>>,
}

impl<F> fmt::Debug for CustomRate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CustomRate({}, size_only = {})",
            self.label, self.size_only
        )
    }
}

/// Piecewise-constant kernel in the two sizes: `rates[i][j]` applies when
/// `sizes[i] ≤ |x| < sizes[i+1]` (the first row also covers `|x| < sizes[0]`).
#[derive(Clone, Debug, PartialEq)]
pub struct SizeTable<F> {
    sizes: Vec<F>,
    rates: Vec<Vec<F>>,
}

impl<F: Scalar> SizeTable<F> {
    pub fn new(sizes: Vec<F>, rates: Vec<Vec<F>>) -> Result<Self> {
        let n = sizes.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "kernel table needs at least one size".into(),
            ));
        }
        if sizes.windows(2).any(|w| !(w[0] < w[1])) || sizes.iter().any(|s| !(*s > F::zero())) {
            return Err(Error::InvalidParameter(
                "kernel table sizes must be positive and strictly increasing".into(),
            ));
        }
        if rates.len() != n || rates.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "kernel table must be {n} x {n}"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let r = rates[i][j];
                if !r.is_finite() || r < F::zero() {
                    return Err(Error::InvalidParameter(format!(
                        "kernel table entry ({i}, {j}) = {r} is not a nonnegative number"
                    )));
                }
                if r != rates[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "kernel table not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { sizes, rates })
    }

    fn slot(&self, r: F) -> usize {
        self.sizes.partition_point(|&s| s <= r).saturating_sub(1)
    }

    pub fn rate(&self, a: F, b: F) -> F {
        self.rates[self.slot(a)][self.slot(b)]
    }
}

#[derive(Clone, Debug)]
pub enum KernelRate<F> {
    Constant(F),
    /// `(a^{1/3} + b^{1/3})(a^{-1/3} + b^{-1/3})` on the sizes.
    Brownian,
    /// `a^{-θ1} b^{θ2} + a^{θ2} b^{-θ1}` on the sizes.
    ProductEnvelope {
        theta1: F,
        theta2: F,
    },
    /// `a · b`; outside the uniqueness class.
    Multiplicative,
    Table(SizeTable<F>),
    Custom(CustomRate<F>),
}

#[derive(Clone, Debug)]
pub struct Kernel<F> {
    rate: KernelRate<F>,
    c_u: F,
    theta1: F,
    theta2: F,
    outside_class: bool,
}

impl<F: Scalar> Kernel<F> {
    pub fn constant(value: F) -> Result<Self> {
        if !value.is_finite() || value < F::zero() {
            return Err(Error::InvalidParameter(format!(
                "constant kernel value {value} must be nonnegative"
            )));
        }
        let c_u = if value > F::zero() { value } else { F::one() };
        Ok(Self {
            rate: KernelRate::Constant(value),
            c_u,
            theta1: F::zero(),
            theta2: F::zero(),
            outside_class: false,
        })
    }

    pub fn brownian() -> Self {
        let third = F::one() / F::lit(3.0);
        Self {
            rate: KernelRate::Brownian,
            c_u: F::lit(4.0),
            theta1: third,
            theta2: third,
            outside_class: false,
        }
    }

    pub fn product_envelope(theta1: F, theta2: F) -> Result<Self> {
        let k = Self {
            rate: KernelRate::ProductEnvelope { theta1, theta2 },
            c_u: F::two(),
            theta1,
            theta2,
            outside_class: false,
        };
        k.check_class()?;
        Ok(k)
    }

    /// `K = |x||y|`, flagged outside the class (γ = 2).
    pub fn multiplicative() -> Self {
        Self {
            rate: KernelRate::Multiplicative,
            c_u: F::one(),
            theta1: -F::one(),
            theta2: F::one(),
            outside_class: true,
        }
    }

    /// Table kernel; the envelope parameters must be supplied.
    pub fn table(table: SizeTable<F>, c_u: F, theta1: F, theta2: F) -> Result<Self> {
        Self {
            rate: KernelRate::Table(table),
            c_u,
            theta1,
            theta2,
            outside_class: false,
        }
        .validated()
    }

    /// User kernel on coordinates. `size_only` promises the value depends on
    /// the points only through their ℓ¹ sizes, which lets solvers tabulate it.
    pub fn custom(
        label: impl Into<String>,
        size_only: bool,
        f: impl Fn(&[F], &[F]) -> F + Send + Sync + 'static,
        c_u: F,
        theta1: F,
        theta2: F,
    ) -> Result<Self> {
        Self {
            rate: KernelRate::Custom(CustomRate {
                label: label.into(),
                size_only,
                f: Arc::new(f),
            }),
            c_u,
            theta1,
            theta2,
            outside_class: false,
        }
        .validated()
    }

    /// Replaces the envelope parameters.
    pub fn with_envelope(mut self, c_u: F, theta1: F, theta2: F) -> Result<Self> {
        self.c_u = c_u;
        self.theta1 = theta1;
        self.theta2 = theta2;
        self.validated()
    }

    /// Lifts the class restriction; the kernel may then only be used by the
    /// solvers, not by the comparison harness.
    pub fn outside_class(mut self) -> Self {
        self.outside_class = true;
        self
    }

    fn validated(self) -> Result<Self> {
        if !(self.c_u > F::zero()) || !self.c_u.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "envelope constant c_u = {} must be positive",
                self.c_u
            )));
        }
        if !self.outside_class {
            self.check_class()?;
        }
        Ok(self)
    }

    /// Checks `θ2 < 1`, `-θ1 ≤ θ2` and `γ < 1`.
    pub fn check_class(&self) -> Result<()> {
        let (t1, t2) = (self.theta1, self.theta2);
        if !(t2 < F::one()) {
            return Err(Error::OutsideClass(format!(
                "theta2 < 1 violated (theta2 = {t2})"
            )));
        }
        if !(-t1 <= t2) {
            return Err(Error::OutsideClass(format!(
                "-theta1 <= theta2 violated (theta1 = {t1}, theta2 = {t2})"
            )));
        }
        if !(self.gamma() < F::one()) {
            return Err(Error::OutsideClass(format!(
                "gamma < 1 violated (gamma = {})",
                self.gamma()
            )));
        }
        Ok(())
    }

    pub fn rate(&self) -> &KernelRate<F> {
        &self.rate
    }

    pub fn c_u(&self) -> F {
        self.c_u
    }

    pub fn theta1(&self) -> F {
        self.theta1
    }

    pub fn theta2(&self) -> F {
        self.theta2
    }

    /// `γ = −θ1 + θ2`.
    pub fn gamma(&self) -> F {
        self.theta2 - self.theta1
    }

    pub fn is_outside_class(&self) -> bool {
        self.outside_class
    }

    pub fn is_size_only(&self) -> bool {
        match &self.rate {
            KernelRate::Custom(c) => c.size_only,
            _ => true,
        }
    }

    /// Constant value, when the kernel is constant.
    pub fn constant_value(&self) -> Option<F> {
        match self.rate {
            KernelRate::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.rate {
            KernelRate::Constant(v) => format!("constant({v})"),
            KernelRate::Brownian => "brownian".into(),
            KernelRate::ProductEnvelope { theta1, theta2 } => {
                format!("product_envelope({theta1}, {theta2})")
            }
            KernelRate::Multiplicative => "multiplicative".into(),
            KernelRate::Table(t) => format!("user_table({} sizes)", t.sizes.len()),
            KernelRate::Custom(c) => format!("custom({})", c.label),
        }
    }

    /// Kernel value for a size-only kernel, from the two sizes.
    pub fn rate_sizes(&self, a: F, b: F) -> Option<F> {
        Some(match &self.rate {
            KernelRate::Constant(v) => *v,
            KernelRate::Brownian => {
                let (ca, cb) = (a.cbrt(), b.cbrt());
                (ca + cb) * (ca.recip() + cb.recip())
            }
            KernelRate::ProductEnvelope { theta1, theta2 } => {
                a.powf(-*theta1) * b.powf(*theta2) + a.powf(*theta2) * b.powf(-*theta1)
            }
            KernelRate::Multiplicative => a * b,
            KernelRate::Table(t) => t.rate(a, b),
            KernelRate::Custom(_) => return None,
        })
    }

    /// Kernel value from the two sizes for any size-only kernel, evaluating
    /// custom ones on points along the first axis of `dim` coordinates.
    pub fn rate_sizes_in(&self, dim: usize, a: F, b: F) -> Option<F> {
        match &self.rate {
            KernelRate::Custom(c) if c.size_only => {
                let axis = |s: F| {
                    let mut v = vec![F::zero(); dim];
                    v[0] = s;
                    v
                };
                Some((c.f)(&axis(a), &axis(b)))
            }
            _ => self.rate_sizes(a, b),
        }
    }

    /// Kernel value on raw coordinate slices.
    pub fn rate_coords(&self, x: &[F], y: &[F]) -> F {
        match &self.rate {
            KernelRate::Custom(c) => (c.f)(x, y),
            _ => {
                let a: F = x.iter().copied().sum();
                let b: F = y.iter().copied().sum();
                self.rate_sizes(a, b).expect("size-only kernel")
            }
        }
    }

    pub fn evaluate(&self, x: &Composition<F>, y: &Composition<F>) -> F {
        self.rate_coords(x.coords(), y.coords())
    }

    /// Two-branch envelope `c_u · min`-side power product on the sizes.
    pub fn envelope(&self, a: F, b: F) -> F {
        if a <= b {
            self.c_u * a.powf(-self.theta1) * b.powf(self.theta2)
        } else {
            self.c_u * a.powf(self.theta2) * b.powf(-self.theta1)
        }
    }

    /// Summed envelope `c_u (a^{-θ1} b^{θ2} + a^{θ2} b^{-θ1})`.
    pub fn summed_envelope(&self, a: F, b: F) -> F {
        self.c_u
            * (a.powf(-self.theta1) * b.powf(self.theta2)
                + a.powf(self.theta2) * b.powf(-self.theta1))
    }

    /// Sampled maximum of `K / envelope`.
    pub fn envelope_check(
        &self,
        dim: usize,
        samples: usize,
        seed: u64,
    ) -> Result<EnvelopeReport<F>> {
        self.ratio_check(dim, samples, seed, |a, b| self.envelope(a, b))
    }

    /// Sampled maximum of `K / (factor · summed envelope)`.
    pub fn summed_envelope_check(
        &self,
        dim: usize,
        samples: usize,
        seed: u64,
        factor: F,
    ) -> Result<EnvelopeReport<F>> {
        self.ratio_check(dim, samples, seed, |a, b| {
            factor * self.summed_envelope(a, b)
        })
    }

    fn ratio_check(
        &self,
        dim: usize,
        samples: usize,
        seed: u64,
        bound: impl Fn(F, F) -> F,
    ) -> Result<EnvelopeReport<F>> {
        if samples == 0 {
            return Err(Error::InvalidParameter(
                "envelope check needs samples > 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_ratio = F::neg_infinity();
        let mut worst = None;
        for i in 0..samples {
            let x: Composition<F> = sampling::random_composition(&mut rng, dim)?;
            // every fourth pair sits on the diagonal |x| = |y|
            let y: Composition<F> = if i % 4 == 0 {
                sampling::composition_with_size(&mut rng, dim, x.l1_norm().as_f64())?
            } else {
                sampling::random_composition(&mut rng, dim)?
            };
            let ratio = self.evaluate(&x, &y) / bound(x.l1_norm(), y.l1_norm());
            if ratio > max_ratio || ratio.is_nan() {
                max_ratio = ratio;
                worst = Some((x, y));
                if ratio.is_nan() {
                    break;
                }
            }
        }
        let pass = max_ratio <= F::one() + F::lit(ENVELOPE_SLACK);
        Ok(EnvelopeReport {
            max_ratio,
            worst_pair: worst,
            pass,
        })
    }

    /// Largest sampled `|K(x,y) − K(y,x)|`.
    pub fn symmetry_defect(&self, dim: usize, samples: usize, seed: u64) -> Result<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = F::zero();
        for _ in 0..samples {
            let x: Composition<F> = sampling::random_composition(&mut rng, dim)?;
            let y: Composition<F> = sampling::random_composition(&mut rng, dim)?;
            worst = worst.max((self.evaluate(&x, &y) - self.evaluate(&y, &x)).abs());
        }
        Ok(worst)
    }
}

/// Relative slack allowed above the envelope.
pub const ENVELOPE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EnvelopeReport<F> {
    pub max_ratio: F,
    pub worst_pair: Option<(Composition<F>, Composition<F>)>,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> Composition<f64> {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let k = Kernel::<f64>::brownian();
        assert_eq!(k.evaluate(&c(&[8.0, 0.0]), &c(&[1.0, 0.0])), 4.5);
        let k = Kernel::constant(2.0).unwrap();
        assert_eq!(k.evaluate(&c(&[0.1, 3.0]), &c(&[7.0, 0.0])), 2.0);
        let k = Kernel::product_envelope(1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(k.evaluate(&c(&[0.5, 0.5]), &c(&[1.0, 0.0])), 2.0);
    }

    #[test]
    fn class_constraints() {
        assert!(Kernel::product_envelope(0.0, 1.5).is_err());
        assert!(Kernel::product_envelope(-0.5, 0.2).is_err());
        let k = Kernel::product_envelope(0.5, 0.4).unwrap();
        assert!((k.gamma() + 0.1f64).abs() < 1e-15);
        let m = Kernel::<f64>::multiplicative();
        assert!(m.is_outside_class());
        assert_eq!(m.gamma(), 2.0);
        assert!(m.check_class().is_err());
        assert!(Kernel::constant(2.0)
            .unwrap()
            .with_envelope(0.0, 0.0, 0.0)
            .is_err());
        assert!(Kernel::constant(-1.0f64).is_err());
    }

    #[test]
    fn builtins_are_exactly_symmetric() {
        let kernels = [
            Kernel::constant(2.0).unwrap(),
            Kernel::brownian(),
            Kernel::product_envelope(0.3, 0.6).unwrap(),
            Kernel::multiplicative(),
        ];
        for k in &kernels {
            assert_eq!(
                k.symmetry_defect(3, 5_000, 7).unwrap(),
                0.0,
                "{}",
                k.label()
            );
        }
    }

    #[test]
    fn envelope_check_examples() {
        let r = Kernel::<f64>::constant(2.0)
            .unwrap()
            .envelope_check(2, 10_000, 1)
            .unwrap();
        assert!(r.pass && r.max_ratio <= 1.0);

        let r = Kernel::<f64>::brownian()
            .envelope_check(2, 10_000, 2)
            .unwrap();
        assert!(r.pass, "max ratio {}", r.max_ratio);

        let weak = Kernel::<f64>::brownian()
            .with_envelope(3.0, 1.0 / 3.0, 1.0 / 3.0)
            .unwrap();
        let r = weak.envelope_check(2, 10_000, 3).unwrap();
        assert!(!r.pass);
        let (x, y) = r.worst_pair.unwrap();
        let ratio = x.l1_norm() / y.l1_norm();
        assert!((ratio - 1.0).abs() < 1e-6, "worst pair sizes ratio {ratio}");
        assert!((r.max_ratio - 4.0 / 3.0).abs() < 1e-9);
    }

    // Independent oracle: K = 2 + s + 1/s with s = r^{1/3}, r = |y|/|x| ≥ 1,
    // against the envelope c_u s on a dense scan of r.
    #[test]
    fn brownian_envelope_dense_scan() {
        let scan = |c_u: f64| {
            (0..=20_000)
                .map(|i| {
                    let r = 10f64.powf(i as f64 * 12.0 / 20_000.0);
                    let s = r.cbrt();
                    ((2.0 + s + 1.0 / s) / (c_u * s), r)
                })
                .fold((f64::MIN, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
        };
        let (max4, _) = scan(4.0);
        assert!(max4 <= 1.0 + 1e-12);
        let (max3, at) = scan(3.0);
        assert!(max3 > 1.0);
        assert_eq!(at, 1.0);
    }

    #[test]
    fn summed_envelope_holds() {
        for k in [
            Kernel::<f64>::brownian(),
            Kernel::product_envelope(0.2, 0.5).unwrap(),
        ] {
            let r = k.summed_envelope_check(2, 5_000, 11, 1.0).unwrap();
            assert!(r.pass, "{} {}", k.label(), r.max_ratio);
            let r = k.summed_envelope_check(2, 5_000, 11, 2.0).unwrap();
            assert!(r.pass);
        }
    }

    #[test]
    fn size_table_lookup() {
        let t = SizeTable::new(
            vec![1.0, 2.0, 4.0],
            vec![
                vec![1.0, 2.0, 3.0],
                vec![2.0, 5.0, 6.0],
                vec![3.0, 6.0, 9.0],
            ],
        )
        .unwrap();
        let k = Kernel::table(t, 9.0, 0.0, 0.0).unwrap();
        assert_eq!(k.evaluate(&c(&[0.5]), &c(&[1.0])), 1.0);
        assert_eq!(k.evaluate(&c(&[2.5]), &c(&[3.0])), 5.0);
        assert_eq!(k.evaluate(&c(&[100.0]), &c(&[1.5])), 3.0);
        assert_eq!(k.evaluate(&c(&[100.0]), &c(&[2.0])), 6.0);
        assert!(SizeTable::new(vec![1.0, 2.0], vec![vec![1.0, 2.0], vec![3.0, 1.0]]).is_err());
    }

    #[test]
    fn custom_kernel_sees_components() {
        let k = Kernel::custom(
            "first",
            false,
            |x: &[f64], y: &[f64]| 1.0 + x[0] * y[0],
            2.0,
            0.0,
            0.0,
        )
        .unwrap();
        assert!(!k.is_size_only());
        assert_eq!(k.evaluate(&c(&[1.0, 0.0]), &c(&[2.0, 5.0])), 3.0);
        assert_eq!(k.rate_sizes(1.0, 2.0), None);
    }
}
