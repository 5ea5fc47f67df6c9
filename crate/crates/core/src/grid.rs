//! Fixed-step RK4 solver for the coagulation equation with source on the
//! integer lattice `{0..N}^d \ {0}`.
//!
//! For each lattice point `x`:
//!
//! ```text
//! dc_x/dt = ½ Σ_{0<y<x} K(y, x−y) c_y c_{x−y} − c_x Σ_y K(x, y) c_y + ζ_x
//! ```
//!
//! In closed mode the loss sum only runs over partners `y` with `x + y` on
//! the lattice, so in-domain mass is conserved exactly. In open mode the loss
//! runs over all lattice partners and the mass that would land outside is
//! integrated into `lost_mass`.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lattice::Lattice;
use crate::measures::SignedMeasure;
use crate::scalar::Scalar;
use crate::trajectory::{Snapshot, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    Closed,
    Open,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<F> {
    pub dim: usize,
    pub extent: usize,
    pub truncation: Truncation,
    pub dt: F,
    pub t_end: F,
    /// Steps between snapshots; the final time is always recorded.
    pub output_every: usize,
}

impl<F: Scalar> GridSpec<F> {
    pub fn new(
        dim: usize,
        extent: usize,
        truncation: Truncation,
        dt: F,
        t_end: F,
        output_every: usize,
    ) -> Result<Self> {
        let spec = Self {
            dim,
            extent,
            truncation,
            dt,
            t_end,
            output_every,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        Lattice::new(self.dim, self.extent)?;
        if !(self.dt > F::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.t_end >= F::zero()) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} must be nonnegative",
                self.t_end
            )));
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParameter(
                "output_every must be at least 1".into(),
            ));
        }
        self.steps().map(|_| ())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.dim, self.extent)
    }

    /// Number of steps to `t_end`; `t_end` must be a whole multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = (self.t_end / self.dt).as_f64();
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Times at which [`GridSolver::simulate`] records snapshots.
    pub fn snapshot_times(&self) -> Result<Vec<F>> {
        let steps = self.steps()?;
        let mut times = vec![F::zero()];
        for n in 1..=steps {
            if n % self.output_every == 0 || n == steps {
                times.push(self.dt * F::from_usize_exact(n));
            }
        }
        Ok(times)
    }
}

/// Time-constant source rates `ζ ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec<F> {
    measure: SignedMeasure<F>,
}

impl<F: Scalar> SourceSpec<F> {
    pub fn none(dim: usize) -> Self {
        Self {
            measure: SignedMeasure::empty(dim),
        }
    }

    pub fn new(measure: SignedMeasure<F>) -> Result<Self> {
        if let Some(i) = measure.atoms().iter().position(|(_, w)| *w < F::zero()) {
            return Err(Error::NegativeWeight {
                index: i,
                weight: measure.atoms()[i].1.as_f64(),
            });
        }
        Ok(Self { measure })
    }

    pub fn from_atoms(dim: usize, atoms: Vec<(Composition<F>, F)>) -> Result<Self> {
        Self::new(SignedMeasure::new(dim, atoms)?)
    }

    pub fn measure(&self) -> &SignedMeasure<F> {
        &self.measure
    }

    pub fn total_rate(&self) -> F {
        self.measure.number()
    }

    pub fn dense(&self, lattice: &Lattice) -> Result<Vec<F>> {
        to_dense(&self.measure, lattice)
    }
}

/// Dense index of a composition lying on the lattice.
pub fn lattice_index<F: Scalar>(lattice: &Lattice, x: &Composition<F>) -> Result<usize> {
    if x.dim() != lattice.dim() {
        return Err(Error::DimensionMismatch {
            expected: lattice.dim(),
            found: x.dim(),
        });
    }
    let mut point = Vec::with_capacity(x.dim());
    for &c in x.coords() {
        if c != c.round() {
            return Err(Error::InvalidParameter(format!(
                "{x} is not a lattice point"
            )));
        }
        point.push(c.to_usize().unwrap_or(usize::MAX));
    }
    lattice.index(&point).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "{x} lies outside the lattice of extent {}",
            lattice.extent()
        ))
    })
}

/// Dense lattice array of a measure supported on lattice points.
pub fn to_dense<F: Scalar>(measure: &SignedMeasure<F>, lattice: &Lattice) -> Result<Vec<F>> {
    let mut dense = vec![F::zero(); lattice.len()];
    for (x, w) in measure.atoms() {
        dense[lattice_index(lattice, x)?] += *w;
    }
    Ok(dense)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridState<F> {
    pub t: F,
    /// Dense densities, origin slot included and always zero.
    pub c: Vec<F>,
    /// Mass vector integrated out of the lattice (open mode).
    pub lost_mass: Vec<F>,
    /// `Σ |x|·|c_x|` removed by clamping negative densities.
    pub clamped_mass: F,
    pub clamp_events: usize,
}

impl<F: Scalar> GridState<F> {
    pub fn from_measure(lattice: &Lattice, f0: &SignedMeasure<F>) -> Result<Self> {
        if let Some(i) = f0.atoms().iter().position(|(_, w)| *w < F::zero()) {
            return Err(Error::NegativeWeight {
                index: i,
                weight: f0.atoms()[i].1.as_f64(),
            });
        }
        Ok(Self {
            t: F::zero(),
            c: to_dense(f0, lattice)?,
            lost_mass: vec![F::zero(); lattice.dim()],
            clamped_mass: F::zero(),
            clamp_events: 0,
        })
    }
}

/// Lattice geometry, kernel tabulation and source, built once per run.
/// Lattices smaller than this are evaluated on the calling thread.
const PARALLEL_MIN_CELLS: usize = 1024;

#[derive(Clone, Debug)]
pub struct GridSolver<F> {
    spec: GridSpec<F>,
    lattice: Lattice,
    kernel: Kernel<F>,
    source: Vec<F>,
    /// Lattice points, `dim` entries per index.
    points: Vec<usize>,
    sizes: Vec<usize>,
    coords: Vec<F>,
    /// `K(a, b)` on integer sizes `0..=d·N`, for size-only kernels.
    size_table: Option<Vec<F>>,
}

impl<F: Scalar> GridSolver<F> {
    pub fn new(spec: &GridSpec<F>, kernel: &Kernel<F>, source: &SourceSpec<F>) -> Result<Self> {
        spec.validate()?;
        let lattice = spec.lattice()?;
        if source.measure().dim() != spec.dim {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                found: source.measure().dim(),
            });
        }
        let d = spec.dim;
        let mut points = Vec::with_capacity(lattice.len() * d);
        let mut sizes = Vec::with_capacity(lattice.len());
        for i in 0..lattice.len() {
            let p = lattice.point(i);
            sizes.push(p.iter().sum());
            points.extend(p);
        }
        let coords = points.iter().map(|&p| F::from_usize_exact(p)).collect();
        let size_table = kernel.is_size_only().then(|| {
            let s = lattice.max_size() + 1;
            let mut tab = vec![F::zero(); s * s];
            for a in 1..s {
                for b in 1..s {
                    let (fa, fb) = (F::from_usize_exact(a), F::from_usize_exact(b));
                    tab[a * s + b] = kernel.rate_sizes_in(d, fa, fb).expect("size-only kernel");
                }
            }
            tab
        });
        Ok(Self {
            spec: spec.clone(),
            source: source.dense(&lattice)?,
            lattice,
            kernel: kernel.clone(),
            points,
            sizes,
            coords,
            size_table,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn spec(&self) -> &GridSpec<F> {
        &self.spec
    }

    pub fn initial_state(&self, f0: &SignedMeasure<F>) -> Result<GridState<F>> {
        GridState::from_measure(&self.lattice, f0)
    }

    fn point(&self, i: usize) -> &[usize] {
        let d = self.spec.dim;
        &self.points[i * d..(i + 1) * d]
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> F {
        match &self.size_table {
            Some(tab) => tab[self.sizes[i] * (self.lattice.max_size() + 1) + self.sizes[j]],
            None => {
                let d = self.spec.dim;
                self.kernel.rate_coords(
                    &self.coords[i * d..(i + 1) * d],
                    &self.coords[j * d..(j + 1) * d],
                )
            }
        }
    }

    /// Walks the box `[0, b]` in row-major order as contiguous runs along
    /// the last axis. `f(local, g, s, len)` gets the local index, lattice
    /// index and size of each run start plus the run length; it returns
    /// `false` to stop.
    fn for_each_run(
        &self,
        b: &[usize],
        prefix: &mut Vec<usize>,
        mut f: impl FnMut(usize, usize, usize, usize) -> bool,
    ) {
        let d = b.len();
        let strides = self.lattice.strides();
        let len = b[d - 1] + 1;
        prefix.clear();
        prefix.resize(d - 1, 0);
        let (mut local, mut g, mut s) = (0usize, 0usize, 0usize);
        loop {
            if !f(local, g, s, len) {
                return;
            }
            local += len;
            let mut l = d - 1;
            loop {
                if l == 0 {
                    return;
                }
                l -= 1;
                if prefix[l] < b[l] {
                    prefix[l] += 1;
                    g += strides[l];
                    s += 1;
                    break;
                }
                g -= prefix[l] * strides[l];
                s -= prefix[l];
                prefix[l] = 0;
            }
        }
    }

    /// `½ Σ_{0<y<z} K(y, z−y) c_y c_{z−y}`. The box `[0, z]` is walked in
    /// row-major order; local slot `j` pairs with `P−1−j`, so each unordered
    /// pair is visited once and the midpoint `y = z/2` carries the ½.
    fn gain(&self, c: &[F], gz: usize, prefix: &mut Vec<usize>) -> F {
        let pz = self.point(gz);
        let sz = self.sizes[gz];
        let p: usize = pz.iter().map(|&v| v + 1).product();
        let half = (p - 1) / 2;
        let odd = p % 2 == 1;
        let width = self.lattice.max_size() + 1;
        let mut acc = F::zero();
        self.for_each_run(pz, prefix, |base, g0, s0, len| {
            let start = usize::from(base == 0);
            let end = len.min(half + 1 - base);
            for yl in start..end {
                let gy = g0 + yl;
                let gp = gz - gy;
                let (cy, cp) = (c[gy], c[gp]);
                if cy == F::zero() || cp == F::zero() {
                    continue;
                }
                let k = match &self.size_table {
                    Some(tab) => {
                        let sy = s0 + yl;
                        tab[sy * width + (sz - sy)]
                    }
                    None => self.k(gy, gp),
                };
                let term = k * cy * cp;
                if odd && base + yl == half {
                    acc += F::half() * term;
                } else {
                    acc += term;
                }
            }
            base + len <= half
        });
        acc
    }

    /// `c_x Σ_y K(x, y) c_y` over partners with `x + y` on the lattice.
    fn closed_loss(
        &self,
        c: &[F],
        gx: usize,
        prefix: &mut Vec<usize>,
        bound: &mut Vec<usize>,
    ) -> F {
        let cx = c[gx];
        if cx == F::zero() {
            return F::zero();
        }
        let n = self.lattice.extent();
        bound.clear();
        bound.extend(self.point(gx).iter().map(|&v| n - v));
        let width = self.lattice.max_size() + 1;
        let row = self
            .size_table
            .as_ref()
            .map(|tab| &tab[self.sizes[gx] * width..(self.sizes[gx] + 1) * width]);
        let mut acc = F::zero();
        self.for_each_run(bound, prefix, |base, g0, s0, len| {
            let start = usize::from(base == 0);
            match row {
                Some(row) => {
                    let ks = &row[s0..s0 + len];
                    let cs = &c[g0..g0 + len];
                    for (k, &cy) in ks.iter().zip(cs).skip(start) {
                        if cy != F::zero() {
                            acc += *k * cy;
                        }
                    }
                }
                None => {
                    for yl in start..len {
                        let cy = c[g0 + yl];
                        if cy != F::zero() {
                            acc += self.k(gx, g0 + yl) * cy;
                        }
                    }
                }
            }
            true
        });
        cx * acc
    }

    /// `c_x Σ_y K(x, y) c_y` over all lattice partners. Size-only kernels
    /// use the number density grouped by size.
    fn open_loss(&self, c: &[F], gx: usize, by_size: Option<&[F]>) -> F {
        let cx = c[gx];
        if cx == F::zero() {
            return F::zero();
        }
        let mut acc = F::zero();
        match (by_size, &self.size_table) {
            (Some(n), Some(tab)) => {
                let row = &tab[self.sizes[gx] * n.len()..(self.sizes[gx] + 1) * n.len()];
                for (k, &ns) in row.iter().zip(n).skip(1) {
                    if ns != F::zero() {
                        acc += *k * ns;
                    }
                }
            }
            _ => {
                for gy in self.lattice.indices() {
                    let cy = c[gy];
                    if cy != F::zero() {
                        acc += self.k(gx, gy) * cy;
                    }
                }
            }
        }
        cx * acc
    }

    /// Right-hand side `dc/dt` and the leak flux `d lost_mass / dt`.
    pub fn rhs_with_flux(&self, c: &[F]) -> (Vec<F>, Vec<F>) {
        let d = self.spec.dim;
        let open = self.spec.truncation == Truncation::Open;
        let by_size = (open && self.size_table.is_some()).then(|| {
            let mut n = vec![F::zero(); self.lattice.max_size() + 1];
            for i in self.lattice.indices() {
                n[self.sizes[i]] += c[i];
            }
            n
        });
        let cell = |scratch: &mut (Vec<usize>, Vec<usize>), i: usize| {
            if i == 0 {
                return (F::zero(), F::zero());
            }
            let loss = if open {
                self.open_loss(c, i, by_size.as_deref())
            } else {
                self.closed_loss(c, i, &mut scratch.0, &mut scratch.1)
            };
            (self.gain(c, i, &mut scratch.0), loss)
        };
        let parts: Vec<(F, F)> = if self.lattice.len() < PARALLEL_MIN_CELLS {
            let mut scratch = (Vec::new(), Vec::new());
            (0..self.lattice.len())
                .map(|i| cell(&mut scratch, i))
                .collect()
        } else {
            (0..self.lattice.len())
                .into_par_iter()
                .map_init(|| (Vec::new(), Vec::new()), cell)
                .collect()
        };
        let mut dc = vec![F::zero(); parts.len()];
        let mut flux = vec![F::zero(); d];
        for (i, &(gain, loss)) in parts.iter().enumerate().skip(1) {
            dc[i] = gain - loss + self.source[i];
            if open {
                for (f, &p) in flux.iter_mut().zip(self.point(i)) {
                    *f += F::from_usize_exact(p) * (loss - gain);
                }
            }
        }
        (dc, flux)
    }

    pub fn rhs(&self, c: &[F]) -> Vec<F> {
        self.rhs_with_flux(c).0
    }

    fn stage(&self, c: &[F], stage: usize, t: F) -> Result<(Vec<F>, Vec<F>)> {
        let (dc, flux) = self.rhs_with_flux(c);
        if let Some(i) = dc.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalAbort {
                stage,
                t: t.as_f64(),
                detail: format!(
                    "dc/dt = {} at lattice point ({}); reduce dt (dt = {})",
                    dc[i],
                    self.lattice.label(i).replace('_', ", "),
                    self.spec.dt
                ),
            });
        }
        Ok((dc, flux))
    }

    /// One classical RK4 step of size `dt`, then clamping of negative
    /// densities.
    pub fn step(&self, state: &mut GridState<F>) -> Result<()> {
        let dt = self.spec.dt;
        let h = F::half() * dt;
        let t = state.t;
        let axpy =
            |a: F, k: &[F]| -> Vec<F> { state.c.iter().zip(k).map(|(&c, &k)| c + a * k).collect() };
        let (k1, f1) = self.stage(&state.c, 1, t)?;
        let (k2, f2) = self.stage(&axpy(h, &k1), 2, t + h)?;
        let (k3, f3) = self.stage(&axpy(h, &k2), 3, t + h)?;
        let (k4, f4) = self.stage(&axpy(dt, &k3), 4, t + dt)?;
        let six = F::lit(6.0);
        let combine = |a: F, b: F, c: F, d: F| (a + F::two() * b + F::two() * c + d) / six * dt;
        for i in 0..state.c.len() {
            state.c[i] += combine(k1[i], k2[i], k3[i], k4[i]);
        }
        for l in 0..state.lost_mass.len() {
            state.lost_mass[l] += combine(f1[l], f2[l], f3[l], f4[l]);
        }
        if let Some(i) = state.c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalAbort {
                stage: 5,
                t: (t + dt).as_f64(),
                detail: format!("density {} after update at index {i}", state.c[i]),
            });
        }
        let mut clamped = F::zero();
        for (i, c) in state.c.iter_mut().enumerate() {
            if *c < F::zero() {
                clamped += -*c * F::from_usize_exact(self.sizes[i]);
                *c = F::zero();
                state.clamp_events += 1;
            }
        }
        if clamped > F::zero() {
            debug!("clamped mass {clamped} at t = {}", t + dt);
            state.clamped_mass += clamped;
        }
        state.t = t + dt;
        Ok(())
    }

    /// `dt · max_x Σ_y K(x,y) c_y`; values above 0.1 risk instability.
    pub fn stability_number(&self, c: &[F]) -> F {
        let mut worst = F::zero();
        for i in self.lattice.indices() {
            let mut rate = F::zero();
            for j in self.lattice.indices() {
                if c[j] != F::zero() {
                    rate += self.k(i, j) * c[j];
                }
            }
            worst = worst.max(rate);
        }
        worst * self.spec.dt
    }

    fn snapshot(&self, state: &GridState<F>) -> Snapshot<F> {
        Snapshot {
            t: state.t,
            values: state.c.clone(),
            lost_mass: state.lost_mass.clone(),
            std_err: None,
        }
    }

    /// Integrates from `f0` to `t_end`, recording every `output_every` steps.
    pub fn simulate(&self, f0: &SignedMeasure<F>) -> Result<Trajectory<F>> {
        let mut state = self.initial_state(f0)?;
        let steps = self.spec.steps()?;
        if self.lattice.len() <= 20_000 {
            let s = self.stability_number(&state.c);
            if s > F::lit(0.1) {
                warn!("dt times the largest initial loss rate is {s}; the step may be unstable");
            }
        }
        let mut traj = Trajectory::new(self.lattice.clone(), F::one());
        traj.snapshots.push(self.snapshot(&state));
        for n in 1..=steps {
            self.step(&mut state)?;
            state.t = self.spec.dt * F::from_usize_exact(n);
            if n % self.spec.output_every == 0 || n == steps {
                traj.snapshots.push(self.snapshot(&state));
            }
        }
        traj.clamped_mass = state.clamped_mass;
        if state.clamp_events > 0 {
            debug!(
                "{} clamp events, total clamped mass {}",
                state.clamp_events, state.clamped_mass
            );
        }
        Ok(traj)
    }
}

pub fn rhs<F: Scalar>(
    state: &GridState<F>,
    k: &Kernel<F>,
    source: &SourceSpec<F>,
    spec: &GridSpec<F>,
) -> Result<Vec<F>> {
    Ok(GridSolver::new(spec, k, source)?.rhs(&state.c))
}

pub fn step<F: Scalar>(
    state: &GridState<F>,
    k: &Kernel<F>,
    source: &SourceSpec<F>,
    spec: &GridSpec<F>,
) -> Result<GridState<F>> {
    let mut next = state.clone();
    GridSolver::new(spec, k, source)?.step(&mut next)?;
    Ok(next)
}

pub fn simulate<F: Scalar>(
    spec: &GridSpec<F>,
    k: &Kernel<F>,
    source: &SourceSpec<F>,
    f0: &SignedMeasure<F>,
) -> Result<Trajectory<F>> {
    GridSolver::new(spec, k, source)?.simulate(f0)
}
