//! Direct-method stochastic simulation (Marcus–Lushnikov process) of the
//! coagulation equation with Poisson source injection.
//!
//! A system of `n` particles in volume `V` coagulates each unordered pair
//! `{i, j}` at rate `K(x_i, x_j)/V` and injects new particles at rate
//! `V·ζ(x)`. The empirical measure `(1/V) Σ δ_{x_i}` approximates the
//! density.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::grid::SourceSpec;
use crate::kernels::Kernel;
use crate::lattice::Lattice;
use crate::measures::SignedMeasure;
use crate::trajectory::{Snapshot, Trajectory};

/// Name of the generator, as recorded in run manifests.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Events between full recomputations of the cached pair-rate sums.
pub const REFRESH_INTERVAL: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Coagulation,
    Injection,
}

#[derive(Clone, Debug)]
pub struct ParticleSystem {
    dim: usize,
    /// Particle coordinates, `dim` entries per particle.
    coords: Vec<f64>,
    sizes: Vec<f64>,
    volume: f64,
    t: f64,
    seed: u64,
    rng: ChaCha8Rng,
    /// `Σ_{j≠i} K(x_i, x_j)` per particle, for non-constant kernels.
    rows: Option<Vec<f64>>,
    since_refresh: usize,
    events: u64,
}

impl ParticleSystem {
    /// Spawns `Poisson(w·V)` particles at every atom `(x, w)` of `f0`.
    pub fn init(f0: &SignedMeasure<f64>, volume: f64, seed: u64) -> Result<Self> {
        if !(volume > 0.0) || !volume.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "volume {volume} must be positive"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = f0.dim();
        let mut coords = Vec::new();
        let mut sizes = Vec::new();
        for (index, (x, w)) in f0.atoms().iter().enumerate() {
            if *w < 0.0 {
                return Err(Error::NegativeWeight { index, weight: *w });
            }
            let lambda = w * volume;
            if lambda == 0.0 {
                continue;
            }
            let poisson = Poisson::new(lambda)
                .map_err(|e| Error::InvalidParameter(format!("Poisson mean {lambda}: {e}")))?;
            let count = poisson.sample(&mut rng) as usize;
            for _ in 0..count {
                coords.extend_from_slice(x.coords());
                sizes.push(x.l1_norm());
            }
        }
        Ok(Self {
            dim,
            coords,
            sizes,
            volume,
            t: 0.0,
            seed,
            rng,
            rows: None,
            since_refresh: 0,
            events: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// `Σ_i x_i`, summed in particle order.
    pub fn mass_vector(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (acc, &c) in m.iter_mut().zip(self.particle(i)) {
                *acc += c;
            }
        }
        m
    }

    /// Empirical measure `(1/V) Σ δ_{x_i}`.
    pub fn empirical_measure(&self) -> Result<SignedMeasure<f64>> {
        self.counts_measure().map(|m| m.scaled(1.0 / self.volume))
    }

    fn counts_measure(&self) -> Result<SignedMeasure<f64>> {
        let atoms = (0..self.len())
            .map(|i| Ok((Composition::new(self.particle(i).to_vec())?, 1.0)))
            .collect::<Result<Vec<_>>>()?;
        SignedMeasure::new(self.dim, atoms)
    }

    #[inline]
    fn rate(&self, k: &Kernel<f64>, i: usize, j: usize) -> f64 {
        if k.is_size_only() {
            k.rate_sizes_in(self.dim, self.sizes[i], self.sizes[j])
                .expect("size-only kernel")
        } else {
            k.rate_coords(self.particle(i), self.particle(j))
        }
    }

    fn rate_to(&self, k: &Kernel<f64>, x: &[f64], size: f64, j: usize) -> f64 {
        if k.is_size_only() {
            k.rate_sizes_in(self.dim, size, self.sizes[j])
                .expect("size-only kernel")
        } else {
            k.rate_coords(x, self.particle(j))
        }
    }

    fn compute_rows(&self, k: &Kernel<f64>) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    if j != i {
                        s += self.rate(k, i, j);
                    }
                }
                s
            })
            .collect()
    }

    fn ensure_rows(&mut self, k: &Kernel<f64>) {
        if k.constant_value().is_some() {
            return;
        }
        let stale = self.since_refresh >= REFRESH_INTERVAL;
        if self.rows.is_none() || stale {
            let fresh = self.compute_rows(k);
            if let (true, Some(old)) = (stale, &self.rows) {
                let drift = old
                    .iter()
                    .zip(&fresh)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                debug!(
                    "pair-rate sums refreshed after {REFRESH_INTERVAL} events; max relative drift {drift:e}"
                );
            }
            self.rows = Some(fresh);
            self.since_refresh = 0;
        }
    }

    /// `Σ_{i<j} K(x_i,x_j)/V`.
    pub fn pair_rate(&mut self, k: &Kernel<f64>) -> f64 {
        let n = self.len() as f64;
        if let Some(v) = k.constant_value() {
            return v * n * (n - 1.0).max(0.0) / 2.0 / self.volume;
        }
        self.ensure_rows(k);
        let rows = self.rows.as_ref().expect("rows computed");
        rows.iter().sum::<f64>() / 2.0 / self.volume
    }

    pub fn total_event_rate(&mut self, k: &Kernel<f64>, source: &SourceSpec<f64>) -> f64 {
        self.pair_rate(k) + self.volume * source.total_rate()
    }

    /// Samples the waiting time to the next event; `None` when the system is
    /// quiescent.
    pub fn sample_wait(&mut self, k: &Kernel<f64>, source: &SourceSpec<f64>) -> Option<f64> {
        let total = self.total_event_rate(k, source);
        if !(total > 0.0) {
            return None;
        }
        let u: f64 = self.rng.random();
        Some(-(1.0 - u).ln() / total)
    }

    /// Chooses an event with probability proportional to its rate and
    /// applies it. The clock is not advanced.
    pub fn fire(&mut self, k: &Kernel<f64>, source: &SourceSpec<f64>) -> Result<Event> {
        let pair = self.pair_rate(k);
        let inject = self.volume * source.total_rate();
        let total = pair + inject;
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "no event possible at zero total rate".into(),
            ));
        }
        let u = self.rng.random::<f64>() * total;
        self.events += 1;
        if u < pair {
            let (i, j) = self.choose_pair(k);
            self.merge(k, i, j);
            Ok(Event::Coagulation)
        } else {
            self.inject(k, source);
            Ok(Event::Injection)
        }
    }

    /// One Gillespie step: waiting time, then the event. Returns `None` when
    /// quiescent.
    pub fn step(
        &mut self,
        k: &Kernel<f64>,
        source: &SourceSpec<f64>,
    ) -> Result<Option<(f64, Event)>> {
        let Some(tau) = self.sample_wait(k, source) else {
            return Ok(None);
        };
        self.t += tau;
        Ok(Some((tau, self.fire(k, source)?)))
    }

    fn choose_pair(&mut self, k: &Kernel<f64>) -> (usize, usize) {
        let n = self.len();
        if k.constant_value().is_some() {
            let i = self.rng.random_range(0..n);
            let mut j = self.rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            return (i, j);
        }
        let rows = self.rows.as_ref().expect("rows computed");
        let total: f64 = rows.iter().sum();
        let mut u = self.rng.random::<f64>() * total;
        let mut i = n - 1;
        for (m, &r) in rows.iter().enumerate() {
            if u < r {
                i = m;
                break;
            }
            u -= r;
        }
        let partners: Vec<f64> = (0..n)
            .map(|j| if j == i { 0.0 } else { self.rate(k, i, j) })
            .collect();
        let total: f64 = partners.iter().sum();
        let mut u = self.rng.random::<f64>() * total;
        let mut j = if i == n - 1 { n - 2 } else { n - 1 };
        for (m, &r) in partners.iter().enumerate() {
            if r > 0.0 && u < r {
                j = m;
                break;
            }
            u -= r;
        }
        (i, j)
    }

    fn merge(&mut self, k: &Kernel<f64>, i: usize, j: usize) {
        let d = self.dim;
        let merged: Vec<f64> = self
            .particle(i)
            .iter()
            .zip(self.particle(j))
            .map(|(a, b)| a + b)
            .collect();
        let merged_size = self.sizes[i] + self.sizes[j];
        if self.rows.is_some() {
            let n = self.len();
            let updates: Vec<(f64, f64)> = (0..n)
                .map(|m| {
                    if m == i || m == j {
                        return (0.0, 0.0);
                    }
                    let new = self.rate_to(k, &merged, merged_size, m);
                    (new, new - self.rate(k, m, i) - self.rate(k, m, j))
                })
                .collect();
            let rows = self.rows.as_mut().expect("rows present");
            let mut row_i = 0.0;
            for (m, (new, delta)) in updates.into_iter().enumerate() {
                if m != i && m != j {
                    rows[m] = (rows[m] + delta).max(0.0);
                    row_i += new;
                }
            }
            rows[i] = row_i;
            rows.swap_remove(j);
            self.since_refresh += 1;
        }
        self.coords[i * d..(i + 1) * d].copy_from_slice(&merged);
        self.sizes[i] = merged_size;
        let last = self.len() - 1;
        if j != last {
            let (head, tail) = self.coords.split_at_mut(last * d);
            head[j * d..(j + 1) * d].copy_from_slice(&tail[..d]);
        }
        self.coords.truncate(last * d);
        self.sizes.swap_remove(j);
    }

    fn inject(&mut self, k: &Kernel<f64>, source: &SourceSpec<f64>) {
        let atoms = source.measure().atoms();
        let mut u = self.rng.random::<f64>() * source.total_rate();
        let mut pick = atoms.len() - 1;
        for (m, (_, w)) in atoms.iter().enumerate() {
            if u < *w {
                pick = m;
                break;
            }
            u -= *w;
        }
        let x = &atoms[pick].0;
        let size = x.l1_norm();
        if self.rows.is_some() {
            let n = self.len();
            let new: Vec<f64> = (0..n)
                .map(|m| self.rate_to(k, x.coords(), size, m))
                .collect();
            let rows = self.rows.as_mut().expect("rows present");
            for (r, v) in rows.iter_mut().zip(&new) {
                *r += v;
            }
            rows.push(new.iter().sum());
            self.since_refresh += 1;
        }
        self.coords.extend_from_slice(x.coords());
        self.sizes.push(size);
    }

    fn snapshot(&self, lattice: &Lattice) -> Result<Snapshot<f64>> {
        let bins = self.counts_measure()?.bin_to_lattice(1.0, lattice)?;
        let mut values = bins.weights;
        values[0] += bins.origin_weight;
        Ok(Snapshot {
            t: self.t,
            values,
            lost_mass: bins.overflow_mass,
            std_err: None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SsaConfig {
    pub volume: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Lattice used to bin the particles at snapshot times (unit cells).
    pub lattice: Lattice,
    /// Nondecreasing snapshot times.
    pub times: Vec<f64>,
}

impl SsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume > 0.0) || !self.volume.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "volume {} must be positive",
                self.volume
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter(
                "at least one replica is required".into(),
            ));
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite())
            || self.times.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::InvalidParameter(
                "snapshot times must be finite, nonnegative and nondecreasing".into(),
            ));
        }
        Ok(())
    }
}

/// One replica from `f0`, recorded at the configured times (counts, unit
/// `1/V`).
pub fn run_replica(
    cfg: &SsaConfig,
    k: &Kernel<f64>,
    source: &SourceSpec<f64>,
    f0: &SignedMeasure<f64>,
    seed: u64,
) -> Result<Trajectory<f64>> {
    let mut sys = ParticleSystem::init(f0, cfg.volume, seed)?;
    let mut traj = Trajectory::new(cfg.lattice.clone(), 1.0 / cfg.volume);
    for &ts in &cfg.times {
        while let Some(tau) = sys.sample_wait(k, source) {
            // memoryless clock: a wait that overshoots the snapshot is
            // discarded and redrawn from the snapshot time
            if sys.t + tau > ts {
                break;
            }
            sys.t += tau;
            sys.fire(k, source)?;
        }
        sys.t = ts;
        traj.snapshots.push(sys.snapshot(&cfg.lattice)?);
    }
    debug!(
        "replica seed {seed}: {} events, {} particles at end",
        sys.events,
        sys.len()
    );
    Ok(traj)
}

#[derive(Clone, Debug)]
pub struct SsaRun {
    pub replicas: Vec<Trajectory<f64>>,
    /// Replica mean, stored as summed counts with unit `1/(V·R)`, with
    /// per-cell standard errors.
    pub ensemble: Trajectory<f64>,
}

/// Runs `R` replicas with seeds `seed + r` in parallel and aggregates them in
/// replica order.
pub fn run(
    cfg: &SsaConfig,
    k: &Kernel<f64>,
    source: &SourceSpec<f64>,
    f0: &SignedMeasure<f64>,
) -> Result<SsaRun> {
    cfg.validate()?;
    if f0.dim() != cfg.lattice.dim() || source.measure().dim() != cfg.lattice.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.lattice.dim(),
            found: if f0.dim() != cfg.lattice.dim() {
                f0.dim()
            } else {
                source.measure().dim()
            },
        });
    }
    let replicas = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, k, source, f0, cfg.seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = aggregate(&replicas, cfg.volume)?;
    Ok(SsaRun { replicas, ensemble })
}

/// Replica mean and per-cell standard error.
pub fn aggregate(replicas: &[Trajectory<f64>], volume: f64) -> Result<Trajectory<f64>> {
    let first = replicas
        .first()
        .ok_or_else(|| Error::InvalidParameter("no replicas to aggregate".into()))?;
    for r in replicas {
        first.check_compatible(r)?;
    }
    let rf = replicas.len() as f64;
    let mut out = Trajectory::new(first.lattice.clone(), 1.0 / (volume * rf));
    for s in 0..first.len() {
        let cells = first.snapshots[s].values.len();
        let mut sum = vec![0.0; cells];
        let mut lost = vec![0.0; first.dim()];
        for r in replicas {
            let snap = &r.snapshots[s];
            for (a, v) in sum.iter_mut().zip(&snap.values) {
                *a += v;
            }
            for (a, v) in lost.iter_mut().zip(&snap.lost_mass) {
                *a += v;
            }
        }
        let std_err = (replicas.len() > 1).then(|| {
            (0..cells)
                .map(|c| {
                    let mean = sum[c] / rf;
                    let var = replicas
                        .iter()
                        .map(|r| (r.snapshots[s].values[c] - mean).powi(2))
                        .sum::<f64>()
                        / (rf - 1.0);
                    // standard error of the mean count, in units of 1/(V·R)
                    (var / rf).sqrt() * rf
                })
                .collect()
        });
        out.snapshots.push(Snapshot {
            t: first.snapshots[s].t,
            values: sum,
            lost_mass: lost,
            std_err,
        });
    }
    Ok(out)
}

/// Mean and standard error over replicas of a per-snapshot observable.
pub fn replica_stats(
    replicas: &[Trajectory<f64>],
    snapshot: usize,
    observable: impl Fn(&Trajectory<f64>, usize) -> f64,
) -> (f64, f64) {
    let values: Vec<f64> = replicas.iter().map(|r| observable(r, snapshot)).collect();
    mean_and_se(&values)
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
