//! The Kac chain: single steps, pair-coverage tracking, walker ensembles,
//! and conditional (covered-only) ensembles.
//!
//! Each walker owns one random stream (`stream_id` = walker index), so a
//! trajectory is a pure function of `(master_seed, walker index)` and results
//! never depend on how walkers are scheduled across threads. Cross-walker
//! statistics reduce in fixed pairwise order (see `stats`).

use crate::metrics::{Column, MixingCurve};
use crate::rng::RandomStream;
use crate::sphere::{
    draw_rotation_event, pair_count, pair_rank, sample_uniform_sphere, SpherePoint,
    RENORM_INTERVAL,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Per-walker memory cap for an ensemble (snapshot plus states), in bytes.
const MEMORY_BUDGET_BYTES: u64 = 8 << 30;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
    #[error(
        "ensemble needs ~{need_bytes} bytes (walkers x n x 8 plus state), over the {budget_bytes} byte budget"
    )]
    MemoryBudget { need_bytes: u64, budget_bytes: u64 },
    #[error("observer '{name}' failed: {reason}")]
    ObserverFailed { name: String, reason: String },
    #[error(
        "conditional ensemble is empty: no walker has covered all pairs; increase k or the walker count"
    )]
    EmptyConditional,
}

/// Bit mask over canonical pair ranks. Full-coverage testing is an integer
/// compare against a maintained count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCoverage {
    blocks: Vec<u64>,
    used: u64,
    total: u64,
}

impl PairCoverage {
    pub fn new(n: usize) -> Self {
        let total = pair_count(n);
        Self {
            blocks: vec![0; total.div_ceil(64) as usize],
            used: 0,
            total,
        }
    }

    #[inline]
    pub fn insert(&mut self, rank: u64) {
        let word = (rank / 64) as usize;
        let bit = 1u64 << (rank % 64);
        if self.blocks[word] & bit == 0 {
            self.blocks[word] |= bit;
            self.used += 1;
        }
    }

    #[inline]
    pub fn contains(&self, rank: u64) -> bool {
        self.blocks[(rank / 64) as usize] & (1 << (rank % 64)) != 0
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// True when every pair has been used at least once.
    #[inline]
    pub fn is_full(&self) -> bool {
        self.used == self.total
    }
}

/// One walker: its point, step counter, pair coverage, and random stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkState {
    point: SpherePoint,
    step: u64,
    coverage: PairCoverage,
    rng: RandomStream,
}

impl WalkState {
    pub fn new(point: SpherePoint, rng: RandomStream) -> Self {
        let coverage = PairCoverage::new(point.n());
        Self {
            point,
            step: 0,
            coverage,
            rng,
        }
    }

    pub fn point(&self) -> &SpherePoint {
        &self.point
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn coverage(&self) -> &PairCoverage {
        &self.coverage
    }

    pub fn covered(&self) -> bool {
        self.coverage.is_full()
    }

    /// One chain step: draw a rotation event, apply it, record the pair.
    pub fn step(&mut self) {
        let n = self.point.n();
        let ev = draw_rotation_event(n, &mut self.rng);
        self.point.rotate(&ev).expect("event drawn for this dimension");
        self.coverage.insert(pair_rank(n, ev.i, ev.j));
        self.step += 1;
        if self.step % RENORM_INTERVAL == 0 {
            self.point.renormalize();
        }
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

/// Where walkers start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartDistribution {
    /// Point mass at `e1`.
    PointMassE1,
    /// Stationary start: uniform on the sphere.
    Uniform,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub walkers: usize,
    pub steps: u64,
    pub seed: u64,
    pub start: StartDistribution,
    /// Snapshot stride; snapshots are materialized only at recorded steps.
    pub record_every: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.n < 2 {
            return Err(WalkError::InvalidConfig(format!("n = {} < 2", self.n)));
        }
        if self.walkers < 1 {
            return Err(WalkError::InvalidConfig("walkers must be >= 1".into()));
        }
        if self.record_every < 1 {
            return Err(WalkError::InvalidConfig("record_every must be >= 1".into()));
        }
        if self.steps > 0 && self.record_every > self.steps {
            return Err(WalkError::InvalidConfig(format!(
                "record_every {} exceeds steps {}",
                self.record_every, self.steps
            )));
        }
        let per_walker =
            16 * self.n as u64 + 8 * pair_count(self.n).div_ceil(64) + 64;
        let need_bytes = per_walker.saturating_mul(self.walkers as u64);
        if need_bytes > MEMORY_BUDGET_BYTES {
            return Err(WalkError::MemoryBudget {
                need_bytes,
                budget_bytes: MEMORY_BUDGET_BYTES,
            });
        }
        Ok(())
    }

    /// Steps at which snapshots are taken: every `record_every` steps from 0,
    /// always including the final step.
    pub fn recorded_steps(&self) -> Vec<u64> {
        let mut out: Vec<u64> = (0..=self.steps).step_by(self.record_every as usize).collect();
        if *out.last().expect("nonempty") != self.steps {
            out.push(self.steps);
        }
        out
    }
}

/// A materialized view of the ensemble at one step: the empirical measure,
/// plus per-walker full-coverage flags (so the covered-only sub-ensemble can
/// be carved out).
#[derive(Clone, Debug)]
pub struct EnsembleSnapshot {
    pub step: u64,
    pub n: usize,
    /// Row-major `walkers x n` coordinates.
    pub points: Vec<f64>,
    pub covered: Vec<bool>,
}

impl EnsembleSnapshot {
    pub fn walker_count(&self) -> usize {
        self.covered.len()
    }

    pub fn coords(&self, walker: usize) -> &[f64] {
        &self.points[walker * self.n..(walker + 1) * self.n]
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    pub fn covered_fraction(&self) -> f64 {
        self.covered_count() as f64 / self.walker_count() as f64
    }
}

/// Keep only the walkers whose coverage event holds (the conditional
/// ensemble). Produced by filtering, never by resampling, so the conditional
/// size over the total is exactly one minus the empirical uncovered
/// fraction.
pub fn conditional_snapshot(snap: &EnsembleSnapshot) -> Result<EnsembleSnapshot, WalkError> {
    let kept = snap.covered_count();
    if kept == 0 {
        return Err(WalkError::EmptyConditional);
    }
    let mut points = Vec::with_capacity(kept * snap.n);
    for (w, &ok) in snap.covered.iter().enumerate() {
        if ok {
            points.extend_from_slice(snap.coords(w));
        }
    }
    Ok(EnsembleSnapshot {
        step: snap.step,
        n: snap.n,
        points,
        covered: vec![true; kept],
    })
}

/// A population of independent walkers.
pub struct Ensemble {
    cfg: EnsembleConfig,
    walkers: Vec<WalkState>,
}

impl Ensemble {
    pub fn new(cfg: EnsembleConfig) -> Result<Self, WalkError> {
        cfg.validate()?;
        let build = |w: usize| {
            let mut rng = RandomStream::new(cfg.seed, w as u64);
            let point = match cfg.start {
                StartDistribution::PointMassE1 => SpherePoint::e1(cfg.n).expect("n >= 2"),
                StartDistribution::Uniform => {
                    sample_uniform_sphere(cfg.n, &mut rng).expect("n >= 2")
                }
            };
            WalkState::new(point, rng)
        };
        #[cfg(feature = "parallel")]
        let walkers: Vec<WalkState> = (0..cfg.walkers).into_par_iter().map(build).collect();
        #[cfg(not(feature = "parallel"))]
        let walkers: Vec<WalkState> = (0..cfg.walkers).map(build).collect();
        Ok(Self { cfg, walkers })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    pub fn walkers(&self) -> &[WalkState] {
        &self.walkers
    }

    /// Advance every walker by `steps`, sequentially.
    pub fn advance_seq(&mut self, steps: u64) {
        for w in &mut self.walkers {
            w.advance(steps);
        }
    }

    /// Advance every walker by `steps` on the rayon pool. Identical output
    /// to [`advance_seq`](Self::advance_seq): walkers own their streams.
    #[cfg(feature = "parallel")]
    pub fn advance_par(&mut self, steps: u64) {
        self.walkers.par_iter_mut().for_each(|w| w.advance(steps));
    }

    pub fn advance(&mut self, steps: u64) {
        #[cfg(feature = "parallel")]
        self.advance_par(steps);
        #[cfg(not(feature = "parallel"))]
        self.advance_seq(steps);
    }

    pub fn snapshot(&self) -> EnsembleSnapshot {
        let n = self.cfg.n;
        let mut points = vec![0.0; self.walkers.len() * n];
        let covered: Vec<bool> = self.walkers.iter().map(|w| w.covered()).collect();
        let fill = |(row, w): (&mut [f64], &WalkState)| {
            row.copy_from_slice(w.point().coords());
        };
        #[cfg(feature = "parallel")]
        points
            .par_chunks_mut(n)
            .zip(self.walkers.par_iter())
            .for_each(fill);
        #[cfg(not(feature = "parallel"))]
        points.chunks_mut(n).zip(self.walkers.iter()).for_each(fill);
        EnsembleSnapshot {
            step: self.walkers.first().map(|w| w.step_count()).unwrap_or(0),
            n,
            points,
            covered,
        }
    }
}

/// A hook invoked on every recorded snapshot. After the run each observer
/// contributes named columns to the mixing curve.
pub trait Observer {
    fn name(&self) -> &str;
    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String>;
    fn columns(&self) -> Vec<Column>;
}

/// Evolve an ensemble, feeding every recorded snapshot to the observers, and
/// assemble their outputs into a [`MixingCurve`]. Observer failure aborts
/// the run with a diagnostic naming the observer.
pub fn run_ensemble(
    cfg: &EnsembleConfig,
    observers: &mut [Box<dyn Observer>],
) -> Result<MixingCurve, WalkError> {
    let mut ensemble = Ensemble::new(cfg.clone())?;
    let recorded = cfg.recorded_steps();
    let mut at = 0u64;
    for &target in &recorded {
        ensemble.advance(target - at);
        at = target;
        let snap = ensemble.snapshot();
        for obs in observers.iter_mut() {
            obs.observe(&snap).map_err(|reason| WalkError::ObserverFailed {
                name: obs.name().to_string(),
                reason,
            })?;
        }
    }
    let mut columns = Vec::new();
    for obs in observers.iter() {
        for col in obs.columns() {
            debug_assert_eq!(col.values.len(), recorded.len(), "column {}", col.name);
            columns.push(col);
        }
    }
    Ok(MixingCurve {
        n: cfg.n,
        steps: recorded,
        columns,
    })
}

/// Empirical tail of the pair-coverage time, from a pair-draw-only
/// simulation (the walk's angles are irrelevant to coverage).
///
/// Returns `(k, eta_hat)` for `k = 0..=k_max`, where `eta_hat` is the
/// fraction of walkers that have not yet used every pair by step `k`;
/// non-increasing in `k` by construction.
pub fn empirical_eta(n: usize, k_max: u64, walkers: usize, seed: u64) -> Vec<(u64, f64)> {
    assert!(n >= 2 && walkers >= 1);
    let pairs = pair_count(n);
    let cover_time = |w: usize| -> u64 {
        let mut rng = RandomStream::new(seed, w as u64);
        let mut cov = PairCoverage::new(n);
        let mut k = 0u64;
        while k <= k_max {
            if cov.is_full() {
                return k;
            }
            cov.insert(rng.next_below(pairs));
            k += 1;
        }
        k_max + 1 // censored: not covered within the horizon
    };
    #[cfg(feature = "parallel")]
    let times: Vec<u64> = (0..walkers).into_par_iter().map(cover_time).collect();
    #[cfg(not(feature = "parallel"))]
    let times: Vec<u64> = (0..walkers).map(cover_time).collect();

    let mut hist = vec![0u64; k_max as usize + 2];
    for &t in &times {
        hist[t as usize] += 1;
    }
    // eta_hat(k) = P(cover time > k), via the complementary running sum.
    let mut not_covered = walkers as u64;
    (0..=k_max)
        .map(|k| {
            not_covered -= hist[k as usize];
            (k, not_covered as f64 / walkers as f64)
        })
        .collect()
}
