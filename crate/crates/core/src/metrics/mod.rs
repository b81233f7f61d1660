//! Empirical mixing diagnostics on walker ensembles.
//!
//! The true total-variation distance to uniform is not estimable from
//! samples in high dimension, so the curve reports honest surrogates: an
//! `x_1`-marginal histogram TV (a lower bound in expectation), Wasserstein-2
//! transport against a uniform reference cloud, the mass of the
//! small-coordinate region `H_ε`, and per-observable means whose decay rates
//! estimate kernel eigenvalues.

mod transport;

pub use transport::{
    wasserstein_estimate, TransportPlanResult, W2Mode, EXACT_SIZE_LIMIT,
};

use crate::rng::RandomStream;
use crate::sphere::sample_uniform_sphere;
use crate::stats::{mean_and_se_by, proportion_se, weighted_linear_fit};
use crate::walk::{EnsembleSnapshot, Observer};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

pub const COL_TV_MARGINAL: &str = "tv_marginal";
pub const COL_W2: &str = "w2";
pub const COL_H_EPS: &str = "h_eps_mass";
pub const COL_ETA_HAT: &str = "eta_hat";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("point sets differ in size: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },
    #[error("exact transport capped at {max} points, got {got}")]
    ExactSizeLimit { max: usize, got: usize },
    #[error("epsilon must be in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curve has no column named '{0}'")]
    MissingColumn(String),
    #[error("column '{0}' lacks the standard errors or stationary value needed for a decay fit")]
    MissingStats(String),
    #[error("no valid fit window: the observable never rises 5 standard errors above its stationary value")]
    NoValidWindow,
}

/// One named per-step series of a mixing curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub se: Option<Vec<f64>>,
    /// Exact stationary value of the observable, when known in closed form.
    pub stationary: Option<f64>,
}

/// Per-step ensemble diagnostics assembled from observers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingCurve {
    pub n: usize,
    pub steps: Vec<u64>,
    pub columns: Vec<Column>,
}

impl MixingCurve {
    pub fn get(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn tv_marginal(&self) -> Option<&Column> {
        self.get(COL_TV_MARGINAL)
    }

    pub fn w2(&self) -> Option<&Column> {
        self.get(COL_W2)
    }

    pub fn h_eps_mass(&self) -> Option<&Column> {
        self.get(COL_H_EPS)
    }

    /// Range invariants of the standard columns: TV and `H_ε` mass lie in
    /// `[0, 1]`, W2 is nonnegative.
    pub fn validate_ranges(&self) -> Result<(), MetricsError> {
        let check = |name: &str, lo: f64, hi: f64| -> Result<(), MetricsError> {
            if let Some(col) = self.get(name) {
                for &v in &col.values {
                    if !(v >= lo && v <= hi) {
                        return Err(MetricsError::InvalidParameter(format!(
                            "{name} value {v} outside [{lo}, {hi}]"
                        )));
                    }
                }
            }
            Ok(())
        };
        check(COL_TV_MARGINAL, 0.0, 1.0)?;
        check(COL_H_EPS, 0.0, 1.0)?;
        check(COL_W2, 0.0, f64::INFINITY)?;
        check(COL_ETA_HAT, 0.0, 1.0)
    }
}

/// Exact CDF of a single coordinate of a uniform point on `S^{n-1}`
/// (`x_1²` is Beta(1/2, (n−1)/2)-distributed).
pub fn coordinate_marginal_cdf(n: usize, t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let beta = Beta::new(0.5, (n as f64 - 1.0) / 2.0).expect("valid shapes");
    0.5 * (1.0 + t.signum() * beta.cdf(t * t))
}

/// Mass the uniform marginal assigns to each of `bins` equal-width cells of
/// `[−1, 1]`.
pub fn marginal_bin_masses(n: usize, bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|b| {
            let lo = -1.0 + 2.0 * b as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (b + 1) as f64 / bins as f64;
            coordinate_marginal_cdf(n, hi) - coordinate_marginal_cdf(n, lo)
        })
        .collect()
}

/// Histogram total-variation between the empirical `x_1` marginal and the
/// exact uniform marginal: `(1/2) Σ_b |p̂_b − q_b|`.
///
/// A lower bound on the true TV in expectation, since it only sees sets
/// measurable with respect to the histogram.
pub fn tv_marginal_estimate(points: &[f64], n: usize, bins: usize) -> Result<f64, MetricsError> {
    if n < 3 || bins < 2 {
        return Err(MetricsError::InvalidParameter(format!(
            "need n >= 3 and bins >= 2, got n={n} bins={bins}"
        )));
    }
    let m = points.len() / n;
    if m < 10 * bins {
        return Err(MetricsError::TooFewSamples {
            need: 10 * bins,
            got: m,
        });
    }
    let mut counts = vec![0u64; bins];
    for w in 0..m {
        let x = points[w * n];
        let idx = (((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let q = marginal_bin_masses(n, bins);
    let tv: f64 = counts
        .iter()
        .zip(&q)
        .map(|(&c, &qb)| (c as f64 / m as f64 - qb).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

/// Expected binning noise of [`tv_marginal_estimate`] at stationarity:
/// `sqrt(bins / (2π · samples))`.
pub fn tv_marginal_noise_floor(bins: usize, samples: usize) -> f64 {
    (bins as f64 / (2.0 * std::f64::consts::PI * samples as f64)).sqrt()
}

/// Two-sample histogram TV of the smallest coordinate magnitude. An optional
/// companion statistic to [`tv_marginal_estimate`]; both sides are empirical,
/// so it carries twice the binning noise.
pub fn tv_min_coord_two_sample(
    a: &[f64],
    b: &[f64],
    n: usize,
    bins: usize,
) -> Result<f64, MetricsError> {
    if n < 2 || bins < 2 {
        return Err(MetricsError::InvalidParameter("need n, bins >= 2".into()));
    }
    let (ma, mb) = (a.len() / n, b.len() / n);
    if ma < 10 * bins || mb < 10 * bins {
        return Err(MetricsError::TooFewSamples {
            need: 10 * bins,
            got: ma.min(mb),
        });
    }
    let hist = |pts: &[f64], m: usize| {
        let mut counts = vec![0u64; bins];
        for w in 0..m {
            let min = pts[w * n..(w + 1) * n]
                .iter()
                .map(|c| c.abs())
                .fold(f64::INFINITY, f64::min);
            counts[((min * bins as f64) as usize).min(bins - 1)] += 1;
        }
        counts
    };
    let (ha, hb) = (hist(a, ma), hist(b, mb));
    Ok(ha
        .iter()
        .zip(&hb)
        .map(|(&x, &y)| (x as f64 / ma as f64 - y as f64 / mb as f64).abs())
        .sum::<f64>()
        / 2.0)
}

/// Fraction of points with some coordinate of magnitude below `epsilon`.
pub fn h_eps_mass(points: &[f64], n: usize, epsilon: f64) -> Result<f64, MetricsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MetricsError::InvalidEpsilon(epsilon));
    }
    let m = points.len() / n;
    if m == 0 {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let hits = (0..m)
        .filter(|&w| points[w * n..(w + 1) * n].iter().any(|c| c.abs() < epsilon))
        .count();
    Ok(hits as f64 / m as f64)
}

/// A fitted per-step decay rate (log of the contraction factor).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `ln|mean − stationary|` against the step index.
    pub rate: f64,
    pub r2: f64,
    pub window_start_step: u64,
    pub window_end_step: u64,
    pub points: usize,
}

/// Fit the decay rate of a recorded observable toward its stationary value.
///
/// The fit runs on `ln|mean_k − stationary|` against `k`, weighted by the
/// squared signal-to-noise ratio, over the maximal leading window where the
/// signal exceeds 5 standard errors. Early steps are skipped — nominally the
/// first `2n` (start-distribution transients), but never more than a third
/// of the usable window, so that fast-decaying observables keep enough
/// points to fit.
pub fn observable_decay(curve: &MixingCurve, name: &str) -> Result<DecayFit, MetricsError> {
    let col = curve
        .get(name)
        .ok_or_else(|| MetricsError::MissingColumn(name.to_string()))?;
    let (se, stationary) = match (&col.se, col.stationary) {
        (Some(se), Some(st)) => (se, st),
        _ => return Err(MetricsError::MissingStats(name.to_string())),
    };
    if col.values.len() < 10 {
        return Err(MetricsError::TooFewSamples {
            need: 10,
            got: col.values.len(),
        });
    }

    // Leading window with |signal| > 5·SE.
    let mut valid: Vec<(u64, f64, f64)> = Vec::new();
    for ((&v, &s), &k) in col.values.iter().zip(se.iter()).zip(curve.steps.iter()) {
        let signal = (v - stationary).abs();
        let snr = if s > 0.0 { signal / s } else { 1e9 };
        if signal > 0.0 && snr > 5.0 {
            valid.push((k, signal.ln(), snr.min(1e9)));
        } else {
            break;
        }
    }
    let transient = 2 * curve.n as u64;
    let full_skip = valid.iter().take_while(|&&(k, _, _)| k < transient).count();
    let skip = full_skip.min(valid.len() / 3);
    let window = &valid[skip.min(valid.len())..];
    if window.len() < 4 {
        return Err(MetricsError::NoValidWindow);
    }

    let xs: Vec<f64> = window.iter().map(|&(k, _, _)| k as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, y, _)| y).collect();
    let ws: Vec<f64> = window.iter().map(|&(_, _, snr)| snr * snr).collect();
    let (rate, _icept, r2) =
        weighted_linear_fit(&xs, &ys, &ws).ok_or(MetricsError::NoValidWindow)?;
    Ok(DecayFit {
        rate,
        r2,
        window_start_step: window[0].0,
        window_end_step: window[window.len() - 1].0,
        points: window.len(),
    })
}

// ---------------------------------------------------------------------------
// Standard observers
// ---------------------------------------------------------------------------

/// Mean and standard error of a scalar observable per recorded step.
pub struct MomentObserver {
    name: String,
    stationary: f64,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    means: Vec<f64>,
    ses: Vec<f64>,
}

impl MomentObserver {
    pub fn new(
        name: impl Into<String>,
        stationary: f64,
        f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) -> Self {
        Self {
            name: name.into(),
            stationary,
            f,
            means: Vec::new(),
            ses: Vec::new(),
        }
    }

    /// `x_{coord+1}^power` with its exact uniform-measure mean as the
    /// stationary reference (odd powers 0, `E[x²] = 1/n`,
    /// `E[x⁴] = 3/(n(n+2))`).
    pub fn coordinate_power(coord: usize, power: u32, n: usize) -> Self {
        let nf = n as f64;
        let stationary = match power {
            p if p % 2 == 1 => 0.0,
            2 => 1.0 / nf,
            4 => 3.0 / (nf * (nf + 2.0)),
            p => panic!("no closed-form stationary moment wired for power {p}"),
        };
        Self::new(
            format!("obs:x{}_p{}", coord + 1, power),
            stationary,
            Box::new(move |coords: &[f64]| coords[coord].powi(power as i32)),
        )
    }
}

impl Observer for MomentObserver {
    fn name(&self) -> &str {
        &self.name
    }

    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String> {
        let (m, se) = mean_and_se_by(snap.walker_count(), &|w| (self.f)(snap.coords(w)));
        self.means.push(m);
        self.ses.push(se);
        Ok(())
    }

    fn columns(&self) -> Vec<Column> {
        vec![Column {
            name: self.name.clone(),
            values: self.means.clone(),
            se: Some(self.ses.clone()),
            stationary: Some(self.stationary),
        }]
    }
}

/// Marginal-histogram TV against the exact uniform marginal.
pub struct TvMarginalObserver {
    bins: usize,
    values: Vec<f64>,
    noise: Vec<f64>,
}

impl TvMarginalObserver {
    pub fn new(bins: usize) -> Self {
        Self {
            bins,
            values: Vec::new(),
            noise: Vec::new(),
        }
    }
}

impl Observer for TvMarginalObserver {
    fn name(&self) -> &str {
        COL_TV_MARGINAL
    }

    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String> {
        let tv = tv_marginal_estimate(&snap.points, snap.n, self.bins)
            .map_err(|e| e.to_string())?;
        self.values.push(tv);
        self.noise
            .push(tv_marginal_noise_floor(self.bins, snap.walker_count()));
        Ok(())
    }

    fn columns(&self) -> Vec<Column> {
        vec![Column {
            name: COL_TV_MARGINAL.into(),
            values: self.values.clone(),
            se: Some(self.noise.clone()),
            stationary: Some(0.0),
        }]
    }
}

/// Fraction of walkers inside `H_ε`.
pub struct HEpsObserver {
    epsilon: f64,
    values: Vec<f64>,
    ses: Vec<f64>,
}

impl HEpsObserver {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            values: Vec::new(),
            ses: Vec::new(),
        }
    }
}

impl Observer for HEpsObserver {
    fn name(&self) -> &str {
        COL_H_EPS
    }

    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String> {
        let v = h_eps_mass(&snap.points, snap.n, self.epsilon).map_err(|e| e.to_string())?;
        self.values.push(v);
        self.ses.push(proportion_se(v, snap.walker_count()));
        Ok(())
    }

    fn columns(&self) -> Vec<Column> {
        vec![Column {
            name: COL_H_EPS.into(),
            values: self.values.clone(),
            se: Some(self.ses.clone()),
            stationary: None,
        }]
    }
}

/// Fraction of walkers that have not yet used every pair.
pub struct EtaObserver {
    values: Vec<f64>,
    ses: Vec<f64>,
}

impl EtaObserver {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ses: Vec::new(),
        }
    }
}

impl Default for EtaObserver {
    fn default() -> Self {
        Self::new()
    }
}

impl Observer for EtaObserver {
    fn name(&self) -> &str {
        COL_ETA_HAT
    }

    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String> {
        let eta = 1.0 - snap.covered_fraction();
        self.values.push(eta);
        self.ses.push(proportion_se(eta, snap.walker_count()));
        Ok(())
    }

    fn columns(&self) -> Vec<Column> {
        vec![Column {
            name: COL_ETA_HAT.into(),
            values: self.values.clone(),
            se: Some(self.ses.clone()),
            stationary: Some(0.0),
        }]
    }
}

/// W2 between the (subsampled) ensemble and a fixed uniform reference cloud.
pub struct W2Observer {
    mode: W2Mode,
    subsample: usize,
    reference_seed: u64,
    reference: Option<Vec<f64>>,
    values: Vec<f64>,
}

impl W2Observer {
    /// Exact assignment on the first `size` walkers (`size ≤ 2048`).
    pub fn exact(size: usize, reference_seed: u64) -> Self {
        Self {
            mode: W2Mode::Exact,
            subsample: size,
            reference_seed,
            reference: None,
            values: Vec::new(),
        }
    }

    /// Sorted-projection heuristic on the first `size` walkers.
    pub fn sliced(size: usize, projections: usize, reference_seed: u64) -> Self {
        Self {
            mode: W2Mode::Sliced {
                projections,
                seed: reference_seed ^ 0x5bd1_e995,
            },
            subsample: size,
            reference_seed,
            reference: None,
            values: Vec::new(),
        }
    }
}

impl Observer for W2Observer {
    fn name(&self) -> &str {
        COL_W2
    }

    fn observe(&mut self, snap: &EnsembleSnapshot) -> Result<(), String> {
        let m = self.subsample.min(snap.walker_count());
        if self.reference.is_none() {
            let mut rng = RandomStream::new(self.reference_seed, u64::MAX);
            let mut cloud = Vec::with_capacity(m * snap.n);
            for _ in 0..m {
                cloud.extend_from_slice(
                    sample_uniform_sphere(snap.n, &mut rng)
                        .map_err(|e| e.to_string())?
                        .coords(),
                );
            }
            self.reference = Some(cloud);
        }
        let a = &snap.points[..m * snap.n];
        let r = wasserstein_estimate(a, self.reference.as_ref().unwrap(), snap.n, self.mode)
            .map_err(|e| e.to_string())?;
        self.values.push(r.w2());
        Ok(())
    }

    fn columns(&self) -> Vec<Column> {
        vec![Column {
            name: COL_W2.into(),
            values: self.values.clone(),
            se: None,
            stationary: None,
        }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds;
    use crate::walk::{
        conditional_snapshot, run_ensemble, Ensemble, EnsembleConfig, Observer, StartDistribution,
    };

    fn uniform_cloud(n: usize, m: usize, seed: u64) -> Vec<f64> {
        let mut rng = RandomStream::new(seed, 0);
        let mut pts = Vec::with_capacity(m * n);
        for _ in 0..m {
            pts.extend_from_slice(sample_uniform_sphere(n, &mut rng).unwrap().coords());
        }
        pts
    }

    #[test]
    fn tv_of_uniform_cloud_is_binning_noise() {
        let pts = uniform_cloud(3, 1_000_000, 5);
        let tv = tv_marginal_estimate(&pts, 3, 50).unwrap();
        assert!(tv <= 0.01, "tv = {tv}");
        // Matches the predicted noise scale within a factor of a few.
        let floor = tv_marginal_noise_floor(50, 1_000_000);
        assert!(tv <= 4.0 * floor, "tv = {tv}, floor = {floor}");
    }

    #[test]
    fn tv_of_point_mass_is_nearly_one() {
        let m = 2000;
        let mut pts = vec![0.0; m * 3];
        for w in 0..m {
            pts[w * 3] = 1.0;
        }
        let tv = tv_marginal_estimate(&pts, 3, 50).unwrap();
        // Everything lands in the final bin: TV = 1 − q_last.
        let q_last = marginal_bin_masses(3, 50)[49];
        assert!((tv - (1.0 - q_last)).abs() < 1e-12);
        assert!(tv >= 0.95);
    }

    #[test]
    fn tv_is_sign_flip_symmetric() {
        let pts = uniform_cloud(4, 20_000, 9);
        let flipped: Vec<f64> = pts.iter().map(|c| -c).collect();
        let a = tv_marginal_estimate(&pts, 4, 50).unwrap();
        let b = tv_marginal_estimate(&flipped, 4, 50).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tv_needs_enough_samples() {
        let pts = uniform_cloud(3, 100, 1);
        assert!(matches!(
            tv_marginal_estimate(&pts, 3, 50),
            Err(MetricsError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn marginal_cdf_consistent_with_pdf_quadrature() {
        for n in [3usize, 4, 7] {
            for t in [-0.8, -0.2, 0.4, 0.9] {
                let q = crate::quad::adaptive_simpson(
                    |s| bounds::coordinate_marginal_pdf(n, s).unwrap(),
                    -1.0 + 1e-12,
                    t,
                    1e-10,
                    1e-13,
                )
                .unwrap();
                assert!(
                    (q.value - coordinate_marginal_cdf(n, t)).abs() < 1e-8,
                    "n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn h_eps_mass_bounds_and_examples() {
        let mut pts = vec![0.0; 9];
        pts[0] = 1.0;
        pts[3] = 1.0;
        pts[6] = 1.0;
        assert_eq!(h_eps_mass(&pts, 3, 0.5).unwrap(), 1.0);
        assert!(h_eps_mass(&pts, 3, 1.5).is_err());
        let generic = uniform_cloud(4, 1000, 3);
        assert_eq!(h_eps_mass(&generic, 4, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn h_eps_matches_independent_mc() {
        let pts = uniform_cloud(4, 1_000_000, 31);
        let ours = h_eps_mass(&pts, 4, 0.05).unwrap();
        let theirs = bounds::uniform_mass_h_eps(4, 0.05, 1_000_000, 77).unwrap();
        let se = (proportion_se(ours, 1_000_000).powi(2) + theirs.mc_se.powi(2)).sqrt();
        assert!(
            (ours - theirs.mc_estimate).abs() <= 4.0 * se,
            "{ours} vs {}",
            theirs.mc_estimate
        );
    }

    #[test]
    fn min_coord_two_sample_tv_near_zero_for_same_law() {
        let a = uniform_cloud(3, 50_000, 41);
        let b = uniform_cloud(3, 50_000, 43);
        let tv = tv_min_coord_two_sample(&a, &b, 3, 40).unwrap();
        assert!(tv < 0.02, "tv = {tv}");
    }

    fn decay_curve(n: usize, walkers: usize, steps: u64, seed: u64) -> MixingCurve {
        let cfg = EnsembleConfig {
            n,
            walkers,
            steps,
            seed,
            start: StartDistribution::PointMassE1,
            record_every: 1,
        };
        let mut obs: Vec<Box<dyn Observer>> =
            vec![Box::new(MomentObserver::coordinate_power(0, 2, n))];
        run_ensemble(&cfg, &mut obs).unwrap()
    }

    #[test]
    fn decay_rate_matches_quadratic_eigenvalue_n3() {
        let curve = decay_curve(3, 1_000_000, 20, 1001);
        let fit = observable_decay(&curve, "obs:x1_p2").unwrap();
        let expect = bounds::quadratic_eigenvalue(3).ln();
        assert!(
            (fit.rate - expect).abs() <= 0.02 * expect.abs(),
            "rate {} vs {expect} (r2 {})",
            fit.rate,
            fit.r2
        );
        assert!(fit.r2 > 0.99);
    }

    #[test]
    fn decay_rate_matches_quadratic_eigenvalue_n6() {
        let curve = decay_curve(6, 1_000_000, 40, 1003);
        let fit = observable_decay(&curve, "obs:x1_p2").unwrap();
        let expect = bounds::quadratic_eigenvalue(6).ln();
        assert!(
            (fit.rate - expect).abs() <= 0.02 * expect.abs(),
            "rate {} vs {expect}",
            fit.rate
        );
    }

    #[test]
    fn constant_observable_has_no_window() {
        let cfg = EnsembleConfig {
            n: 3,
            walkers: 2000,
            steps: 15,
            seed: 5,
            start: StartDistribution::Uniform,
            record_every: 1,
        };
        let mut obs: Vec<Box<dyn Observer>> = vec![Box::new(MomentObserver::new(
            "obs:const",
            1.0,
            Box::new(|_| 1.0),
        ))];
        let curve = run_ensemble(&cfg, &mut obs).unwrap();
        assert!(matches!(
            observable_decay(&curve, "obs:const"),
            Err(MetricsError::NoValidWindow)
        ));
        assert!(matches!(
            observable_decay(&curve, "missing"),
            Err(MetricsError::MissingColumn(_))
        ));
    }

    #[test]
    fn tv_curve_monotone_from_point_mass() {
        let cfg = EnsembleConfig {
            n: 3,
            walkers: 100_000,
            steps: 40,
            seed: 2024,
            start: StartDistribution::PointMassE1,
            record_every: 2,
        };
        let mut obs: Vec<Box<dyn Observer>> = vec![Box::new(TvMarginalObserver::new(50))];
        let curve = run_ensemble(&cfg, &mut obs).unwrap();
        curve.validate_ranges().unwrap();
        let col = curve.tv_marginal().unwrap();
        let noise = tv_marginal_noise_floor(50, 100_000);
        for pair in col.values.windows(2) {
            assert!(
                pair[1] <= pair[0] + 4.0 * noise,
                "tv increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(col.values[0] >= 0.95);
    }

    #[test]
    fn w2_at_mixing_time_reaches_sampling_floor() {
        // n=3, ε=0.05: k = ⌈9 · ln3 · ln20⌉ steps, 256-point clouds.
        let eps = 0.05f64;
        let k = (9.0 * 3f64.ln() * (1.0 / eps).ln()).ceil() as u64;
        let cfg = EnsembleConfig {
            n: 3,
            walkers: 256,
            steps: k,
            seed: 606,
            start: StartDistribution::PointMassE1,
            record_every: k,
        };
        let mut ens = Ensemble::new(cfg).unwrap();
        ens.advance(k);
        let snap = ens.snapshot();
        let reference = uniform_cloud(3, 256, 51);
        let got = wasserstein_estimate(&snap.points, &reference, 3, W2Mode::Exact)
            .unwrap()
            .w2();
        let floor = wasserstein_estimate(
            &uniform_cloud(3, 256, 53),
            &uniform_cloud(3, 256, 57),
            3,
            W2Mode::Exact,
        )
        .unwrap()
        .w2();
        assert!(
            got <= eps + 2.0 * floor,
            "w2 {got} > {eps} + 2·{floor}"
        );
    }

    #[test]
    fn conditional_small_coordinate_mass_obeys_quartic_root() {
        // μ'_k(H_ε) ≤ ε^{1/4} + noise at k = ⌈n² ln n ln(1/ε)⌉, here n=5.
        let n = 5usize;
        let eps = 0.05f64;
        let k = ((n * n) as f64 * (n as f64).ln() * (1.0 / eps).ln()).ceil() as u64;
        let cfg = EnsembleConfig {
            n,
            walkers: 30_000,
            steps: k,
            seed: 404,
            start: StartDistribution::PointMassE1,
            record_every: k,
        };
        let mut ens = Ensemble::new(cfg).unwrap();
        ens.advance(k);
        let cond = conditional_snapshot(&ens.snapshot()).unwrap();
        let mass = h_eps_mass(&cond.points, n, eps).unwrap();
        let se = proportion_se(mass, cond.walker_count());
        assert!(
            mass <= eps.powf(0.25) + 4.0 * se,
            "mass {mass} vs {}",
            eps.powf(0.25)
        );
    }

    #[test]
    fn transport_lower_bound_from_excess_small_coordinate_mass() {
        // A cloud pinned inside H_ε must pay at least ε per unit of excess
        // mass to reach a uniform cloud: W2 ≥ (μ̂(H_ε) − Û(H_2ε)) · ε.
        let n = 3;
        let m = 256;
        let eps = 0.05f64;
        let mut rng = RandomStream::new(99, 0);
        let mut a = Vec::with_capacity(m * n);
        for _ in 0..m {
            let psi = rng.next_f64() * std::f64::consts::TAU;
            let r = (1.0f64 - (eps / 2.0) * (eps / 2.0)).sqrt();
            a.extend_from_slice(&[r * psi.cos(), r * psi.sin(), eps / 2.0]);
        }
        let b = uniform_cloud(n, m, 111);
        let w2 = wasserstein_estimate(&a, &b, n, W2Mode::Exact).unwrap().w2();
        let mu_a = h_eps_mass(&a, n, eps).unwrap();
        let u_2eps = h_eps_mass(&b, n, 2.0 * eps).unwrap();
        let excess = (mu_a - u_2eps).max(0.0);
        assert!(mu_a == 1.0);
        assert!(
            w2 >= excess * eps,
            "w2 {w2} below transport floor {}",
            excess * eps
        );
    }
}
