//! Closed-form evaluation of the mixing-time machinery: the pair-coverage
//! (coupon-collector) tail, coordinate marginals on the sphere, the
//! small-coordinate region `H_ε`, Gamma-ratio and spectral-rate facts, the
//! conditioned-density bound, the four-summand total-variation bound, and the
//! step-schedule optimization that makes every summand small.
//!
//! Everything here is deterministic arithmetic; the heavy factors
//! (`k^{k^2}`-type) are carried in log space because the raw values overflow
//! doubles almost immediately.

use crate::quad::adaptive_simpson;
use crate::rng::RandomStream;
use crate::sphere::{pair_count, sample_uniform_sphere};
use crate::stats::{compensated_sum, proportion_se};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no feasible spectral step count below 1e18 (fourth summand cannot reach the target)")]
    Overflow,
    #[error("schedule exceeds the step budget: total {total} > {budget:.3e}")]
    InfeasibleBudget { total: u64, budget: f64 },
    #[error("schedule failed its own re-check: summand {index} is {value:.3e} > delta {delta:.3e}")]
    ScheduleRecheck { index: usize, value: f64, delta: f64 },
}

/// Coupon-collector tail bound `C(n,2)·(1 − 1/C(n,2))^k` on the probability
/// that some coordinate pair is still unused after `k` steps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EtaBound {
    /// The bound exactly as written; exceeds 1 for small `k`.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]` for reporting next to probabilities.
    pub clamped: f64,
}

pub fn eta_bound(n: usize, k: u64) -> EtaBound {
    assert!(n >= 2);
    let p = pair_count(n) as f64;
    let raw = if p == 1.0 {
        // Single pair: (1 − 1/P) = 0, so the bound is 1 at k = 0 and 0 after.
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        p * ((k as f64) * (-1.0 / p).ln_1p()).exp()
    };
    EtaBound {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    }
}

/// Normalizing constant `c_n = Γ(n/2) / (Γ((n−1)/2) Γ(1/2))` of the
/// single-coordinate marginal density.
pub fn marginal_normalizer(n: usize) -> f64 {
    let nf = n as f64;
    (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0) - ln_gamma(0.5)).exp()
}

/// Density of a single coordinate of a uniform point on `S^{n-1}`:
/// `c_n (1 − t²)^{(n−3)/2}` on `[−1, 1]`.
pub fn coordinate_marginal_pdf(n: usize, t: f64) -> Result<f64, BoundsError> {
    if n < 3 {
        return Err(BoundsError::InvalidParameter(format!(
            "marginal density needs n >= 3, got {n}"
        )));
    }
    if !(t.abs() <= 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "coordinate {t} outside [-1, 1]"
        )));
    }
    let expo = (n as f64 - 3.0) / 2.0;
    let base = 1.0 - t * t;
    let shape = if expo == 0.0 { 1.0 } else { base.powf(expo) };
    Ok(marginal_normalizer(n) * shape)
}

/// Three views of the uniform mass of `H_ε = {x : |x_i| < ε for some i}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HEpsMass {
    /// Union bound `n · P(|x_1| < ε)` by exact marginal integration.
    pub union_bound: f64,
    /// The closed-form envelope `n^{3/2} ε`.
    pub paper_bound: f64,
    /// Monte Carlo estimate of the true mass.
    pub mc_estimate: f64,
    pub mc_se: f64,
}

pub fn uniform_mass_h_eps(
    n: usize,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<HEpsMass, BoundsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if n < 3 {
        return Err(BoundsError::InvalidParameter(format!(
            "H_eps mass needs n >= 3, got {n}"
        )));
    }
    let pdf = |t: f64| coordinate_marginal_pdf(n, t).expect("interior point");
    let one_coord = adaptive_simpson(pdf, -epsilon, epsilon, 1e-12, 1e-15)
        .map_err(|e| BoundsError::InvalidParameter(e.to_string()))?
        .value;
    let union_bound = n as f64 * one_coord;
    let paper_bound = (n as f64).powf(1.5) * epsilon;

    let mut rng = RandomStream::new(seed, 0);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = sample_uniform_sphere(n, &mut rng).expect("n >= 3");
        if x.coords().iter().any(|c| c.abs() < epsilon) {
            hits += 1;
        }
    }
    let mc_estimate = hits as f64 / samples as f64;
    Ok(HEpsMass {
        union_bound,
        paper_bound,
        mc_estimate,
        mc_se: proportion_se(mc_estimate, samples),
    })
}

/// The Gamma-ratio inequality `Γ(n/2)/Γ((n−1)/2) > sqrt((n−2)/2)` used to
/// lower-bound the marginal normalizer.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GammaRatioCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

pub fn gamma_ratio_check(n: usize) -> GammaRatioCheck {
    assert!(n >= 3);
    let nf = n as f64;
    let lhs = (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp();
    let rhs = ((nf - 2.0) / 2.0).sqrt();
    GammaRatioCheck {
        lhs,
        rhs,
        ratio: lhs / rhs,
        holds: lhs > rhs,
    }
}

/// Exact spectral gap of the kernel, `(n+2) / (2n(n−1))`.
pub fn spectral_gap(n: usize) -> f64 {
    assert!(n >= 2);
    let nf = n as f64;
    (nf + 2.0) / (2.0 * nf * (nf - 1.0))
}

/// Exact per-step contraction factor of `E[x_1² − 1/n]`: `(n−2)/(n−1)`.
/// Used as a simulation oracle for decay fits.
pub fn quadratic_eigenvalue(n: usize) -> f64 {
    assert!(n >= 2);
    let nf = n as f64;
    (nf - 2.0) / (nf - 1.0)
}

/// Which contraction rate the spectral summand uses. The literature states
/// several: a gap of `1/n`, a lower bound of `1/(2n)`, and the exact value.
/// All three are selectable; the bound display is written with `1 − 1/n`,
/// which is the default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SpectralRate {
    /// Contraction `1 − 1/n`.
    #[default]
    OneOverN,
    /// Contraction `1 − 1/(2n)`.
    OneOverTwoN,
    /// Contraction `1 − (n+2)/(2n(n−1))`.
    ExactGap,
}

impl SpectralRate {
    /// The per-step contraction factor in `(0, 1)`.
    pub fn factor(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            SpectralRate::OneOverN => 1.0 - 1.0 / nf,
            SpectralRate::OneOverTwoN => 1.0 - 1.0 / (2.0 * nf),
            SpectralRate::ExactGap => 1.0 - spectral_gap(n),
        }
    }

    pub fn ln_factor(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            SpectralRate::OneOverN => (-1.0 / nf).ln_1p(),
            SpectralRate::OneOverTwoN => (-1.0 / (2.0 * nf)).ln_1p(),
            SpectralRate::ExactGap => (-spectral_gap(n)).ln_1p(),
        }
    }
}

/// Arguments of the conditioned-density sup bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Claim1Params {
    /// Absolute constant; unspecified upstream, default 1.
    pub c: f64,
    pub k: u64,
    pub n: usize,
    /// Smallest coordinate magnitude, in (0, 1).
    pub xmin: f64,
}

/// Natural log of `C^k · k^{k²} · xmin^{−n} · (−ln xmin)^k`.
///
/// Log space throughout: the raw value overflows doubles for `k ≥ 5`.
/// Returns `−∞` as `xmin → 1⁻` (the log factor vanishes).
pub fn claim1_density_bound(p: &Claim1Params) -> Result<f64, BoundsError> {
    if !(p.c > 0.0) {
        return Err(BoundsError::InvalidParameter("C must be positive".into()));
    }
    if p.k < 1 {
        return Err(BoundsError::InvalidParameter("k must be >= 1".into()));
    }
    if !(p.xmin > 0.0 && p.xmin < 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "xmin must be in (0, 1), got {}",
            p.xmin
        )));
    }
    let kf = p.k as f64;
    let terms = [
        kf * p.c.ln(),
        kf * kf * kf.ln(),
        -(p.n as f64) * p.xmin.ln(),
        kf * (-p.xmin.ln()).ln(),
    ];
    Ok(compensated_sum(&terms))
}

/// Natural log of the intermediate product form
/// `xmin^{−n} · (Σ_i (−ln|x_i|)^k) · C^k · Π_{m=1}^k m!`.
///
/// Kept for comparison against [`claim1_density_bound`], which it is always
/// dominated by in the regime `k ≥ n`.
pub fn claim1_density_bound_product_form(
    c: f64,
    k: u64,
    coords: &[f64],
) -> Result<f64, BoundsError> {
    if !(c > 0.0) || k < 1 {
        return Err(BoundsError::InvalidParameter(
            "need C > 0 and k >= 1".into(),
        ));
    }
    if coords.is_empty() || coords.iter().any(|x| !(x.abs() > 0.0 && x.abs() < 1.0)) {
        return Err(BoundsError::InvalidParameter(
            "coordinates must be nonzero with magnitude < 1".into(),
        ));
    }
    let n = coords.len() as f64;
    let kf = k as f64;
    let xmin = coords
        .iter()
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min);
    // ln Σ_i (−ln|x_i|)^k, factored to avoid overflow for large k.
    let lmax = coords
        .iter()
        .map(|x| -x.abs().ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let sum_scaled: f64 = coords
        .iter()
        .map(|x| (kf * ((-x.abs().ln()).ln() - lmax.ln())).exp())
        .sum();
    let ln_sum = kf * lmax.ln() + sum_scaled.ln();
    let ln_superfactorial: f64 = (1..=k).map(|m| ln_gamma(m as f64 + 1.0)).sum();
    let terms = [-n * xmin.ln(), ln_sum, kf * c.ln(), ln_superfactorial];
    Ok(compensated_sum(&terms))
}

/// The four summands of the total-variation bound after `k` conditioning
/// steps and `l` spectral steps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TvBoundBreakdown {
    /// `[coverage tail, n^{3/2} ε, ε^{1/4}, spectral term]`.
    pub summands: [f64; 4],
    /// Natural log of the spectral summand (finite even when the summand
    /// itself is reported as `+∞`).
    pub fourth_log: f64,
    pub total: f64,
}

/// Evaluates
/// `C(n,2)(1−1/C(n,2))^k + n^{3/2} ε + ε^{1/4} + C^k k^{k²} ε^{−n} (−ln ε)^k r^l`
/// with contraction `r` chosen by `rate`. The fourth summand is carried in
/// log space and exponentiated only when its log is negative; otherwise it is
/// reported as `+∞` (the bound is vacuous there and the raw value overflows).
pub fn final_tv_bound(
    n: usize,
    k: u64,
    l: u64,
    epsilon: f64,
    c: f64,
    rate: SpectralRate,
) -> Result<TvBoundBreakdown, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidParameter(format!("n = {n} < 2")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if k < 1 || l < 1 {
        return Err(BoundsError::InvalidParameter(
            "need k >= 1 and l >= 1".into(),
        ));
    }
    let s1 = eta_bound(n, k).raw;
    let s2 = (n as f64).powf(1.5) * epsilon;
    let s3 = epsilon.powf(0.25);
    let fourth_log = spectral_summand_log(n, k, l, epsilon, c, rate);
    let s4 = if fourth_log < 0.0 {
        fourth_log.exp()
    } else {
        f64::INFINITY
    };
    Ok(TvBoundBreakdown {
        summands: [s1, s2, s3, s4],
        fourth_log,
        total: s1 + s2 + s3 + s4,
    })
}

fn spectral_summand_log(
    n: usize,
    k: u64,
    l: u64,
    epsilon: f64,
    c: f64,
    rate: SpectralRate,
) -> f64 {
    let kf = k as f64;
    compensated_sum(&[
        kf * c.ln(),
        kf * kf * kf.ln(),
        -(n as f64) * epsilon.ln(),
        kf * (-epsilon.ln()).ln(),
        l as f64 * rate.ln_factor(n),
    ])
}

/// A complete step schedule: conditioning steps `k`, truncation radius `ε`,
/// spectral steps `l`, with the bound re-evaluated at those choices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundSchedule {
    pub n: usize,
    pub delta: f64,
    pub c: f64,
    pub cprime: f64,
    pub rate: SpectralRate,
    pub k: u64,
    pub epsilon: f64,
    pub l: u64,
    pub total: u64,
    pub bound: TvBoundBreakdown,
    /// Total-variation value of the schedule (`bound.total`); at most `3δ`.
    pub bound_value: f64,
    /// `C' n^5 (ln n)^3 (ln 1/δ)^3` — the budget the schedule is checked
    /// against.
    pub budget_cubed: f64,
    /// `C' n^5 (ln n)^2 (ln 1/δ)^2`, reported for comparison only.
    pub budget_squared: f64,
    /// `n^5 ln n`, reported for comparison only.
    pub budget_n5_log_n: f64,
}

/// Chooses `(k, ε, l)` so that every summand of [`final_tv_bound`] is at most
/// `delta`:
///
/// * `k = ⌈n² ln n ln(1/δ)⌉`,
/// * `ε = δ⁴ n^{−3/2} / 4` (strictly below the `δ⁴ n^{−3/2}/2` threshold),
/// * `l` = the smallest integer closing the log-linear inequality for the
///   spectral summand, solved exactly rather than through chained
///   over-estimates.
pub fn mixing_bound_schedule(
    n: usize,
    delta: f64,
    c: f64,
    cprime: f64,
    rate: SpectralRate,
) -> Result<BoundSchedule, BoundsError> {
    if n < 3 {
        return Err(BoundsError::InvalidParameter(format!(
            "schedule needs n >= 3, got {n}"
        )));
    }
    if !(delta > 0.0 && delta < (-1.0f64).exp()) {
        return Err(BoundsError::InvalidParameter(format!(
            "delta must be in (0, 1/e), got {delta}"
        )));
    }
    if !(c > 0.0 && cprime > 0.0) {
        return Err(BoundsError::InvalidParameter(
            "C and C' must be positive".into(),
        ));
    }
    let nf = n as f64;
    let log_inv_delta = -delta.ln();
    let k = (nf * nf * nf.ln() * log_inv_delta).ceil() as u64;
    let epsilon = delta.powi(4) * nf.powf(-1.5) / 4.0;

    // Smallest l with fourth_log(l) ≤ ln δ.
    let ln_rate = rate.ln_factor(n);
    let base_log = spectral_summand_log(n, k, 1, epsilon, c, rate) - ln_rate;
    let l_real = (delta.ln() - base_log) / ln_rate;
    if !l_real.is_finite() || l_real > 1e18 {
        return Err(BoundsError::Overflow);
    }
    let mut l = (l_real.ceil() as u64).max(1);
    while spectral_summand_log(n, k, l, epsilon, c, rate) > delta.ln() {
        l += 1;
        if l > 2_000_000_000_000_000_000 {
            return Err(BoundsError::Overflow);
        }
    }

    let total = k + l;
    let budget_cubed = cprime * nf.powi(5) * nf.ln().powi(3) * log_inv_delta.powi(3);
    if (total as f64) > budget_cubed {
        return Err(BoundsError::InfeasibleBudget {
            total,
            budget: budget_cubed,
        });
    }

    let bound = final_tv_bound(n, k, l, epsilon, c, rate)?;
    for (index, &value) in bound.summands.iter().enumerate() {
        if !(value <= delta) {
            return Err(BoundsError::ScheduleRecheck {
                index,
                value,
                delta,
            });
        }
    }
    debug_assert!(bound.total <= 3.0 * delta);

    Ok(BoundSchedule {
        n,
        delta,
        c,
        cprime,
        rate,
        k,
        epsilon,
        l,
        total,
        bound,
        bound_value: bound.total,
        budget_cubed,
        budget_squared: cprime * nf.powi(5) * nf.ln().powi(2) * log_inv_delta.powi(2),
        budget_n5_log_n: nf.powi(5) * nf.ln(),
    })
}
