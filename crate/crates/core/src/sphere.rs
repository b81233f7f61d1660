//! Geometry and randomness primitives on the unit sphere `S^{n-1}`.
//!
//! A state is a unit vector of velocities; a step rotates one coordinate
//! 2-plane. Pairs are addressed by a canonical row-major rank over `i < j`,
//! which doubles as the coverage-bitmask index in `walk`.

use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rotations between renormalization checkpoints. Projecting back onto the
/// sphere this often bounds floating-point norm drift without measurable
/// cost.
pub const RENORM_INTERVAL: u64 = 1024;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("rotation indices ({i}, {j}) invalid for dimension {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("rotation angle is not finite")]
    NonFiniteAngle,
}

/// A point on `S^{n-1}`: the normalized velocity vector of the n particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// First basis vector `e1`; the chain's point-mass start.
    pub fn e1(n: usize) -> Result<Self, SphereError> {
        if n < 2 {
            return Err(SphereError::DimensionTooSmall(n));
        }
        let mut coords = vec![0.0; n];
        coords[0] = 1.0;
        Ok(Self { coords })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn from_coords(mut coords: Vec<f64>) -> Result<Self, SphereError> {
        if coords.len() < 2 {
            return Err(SphereError::DimensionTooSmall(coords.len()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        for c in &mut coords {
            *c /= norm;
        }
        Ok(Self { coords })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Re-projects onto the sphere (the checkpoint operation).
    pub fn renormalize(&mut self) {
        let norm = self.norm();
        for c in &mut self.coords {
            *c /= norm;
        }
    }

    /// Applies a Givens rotation in place:
    /// `x_i' = x_i cos θ + x_j sin θ`, `x_j' = −x_i sin θ + x_j cos θ`.
    pub fn rotate(&mut self, ev: &RotationEvent) -> Result<(), SphereError> {
        let n = self.n();
        if ev.j >= n {
            return Err(SphereError::IndexOutOfRange {
                i: ev.i,
                j: ev.j,
                n,
            });
        }
        if !ev.theta.is_finite() {
            return Err(SphereError::NonFiniteAngle);
        }
        let (s, c) = ev.theta.sin_cos();
        let xi = self.coords[ev.i];
        let xj = self.coords[ev.j];
        self.coords[ev.i] = xi * c + xj * s;
        self.coords[ev.j] = -xi * s + xj * c;
        Ok(())
    }

    /// `rotate` returning the new point.
    pub fn rotated(&self, ev: &RotationEvent) -> Result<Self, SphereError> {
        let mut out = self.clone();
        out.rotate(ev)?;
        Ok(out)
    }
}

/// One collision: an unordered coordinate pair (stored `i < j`, 0-based) and
/// an angle in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationEvent {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
}

impl RotationEvent {
    pub fn new(i: usize, j: usize, theta: f64) -> Self {
        debug_assert!(i < j);
        Self { i, j, theta }
    }
}

/// Number of unordered coordinate pairs, `C(n, 2)`.
pub fn pair_count(n: usize) -> u64 {
    (n as u64) * (n as u64 - 1) / 2
}

/// Canonical rank of the pair `(i, j)`, row-major over `i < j`.
pub fn pair_rank(n: usize, i: usize, j: usize) -> u64 {
    debug_assert!(i < j && j < n);
    let (n, i, j) = (n as u64, i as u64, j as u64);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_rank`]: exact, no rejection.
pub fn pair_unrank(n: usize, rank: u64) -> (usize, usize) {
    debug_assert!(rank < pair_count(n));
    let nn = n as u64;
    // Solve i(2n−i−1)/2 ≤ rank via the quadratic formula, then fix up the
    // (at most one-off) float rounding.
    let disc = ((2 * nn - 1) * (2 * nn - 1)) as f64 - 8.0 * rank as f64;
    let mut i = (((2 * nn - 1) as f64 - disc.sqrt()) / 2.0).floor() as u64;
    let base = |i: u64| i * (2 * nn - i - 1) / 2;
    while i > 0 && base(i) > rank {
        i -= 1;
    }
    while base(i + 1) <= rank {
        i += 1;
    }
    let j = rank - base(i) + i + 1;
    (i as usize, j as usize)
}

/// Uniform point on `S^{n-1}`: a standard Gaussian vector normalized, with
/// the (probability-zero) zero vector rejected.
pub fn sample_uniform_sphere(n: usize, rng: &mut RandomStream) -> Result<SpherePoint, SphereError> {
    if n < 2 {
        return Err(SphereError::DimensionTooSmall(n));
    }
    loop {
        let mut coords = vec![0.0; n];
        let mut k = 0;
        while k + 1 < n {
            let (a, b) = rng.next_gaussian_pair();
            coords[k] = a;
            coords[k + 1] = b;
            k += 2;
        }
        if k < n {
            coords[k] = rng.next_gaussian_pair().0;
        }
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if norm2 > 1e-300 {
            let norm = norm2.sqrt();
            for c in &mut coords {
                *c /= norm;
            }
            return Ok(SpherePoint { coords });
        }
    }
}

/// Uniform rotation event: the pair uniform over all `C(n,2)` pairs (via
/// [`pair_unrank`] on a uniform integer) and θ uniform on `[0, 2π)`,
/// independently.
pub fn draw_rotation_event(n: usize, rng: &mut RandomStream) -> RotationEvent {
    debug_assert!(n >= 2);
    let rank = rng.next_below(pair_count(n));
    let (i, j) = pair_unrank(n, rank);
    let theta = rng.next_f64() * std::f64::consts::TAU;
    RotationEvent { i, j, theta }
}
