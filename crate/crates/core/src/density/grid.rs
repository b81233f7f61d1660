//! Equal-area latitude-band grid on `S^2` with the kernel as a quadrature
//! operator.
//!
//! Cells are uniform in `(z, φ)` with `z = x_3`, so every cell has the same
//! area and quadrature weight `1/(nz·nφ)` with respect to the uniform
//! measure. Off-grid values come from 4-point Lagrange interpolation in each
//! chart direction; the stencil continues through the poles by reflecting the
//! band index and shifting the azimuth by π. Rotations about the `x_3` axis
//! are exact column shifts whenever `nφ` is a multiple of the angular rule
//! size.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Angles in the uniform rule for the circle average. Trapezoid on a period
/// is the plain average over equally spaced angles.
pub const THETA_POINTS: usize = 64;

/// Geometry of the grid: band/column counts and cached center coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    nz: usize,
    nphi: usize,
    z: Vec<f64>,
    rho: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
}

impl SphereGrid {
    pub fn new(nz: usize, nphi: usize) -> Self {
        assert!(nz >= 8, "need at least 8 latitude bands");
        assert!(nphi >= 8 && nphi % 2 == 0, "need an even azimuth count >= 8");
        let dz = 2.0 / nz as f64;
        let dphi = TAU / nphi as f64;
        let z: Vec<f64> = (0..nz).map(|i| -1.0 + (i as f64 + 0.5) * dz).collect();
        let rho: Vec<f64> = z.iter().map(|&zi| (1.0 - zi * zi).max(0.0).sqrt()).collect();
        let cos_phi: Vec<f64> = (0..nphi).map(|j| ((j as f64 + 0.5) * dphi).cos()).collect();
        let sin_phi: Vec<f64> = (0..nphi).map(|j| ((j as f64 + 0.5) * dphi).sin()).collect();
        Self {
            nz,
            nphi,
            z,
            rho,
            cos_phi,
            sin_phi,
        }
    }

    /// Grid with roughly `target` cells, near-square cells at the equator,
    /// and an azimuth count divisible by the angular rule (so the `x_3`-axis
    /// part of the kernel is exact).
    pub fn with_cells(target: usize) -> Self {
        let nz = ((target as f64 / PI).sqrt().round() as usize).max(8);
        let cols = (nz as f64 * PI / THETA_POINTS as f64).round().max(1.0) as usize;
        Self::new(nz, cols * THETA_POINTS)
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn cell_count(&self) -> usize {
        self.nz * self.nphi
    }

    /// Quadrature weight of every cell (they are all equal).
    pub fn weight(&self) -> f64 {
        1.0 / self.cell_count() as f64
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let (iz, j) = (idx / self.nphi, idx % self.nphi);
        [
            self.rho[iz] * self.cos_phi[j],
            self.rho[iz] * self.sin_phi[j],
            self.z[iz],
        ]
    }

    /// Cell index containing a point (by its `(z, φ)` chart coordinates).
    pub fn cell_of(&self, x: [f64; 3]) -> usize {
        let iz = (((x[2] + 1.0) / 2.0 * self.nz as f64) as usize).min(self.nz - 1);
        let phi = x[1].atan2(x[0]).rem_euclid(TAU);
        let j = ((phi / TAU * self.nphi as f64) as usize).min(self.nphi - 1);
        iz * self.nphi + j
    }

    /// Lagrange weights for nodes `{0, 1, 2, 3}` evaluated at `u`.
    #[inline]
    fn lagrange_weights(u: f64) -> [f64; 4] {
        [
            -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
            u * (u - 2.0) * (u - 3.0) / 2.0,
            -u * (u - 1.0) * (u - 3.0) / 2.0,
            u * (u - 1.0) * (u - 2.0) / 6.0,
        ]
    }

    /// Interpolate `values` at chart position `(z, φ)` with a 4x4 Lagrange
    /// stencil: periodic in φ, clamped one-sided in z at the boundary bands
    /// (the z chart folds at the poles, so reflecting across them would put
    /// a kink in the data). With `limited` the result is clamped into the
    /// stencil range, which keeps the operator a sup/min contraction on
    /// densities at the cost of the cubic order near extrema.
    pub fn interpolate(&self, values: &[f64], z: f64, phi: f64, limited: bool) -> f64 {
        let nphi = self.nphi as isize;
        let fz = (z.clamp(-1.0, 1.0) + 1.0) / 2.0 * self.nz as f64 - 0.5;
        let base_z = (fz.floor() as isize - 1).clamp(0, self.nz as isize - 4) as usize;
        let uz = fz - base_z as f64;
        let fp = phi.rem_euclid(TAU) / TAU * self.nphi as f64 - 0.5;
        let jp0 = fp.floor();
        let up = fp - jp0 + 1.0;
        let jp0 = jp0 as isize;

        let wz = Self::lagrange_weights(uz);
        let wp = Self::lagrange_weights(up);
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (r, &wzr) in wz.iter().enumerate() {
            let base = (base_z + r) * self.nphi;
            let mut rowval = 0.0;
            for (c, &wpc) in wp.iter().enumerate() {
                let col = (jp0 + c as isize - 1).rem_euclid(nphi) as usize;
                let v = values[base + col];
                rowval += wpc * v;
                if limited {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            acc += wzr * rowval;
        }
        if limited {
            acc.clamp(lo, hi)
        } else {
            acc
        }
    }

    fn kernel_value_at(
        &self,
        values: &[f64],
        idx: usize,
        theta: &[(f64, f64)],
        limited: bool,
    ) -> f64 {
        let (iz, j) = (idx / self.nphi, idx % self.nphi);
        let x = [
            self.rho[iz] * self.cos_phi[j],
            self.rho[iz] * self.sin_phi[j],
            self.z[iz],
        ];
        let row = &values[iz * self.nphi..(iz + 1) * self.nphi];
        let mut acc = 0.0;

        // Pair (1,2): rotation about the x3 axis is an exact column shift
        // because nphi is a multiple of the rule size.
        debug_assert_eq!(self.nphi % theta.len(), 0);
        let stride = self.nphi / theta.len();
        let mut sum12 = 0.0;
        for t in 0..theta.len() {
            sum12 += row[(j + self.nphi - t * stride) % self.nphi];
        }
        acc += sum12;

        // Pairs (1,3) and (2,3): rotate the center and interpolate.
        for &(s, c) in theta {
            let x1 = x[0] * c + x[2] * s;
            let z13 = -x[0] * s + x[2] * c;
            let phi13 = x[1].atan2(x1);
            acc += self.interpolate(values, z13, phi13, limited);

            let x2 = x[1] * c + x[2] * s;
            let z23 = -x[1] * s + x[2] * c;
            let phi23 = x2.atan2(x[0]);
            acc += self.interpolate(values, z23, phi23, limited);
        }
        acc / (3 * theta.len()) as f64
    }

    /// One application of the kernel to a grid function: the average over
    /// the three coordinate planes of the circle average of `values`.
    ///
    /// The unlimited form is linear and keeps the full interpolation order;
    /// use `limited = true` when evolving densities (guarantees the output
    /// range stays inside the input range).
    pub fn apply_kernel(&self, values: &[f64], limited: bool) -> Vec<f64> {
        assert_eq!(values.len(), self.cell_count());
        let theta: Vec<(f64, f64)> = (0..THETA_POINTS)
            .map(|t| (TAU * t as f64 / THETA_POINTS as f64).sin_cos())
            .collect();
        let mut out = vec![0.0; values.len()];
        let fill = |(idx, slot): (usize, &mut f64)| {
            *slot = self.kernel_value_at(values, idx, &theta, limited);
        };
        #[cfg(feature = "parallel")]
        out.par_iter_mut().enumerate().map(|(i, s)| (i, s)).for_each(fill);
        #[cfg(not(feature = "parallel"))]
        out.iter_mut().enumerate().map(|(i, s)| (i, s)).for_each(fill);
        out
    }

    /// Sequential twin of [`apply_kernel`], kept callable with the parallel
    /// feature on so the two paths can be compared and benchmarked.
    pub fn apply_kernel_seq(&self, values: &[f64], limited: bool) -> Vec<f64> {
        assert_eq!(values.len(), self.cell_count());
        let theta: Vec<(f64, f64)> = (0..THETA_POINTS)
            .map(|t| (TAU * t as f64 / THETA_POINTS as f64).sin_cos())
            .collect();
        (0..values.len())
            .map(|idx| self.kernel_value_at(values, idx, &theta, limited))
            .collect()
    }

    /// Quadrature inner product `Σ_c w f(c) g(c)`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> f64 {
        let w = self.weight();
        crate::stats::pairwise_sum_by(f.len(), &|i| f[i] * g[i]) * w
    }

    /// Quadrature mass `Σ_c w v(c)`.
    pub fn mass(&self, values: &[f64]) -> f64 {
        crate::stats::pairwise_sum(values) * self.weight()
    }
}

/// A probability density with respect to the uniform measure, sampled at
/// cell centers. Constructors normalize to unit mass; the pre-normalization
/// mass is reported where it is informative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridDensity {
    grid: SphereGrid,
    values: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DensityError {
    #[error("density is not normalizable: mass {0}")]
    BadMass(f64),
    #[error("density has a negative value: {0}")]
    Negative(f64),
    #[error("input circle density is not normalized: mean {0}")]
    NotNormalized(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("grid resolution too coarse: renormalization factor {factor} at step {step} drifted beyond 1e-3")]
    ResolutionAbort { step: usize, factor: f64 },
    #[error(transparent)]
    Quadrature(#[from] crate::quad::QuadError),
}

impl GridDensity {
    /// The uniform density (constant 1).
    pub fn uniform(grid: SphereGrid) -> Self {
        let values = vec![1.0; grid.cell_count()];
        Self { grid, values }
    }

    /// Normalize raw nonnegative cell values into a density. Returns the
    /// density together with the raw quadrature mass.
    pub fn from_values(grid: SphereGrid, mut values: Vec<f64>) -> Result<(Self, f64), DensityError> {
        if values.len() != grid.cell_count() {
            return Err(DensityError::InvalidParam(format!(
                "expected {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        for v in &mut values {
            if *v < 0.0 {
                if *v < -1e-9 {
                    return Err(DensityError::Negative(*v));
                }
                *v = 0.0;
            }
        }
        let mass = grid.mass(&values);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(DensityError::BadMass(mass));
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok((Self { grid, values }, mass))
    }

    /// Density from a pointwise function of the cell center.
    pub fn from_fn(
        grid: SphereGrid,
        f: impl Fn([f64; 3]) -> f64,
    ) -> Result<(Self, f64), DensityError> {
        let values: Vec<f64> = (0..grid.cell_count()).map(|i| f(grid.cell_center(i))).collect();
        Self::from_values(grid, values)
    }

    /// Normalized indicator of the spherical cap of geodesic radius
    /// `radius` around `e1`. A radius of π or more covers the whole sphere.
    pub fn cap(grid: SphereGrid, radius: f64) -> Result<Self, DensityError> {
        if !(radius > 0.0) {
            return Err(DensityError::InvalidParam(format!(
                "cap radius must be positive, got {radius}"
            )));
        }
        let threshold = radius.cos();
        let (density, _) = Self::from_fn(grid, |x| if x[0] >= threshold { 1.0 } else { 0.0 })?;
        Ok(density)
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass(&self.values)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// One kernel application followed by renormalization. Returns the new
    /// density and the renormalization factor (reciprocal of the mass the
    /// raw application produced); the factor is the mass-conservation
    /// diagnostic and should sit within 1e-4 of 1 on adequate grids.
    pub fn kernel_step(&self) -> Result<(Self, f64), DensityError> {
        let raw = self.grid.apply_kernel(&self.values, true);
        let mass = self.grid.mass(&raw);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(DensityError::BadMass(mass));
        }
        let factor = 1.0 / mass;
        let values: Vec<f64> = raw.into_iter().map(|v| v * factor).collect();
        Ok((
            Self {
                grid: self.grid.clone(),
                values,
            },
            factor,
        ))
    }

    /// CSV rows `(cell index, x, y, z, weight, value)` with full-precision
    /// numbers.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "cell,x,y,z,weight,value")?;
        let w = self.grid.weight();
        for idx in 0..self.grid.cell_count() {
            let c = self.grid.cell_center(idx);
            writeln!(
                out,
                "{idx},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c[0], c[1], c[2], w, self.values[idx]
            )?;
        }
        Ok(())
    }
}
