//! Deterministic verification on a discretized `S^2`: the kernel as a
//! quadrature operator, the circle-averaging pushforward from the circle to
//! the sphere, and the technical integral inequality used by the density
//! induction.

mod grid;

pub use grid::{DensityError, GridDensity, SphereGrid, THETA_POINTS};

use crate::quad::adaptive_simpson;
use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, TAU};

/// Hard ceiling on trace length; grid diffusion limits fidelity past this.
pub const MAX_TRACE_STEPS: usize = 200;

/// One row of a sup/min density trace.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub sup: f64,
    pub min: f64,
    /// Renormalization factor applied after this step (1 at step 0).
    pub renorm: f64,
}

/// Iterate the kernel, recording the sup and min of the density. The sup is
/// non-increasing and the min non-decreasing: the kernel averages
/// measure-preserving maps and the limited interpolation respects the range.
/// Aborts when the renormalization factor drifts beyond 1e-3, which signals
/// the grid is too coarse for the density being evolved.
pub fn sup_density_trace(
    g0: &GridDensity,
    steps: usize,
) -> Result<Vec<TraceRow>, DensityError> {
    if steps > MAX_TRACE_STEPS {
        return Err(DensityError::InvalidParam(format!(
            "trace capped at {MAX_TRACE_STEPS} steps, asked for {steps}"
        )));
    }
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(TraceRow {
        step: 0,
        sup: g0.sup(),
        min: g0.min(),
        renorm: 1.0,
    });
    let mut current = g0.clone();
    for step in 1..=steps {
        let (next, factor) = current.kernel_step()?;
        if (factor - 1.0).abs() > 1e-3 {
            return Err(DensityError::ResolutionAbort { step, factor });
        }
        rows.push(TraceRow {
            step,
            sup: next.sup(),
            min: next.min(),
            renorm: factor,
        });
        current = next;
    }
    Ok(rows)
}

/// Result of pushing a circle density through one uniform-angle rotation.
#[derive(Clone, Debug)]
pub struct Pushforward {
    /// The exact pushforward density, normalized onto the grid.
    pub density: GridDensity,
    /// Quadrature mass of the exact cell-center values before
    /// normalization. Short of 1 by the cell-center sampling error near the
    /// two integrable `(x_2²+x_3²)^{−1/2}` singular points at `±e1`.
    pub raw_mass: f64,
    /// Fitted constant `c` in `value ≈ c · (x_2²+x_3²)^{−1/2} · h`, measured
    /// on the raw values over the admissible region.
    pub measured_constant: f64,
    /// `measured_constant` relative to the `1/(2π)` prefactor the circle
    /// averaging formula carries.
    pub prefactor_ratio: f64,
    /// Worst relative deviation from the fitted shape on the admissible
    /// region (`x_2²+x_3² ≥ 1e-3`).
    pub max_shape_deviation: f64,
}

/// Exact pushforward of a density `h` on the circle `{x_3 = 0}` through one
/// uniform rotation in the `(2,3)`-plane.
///
/// `h` is a density with respect to the uniform measure on the circle,
/// parameterized by angle (`α ↦ (cos α, sin α, 0)`); it must be nonnegative
/// with unit mass. The resulting sphere density is
/// `[h(α) + h(2π−α)] / (π sqrt(x_2²+x_3²))` at `cos α = x_1`, which for
/// symmetric `h` is `(2/π)·(x_2²+x_3²)^{−1/2}·h`.
pub fn circle_average_pushforward(
    h: &dyn Fn(f64) -> f64,
    grid: SphereGrid,
) -> Result<Pushforward, DensityError> {
    // Normalization and sign checks on a periodic rule (spectrally accurate).
    const CHECK_POINTS: usize = 4096;
    let mut mean = 0.0;
    for k in 0..CHECK_POINTS {
        let v = h(TAU * k as f64 / CHECK_POINTS as f64);
        if v < -1e-12 {
            return Err(DensityError::Negative(v));
        }
        mean += v;
    }
    mean /= CHECK_POINTS as f64;
    if (mean - 1.0).abs() > 1e-6 {
        return Err(DensityError::NotNormalized(mean));
    }

    let cells = grid.cell_count();
    let mut raw = Vec::with_capacity(cells);
    for idx in 0..cells {
        let x = grid.cell_center(idx);
        let r = (x[1] * x[1] + x[2] * x[2]).sqrt();
        let alpha = r.atan2(x[0]); // in [0, π], sin α = r
        raw.push((h(alpha) + h(TAU - alpha)) / (PI * r));
    }
    let raw_mass = grid.mass(&raw);

    // Fit the single proportionality constant on the admissible region.
    let mut href_max = 0.0f64;
    let shape: Vec<f64> = (0..cells)
        .map(|idx| {
            let x = grid.cell_center(idx);
            let r2 = x[1] * x[1] + x[2] * x[2];
            let alpha = r2.sqrt().atan2(x[0]);
            let href = 0.5 * (h(alpha) + h(TAU - alpha));
            href_max = href_max.max(href);
            if r2 >= 1e-3 {
                href / r2.sqrt()
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, s) in raw.iter().zip(&shape) {
        if s.is_finite() && *s > 1e-9 * href_max {
            num += v * s;
            den += s * s;
        }
    }
    if den == 0.0 {
        return Err(DensityError::InvalidParam(
            "no admissible cells to fit the pushforward shape".into(),
        ));
    }
    let measured_constant = num / den;
    let mut max_dev = 0.0f64;
    for (v, s) in raw.iter().zip(&shape) {
        if s.is_finite() && *s > 1e-9 * href_max {
            max_dev = max_dev.max((v / (measured_constant * s) - 1.0).abs());
        }
    }

    let (density, _) = GridDensity::from_values(grid, raw)?;
    Ok(Pushforward {
        density,
        raw_mass,
        measured_constant,
        prefactor_ratio: measured_constant * TAU,
        max_shape_deviation: max_dev,
    })
}

/// Parameters of the technical integral inequality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LemmaParams {
    pub x1: f64,
    pub x2: f64,
    pub xs: f64,
    pub xt: f64,
    pub j: u32,
}

/// One checked instance: quadrature left side, closed-form right side.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LemmaCheckRecord {
    pub params: LemmaParams,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub lhs_error_estimate: f64,
}

/// Checks
/// `∫_0^1 ((x1+x2)θ+xs)^{−1} ((x1+x2)θ+xt)^{−1} (−ln[(x1+x2)θ])^{j−1} dθ`
/// `  ≤ 4(j+1)! (xs+xt)^{−1} (x1+x2)^{−1} [(−ln x1)^j + (−ln x2)^j + (−ln xs)^j + (−ln xt)^j]`.
///
/// The substitution `u = −ln((x1+x2)θ)` turns the logarithmic endpoint
/// singularity into an exponentially damped integrand, which adaptive
/// subdivision then resolves uniformly down to parameters of 1e-6.
/// Restricted to `x1 + x2 ≤ 1` so the log factor stays nonnegative over the
/// whole range, and to `j ≤ 12` (the factorial and the `(−ln x)^j` factors
/// are carried in log space above `j = 8`).
pub fn technical_lemma_check(params: LemmaParams) -> Result<LemmaCheckRecord, DensityError> {
    let LemmaParams { x1, x2, xs, xt, j } = params;
    for (name, v) in [("x1", x1), ("x2", x2), ("xs", xs), ("xt", xt)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(DensityError::InvalidParam(format!(
                "{name} must be in (0, 1], got {v}"
            )));
        }
    }
    if x1 + x2 > 1.0 {
        return Err(DensityError::InvalidParam(format!(
            "x1 + x2 must be at most 1, got {}",
            x1 + x2
        )));
    }
    if !(1..=12).contains(&j) {
        return Err(DensityError::InvalidParam(format!(
            "j must be in 1..=12, got {j}"
        )));
    }

    let s = x1 + x2;
    let u0 = -s.ln(); // ≥ 0
    let jm1 = (j - 1) as i32;
    let integrand = move |u: f64| {
        let e = (-u).exp();
        let poly = if jm1 == 0 { 1.0 } else { u.powi(jm1) };
        poly * e / (s * (e + xs) * (e + xt))
    };
    // Main segment covers the crossover at u ≈ −ln min(xs, xt); verified
    // tail extensions follow until negligible.
    let lmax = -(xs.min(xt)).ln();
    let mut upper = u0 + lmax + 60.0 + 10.0 * j as f64;
    let main = adaptive_simpson(integrand, u0, upper, 1e-9, 1e-300)?;
    let mut lhs = main.value;
    let mut err = main.error_estimate;
    for _ in 0..12 {
        let ext = adaptive_simpson(integrand, upper, upper + 150.0, 1e-9, 1e-300)?;
        lhs += ext.value;
        err += ext.error_estimate;
        upper += 150.0;
        if ext.value.abs() <= 1e-12 * lhs.abs() {
            break;
        }
    }

    // Right side via logs (the factorial and power factors overflow long
    // before f64 range is actually exhausted only for extreme inputs, but
    // the log route costs nothing and is uniform in j).
    let bracket: f64 = [x1, x2, xs, xt]
        .iter()
        .map(|&x| (-x.ln()).powi(j as i32))
        .sum();
    let rhs = if bracket > 0.0 {
        (4.0f64.ln() + ln_gamma(j as f64 + 2.0) - (xs + xt).ln() - s.ln() + bracket.ln()).exp()
    } else {
        0.0
    };

    Ok(LemmaCheckRecord {
        params,
        lhs,
        rhs,
        holds: lhs <= rhs,
        lhs_error_estimate: err,
    })
}

/// Outcome of a randomized sweep of [`technical_lemma_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaSweepReport {
    pub draws: usize,
    pub violations: usize,
    /// Largest observed `lhs/rhs` (the margin; below 1 everywhere when the
    /// inequality holds).
    pub worst_margin: f64,
    pub worst_params: Option<LemmaParams>,
}

/// Randomized parameter sweep: `x1, x2` log-uniform in `[1e-6, 1/2]`,
/// `xs, xt` log-uniform in `[1e-6, 1]`, `j` uniform in `1..=8`.
pub fn lemma3_sweep(draws: usize, seed: u64) -> Result<LemmaSweepReport, DensityError> {
    let mut rng = RandomStream::new(seed, 0);
    let log_uniform = |lo: f64, hi: f64, r: &mut RandomStream| -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * r.next_f64()).exp()
    };
    let mut violations = 0;
    let mut worst_margin = 0.0f64;
    let mut worst_params = None;
    for _ in 0..draws {
        let params = LemmaParams {
            x1: log_uniform(1e-6, 0.5, &mut rng),
            x2: log_uniform(1e-6, 0.5, &mut rng),
            xs: log_uniform(1e-6, 1.0, &mut rng),
            xt: log_uniform(1e-6, 1.0, &mut rng),
            j: 1 + rng.next_below(8) as u32,
        };
        let rec = technical_lemma_check(params)?;
        if !rec.holds {
            violations += 1;
        }
        let margin = rec.lhs / rec.rhs;
        if margin > worst_margin {
            worst_margin = margin;
            worst_params = Some(params);
        }
    }
    Ok(LemmaSweepReport {
        draws,
        violations,
        worst_margin,
        worst_params,
    })
}

/// Random smooth test function for operator checks: a polynomial in
/// `(x_3, x_1²−x_2², x_1 x_2)`, i.e. smooth on the sphere *and* polynomial
/// in the grid chart, so interpolation keeps its full order uniformly up to
/// the poles.
pub fn random_smooth_function(grid: &SphereGrid, rng: &mut RandomStream) -> Vec<f64> {
    let coeff: Vec<f64> = (0..8).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    (0..grid.cell_count())
        .map(|idx| {
            let x = grid.cell_center(idx);
            let z = x[2];
            let a = x[0] * x[0] - x[1] * x[1];
            let b = x[0] * x[1];
            coeff[0]
                + coeff[1] * z
                + coeff[2] * z * z
                + coeff[3] * a
                + coeff[4] * b
                + coeff[5] * z * a
                + coeff[6] * z * z * z
                + coeff[7] * a * a
        })
        .collect()
}

/// `|⟨Kf, g⟩ − ⟨f, Kg⟩|` for the unlimited (linear) kernel.
pub fn self_adjointness_defect(grid: &SphereGrid, f: &[f64], g: &[f64]) -> f64 {
    let kf = grid.apply_kernel(f, false);
    let kg = grid.apply_kernel(g, false);
    (grid.inner_product(&kf, g) - grid.inner_product(f, &kg)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{draw_rotation_event, sample_uniform_sphere};

    #[test]
    fn lemma_spot_value_j1_quarters() {
        let rec = technical_lemma_check(LemmaParams {
            x1: 0.25,
            x2: 0.25,
            xs: 0.25,
            xt: 0.25,
            j: 1,
        })
        .unwrap();
        // Closed form: ∫_0^1 (θ/2 + 1/4)^{−2} dθ = 16/3.
        assert!((rec.lhs - 16.0 / 3.0).abs() <= 1e-9, "lhs {}", rec.lhs);
        assert!(rec.holds);
    }

    #[test]
    fn lemma_lhs_matches_closed_form_j1() {
        // j = 1, a ≠ b: ∫_0^1 (sθ+a)^{−1}(sθ+b)^{−1} dθ
        //             = ln(b(a+s) / (a(b+s))) / (s(b−a)).
        let cases = [
            (0.3, 0.2, 0.7, 0.05),
            (0.1, 0.4, 0.01, 0.9),
            (0.45, 0.45, 1.0, 0.3),
        ];
        for (x1, x2, xs, xt) in cases {
            let s: f64 = x1 + x2;
            let (a, b) = (xs as f64, xt as f64);
            let exact = ((b * (a + s)) / (a * (b + s))).ln() / (s * (b - a));
            let rec = technical_lemma_check(LemmaParams { x1, x2, xs, xt, j: 1 }).unwrap();
            assert!(
                (rec.lhs - exact).abs() <= 1e-8 * exact.abs(),
                "lhs {} vs {exact}",
                rec.lhs
            );
        }
    }

    #[test]
    fn lemma_lhs_bounded_by_pure_log_integral_when_weights_are_one() {
        // xs = xt = 1 makes both rational factors ≤ 1, so the lhs is below
        // ∫_0^1 (−ln sθ)^{j−1} dθ = Γ(j, −ln s) / s (upper incomplete).
        for j in [2u32, 4] {
            let (x1, x2) = (0.25, 0.25);
            let s: f64 = 0.5;
            let rec = technical_lemma_check(LemmaParams {
                x1,
                x2,
                xs: 1.0,
                xt: 1.0,
                j,
            })
            .unwrap();
            let cap = adaptive_simpson(
                |u: f64| u.powi(j as i32 - 1) * (-u).exp() / s,
                -s.ln(),
                60.0,
                1e-10,
                1e-14,
            )
            .unwrap()
            .value;
            assert!(rec.lhs <= cap * (1.0 + 1e-8), "lhs {} cap {cap}", rec.lhs);
            assert!(rec.holds);
        }
    }

    #[test]
    fn lemma_grid_sweep_j1_symmetric() {
        // 20x20 log-spaced grid over (x1 = x2, xs = xt).
        for a in 0..20 {
            for b in 0..20 {
                let x1 = 10f64.powf(-6.0 + 5.7 * a as f64 / 19.0).min(0.5);
                let xs = 10f64.powf(-6.0 + 6.0 * b as f64 / 19.0).min(1.0);
                let rec = technical_lemma_check(LemmaParams {
                    x1,
                    x2: x1,
                    xs,
                    xt: xs,
                    j: 1,
                })
                .unwrap();
                assert!(rec.holds, "violated at x1={x1} xs={xs}: {rec:?}");
            }
        }
    }

    #[test]
    fn lemma_rejects_bad_params() {
        let ok = LemmaParams {
            x1: 0.3,
            x2: 0.3,
            xs: 0.5,
            xt: 0.5,
            j: 1,
        };
        assert!(technical_lemma_check(LemmaParams { x1: 0.6, x2: 0.6, ..ok }).is_err());
        assert!(technical_lemma_check(LemmaParams { xs: 0.0, ..ok }).is_err());
        assert!(technical_lemma_check(LemmaParams { j: 13, ..ok }).is_err());
        assert!(technical_lemma_check(LemmaParams { j: 0, ..ok }).is_err());
    }

    #[test]
    fn lemma_sweep_small_has_no_violations() {
        let report = lemma3_sweep(300, 2027).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_margin < 1.0);
        assert!(report.worst_margin > 0.0);
    }

    #[test]
    fn pushforward_of_uniform_circle_density() {
        let grid = SphereGrid::with_cells(1000);
        let p = circle_average_pushforward(&|_| 1.0, grid).unwrap();
        // Constant fits exactly: value·r ≡ 2/π on the raw values.
        assert!(
            (p.measured_constant - 2.0 / PI).abs() <= 1e-12,
            "constant {}",
            p.measured_constant
        );
        assert!(p.max_shape_deviation <= 1e-10);
        assert!((p.prefactor_ratio - 4.0).abs() <= 1e-10);
        // Cell-center quadrature loses some mass at the two singular points.
        assert!((p.raw_mass - 1.0).abs() < 0.05, "raw mass {}", p.raw_mass);
        assert!((p.density.mass() - 1.0).abs() < 1e-12);
    }

    /// `x_1`-marginal CDF of a grid density by cell-center quadrature.
    fn grid_x1_cdf(d: &GridDensity, t: f64) -> f64 {
        let g = d.grid();
        let w = g.weight();
        (0..g.cell_count())
            .filter(|&i| g.cell_center(i)[0] <= t)
            .map(|i| d.values()[i] * w)
            .sum()
    }

    #[test]
    fn pushforward_matches_monte_carlo_histogram() {
        // Oracle for h ≡ 1: sample (cos α, sin α cos θ, sin α sin θ) with
        // α, θ uniform; its x1 marginal is the arcsine law, and the grid
        // density's marginal must agree up to cell-quadrature coarseness.
        let grid = SphereGrid::new(32, 128);
        let p = circle_average_pushforward(&|_| 1.0, grid).unwrap();
        let m = 1_000_000usize;
        let mut rng = RandomStream::new(7345, 0);
        let cuts = [-0.8, -0.4, 0.0, 0.4, 0.8];
        let mut mc = [0.0f64; 5];
        for _ in 0..m {
            let alpha = rng.next_f64() * TAU;
            let x1 = alpha.cos();
            for (acc, &t) in mc.iter_mut().zip(&cuts) {
                if x1 <= t {
                    *acc += 1.0;
                }
            }
        }
        for (acc, &t) in mc.iter_mut().zip(&cuts) {
            *acc /= m as f64;
            let exact = 0.5 + t.asin() / PI;
            // MC against the closed-form arcsine CDF: pure sampling noise.
            let se = (exact * (1.0 - exact) / m as f64).sqrt();
            assert!((*acc - exact).abs() <= 4.0 * se, "mc {acc} vs {exact}");
            // Grid density against the same CDF: quadrature coarseness only.
            let ours = grid_x1_cdf(&p.density, t);
            assert!((ours - exact).abs() <= 0.02, "grid {ours} vs {exact} at t={t}");
        }
    }

    #[test]
    fn pushforward_of_bump_concentrates_near_e1() {
        // Smooth symmetric bump at angle 0 (a von Mises profile, normalized
        // numerically).
        let kappa = 20.0;
        let norm = {
            let pts = 4096;
            (0..pts)
                .map(|k| (kappa * (TAU * k as f64 / pts as f64).cos()).exp())
                .sum::<f64>()
                / pts as f64
        };
        let h = move |alpha: f64| (kappa * alpha.cos()).exp() / norm;
        let grid = SphereGrid::new(24, 64);
        let p = circle_average_pushforward(&h, grid.clone()).unwrap();
        assert!(p.max_shape_deviation <= 1e-10);
        assert!((p.density.mass() - 1.0).abs() < 1e-12);
        // Mass concentrates on x1 > 0.8.
        let w = grid.weight();
        let mass_near: f64 = (0..grid.cell_count())
            .filter(|&i| grid.cell_center(i)[0] > 0.8)
            .map(|i| p.density.values()[i] * w)
            .sum();
        assert!(mass_near > 0.8, "mass near e1: {mass_near}");
    }

    #[test]
    fn pushforward_rejects_unnormalized_or_negative() {
        let grid = SphereGrid::new(8, 16);
        assert!(matches!(
            circle_average_pushforward(&|_| 2.0, grid.clone()),
            Err(DensityError::NotNormalized(_))
        ));
        assert!(matches!(
            circle_average_pushforward(&|a| a.cos(), grid),
            Err(DensityError::Negative(_))
        ));
    }

    #[test]
    fn trace_of_uniform_density_is_flat() {
        let grid = SphereGrid::with_cells(1000);
        let rows = sup_density_trace(&GridDensity::uniform(grid), 5).unwrap();
        for row in &rows {
            assert!((row.sup - 1.0).abs() <= 1e-12);
            assert!((row.min - 1.0).abs() <= 1e-12);
            assert!((row.renorm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn trace_of_cap_is_monotone_and_brackets_one() {
        let grid = SphereGrid::new(48, 128);
        let cap = GridDensity::cap(grid, 0.5).unwrap();
        let rows = sup_density_trace(&cap, 12).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].sup <= pair[0].sup + 1e-9, "sup rose: {pair:?}");
            assert!(pair[1].min >= pair[0].min - 1e-9, "min fell: {pair:?}");
        }
        for row in &rows {
            assert!(row.sup >= 1.0 - 1e-9 && row.min <= 1.0 + 1e-9);
        }
        // Early steps strictly contract a sharp cap.
        assert!(rows[3].sup < rows[0].sup * 0.9);
    }

    #[test]
    fn trace_rejects_overlong_runs() {
        let grid = SphereGrid::new(8, 16);
        let d = GridDensity::uniform(grid);
        assert!(sup_density_trace(&d, MAX_TRACE_STEPS + 1).is_err());
    }

    #[test]
    fn self_adjointness_improves_with_refinement() {
        let mut rng = RandomStream::new(515, 0);
        let defect_at = |cells: usize, rng: &mut RandomStream| -> f64 {
            let grid = SphereGrid::with_cells(cells);
            let f = random_smooth_function(&grid, rng);
            let g = random_smooth_function(&grid, rng);
            self_adjointness_defect(&grid, &f, &g)
        };
        let coarse = defect_at(1_000, &mut rng);
        let fine = defect_at(8_000, &mut rng);
        assert!(fine < coarse, "coarse {coarse} fine {fine}");
        assert!(coarse < 1e-3, "coarse defect unexpectedly large: {coarse}");
    }

    #[test]
    fn kernel_step_matches_monte_carlo_pushforward_of_cap() {
        // One kernel application to a half-area cap versus an ensemble of
        // cap-distributed points advanced one random rotation, compared
        // through the x1-marginal CDF.
        let grid = SphereGrid::new(32, 128);
        let cap = GridDensity::cap(grid, std::f64::consts::FRAC_PI_2).unwrap();
        let (stepped, factor) = cap.kernel_step().unwrap();
        assert!((factor - 1.0).abs() < 1e-3, "renorm {factor}");

        let m = 1_000_000usize;
        let mut rng = RandomStream::new(6161, 0);
        let cuts = [-0.5, -0.1, 0.0, 0.1, 0.5];
        let mut mc = [0.0f64; 5];
        for _ in 0..m {
            // Uniform on the cap x1 ≥ 0: x1 uniform in [0, 1].
            let c = rng.next_f64();
            let psi = rng.next_f64() * TAU;
            let r = (1.0 - c * c).sqrt();
            let mut x = crate::sphere::SpherePoint::from_coords(vec![
                c,
                r * psi.cos(),
                r * psi.sin(),
            ])
            .unwrap();
            let ev = draw_rotation_event(3, &mut rng);
            x.rotate(&ev).unwrap();
            for (acc, &t) in mc.iter_mut().zip(&cuts) {
                if x.coords()[0] <= t {
                    *acc += 1.0;
                }
            }
        }
        for (acc, &t) in mc.iter_mut().zip(&cuts) {
            *acc /= m as f64;
            let ours = grid_x1_cdf(&stepped, t);
            let se = (*acc * (1.0 - *acc) / m as f64).sqrt();
            assert!(
                (ours - *acc).abs() <= 0.01 + 4.0 * se,
                "t={t}: grid {ours} vs mc {acc}"
            );
        }
    }

    #[test]
    fn evolved_density_tracks_walker_marginal() {
        // Five kernel steps from a cap versus walkers started uniform on
        // the same cap, compared through the x1-marginal CDF.
        let grid = SphereGrid::new(32, 128);
        let radius = 0.9f64;
        let mut d = GridDensity::cap(grid, radius).unwrap();
        for _ in 0..5 {
            d = d.kernel_step().unwrap().0;
        }

        let m = 300_000usize;
        let mut rng = RandomStream::new(828, 0);
        let cuts = [-0.4, 0.0, 0.3, 0.6, 0.9];
        let mut mc = [0.0f64; 5];
        let cos_r = radius.cos();
        for _ in 0..m {
            let c = cos_r + (1.0 - cos_r) * rng.next_f64();
            let psi = rng.next_f64() * TAU;
            let r = (1.0 - c * c).sqrt();
            let mut x =
                crate::sphere::SpherePoint::from_coords(vec![c, r * psi.cos(), r * psi.sin()])
                    .unwrap();
            for _ in 0..5 {
                let ev = draw_rotation_event(3, &mut rng);
                x.rotate(&ev).unwrap();
            }
            for (acc, &t) in mc.iter_mut().zip(&cuts) {
                if x.coords()[0] <= t {
                    *acc += 1.0;
                }
            }
        }
        for (acc, &t) in mc.iter_mut().zip(&cuts) {
            *acc /= m as f64;
            let ours = grid_x1_cdf(&d, t);
            let se = (*acc * (1.0 - *acc) / m as f64).sqrt();
            assert!(
                (ours - *acc).abs() <= 0.01 + 4.0 * se,
                "t={t}: grid {ours} vs mc {acc}"
            );
        }
    }

    #[test]
    fn random_smooth_functions_are_bounded_and_vary() {
        let grid = SphereGrid::new(16, 64);
        let mut rng = RandomStream::new(5, 0);
        let f = random_smooth_function(&grid, &mut rng);
        let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi.is_finite() && lo.is_finite() && hi > lo);
        assert!(hi.abs() < 10.0 && lo.abs() < 10.0);
        let _ = sample_uniform_sphere(3, &mut rng);
    }
}
