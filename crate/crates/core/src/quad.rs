//! Adaptive quadrature.
//!
//! Adaptive Simpson with Richardson acceptance. Integrands with endpoint
//! log-singularities are handled by the callers via substitution (see
//! `density::technical_lemma_check`), so the integrands reaching this module
//! are smooth or exponentially damped.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature failed to converge: error estimate {estimate:e} over [{a}, {b}]")]
    NonConvergence { a: f64, b: f64, estimate: f64 },
    #[error("invalid integration interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol` (with an
/// absolute floor `abs_tol` for integrals near zero).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quadrature, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(QuadError::BadInterval { a, b });
    }
    const MAX_DEPTH: u32 = 48;

    let mut evals = 0usize;
    let mut eval = |x: f64| {
        evals += 1;
        f(x)
    };

    let m0 = 0.5 * (a + b);
    let (fa, fm, fb) = (eval(a), eval(m0), eval(b));
    let whole = simpson(a, b, fa, fm, fb);

    let mut stack = vec![Segment {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        depth: 0,
    }];
    let mut total = 0.0f64;
    let mut err_total = 0.0f64;
    // Error budget proportional to segment width keeps the global target.
    let global_tol = |value_scale: f64| (rel_tol * value_scale).max(abs_tol);
    let mut value_scale = whole.abs().max(abs_tol);

    while let Some(seg) = stack.pop() {
        let m = 0.5 * (seg.a + seg.b);
        let lm = 0.5 * (seg.a + m);
        let rm = 0.5 * (m + seg.b);
        let flm = eval(lm);
        let frm = eval(rm);
        let left = simpson(seg.a, m, seg.fa, flm, seg.fm);
        let right = simpson(m, seg.b, seg.fm, frm, seg.fb);
        let delta = left + right - seg.whole;
        let width_frac = (seg.b - seg.a) / (b - a);
        let tol_here = global_tol(value_scale) * width_frac;
        if delta.abs() <= 15.0 * tol_here || seg.depth >= MAX_DEPTH {
            let piece = left + right + delta / 15.0;
            total += piece;
            err_total += delta.abs() / 15.0;
            value_scale = value_scale.max(total.abs());
        } else {
            stack.push(Segment {
                a: seg.a,
                b: m,
                fa: seg.fa,
                fm: flm,
                fb: seg.fm,
                whole: left,
                depth: seg.depth + 1,
            });
            stack.push(Segment {
                a: m,
                b: seg.b,
                fa: seg.fm,
                fm: frm,
                fb: seg.fb,
                whole: right,
                depth: seg.depth + 1,
            });
        }
    }

    let quad = Quadrature {
        value: total,
        error_estimate: err_total,
        evaluations: evals,
    };
    if err_total > (rel_tol * total.abs()).max(abs_tol) * 4.0 {
        return Err(QuadError::NonConvergence {
            a,
            b,
            estimate: err_total,
        });
    }
    Ok(quad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = adaptive_simpson(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 1e-14).unwrap();
        assert!((q.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integral() {
        let q = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-14).unwrap();
        assert!((q.value - 2.0).abs() < 1e-11, "got {}", q.value);
    }

    #[test]
    fn damped_tail() {
        // ∫_0^40 e^{-u} u^2 du = 2 - Γ(3,40) ≈ 2 to double precision.
        let q = adaptive_simpson(|u| (-u).exp() * u * u, 0.0, 40.0, 1e-11, 1e-14).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "got {}", q.value);
    }

    #[test]
    fn bad_interval_rejected() {
        assert!(adaptive_simpson(|x| x, 1.0, 0.0, 1e-6, 1e-9).is_err());
    }
}
