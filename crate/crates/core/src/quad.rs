//! Globally adaptive 10/21-point Gauss-Kronrod quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate meets the tolerance. Error estimates follow the QUADPACK `qk21`
//! heuristic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208015231211,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadValue {
    pub value: f64,
    pub abs_err: f64,
}

impl QuadValue {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            abs_err: 0.0,
        }
    }
}

impl std::ops::Add for QuadValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            abs_err: self.abs_err + o.abs_err,
        }
    }
}

impl std::ops::Mul<f64> for QuadValue {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            abs_err: self.abs_err * s.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge: value {value:e}, error {abs_err:e} after {intervals} intervals")]
    NotConverged {
        value: f64,
        abs_err: f64,
        intervals: usize,
    },
    #[error("integrand is not finite at x = {at:e}")]
    NonFinite { at: f64 },
    #[error("invalid quadrature setup: {0}")]
    Setup(String),
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<Piece, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: center });
    }
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let x1 = center - dx;
        let x2 = center + dx;
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { at: x2 });
        }
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let value = resk * half;
    resabs *= h;
    resasc *= h;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Piece { a, b, value, err })
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the given
/// subintervals (breakpoints should sit on kinks of the integrand).
pub fn integrate(f: &dyn Fn(f64) -> f64, breaks: &[f64], opts: &QuadOptions) -> Result<QuadValue, QuadratureError> {
    if breaks.len() < 2 {
        return Err(QuadratureError::Setup("need at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut frozen = QuadValue::zero();
    for w in breaks.windows(2) {
        if !(w[1] > w[0]) {
            if w[1] == w[0] {
                continue;
            }
            return Err(QuadratureError::Setup("breakpoints must increase".into()));
        }
        heap.push(kronrod(f, w[0], w[1])?);
    }
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut err: f64 = heap.iter().map(|p| p.err).sum();
    let mut since_resum = 0usize;
    loop {
        if since_resum > 200 {
            total = heap.iter().map(|p| p.value).sum::<f64>() + frozen.value;
            err = heap.iter().map(|p| p.err).sum::<f64>() + frozen.abs_err;
            since_resum = 0;
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target || heap.is_empty() {
            return Ok(QuadValue { value: total, abs_err: err });
        }
        if heap.len() >= opts.max_intervals {
            return Err(QuadratureError::NotConverged {
                value: total,
                abs_err: err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 8.0 * f64::EPSILON * mid.abs() {
            // cannot split further: accept as is
            frozen = frozen
                + QuadValue {
                    value: worst.value,
                    abs_err: worst.err,
                };
            continue;
        }
        let left = kronrod(f, worst.a, mid)?;
        let right = kronrod(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        since_resum += 1;
        heap.push(left);
        heap.push(right);
    }
}

/// `∫_0^b f` for integrands behaving like `x^{p}` at the origin, via `x = t^q`
/// with `q = 1/(1 + p)` clipped to `[1, 12]`.
pub fn integrate_origin(
    f: &dyn Fn(f64) -> f64,
    b: f64,
    p: f64,
    opts: &QuadOptions,
) -> Result<QuadValue, QuadratureError> {
    let q = (1.0 / (1.0 + p)).clamp(1.0, 12.0);
    let tb = b.powf(1.0 / q);
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        q * t.powf(q - 1.0) * f(t.powf(q))
    };
    integrate(&g, &[0.0, tb], opts)
}

/// Sorted, deduplicated breakpoints within `[lo, hi]`.
pub fn breakpoints(lo: f64, hi: f64, inner: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = inner
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(&|x| x.powi(5) - 2.0 * x, &[0.0, 2.0], &QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = integrate(&|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], &QuadOptions::rel(1e-13)).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let r = integrate_origin(&|x: f64| x.powf(-0.5), 1.0, -0.5, &QuadOptions::rel(1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-11);
        let r2 = integrate(&|x: f64| x.powf(-0.5), &[0.0, 1.0], &QuadOptions::rel(1e-10)).unwrap();
        assert!((r2.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reports_nonconvergence() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_intervals: 3,
        };
        let r = integrate(&|x: f64| (1.0 / x).sin(), &[1e-3, 1.0], &opts);
        assert!(matches!(r, Err(QuadratureError::NotConverged { .. })));
    }

    #[test]
    fn nonfinite_detected() {
        let r = integrate(&|x: f64| if x > 0.4 { f64::NAN } else { 1.0 }, &[0.0, 1.0], &QuadOptions::rel(1e-8));
        assert!(matches!(r, Err(QuadratureError::NonFinite { .. })));
    }
}
