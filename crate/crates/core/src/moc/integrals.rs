//! Singular integrals of the modulus-of-continuity calculus.
//!
//! The `d`-dimensional integrals are written in polar coordinates of the
//! half-plane `(z₁, r = |z_h|)`, `z₁ = ρ cos θ`, `r = ρ sin θ`, after folding
//! `z₁ → −z₁`. The measure of `{z_h : |z_h| = r}` is `|S^{d−2}| r^{d−2}`
//! with `|S^0| = 2`.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI};

use statrs::function::gamma::gamma;

use super::family::Moc;
use super::MocError;
use crate::quad::{breakpoints, integrate, integrate_origin, QuadOptions, QuadValue, QuadratureError};

/// `c_{α,d} = 2^α Γ((d+α)/2) / (π^{d/2} |Γ(−α/2)|)`.
pub fn c_alpha(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    2f64.powf(alpha) * gamma(0.5 * (df + alpha)) / (PI.powf(0.5 * df) * gamma(-0.5 * alpha).abs())
}

/// Surface area of the unit sphere `S^n ⊂ R^{n+1}`.
pub fn sphere_area(n: usize) -> f64 {
    let m = (n + 1) as f64;
    2.0 * PI.powf(0.5 * m) / gamma(0.5 * m)
}

const D_REL: f64 = 1e-8;
const A_REL: f64 = 1e-6;
/// Log-branch tails are integrated in closed form beyond `max(1e6 λ, 1e3 ξ)`.
const TAIL_LAMBDA: f64 = 1e6;
const TAIL_XI: f64 = 1e3;
const GEOMETRIC: f64 = 4.0;

fn check(xi: f64, alpha: f64, m: &Moc) -> Result<f64, MocError> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(MocError::NonPositive(xi));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(MocError::Parameter(format!("alpha must lie in (0,2), got {alpha}")));
    }
    let lam = m.lambda();
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(MocError::Parameter("quadrature needs a representable lambda".into()));
    }
    Ok(lam)
}

fn geometric(from: f64, to: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = from;
    while x < to {
        v.push(x);
        x *= GEOMETRIC;
    }
    v
}

fn tail_start(lam: f64, xi: f64) -> f64 {
    (TAIL_LAMBDA * lam).max(TAIL_XI * xi)
}

fn quad(e: QuadratureError) -> MocError {
    MocError::Quadrature(e)
}

/// Bracket of the dissipation term (no prefactor):
/// `∫₀^{ξ/2} [2ω(ξ) − ω(ξ+2η) − ω(ξ−2η)] η^{−1−α} dη
///  + ∫_{ξ/2}^∞ [2ω(ξ) − ω(2η+ξ) + ω(2η−ξ)] η^{−1−α} dη`.
pub fn dissipation_d(xi: f64, m: &Moc, alpha: f64) -> Result<QuadValue, MocError> {
    let lam = check(xi, alpha, m)?;
    let opts = QuadOptions::rel(D_REL * 0.1);
    let inner = |eta: f64| -m.sym_diff(xi, 2.0 * eta, 1.0) * eta.powf(-1.0 - alpha);
    // kinks: ξ ± 2η = λ
    let half = 0.5 * xi;
    let b1 = (0.5 * (xi - lam).abs()).min(0.25 * xi);
    let b1 = if b1 > 0.0 { b1 } else { 0.25 * xi };
    let first = integrate_origin(&inner, b1, 1.0 - alpha, &opts).map_err(quad)?;
    let br = breakpoints(b1, half, [0.5 * (xi - lam), 0.5 * (lam - xi)]);
    let second = integrate(&inner, &br, &opts).map_err(quad)?;

    let w = m.at(xi);
    let outer = |eta: f64| (2.0 * w - m.increment(2.0 * eta - xi, 2.0 * xi)) * eta.powf(-1.0 - alpha);
    let r = tail_start(lam, xi);
    let mut pts = geometric(xi, r);
    pts.extend([0.5 * (lam + xi), 0.5 * (lam - xi)]);
    let br = breakpoints(half, r, pts);
    let third = integrate(&outer, &br, &opts).map_err(quad)?;
    // closed-form tail: ω(2η+ξ) − ω(2η−ξ) = δ Σ_{j odd} (ξ/2η)^j / j
    let mut tail = 2.0 * w * r.powf(-alpha) / alpha;
    for j in [1, 3, 5, 7] {
        let jf = j as f64;
        tail -= m.delta * (0.5 * xi).powi(j) * r.powf(-jf - alpha) / (jf * (jf + alpha));
    }
    Ok(first + second + third + QuadValue { value: tail, abs_err: 0.0 })
}

/// `∫_0^∞ S(ρ) ρ^{−1−α} dρ` for the folded second difference at angle `θ`.
fn radial_a(xi: f64, m: &Moc, alpha: f64, c: f64, opts: &QuadOptions) -> Result<QuadValue, QuadratureError> {
    let lam = m.lambda();
    let s = (1.0 - c * c).max(0.0).sqrt();
    let f = |rho: f64| m.sym_diff(xi, rho, c) * rho.powf(-1.0 - alpha);
    let mut pts = vec![xi * c, xi, 2.0 * xi, lam];
    // |ξe ∓ z| = λ
    let disc = lam * lam - xi * xi * s * s;
    if disc >= 0.0 {
        let q = disc.sqrt();
        pts.extend([xi * c - q, xi * c + q, -xi * c + q]);
    }
    let gap = (xi - lam).abs();
    let mut b1 = 0.5 * xi;
    for p in &pts {
        if *p > 1e-300 {
            b1 = b1.min(0.5 * p);
        }
    }
    if gap > 0.0 {
        b1 = b1.min(0.5 * gap);
    }
    let r = tail_start(lam, xi);
    let first = integrate_origin(&f, b1, 1.0 - alpha, opts)?;
    pts.extend(geometric(xi.max(lam), r));
    let br = breakpoints(b1, r, pts);
    let body = integrate(&f, &br, opts)?;
    // tail: S = δ ln(ρ/ξ) + (δ/4) ln(1 + 2ε²(1−2c²) + ε⁴), ε = ξ/ρ
    let d = m.delta;
    let lr = (r / xi).ln();
    let mut tail = d * r.powf(-alpha) * (alpha * lr + 1.0) / (alpha * alpha);
    let p = 1.0 - 2.0 * c * c;
    let c1 = 2.0 * p;
    let c2 = 1.0 - 2.0 * p * p;
    tail += 0.25 * d * (c1 * xi.powi(2) * r.powf(-2.0 - alpha) / (2.0 + alpha) + c2 * xi.powi(4) * r.powf(-4.0 - alpha) / (4.0 + alpha));
    Ok(first + body + QuadValue { value: tail, abs_err: 0.0 })
}

/// `A(ξ) = c_α p.v. ∫ [ω(|ξe₁ − z|) − ω(ξ)] |z|^{−d−α} dz`.
pub fn a_term(xi: f64, m: &Moc, alpha: f64, d: usize) -> Result<QuadValue, MocError> {
    check(xi, alpha, m)?;
    if !(1..=3).contains(&d) {
        return Err(MocError::Parameter(format!("dimension must be 1..=3, got {d}")));
    }
    let c = c_alpha(alpha, d);
    if d == 1 {
        let v = radial_a(xi, m, alpha, 1.0, &QuadOptions::rel(A_REL * 0.1)).map_err(quad)?;
        return Ok(v * c);
    }
    angular(xi, m.lambda(), d, |cos, opts| radial_a(xi, m, alpha, cos, opts)).map(|v| v * (c * sphere_area(d - 2)))
}

/// Outer angular integral `∫_0^{π/2} sin^{d−2}θ g(cos θ) dθ`.
fn angular(
    xi: f64,
    lam: f64,
    d: usize,
    g: impl Fn(f64, &QuadOptions) -> Result<QuadValue, QuadratureError>,
) -> Result<QuadValue, MocError> {
    let inner_opts = QuadOptions::rel(A_REL * 1e-2);
    let inner_err = Cell::new(0.0f64);
    let failure = Cell::new(None::<QuadratureError>);
    let h = |theta: f64| {
        match g(theta.cos(), &inner_opts) {
            Ok(v) => {
                if v.value != 0.0 {
                    inner_err.set(inner_err.get().max(v.abs_err / v.value.abs()));
                }
                v.value * theta.sin().powi(d as i32 - 2)
            }
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let mut pts = vec![FRAC_PI_2 / 3.0, PI / 3.0];
    if lam < xi {
        pts.push((lam / xi).asin());
    }
    for frac in [(xi - lam) / (2.0 * xi), (xi + lam) / (2.0 * xi)] {
        if frac.abs() < 1.0 {
            pts.push(frac.acos());
        }
    }
    let br = breakpoints(0.0, FRAC_PI_2, pts);
    let res = integrate(&h, &br, &QuadOptions::rel(A_REL * 0.1));
    if let Some(e) = failure.take() {
        return Err(quad(e));
    }
    let mut v = res.map_err(quad)?;
    v.abs_err += inner_err.get() * v.value.abs();
    Ok(v)
}

/// Radial part of the cross-term majorant at angle `θ`, with a generic
/// density modulus `w1`.
fn radial_k(
    xi: f64,
    w1: &dyn Fn(f64) -> f64,
    m2: &Moc,
    alpha: f64,
    c: f64,
    kinks: &[f64],
    opts: &QuadOptions,
) -> Result<QuadValue, QuadratureError> {
    let lam = m2.lambda();
    let f = |rho: f64| {
        let z1 = rho * c;
        let h = if z1 <= xi { -z1 } else { z1 - 2.0 * xi };
        let minus = m2.increment(xi, h).abs();
        let plus = m2.increment(xi, z1);
        w1(rho) * (minus + plus) * rho.powf(-1.0 - alpha)
    };
    let top = 2.0 * xi;
    let mut pts: Vec<f64> = kinks.to_vec();
    if c > 0.0 {
        pts.extend([xi / c, (xi - lam) / c, (xi + lam) / c, (lam - xi) / c]);
    }
    let mut b1 = 0.5 * xi;
    for p in &pts {
        if *p > 1e-300 {
            b1 = b1.min(0.5 * p);
        }
    }
    let first = integrate_origin(&f, b1, 1.0 - alpha, opts)?;
    let br = breakpoints(b1, top, pts);
    Ok(first + integrate(&f, &br, opts)?)
}

fn k_generic(
    xi: f64,
    w1: &dyn Fn(f64) -> f64,
    kinks: &[f64],
    m2: &Moc,
    alpha: f64,
    d: usize,
) -> Result<QuadValue, MocError> {
    check(xi, alpha, m2)?;
    if !(1..=3).contains(&d) {
        return Err(MocError::Parameter(format!("dimension must be 1..=3, got {d}")));
    }
    let c = 2.0 * c_alpha(alpha, d);
    if d == 1 {
        let v = radial_k(xi, w1, m2, alpha, 1.0, kinks, &QuadOptions::rel(A_REL * 0.1)).map_err(quad)?;
        return Ok(v * c);
    }
    angular(xi, m2.lambda(), d, |cos, opts| radial_k(xi, w1, m2, alpha, cos, kinks, opts))
        .map(|v| v * (c * sphere_area(d - 2)))
}

/// `𝒦̄(ξ) = 2c_α ∫_{|z|≤2ξ} ω₁(|z|) |ω₂(|ξ − z₁|) − ω₂(ξ)| |z|^{−d−α} dz`.
pub fn k_bar(xi: f64, omega1: &Moc, omega2: &Moc, alpha: f64, d: usize) -> Result<QuadValue, MocError> {
    let w1 = |r: f64| omega1.at(r);
    k_generic(xi, &w1, &[omega1.lambda()], omega2, alpha, d)
}

/// Cross-term majorant with the density modulus
/// `Ω(η) = ρ̄‖F₀‖ η + R(η)` where `R` is [`riesz_integral_exact`] for `ω₂`
/// (dropped when `with_riesz` is false).
pub fn k_bar_subcritical(
    xi: f64,
    omega2: &Moc,
    alpha: f64,
    d: usize,
    rho_f0: f64,
    with_riesz: bool,
) -> Result<QuadValue, MocError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(MocError::Parameter(format!("alpha must lie in (1,2), got {alpha}")));
    }
    let r_on = if with_riesz { 1.0 } else { 0.0 };
    let w1 = |r: f64| rho_f0 * r + r_on * riesz_integral_exact(r, omega2, alpha);
    k_generic(xi, &w1, &[omega2.lambda()], omega2, alpha, d)
}

/// `R(ξ) = ∫₀^ξ ω(η) η^{α−2} dη + ξ ∫_ξ^∞ ω(η) η^{α−3} dη` by quadrature.
pub fn riesz_integral(xi: f64, m: &Moc, alpha: f64) -> Result<QuadValue, MocError> {
    let lam = check(xi, alpha, m)?;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(MocError::Parameter(format!("alpha must lie in (1,2), got {alpha}")));
    }
    let opts = QuadOptions::rel(1e-11);
    let low = |eta: f64| m.at(eta) * eta.powf(alpha - 2.0);
    let b1 = xi.min(lam) * 0.5;
    let first = integrate_origin(&low, b1, alpha - 1.0, &opts).map_err(quad)?;
    let second = integrate(&low, &breakpoints(b1, xi, [lam]), &opts).map_err(quad)?;
    let high = |eta: f64| m.at(eta) * eta.powf(alpha - 3.0);
    let r = tail_start(lam, xi);
    let mut pts = geometric(xi.max(lam), r);
    pts.push(lam);
    let third = integrate(&high, &breakpoints(xi, r, pts), &opts).map_err(quad)?;
    let g = 2.0 - alpha;
    let d = m.delta;
    let tail = 0.75 * d * r.powf(-g) / g + 0.5 * d * r.powf(-g) * ((r / lam).ln() / g + 1.0 / (g * g));
    Ok(first + second + (third + QuadValue { value: tail, abs_err: 0.0 }) * xi)
}

/// Closed form of [`riesz_integral`].
pub fn riesz_integral_exact(xi: f64, m: &Moc, alpha: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let d = m.delta;
    let mu = m.mu;
    let lam = m.lambda();
    let b = alpha - 1.0;
    let g = 2.0 - alpha;
    // ∫₀^x of the power branch against η^{α−2}
    let pow_low = |x: f64| d / lam * x.powf(alpha) / alpha - 0.25 * d * lam.powf(-1.0 - mu) * x.powf(alpha + mu) / (alpha + mu);
    // ∫ of the power branch against η^{α−3}, antiderivative
    let pow_high = |x: f64| d / lam * x.powf(b) / b - 0.25 * d * lam.powf(-1.0 - mu) * x.powf(b + mu) / (b + mu);
    // ∫_λ^x of the log branch against η^{α−2}
    let log_low = |x: f64| {
        0.75 * d * (x.powf(b) - lam.powf(b)) / b + 0.5 * d * (x.powf(b) * ((x / lam).ln() / b - 1.0 / (b * b)) + lam.powf(b) / (b * b))
    };
    // ∫_x^∞ of the log branch against η^{α−3}
    let log_tail = |x: f64| 0.75 * d * x.powf(-g) / g + 0.5 * d * x.powf(-g) * ((x / lam).ln() / g + 1.0 / (g * g));
    if xi <= lam {
        pow_low(xi) + xi * (pow_high(lam) - pow_high(xi) + log_tail(lam))
    } else {
        pow_low(lam) + log_low(xi) + xi * log_tail(xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_constant_values() {
        // α = 1, d = 1: c = 2 Γ(1) / (√π |Γ(−1/2)|) = 2 / (√π · 2√π) = 1/π
        assert!((c_alpha(1.0, 1) - 1.0 / PI).abs() < 1e-14);
        assert!((sphere_area(0) - 2.0).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn d_positive_and_linear() {
        let m = Moc::new(1.0, 0.5, 1.0).unwrap();
        for &xi in &[1e-3, 0.1, 0.7, 1.3, 10.0, 1e3] {
            let v = dissipation_d(xi, &m, 1.0).unwrap();
            assert!(v.value > 0.0, "xi {xi}");
            let v2 = dissipation_d(xi, &m.scaled(2.0), 1.0).unwrap();
            assert!((v2.value / v.value - 2.0).abs() < 1e-8 * 2.0);
        }
    }

    #[test]
    fn riesz_closed_form_agrees() {
        for &(alpha, xi) in &[(1.5, 0.05), (1.5, 0.3), (1.2, 2.0), (1.8, 0.01)] {
            let m = Moc::new(1.0, 0.5, 0.1).unwrap();
            let q = riesz_integral(xi, &m, alpha).unwrap();
            let e = riesz_integral_exact(xi, &m, alpha);
            assert!((q.value - e).abs() < 1e-9 * e, "{alpha} {xi}: {} vs {e}", q.value);
        }
    }
}
