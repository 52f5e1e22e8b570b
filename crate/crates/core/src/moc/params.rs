//! Choice of `(δ₁, δ₂, κ, λ, μ)` closing the breakthrough inequalities.
//!
//! Each inequality is a bracket `−dissipation + Σ terms` on one `ξ`-range;
//! a parameter set is accepted when `Σ terms ≤ dissipation / 2` at every
//! sampled `ξ`. Terms are evaluated in log space since `λ` is often far
//! below the smallest normal double.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::constants::EmpiricalConstants;
use super::family::MocPair;
use super::MocError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "subcritical" => Some(Regime::Subcritical),
            "critical" => Some(Regime::Critical),
            "supercritical" => Some(Regime::Supercritical),
            _ => None,
        }
    }

    pub fn of_alpha(alpha: f64) -> Option<Self> {
        if (alpha - 1.0).abs() < 1e-12 {
            Some(Regime::Critical)
        } else if alpha > 1.0 && alpha < 2.0 {
            Some(Regime::Subcritical)
        } else if alpha > 0.0 && alpha < 1.0 {
            Some(Regime::Supercritical)
        } else {
            None
        }
    }
}

/// Half-oscillation and gradient bound of one initial field; used to cap
/// `λ` so that the data obey the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub half_osc: f64,
    pub grad: f64,
}

impl DataNorms {
    fn log_lambda_cap(&self, delta: f64) -> f64 {
        if self.grad <= 0.0 || self.half_osc <= 0.0 {
            return f64::INFINITY;
        }
        (2.0 * self.half_osc / self.grad).ln() - 4.0 * self.half_osc / delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInputs {
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub v0: f64,
    pub f0_norm: f64,
    pub grad_f0_norm: f64,
    pub h0_norm: f64,
    pub c0: f64,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub u_csigma: Option<f64>,
    #[serde(default)]
    pub rho_data: Option<DataNorms>,
    #[serde(default)]
    pub u_data: Option<DataNorms>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// `max_ξ Σ terms / dissipation`; accepted at `≤ 1/2`.
    pub ratio: f64,
    /// Largest single term at the worst `ξ`.
    pub dominant_term: String,
    pub worst_log_xi: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedParams {
    pub regime: Regime,
    pub alpha: f64,
    pub mu: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub kappa: f64,
    pub log_lambda: f64,
    pub pair: MocPair,
    pub checks: Vec<InequalityCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleReport {
    pub binding: String,
    pub dominant_term: String,
    pub ratio: f64,
    pub log_lambda: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("infeasible: `{}` has ratio {:.3e} (dominant term `{}`) at ln(lambda) = {:.4e}; {}", .0.binding, .0.ratio, .0.dominant_term, .0.log_lambda, .0.detail)]
    Infeasible(InfeasibleReport),
    #[error(transparent)]
    Moc(#[from] MocError),
}

/// Safety factor: every inequality must hold with its terms at most half
/// the dissipation.
pub const MARGIN: f64 = 0.5;
const XI_SAMPLES: usize = 160;
/// Inner ranges are sampled down to `λ e^{−INNER_DEPTH}`.
const INNER_DEPTH: f64 = 30.0;

fn validate(regime: Regime, alpha: f64, inp: &ParamInputs, consts: &EmpiricalConstants) -> Result<(), ParamError> {
    let bad = |m: String| Err(ParamError::Input(m));
    match regime {
        Regime::Subcritical if !(alpha > 1.0 && alpha < 2.0) => return bad(format!("subcritical needs alpha in (1,2), got {alpha}")),
        Regime::Critical if (alpha - 1.0).abs() > 1e-12 => return bad(format!("critical needs alpha = 1, got {alpha}")),
        Regime::Supercritical if !(alpha > 0.0 && alpha < 1.0) => return bad(format!("supercritical needs alpha in (0,1), got {alpha}")),
        _ => {}
    }
    if regime == Regime::Supercritical {
        match (inp.sigma, inp.u_csigma) {
            (Some(s), Some(u)) if s > 1.0 - alpha && s < 1.0 && u.is_finite() && u >= 0.0 => {}
            _ => return bad("supercritical needs sigma in (1 - alpha, 1) and a finite u_csigma".into()),
        }
    }
    if regime == Regime::Subcritical && consts.c4.is_none() {
        return bad("subcritical selection needs the fitted C4".into());
    }
    if !(inp.rho_lower > 0.0 && inp.rho_upper >= inp.rho_lower) {
        return bad(format!("need 0 < rho_lower <= rho_upper, got {} and {}", inp.rho_lower, inp.rho_upper));
    }
    for (name, v) in [
        ("V0", inp.v0),
        ("F0", inp.f0_norm),
        ("gradF0", inp.grad_f0_norm),
        ("H0", inp.h0_norm),
        ("c0", inp.c0),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return bad(format!("{name} must be finite and nonnegative, got {v}"));
        }
    }
    if inp.h0_norm > 0.0 && inp.c0 <= 0.0 {
        return bad("a positive H0 needs a positive decay rate c0".into());
    }
    for (name, v) in [("C1", consts.c1), ("C2", consts.c2), ("C3", consts.c3)] {
        if !(v > 0.0 && v.is_finite()) {
            return bad(format!("constant {name} must be positive, got {v}"));
        }
    }
    Ok(())
}

/// `μ` for the regime.
pub fn regime_mu(regime: Regime, alpha: f64, sigma: Option<f64>) -> f64 {
    match regime {
        Regime::Subcritical => alpha / 2.0,
        Regime::Critical => 0.5,
        Regime::Supercritical => (sigma.unwrap_or(1.0) - (1.0 - alpha)) / 2.0,
    }
}

struct Ctx<'a> {
    regime: Regime,
    alpha: f64,
    mu: f64,
    d1: f64,
    d2: f64,
    kappa: f64,
    l: f64,
    inp: &'a ParamInputs,
    c: &'a EmpiricalConstants,
}

type Term = (&'static str, f64);

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln(e^a + e^b)`.
fn lse(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// `ln ω(ξ)` for `ξ > λ` given `ln ξ`, `ln λ`.
fn ln_omega_log(delta: f64, lx: f64, l: f64) -> f64 {
    ln(delta * (0.75 + 0.5 * (lx - l)))
}

impl Ctx<'_> {
    fn super_u(&self) -> (f64, f64) {
        (self.inp.sigma.unwrap_or(1.0), self.inp.u_csigma.unwrap_or(0.0))
    }

    fn diss_inner_rho(&self) -> f64 {
        self.c.c1 * self.mu * self.inp.rho_lower / 4.0
    }

    fn diss_inner_u(&self) -> f64 {
        if self.alpha >= 1.0 {
            self.c.c1 * self.mu * self.inp.rho_lower / 4.0
        } else {
            self.c.c1 * self.mu * self.inp.rho_lower / 16.0
        }
    }

    fn diss_outer(&self) -> f64 {
        self.c.c1 * self.inp.rho_lower / 2.0
    }

    fn log_xi1(&self) -> f64 {
        self.l + 2.0 * self.inp.rho_upper / self.d1 - 1.5
    }

    fn log_xi2(&self) -> f64 {
        self.l + 2.0 * self.inp.v0 / self.d2 - 1.5
    }

    fn rho_inner(&self, x: f64) -> Vec<Term> {
        let (a, mu, l, i) = (self.alpha, self.mu, self.l, self.inp);
        let rb = i.rho_upper;
        let mut t = vec![
            ("drift", ln(self.c.c2 * self.d1)),
            ("F0", ln(rb * i.f0_norm) + mu * l + (a - mu) * x),
            ("gradF0", ln(rb * rb * i.grad_f0_norm / self.d1) + (1.0 + mu) * l + (a - mu) * x),
            ("H0", ln(rb.powi(3) * i.h0_norm / self.inp.c0.max(f64::MIN_POSITIVE)) + mu * l + (a - mu) * x),
        ];
        t.push(match self.regime {
            Regime::Supercritical => {
                let (s, uc) = self.super_u();
                ("advection", ln(uc) + mu * l + (s - 1.0 + a - mu) * x)
            }
            _ => ("advection", ln(self.d2) + (mu - 1.0) * l + (a - mu) * x),
        });
        t
    }

    fn rho_outer(&self, x: f64) -> Vec<Term> {
        let (a, l, i) = (self.alpha, self.l, self.inp);
        let rb = i.rho_upper;
        let mut t = vec![
            ("drift", ln(self.c.c2 * self.d1)),
            ("F0", ln(rb * i.f0_norm) + a * x),
            ("gradF0", ln(4.0 / 3.0 * rb * rb * i.grad_f0_norm / self.d1) + (1.0 + a) * x),
            ("H0", ln(4.0 / 3.0 * rb.powi(3) * i.h0_norm / i.c0.max(f64::MIN_POSITIVE)) - l + (1.0 + a) * x),
        ];
        t.push(match self.regime {
            Regime::Supercritical => {
                let (s, uc) = self.super_u();
                ("advection", ln(uc * self.d1 / 2.0) + (s - 1.0 + a) * x - ln_omega_log(self.d1, x, l))
            }
            _ => ("advection", ln(self.d2 / 2.0) + (a - 1.0) * x),
        });
        t
    }

    fn u_inner(&self, x: f64) -> Vec<Term> {
        let (a, mu, l) = (self.alpha, self.mu, self.l);
        let mut t = vec![
            ("decay", ln(self.inp.c0) + mu * l + (a - mu) * x),
            ("cross", ln(self.c.c3 * self.d1) + (mu - 1.0) * l + (1.0 - mu) * x),
            ("drift", ln(self.c.c2 * self.d1)),
        ];
        t.push(match self.regime {
            Regime::Supercritical => {
                let (s, uc) = self.super_u();
                ("advection", ln(uc) + mu * l + (s - 1.0 + a - mu) * x)
            }
            _ => ("advection", ln(self.d2) + (mu - 1.0) * l + (a - mu) * x),
        });
        t
    }

    fn u_outer(&self, x: f64) -> Vec<Term> {
        let (a, l, i) = (self.alpha, self.l, self.inp);
        let c3_form = ln(self.c.c3 * self.kappa) + lse(ln(self.d2) + (a - 1.0).max(0.0) * (x - l), ln(i.v0));
        let cross = match (self.regime, self.c.c4) {
            // both bound the same integral; take the sharper
            (Regime::Subcritical, Some(c4)) => {
                let c4_form = ln(c4) + a * x + lse(ln(i.rho_upper * i.f0_norm) + (1.0 - a) * l, ln(i.v0) - l);
                c3_form.min(c4_form)
            }
            _ => c3_form,
        };
        let mut t = vec![
            ("decay", ln(i.c0) + a * x),
            ("cross", cross),
            ("drift", ln(self.c.c2 * self.d2 * self.kappa)),
        ];
        t.push(match self.regime {
            Regime::Supercritical => {
                let (s, uc) = self.super_u();
                ("advection", ln(uc * self.d2 / 2.0) + (s - 1.0 + a) * x - ln_omega_log(self.d2, x, l))
            }
            _ => ("advection", ln(self.d2 / 2.0) + (a - 1.0) * x),
        });
        t
    }

    fn check(&self, name: &str, diss: f64, lo: f64, hi: f64, terms: impl Fn(f64) -> Vec<Term>) -> InequalityCheck {
        let ld = ln(diss);
        let mut worst = (f64::NEG_INFINITY, lo, "none");
        for k in 0..=XI_SAMPLES {
            let x = lo + (hi - lo) * k as f64 / XI_SAMPLES as f64;
            let ts = terms(x);
            let ratio: f64 = ts.iter().map(|(_, v)| (v - ld).exp()).sum();
            let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
            if ratio > worst.0 {
                let dom = ts
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(n, _)| *n)
                    .unwrap_or("none");
                worst = (ratio, x, dom);
            }
        }
        InequalityCheck {
            name: name.to_string(),
            ratio: worst.0,
            dominant_term: worst.2.to_string(),
            worst_log_xi: worst.1,
            satisfied: worst.0 <= MARGIN,
        }
    }

    fn all_checks(&self) -> Vec<InequalityCheck> {
        let l = self.l;
        vec![
            self.check("rho: xi <= lambda", self.diss_inner_rho(), l - INNER_DEPTH, l, |x| self.rho_inner(x)),
            self.check("rho: lambda < xi <= Xi1", self.diss_outer(), l, self.log_xi1(), |x| self.rho_outer(x)),
            self.check("u: xi <= lambda", self.diss_inner_u(), l - INNER_DEPTH, l, |x| self.u_inner(x)),
            self.check("u: lambda < xi <= Xi2", self.diss_outer(), l, self.log_xi2(), |x| self.u_outer(x)),
        ]
    }
}

/// Re-evaluates every inequality for the given parameters (closed loop).
pub fn check_parameters(
    regime: Regime,
    alpha: f64,
    inputs: &ParamInputs,
    consts: &EmpiricalConstants,
    mu: f64,
    delta2: f64,
    kappa: f64,
    log_lambda: f64,
) -> Vec<InequalityCheck> {
    let mut out = Ctx {
        regime,
        alpha,
        mu,
        d1: kappa * delta2,
        d2: delta2,
        kappa,
        l: log_lambda,
        inp: inputs,
        c: consts,
    }
    .all_checks();
    let cap = log_lambda_cap(inputs, kappa * delta2, delta2);
    out.push(InequalityCheck {
        name: "lambda <= cap (Xi <= 1/2, data obey the moduli)".into(),
        ratio: (log_lambda - cap).exp(),
        dominant_term: "cap".into(),
        worst_log_xi: log_lambda,
        satisfied: log_lambda <= cap,
    });
    out
}

/// `ln λ` cap: `Ξ₁, Ξ₂ ≤ 1/2` and the initial data obey both moduli.
pub fn log_lambda_cap(inp: &ParamInputs, d1: f64, d2: f64) -> f64 {
    let mut cap = 0.5f64.ln() - (2.0 * inp.rho_upper / d1 + 2.0 * inp.v0 / d2);
    if let Some(r) = &inp.rho_data {
        cap = cap.min(r.log_lambda_cap(d1));
    }
    if let Some(u) = &inp.u_data {
        cap = cap.min(u.log_lambda_cap(d2));
    }
    cap
}

/// `(δ₂, κ)` from the scale-free constraints.
fn amplitudes(regime: Regime, alpha: f64, mu: f64, inp: &ParamInputs, c: &EmpiricalConstants) -> (f64, f64) {
    let rl = inp.rho_lower;
    let d_in = if alpha >= 1.0 {
        c.c1 * mu * rl / 4.0
    } else {
        c.c1 * mu * rl / 16.0
    };
    let d_out = c.c1 * rl / 2.0;
    match regime {
        Regime::Subcritical => {
            // δ-terms take at most a quarter of each dissipation
            let d = (d_in / (4.0 * (c.c2 + c.c3))).min(d_out / (4.0 * c.c2));
            (d, 1.0)
        }
        _ => {
            let d2 = (d_in / 8.0).min(d_out / 8.0);
            let kappa = [
                d_out / (8.0 * (c.c3 * (d2 + inp.v0) + c.c2 * d2)),
                d_in / (8.0 * (c.c2 + c.c3) * d2),
                d_in / (8.0 * c.c2 * d2),
                1.0,
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            (d2, kappa)
        }
    }
}

fn worst(checks: &[InequalityCheck]) -> &InequalityCheck {
    checks
        .iter()
        .max_by(|a, b| (a.ratio / MARGIN).total_cmp(&(b.ratio / MARGIN)))
        .expect("nonempty")
}

pub fn select_parameters(
    regime: Regime,
    alpha: f64,
    inputs: &ParamInputs,
    consts: &EmpiricalConstants,
) -> Result<SelectedParams, ParamError> {
    validate(regime, alpha, inputs, consts)?;
    let mu = regime_mu(regime, alpha, inputs.sigma);
    let (d2, kappa) = amplitudes(regime, alpha, mu, inputs, consts);
    let d1 = kappa * d2;
    let cap = log_lambda_cap(inputs, d1, d2);
    if !cap.is_finite() {
        return Err(ParamError::Input("lambda cap is not finite".into()));
    }
    let ok = |l: f64| {
        let cs = Ctx { regime, alpha, mu, d1, d2, kappa, l, inp: inputs, c: consts }.all_checks();
        let good = cs.iter().all(|c| c.satisfied);
        (good, cs)
    };
    let (good, first) = ok(cap);
    let log_lambda = if good {
        cap
    } else {
        // walk down geometrically, then bisect
        let mut hi = cap;
        let mut step = 1.0;
        let mut lo = None;
        let mut last = first;
        while step < 1e8 {
            let l = cap - step;
            let (g, cs) = ok(l);
            if g {
                lo = Some(l);
                break;
            }
            hi = l;
            last = cs;
            step *= 2.0;
        }
        let mut lo = match lo {
            Some(l) => l,
            None => {
                let w = worst(&last);
                return Err(ParamError::Infeasible(InfeasibleReport {
                    binding: w.name.clone(),
                    dominant_term: w.dominant_term.clone(),
                    ratio: w.ratio,
                    log_lambda: cap - step / 2.0,
                    detail: "no admissible lambda: the binding term does not shrink with lambda".into(),
                }));
            }
        };
        while hi - lo > 1e-6 * lo.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if ok(mid).0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let pair = MocPair::new(d2, kappa, mu, log_lambda, inputs.c0, inputs.rho_upper, inputs.v0)?;
    let checks = check_parameters(regime, alpha, inputs, consts, mu, d2, kappa, log_lambda);
    if let Some(bad) = checks.iter().find(|c| !c.satisfied) {
        return Err(ParamError::Infeasible(InfeasibleReport {
            binding: bad.name.clone(),
            dominant_term: bad.dominant_term.clone(),
            ratio: bad.ratio,
            log_lambda,
            detail: "closed-loop recheck failed".into(),
        }));
    }
    Ok(SelectedParams {
        regime,
        alpha,
        mu,
        delta1: d1,
        delta2: d2,
        kappa,
        log_lambda,
        pair,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(alpha: f64) -> EmpiricalConstants {
        EmpiricalConstants {
            alpha,
            dim: 1,
            c1: 3.9,
            c2: 2.2,
            c3: 2.2,
            c4: (alpha > 1.0).then_some(1.7),
            c4t: (alpha > 1.0).then_some(5.0),
            provenance: "test".into(),
        }
    }

    fn inputs() -> ParamInputs {
        ParamInputs {
            rho_lower: 0.5,
            rho_upper: 1.5,
            v0: 2.0,
            f0_norm: 1.0,
            grad_f0_norm: 2.0,
            h0_norm: 3.0,
            c0: 0.2,
            sigma: None,
            u_csigma: None,
            rho_data: None,
            u_data: None,
        }
    }

    #[test]
    fn regime_mus() {
        assert_eq!(regime_mu(Regime::Subcritical, 1.5, None), 0.75);
        assert_eq!(regime_mu(Regime::Critical, 1.0, None), 0.5);
        assert!((regime_mu(Regime::Supercritical, 0.5, Some(0.75)) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn every_regime_closes() {
        let sub = select_parameters(Regime::Subcritical, 1.5, &inputs(), &consts(1.5)).unwrap();
        assert_eq!(sub.mu, 0.75);
        let crit = select_parameters(Regime::Critical, 1.0, &inputs(), &consts(1.0)).unwrap();
        assert_eq!(crit.mu, 0.5);
        let c = consts(1.0);
        let rl = inputs().rho_lower;
        assert!(crit.kappa <= c.c1 * rl / (8.0 * c.c3 * (crit.delta2 + inputs().v0)) * (1.0 + 1e-12));
        let mut sup_in = inputs();
        sup_in.sigma = Some(0.75);
        sup_in.u_csigma = Some(3.0);
        let sup = select_parameters(Regime::Supercritical, 0.5, &sup_in, &consts(0.5)).unwrap();
        assert!((sup.mu - 0.125).abs() < 1e-15);
        let base = inputs();
        for s in [&sub, &crit, &sup] {
            let inp = if s.regime == Regime::Supercritical { &sup_in } else { &base };
            let again = check_parameters(s.regime, s.alpha, inp, &consts(s.alpha), s.mu, s.delta2, s.kappa, s.log_lambda);
            assert!(again.iter().all(|c| c.satisfied), "{again:?}");
        }
    }

    #[test]
    fn large_v0_shrinks_kappa() {
        let mut i = inputs();
        i.v0 = 1e3;
        let p = select_parameters(Regime::Critical, 1.0, &i, &consts(1.0)).unwrap();
        let c = consts(1.0);
        assert!(p.kappa <= c.c1 * i.rho_lower / (8.0 * c.c3 * (p.delta2 + i.v0)) * (1.0 + 1e-12));
        assert!(p.kappa < 1e-3);
    }

    #[test]
    fn rejects_bad_regimes() {
        assert!(matches!(
            select_parameters(Regime::Supercritical, 0.5, &inputs(), &consts(0.5)),
            Err(ParamError::Input(_))
        ));
        assert!(select_parameters(Regime::Critical, 1.5, &inputs(), &consts(1.5)).is_err());
    }

    #[test]
    fn oversized_lambda_is_rejected_by_name() {
        let p = select_parameters(Regime::Critical, 1.0, &inputs(), &consts(1.0)).unwrap();
        let cs = check_parameters(p.regime, 1.0, &inputs(), &consts(1.0), p.mu, p.delta2, p.kappa, p.log_lambda + 50.0);
        let bad: Vec<_> = cs.iter().filter(|c| !c.satisfied).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().any(|c| c.name.starts_with("rho") || c.name.starts_with("u")));
    }
}
