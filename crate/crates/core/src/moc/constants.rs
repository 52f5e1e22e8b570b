//! Envelope constants fitted from quadrature sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::family::{log_threshold, Moc};
use super::integrals::{a_term, dissipation_d, k_bar, k_bar_subcritical, riesz_integral, riesz_integral_exact};
use super::MocError;
use crate::quad::QuadValue;

/// The five singular-integral estimates under verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    /// Lower bound on the dissipation bracket `D`.
    Dissipation,
    /// Upper bound on the drift integral `A`.
    Drift,
    /// Upper bound on the cross-term majorant `𝒦̄`.
    Cross,
    /// Upper bound on `𝒦̄` with the Riesz-improved density modulus.
    CrossSubcritical,
    /// The Riesz potential bound on density increments.
    Riesz,
}

impl LemmaId {
    pub const ALL: [LemmaId; 5] = [
        LemmaId::Dissipation,
        LemmaId::Drift,
        LemmaId::Cross,
        LemmaId::CrossSubcritical,
        LemmaId::Riesz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LemmaId::Dissipation => "dissipation",
            LemmaId::Drift => "drift",
            LemmaId::Cross => "cross",
            LemmaId::CrossSubcritical => "cross_subcritical",
            LemmaId::Riesz => "riesz",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }

    /// Whether the estimate is a lower bound.
    pub fn is_lower(&self) -> bool {
        matches!(self, LemmaId::Dissipation)
    }

    /// Whether the estimate is stated for this `α`.
    pub fn applies(&self, alpha: f64) -> bool {
        match self {
            LemmaId::CrossSubcritical | LemmaId::Riesz => alpha > 1.0 && alpha < 2.0,
            _ => true,
        }
    }
}

impl std::fmt::Display for LemmaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of one lemma evaluation. `v0` and `rho_f0` are the levels
/// `V₀` and `ρ̄‖F₀‖_∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub delta2: f64,
    pub kappa: f64,
    pub mu: f64,
    pub lambda: f64,
    pub v0: f64,
    pub rho_f0: f64,
}

impl LemmaParams {
    pub fn delta1(&self) -> f64 {
        self.kappa * self.delta2
    }

    pub fn omega1(&self) -> Result<Moc, MocError> {
        Moc::new(self.delta1(), self.mu, self.lambda)
    }

    pub fn omega2(&self) -> Result<Moc, MocError> {
        Moc::new(self.delta2, self.mu, self.lambda)
    }

    /// `Ξ₂ = λ e^{2V₀/δ₂ − 3/2}`.
    pub fn xi2(&self) -> f64 {
        log_threshold(&Moc { delta: self.delta2, mu: self.mu, log_lambda: self.lambda.ln() }, self.v0).exp()
    }

    /// Same configuration with every amplitude multiplied by `s`.
    pub fn scaled_amplitude(&self, s: f64) -> Self {
        Self {
            delta2: self.delta2 * s,
            v0: self.v0 * s,
            rho_f0: self.rho_f0 * s,
            ..*self
        }
    }
}

/// One evaluated point: quadrature value and the bound shape with the
/// constant divided out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub xi: f64,
    pub value: QuadValue,
    pub shape: f64,
    pub branch: u8,
    /// For sums of terms with different scalings, `(value, shape)` per term;
    /// the envelope then bounds every term on its own.
    pub parts: Option<[(QuadValue, f64); 2]>,
}

/// `ξ` is inside the stated range of the estimate.
pub fn in_domain(lemma: LemmaId, xi: f64, p: &LemmaParams) -> bool {
    match lemma {
        LemmaId::Dissipation | LemmaId::Drift => true,
        LemmaId::Cross => xi <= p.xi2(),
        LemmaId::CrossSubcritical => xi > p.lambda && xi <= p.xi2(),
        LemmaId::Riesz => xi > p.lambda,
    }
}

/// Quadrature value and bound shape at `ξ`; `None` outside the domain.
pub fn evaluate(lemma: LemmaId, xi: f64, p: &LemmaParams, alpha: f64, d: usize) -> Result<Option<Sample>, MocError> {
    if !lemma.applies(alpha) || !in_domain(lemma, xi, p) {
        return Ok(None);
    }
    let lam = p.lambda;
    let mu = p.mu;
    let w1 = p.omega1()?;
    let w2 = p.omega2()?;
    let below = xi <= lam;
    let branch = if below { 1 } else { 2 };
    let mut parts = None;
    let (value, shape) = match lemma {
        LemmaId::Dissipation => {
            let v = dissipation_d(xi, &w2, alpha)?;
            let s = if below {
                mu * (mu + 1.0) * 2f64.powf(alpha - 1.0) / (4.0 * (2.0 - alpha))
                    * p.delta2
                    * lam.powf(-1.0 - mu)
                    * xi.powf(1.0 + mu - alpha)
            } else {
                2f64.powf(alpha - 1.0) / alpha * w2.at(xi) * xi.powf(-alpha)
            };
            (v, s)
        }
        LemmaId::Drift => {
            let v = a_term(xi, &w2, alpha, d)?;
            let s = if below {
                p.delta2 * lam.powf(-mu) * xi.powf(mu - alpha)
            } else {
                p.delta2 * xi.powf(-alpha)
            };
            (v, s)
        }
        LemmaId::Cross => {
            let v = k_bar(xi, &w1, &w2, alpha, d)?;
            let s = if below {
                p.delta1() * p.delta2 * lam.powi(-2) * xi.powf(2.0 - alpha)
            } else if alpha > 1.0 {
                (p.delta2 * (xi / lam).powf(alpha - 1.0) + p.v0) * w1.at(xi) * xi.powf(-alpha)
            } else {
                (p.delta2 + p.v0) * w1.at(xi) * xi.powf(-alpha)
            };
            (v, s)
        }
        LemmaId::CrossSubcritical => {
            let linear = k_bar_subcritical(xi, &w2, alpha, d, p.rho_f0, false)?;
            let riesz = k_bar_subcritical(xi, &w2, alpha, d, 0.0, true)?;
            let s1 = p.rho_f0 * w2.at(xi) * lam.powf(1.0 - alpha);
            let s2 = p.v0 * w2.at(xi) / lam;
            parts = Some([(linear, s1), (riesz, s2)]);
            (linear + riesz, s1 + s2)
        }
        LemmaId::Riesz => {
            let v = riesz_integral(xi, &w2, alpha)?;
            (v, w2.at(xi) * xi.powf(alpha - 1.0))
        }
    };
    Ok(Some(Sample { xi, value, shape, branch, parts }))
}

/// Sweep description for envelope fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub lambda: f64,
    pub delta2: f64,
    pub kappa: f64,
    /// `μ` values as fractions of `min(α, 1)`.
    pub mu_fractions: Vec<f64>,
    /// `V₀ / δ₂`.
    pub v0_ratio: f64,
    /// `ρ̄‖F₀‖_∞ / δ₂`.
    pub rho_f0_ratio: f64,
    pub xi_min_ratio: f64,
    pub n_xi: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta2: 1.0,
            kappa: 0.5,
            mu_fractions: vec![0.25, 0.5, 0.75, 0.9],
            v0_ratio: 4.0,
            rho_f0_ratio: 1.0,
            xi_min_ratio: 1e-3,
            n_xi: 40,
        }
    }
}

impl SweepSpec {
    pub fn mus(&self, alpha: f64) -> Vec<f64> {
        let m = alpha.min(1.0);
        self.mu_fractions.iter().map(|f| f * m).collect()
    }

    pub fn params(&self, mu: f64) -> LemmaParams {
        LemmaParams {
            delta2: self.delta2,
            kappa: self.kappa,
            mu,
            lambda: self.lambda,
            v0: self.v0_ratio * self.delta2,
            rho_f0: self.rho_f0_ratio * self.delta2,
        }
    }

    /// Log-spaced cell midpoints on `[ξ_min, Ξ₂]`; `ξ = λ` itself is never a
    /// node (the drift integral diverges there for `α ≥ 1`).
    pub fn xi_grid(&self) -> Vec<f64> {
        let lo = (self.xi_min_ratio * self.lambda).ln();
        let hi = self.lambda.ln() + 2.0 * self.v0_ratio - 1.5;
        let n = self.n_xi.max(2);
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|j| {
                let mut x = lo + (j as f64 + 0.5) * h;
                if (x - self.lambda.ln()).abs() < 1e-3 * h {
                    x += 0.25 * h;
                }
                x.exp()
            })
            .collect()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_delta(&self, delta2: f64) -> Self {
        Self { delta2, ..self.clone() }
    }

    pub fn describe(&self, alpha: f64, d: usize) -> String {
        format!(
            "alpha={alpha} d={d} lambda={} delta2={} kappa={} mu={:?} V0/delta2={} rhoF0/delta2={} xi in [{}*lambda, Xi2] log-spaced n={}",
            self.lambda,
            self.delta2,
            self.kappa,
            self.mus(alpha),
            self.v0_ratio,
            self.rho_f0_ratio,
            self.xi_min_ratio,
            self.n_xi
        )
    }
}

/// Envelope constants for one `(α, d)`; `c4`, `c4t` exist for `α ∈ (1,2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConstants {
    pub alpha: f64,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: Option<f64>,
    pub c4t: Option<f64>,
    pub provenance: String,
}

impl EmpiricalConstants {
    pub fn get(&self, lemma: LemmaId) -> Option<f64> {
        match lemma {
            LemmaId::Dissipation => Some(self.c1),
            LemmaId::Drift => Some(self.c2),
            LemmaId::Cross => Some(self.c3),
            LemmaId::CrossSubcritical => self.c4,
            LemmaId::Riesz => self.c4t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{lemma}: degenerate ratio at xi = {xi:e} ({reason})")]
    Degenerate { lemma: LemmaId, xi: f64, reason: String },
    #[error("{lemma}: {source} at xi = {xi:e}")]
    Moc {
        lemma: LemmaId,
        xi: f64,
        #[source]
        source: MocError,
    },
}

/// Evaluates one lemma over the sweep, in parallel over `(μ, ξ)`.
pub fn sweep_samples(lemma: LemmaId, alpha: f64, d: usize, sweep: &SweepSpec) -> Result<Vec<(LemmaParams, Sample)>, FitError> {
    let grid = sweep.xi_grid();
    let jobs: Vec<(LemmaParams, f64)> = sweep
        .mus(alpha)
        .into_iter()
        .flat_map(|mu| grid.iter().map(move |&xi| (mu, xi)))
        .map(|(mu, xi)| (sweep.params(mu), xi))
        .collect();
    let out: Result<Vec<_>, FitError> = jobs
        .par_iter()
        .map(|(p, xi)| {
            evaluate(lemma, *xi, p, alpha, d)
                .map(|s| s.map(|s| (*p, s)))
                .map_err(|source| FitError::Moc { lemma, xi: *xi, source })
        })
        .collect();
    Ok(out?.into_iter().flatten().collect())
}

/// Inf (lower estimates) or sup (upper) of value/shape, widened by the
/// quadrature error so that verification holds within that error.
pub fn envelope(lemma: LemmaId, samples: &[(LemmaParams, Sample)]) -> Result<f64, FitError> {
    let mut best: Option<f64> = None;
    for (_, s) in samples {
        if !(s.shape > 0.0 && s.shape.is_finite() && s.value.value.is_finite()) {
            return Err(FitError::Degenerate {
                lemma,
                xi: s.xi,
                reason: format!("shape {:e}, value {:e}", s.shape, s.value.value),
            });
        }
        let ratio = |v: &QuadValue, shape: f64| {
            if lemma.is_lower() {
                (v.value - v.abs_err) / shape
            } else {
                (v.value + v.abs_err) / shape
            }
        };
        let r = match &s.parts {
            // a zero-level term (e.g. F₀ = 0) contributes nothing
            Some(ps) => ps
                .iter()
                .filter(|(_, sh)| *sh > 0.0)
                .map(|(v, sh)| ratio(v, *sh))
                .fold(f64::NEG_INFINITY, f64::max),
            None => ratio(&s.value, s.shape),
        };
        best = Some(match best {
            None => r,
            Some(b) if lemma.is_lower() => b.min(r),
            Some(b) => b.max(r),
        });
    }
    let (b, xi) = match best {
        Some(b) => (b, samples.iter().map(|(_, s)| s.xi).fold(f64::NAN, f64::min)),
        None => {
            return Err(FitError::Degenerate { lemma, xi: f64::NAN, reason: "no sample in domain".into() });
        }
    };
    if !(b > 0.0 && b.is_finite()) {
        let worst = samples
            .iter()
            .map(|(_, s)| (s.xi, s.value.value / s.shape))
            .min_by(|a, b| if lemma.is_lower() { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) })
            .map(|(x, _)| x)
            .unwrap_or(xi);
        return Err(FitError::Degenerate { lemma, xi: worst, reason: format!("envelope constant {b:e}") });
    }
    Ok(b)
}

pub fn fit_empirical_constants(alpha: f64, d: usize, sweep: &SweepSpec) -> Result<EmpiricalConstants, FitError> {
    let fit = |lemma: LemmaId| -> Result<Option<f64>, FitError> {
        if !lemma.applies(alpha) {
            return Ok(None);
        }
        let samples = sweep_samples(lemma, alpha, d, sweep)?;
        envelope(lemma, &samples).map(Some)
    };
    Ok(EmpiricalConstants {
        alpha,
        dim: d,
        c1: fit(LemmaId::Dissipation)?.expect("always applies"),
        c2: fit(LemmaId::Drift)?.expect("always applies"),
        c3: fit(LemmaId::Cross)?.expect("always applies"),
        c4: fit(LemmaId::CrossSubcritical)?,
        c4t: fit(LemmaId::Riesz)?,
        provenance: sweep.describe(alpha, d),
    })
}

/// `C̃₄ · R(ξ) + C₀ ρ̄‖F₀‖_∞ ξ` with `R` in closed form.
pub fn riesz_moc_bound(
    xi: f64,
    m2: &Moc,
    alpha: f64,
    f0_norm: f64,
    rho_bar: f64,
    c4t: f64,
    c0: f64,
) -> Result<f64, MocError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(MocError::Parameter(format!("alpha must lie in (1,2), got {alpha}")));
    }
    if !(xi > 0.0) {
        return Err(MocError::NonPositive(xi));
    }
    Ok(c4t * riesz_integral_exact(xi, m2, alpha) + c0 * rho_bar * f0_norm * xi)
}

/// The absolute constant in front of `ρ̄‖F₀‖_∞ ξ`.
pub const C0_DEFAULT: f64 = 1.0;
