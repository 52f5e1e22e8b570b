//! Per-ξ comparison of quadrature values against the fitted closed forms.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{evaluate, EmpiricalConstants, LemmaId, LemmaParams, SweepSpec};
use super::integrals::{c_alpha, sphere_area};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub xi: f64,
    pub branch: u8,
    pub quad_value: f64,
    pub bound_value: f64,
    /// Positive when the inequality holds.
    pub margin: f64,
    pub quad_err: f64,
    pub pass: bool,
}

/// A bound with explicit constants, checked alongside the fitted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCheck {
    pub description: String,
    /// `max value / bound` over the rows it applies to.
    pub worst_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: LemmaId,
    pub alpha: f64,
    pub dim: usize,
    pub delta1: f64,
    pub params: LemmaParams,
    pub constant: f64,
    pub rows: Vec<LemmaRow>,
    pub explicit: Option<ExplicitCheck>,
    pub errors: Vec<String>,
    pub pass: bool,
}

impl LemmaReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count() + self.errors.len()
    }

    pub fn worst_margin(&self) -> Option<&LemmaRow> {
        self.rows.iter().min_by(|a, b| {
            let ra = a.margin / a.bound_value.abs().max(f64::MIN_POSITIVE);
            let rb = b.margin / b.bound_value.abs().max(f64::MIN_POSITIVE);
            ra.total_cmp(&rb)
        })
    }
}

/// Evaluates `lemma` on `xi_grid` (points outside its range are skipped) and
/// compares against `C · shape` with `C` from `consts`.
pub fn verify_lemma(
    lemma: LemmaId,
    alpha: f64,
    d: usize,
    params: &LemmaParams,
    xi_grid: &[f64],
    consts: &EmpiricalConstants,
) -> LemmaReport {
    let mut errors = Vec::new();
    let constant = match consts.get(lemma) {
        Some(c) => c,
        None => {
            errors.push(format!("no fitted constant for {lemma} at alpha = {alpha}"));
            f64::NAN
        }
    };
    let results: Vec<_> = xi_grid.par_iter().map(|&xi| (xi, evaluate(lemma, xi, params, alpha, d))).collect();
    let mut rows = Vec::new();
    let mut explicit_worst = f64::NEG_INFINITY;
    let mut explicit_used = false;
    let expl = explicit_bound(lemma, alpha, d, params);
    for (xi, r) in results {
        match r {
            Ok(None) => {}
            Ok(Some(s)) => {
                let bound = constant * s.shape;
                let margin = if lemma.is_lower() {
                    s.value.value - bound
                } else {
                    bound - s.value.value
                };
                let pass = margin >= -s.value.abs_err && margin.is_finite();
                rows.push(LemmaRow {
                    xi,
                    branch: s.branch,
                    quad_value: s.value.value,
                    bound_value: bound,
                    margin,
                    quad_err: s.value.abs_err,
                    pass,
                });
                if let Some((_, f)) = &expl {
                    if let Some(b) = f(xi) {
                        explicit_used = true;
                        explicit_worst = explicit_worst.max((s.value.value - s.value.abs_err) / b);
                    }
                }
            }
            Err(e) => errors.push(format!("xi = {xi:e}: {e}")),
        }
    }
    let explicit = expl.and_then(|(description, _)| {
        explicit_used.then(|| ExplicitCheck {
            description,
            worst_ratio: explicit_worst,
            pass: explicit_worst <= 1.0,
        })
    });
    let pass = errors.is_empty()
        && !rows.is_empty()
        && rows.iter().all(|r| r.pass)
        && explicit.as_ref().map_or(true, |e| e.pass);
    LemmaReport {
        lemma,
        alpha,
        dim: d,
        delta1: params.delta1(),
        params: *params,
        constant,
        rows,
        explicit,
        errors,
        pass,
    }
}

/// Every applicable lemma at every `μ` of the sweep.
pub fn verify_all(alpha: f64, d: usize, consts: &EmpiricalConstants, sweep: &SweepSpec) -> Vec<LemmaReport> {
    let grid = sweep.xi_grid();
    let mut out = Vec::new();
    for lemma in LemmaId::ALL.into_iter().filter(|l| l.applies(alpha)) {
        for mu in sweep.mus(alpha) {
            out.push(verify_lemma(lemma, alpha, d, &sweep.params(mu), &grid, consts));
        }
    }
    out
}

type Bound = Box<dyn Fn(f64) -> Option<f64> + Sync>;

fn explicit_bound(lemma: LemmaId, alpha: f64, d: usize, p: &LemmaParams) -> Option<(String, Bound)> {
    let p = *p;
    match lemma {
        LemmaId::Cross => {
            let k = 8.0 * c_alpha(alpha, d) * sphere_area(d - 1) / (2.0 - alpha);
            Some((
                "xi <= lambda: value <= 8 c_alpha |S^{d-1}| / (2 - alpha) * delta1 delta2 lambda^-2 xi^(2-alpha)".into(),
                Box::new(move |xi| {
                    (xi <= p.lambda).then(|| k * p.delta1() * p.delta2 * p.lambda.powi(-2) * xi.powf(2.0 - alpha))
                }),
            ))
        }
        LemmaId::Riesz => {
            let w2 = p.omega2().ok()?;
            let k = 2.0 / ((alpha - 1.0) * (2.0 - alpha));
            Some((
                "xi > lambda: R(xi) <= 2 / ((alpha - 1)(2 - alpha)) * omega2(xi) xi^(alpha-1)".into(),
                Box::new(move |xi| (xi > p.lambda).then(|| k * w2.at(xi) * xi.powf(alpha - 1.0))),
            ))
        }
        _ => None,
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    lemma: &'a str,
    alpha: f64,
    d: usize,
    delta1: f64,
    delta2: f64,
    mu: f64,
    lambda: f64,
    xi: f64,
    quad_value: f64,
    bound_value: f64,
    margin: f64,
    quad_err: f64,
    pass: bool,
}

/// Writes the rows of several reports as one CSV table.
pub fn write_csv<W: io::Write>(out: W, reports: &[LemmaReport]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for row in &r.rows {
            w.serialize(CsvRow {
                lemma: r.lemma.name(),
                alpha: r.alpha,
                d: r.dim,
                delta1: r.delta1,
                delta2: r.params.delta2,
                mu: r.params.mu,
                lambda: r.params.lambda,
                xi: row.xi,
                quad_value: row.quad_value,
                bound_value: row.bound_value,
                margin: row.margin,
                quad_err: row.quad_err,
                pass: row.pass,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
