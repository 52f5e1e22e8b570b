//! Time-series monitors: conserved quantities, maximum principles,
//! oscillation decay, Lipschitz and Hölder norms, and MOC scan margins.

use std::io;

use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::interp::{refined_max, refined_min, refined_sup_ratio};
use crate::moc::scan::{holder_seminorm, scan_breakthrough, ShiftSet};
use crate::moc::MocPair;
use crate::solver::{AuxiliaryFields, FlowState};
use crate::spectral::{gradient_sup, translate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub g_integral: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub f_sup: f64,
    pub g_sup: f64,
    /// `max u − min u`.
    pub v: f64,
    pub lip_rho: f64,
    pub lip_u: f64,
    pub holder_u_sigma: f64,
    /// `‖u − ū‖∞` with `ū` = momentum / mass.
    pub u_dev: f64,
    pub u_sup: f64,
    pub moc_margin_rho: Option<f64>,
    pub moc_margin_u: Option<f64>,
    pub events: Vec<String>,
}

/// Holds the shift set so repeated records on one grid share it.
#[derive(Debug, Clone)]
pub struct Recorder {
    shifts: ShiftSet,
    sigma: f64,
    pair: Option<MocPair>,
}

impl Recorder {
    pub fn new(shifts: ShiftSet, sigma: f64, pair: Option<MocPair>) -> Self {
        Self { shifts, sigma, pair }
    }

    pub fn shifts(&self) -> &ShiftSet {
        &self.shifts
    }

    pub fn pair(&self) -> Option<&MocPair> {
        self.pair.as_ref()
    }

    pub fn set_pair(&mut self, pair: Option<MocPair>) {
        self.pair = pair;
    }

    pub fn record(&self, state: &FlowState, aux: &AuxiliaryFields) -> DiagnosticsRecord {
        let rho = &state.rho;
        let u = &state.u;
        let mass = rho.integral();
        let rho_u = rho.zip_with(u, |a, b| a * b).expect("shared grid");
        let momentum = rho_u.integral();
        let u_bar = momentum / mass;
        let (umin, umax) = extrema(u);
        let (rho_min, rho_max) = extrema(rho);
        let (gmin, gmax) = extrema(&aux.g);
        let (moc_margin_rho, moc_margin_u) = match &self.pair {
            Some(p) => (
                Some(scan_breakthrough(rho, &p.omega1, 1.0, &self.shifts).margin),
                Some(scan_breakthrough(u, &p.omega2, p.decay(state.t), &self.shifts).margin),
            ),
            None => (None, None),
        };
        let mut events = Vec::new();
        let norms = [mass, momentum, rho_min, rho_max, umin, umax];
        if norms.iter().any(|v| !v.is_finite()) {
            events.push(format!("non_finite at t = {}", state.t));
        }
        DiagnosticsRecord {
            t: state.t,
            mass,
            momentum,
            g_integral: aux.g.integral(),
            rho_min,
            rho_max,
            f_sup: refined_sup_ratio(&aux.g, rho).max(aux.f.sup_norm()),
            g_sup: gmax.max(-gmin),
            v: umax - umin,
            lip_rho: gradient_sup(rho),
            lip_u: gradient_sup(u),
            holder_u_sigma: holder_seminorm(u, self.sigma, &self.shifts),
            u_dev: (umax - u_bar).abs().max((umin - u_bar).abs()),
            u_sup: u.sup_norm(),
            moc_margin_rho,
            moc_margin_u,
            events,
        }
    }
}

/// Sub-grid extrema of a band-limited field; grid values in 3-D.
fn extrema(f: &ScalarField) -> (f64, f64) {
    if f.grid().dim() <= 2 {
        (refined_min(f).min(f.min()), refined_max(f).max(f.max()))
    } else {
        (f.min(), f.max())
    }
}

/// One-off record with the standard shift set.
pub fn record(state: &FlowState, aux: &AuxiliaryFields, pair: Option<&MocPair>, sigma: f64) -> DiagnosticsRecord {
    Recorder::new(ShiftSet::standard(state.grid()), sigma, pair.copied()).record(state, aux)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlockStatus {
    Conclusive,
    /// Fewer than three e-foldings of `‖u − ū‖∞`.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockReport {
    pub u_bar: f64,
    /// `max_t |momentum/mass − ū|`.
    pub u_bar_drift: f64,
    /// `−slope` of `ln ‖u − ū‖∞` over the final half.
    pub decay_rate_fit: f64,
    pub r_squared: f64,
    /// Largest `c` with `V(t) ≤ V(0) e^{−ct}` at every record.
    pub envelope_rate: f64,
    pub e_foldings: f64,
    pub status: FlockStatus,
    pub beta: f64,
    /// `(t, ‖ρ(·+ūt, t) − ρ∞‖_{C^β})`.
    pub profile_residual: Vec<(f64, f64)>,
    /// Largest increase between consecutive residuals.
    pub residual_max_increase: f64,
}

/// Least squares `y = a + b x`; returns `(b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Largest rate `c` with `V(t) ≤ V(0) e^{−c t}` on the series.
pub fn envelope_rate(series: &[DiagnosticsRecord]) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    if first.v <= 0.0 {
        return 0.0;
    }
    series
        .iter()
        .filter(|r| r.t > first.t)
        .map(|r| {
            if r.v <= 0.0 {
                f64::INFINITY
            } else {
                (first.v / r.v).ln() / (r.t - first.t)
            }
        })
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .min(f64::MAX)
}

/// Discrete `C^β` norm `‖f‖∞ + [f]_β`.
pub fn holder_norm(f: &ScalarField, beta: f64, shifts: &ShiftSet) -> f64 {
    f.sup_norm() + holder_seminorm(f, beta, shifts)
}

/// Fits the flocking rate and measures convergence to a travelling profile.
/// `states` are the recorded states (any subset, in time order).
pub fn fit_flocking(series: &[DiagnosticsRecord], states: &[FlowState], beta: f64) -> FlockReport {
    assert!(!series.is_empty(), "empty series");
    let first = &series[0];
    let u_bar = first.momentum / first.mass;
    let u_bar_drift = series
        .iter()
        .map(|r| (r.momentum / r.mass - u_bar).abs())
        .fold(0.0, f64::max);
    let floor = f64::MIN_POSITIVE;
    let dev0 = first.u_dev.max(floor);
    let dev_end = series.last().map(|r| r.u_dev).unwrap_or(dev0).max(floor);
    let e_foldings = (dev0 / dev_end).ln();
    let half = &series[series.len() / 2..];
    let (decay_rate_fit, r_squared) = if half.len() >= 2 && half.iter().all(|r| r.u_dev > 0.0) {
        let x: Vec<f64> = half.iter().map(|r| r.t).collect();
        let y: Vec<f64> = half.iter().map(|r| r.u_dev.ln()).collect();
        let (s, r2) = linear_fit(&x, &y);
        (-s, r2)
    } else {
        (0.0, 0.0)
    };
    let status = if e_foldings >= 3.0 {
        FlockStatus::Conclusive
    } else {
        FlockStatus::Inconclusive
    };
    let mut profile_residual = Vec::new();
    let mut residual_max_increase = 0.0f64;
    if let Some(last) = states.last() {
        let shifts = ShiftSet::standard(last.grid());
        let frame = |s: &FlowState| {
            let mut a = vec![0.0; s.grid().dim()];
            a[0] = u_bar * s.t;
            translate(&s.rho, &a)
        };
        let terminal = frame(last);
        for s in states {
            let diff = frame(s).zip_with(&terminal, |a, b| a - b).expect("shared grid");
            profile_residual.push((s.t, holder_norm(&diff, beta, &shifts)));
        }
        for w in profile_residual.windows(2) {
            residual_max_increase = residual_max_increase.max(w[1].1 - w[0].1);
        }
    }
    FlockReport {
        u_bar,
        u_bar_drift,
        decay_rate_fit,
        r_squared,
        envelope_rate: envelope_rate(series),
        e_foldings,
        status,
        beta,
        profile_residual,
        residual_max_increase,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriTolerances {
    pub mass_rel: f64,
    pub momentum_abs: f64,
    pub g_integral_abs: f64,
    pub f_rel: f64,
    pub g_rel: f64,
    pub v_rel: f64,
    /// `rho_min` below this fraction of its initial value counts as collapse.
    pub rho_collapse: f64,
    /// The `F` and `G` bounds hold only for the full system.
    pub transport_bounds: bool,
}

impl Default for AprioriTolerances {
    fn default() -> Self {
        Self {
            mass_rel: 1e-9,
            momentum_abs: 1e-7,
            g_integral_abs: 1e-9,
            f_rel: 1e-6,
            g_rel: 1e-6,
            v_rel: 1e-6,
            rho_collapse: 1e-3,
            transport_bounds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub t: f64,
    /// Absent for recorded events.
    pub value: Option<f64>,
    pub bound: Option<f64>,
}

/// Flags every record that breaks a conservation law or maximum principle.
pub fn check_apriori(series: &[DiagnosticsRecord], initial: &DiagnosticsRecord, tol: &AprioriTolerances) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |name: &str, r: &DiagnosticsRecord, value: f64, bound: f64| {
        if !(value <= bound) {
            out.push(Violation {
                name: name.into(),
                t: r.t,
                value: Some(value),
                bound: Some(bound),
            });
        }
    };
    let mut events = Vec::new();
    let mut v_prev = initial.v;
    for r in series {
        flag("mass", r, (r.mass - initial.mass).abs(), tol.mass_rel * initial.mass.abs().max(1.0));
        flag("momentum", r, (r.momentum - initial.momentum).abs(), tol.momentum_abs * initial.momentum.abs().max(1.0));
        flag("g_integral", r, (r.g_integral - initial.g_integral).abs(), tol.g_integral_abs);
        if tol.transport_bounds {
            flag("f_sup", r, r.f_sup, initial.f_sup * (1.0 + tol.f_rel) + 1e-12);
            flag("g_sup", r, r.g_sup, r.rho_max * initial.f_sup * (1.0 + tol.g_rel) + 1e-12);
        }
        flag("v_increase", r, r.v, v_prev * (1.0 + tol.v_rel) + 1e-14);
        v_prev = v_prev.min(r.v);
        flag("rho_min_collapse", r, -r.rho_min, -tol.rho_collapse * initial.rho_min);
        for e in &r.events {
            events.push(Violation {
                name: format!("event: {e}"),
                t: r.t,
                value: None,
                bound: None,
            });
        }
    }
    out.extend(events);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub exponent: f64,
    /// `C` fitted at the first record.
    pub c: f64,
    /// `max_t lip_rho / (C (1 + ‖u‖_{C^σ}^p))`.
    pub worst_ratio: f64,
    pub worst_t: f64,
    pub max_holder_u: f64,
}

/// Tracks `lip_rho ≤ C (1 + ‖u‖_{C^σ}^{1/(σ−1+α)})` with `C` fitted at `t = 0`.
pub fn criterion_monitor(series: &[DiagnosticsRecord], alpha: f64, sigma: f64) -> CriterionReport {
    let p = 1.0 / (sigma - 1.0 + alpha);
    let shape = |r: &DiagnosticsRecord| 1.0 + r.holder_u_sigma.powf(p);
    let first = &series[0];
    let c = first.lip_rho / shape(first);
    let mut worst = (f64::NEG_INFINITY, first.t);
    for r in series {
        // a flat initial density leaves C = 0; only growth then counts
        let ratio = if c > 0.0 {
            r.lip_rho / (c * shape(r))
        } else if r.lip_rho > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > worst.0 || ratio.is_nan() {
            worst = (ratio, r.t);
        }
    }
    CriterionReport {
        exponent: p,
        c,
        worst_ratio: worst.0,
        worst_t: worst.1,
        max_holder_u: series.iter().map(|r| r.holder_u_sigma).fold(0.0, f64::max),
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    t: f64,
    mass: f64,
    momentum: f64,
    g_integral: f64,
    rho_min: f64,
    rho_max: f64,
    f_sup: f64,
    g_sup: f64,
    v: f64,
    lip_rho: f64,
    lip_u: f64,
    holder_u_sigma: f64,
    u_dev: f64,
    u_sup: f64,
    moc_margin_rho: Option<f64>,
    moc_margin_u: Option<f64>,
    events: &'a str,
}

pub fn write_csv<W: io::Write>(out: W, series: &[DiagnosticsRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in series {
        let ev = r.events.join("; ");
        w.serialize(CsvRow {
            t: r.t,
            mass: r.mass,
            momentum: r.momentum,
            g_integral: r.g_integral,
            rho_min: r.rho_min,
            rho_max: r.rho_max,
            f_sup: r.f_sup,
            g_sup: r.g_sup,
            v: r.v,
            lip_rho: r.lip_rho,
            lip_u: r.lip_u,
            holder_u_sigma: r.holder_u_sigma,
            u_dev: r.u_dev,
            u_sup: r.u_sup,
            moc_margin_rho: r.moc_margin_rho,
            moc_margin_u: r.moc_margin_u,
            events: &ev,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<DiagnosticsRecord>, csv::Error> {
    #[derive(Deserialize)]
    struct Row {
        t: f64,
        mass: f64,
        momentum: f64,
        g_integral: f64,
        rho_min: f64,
        rho_max: f64,
        f_sup: f64,
        g_sup: f64,
        v: f64,
        lip_rho: f64,
        lip_u: f64,
        holder_u_sigma: f64,
        u_dev: f64,
        u_sup: f64,
        moc_margin_rho: Option<f64>,
        moc_margin_u: Option<f64>,
        events: String,
    }
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize::<Row>()
        .map(|r| {
            r.map(|r| DiagnosticsRecord {
                t: r.t,
                mass: r.mass,
                momentum: r.momentum,
                g_integral: r.g_integral,
                rho_min: r.rho_min,
                rho_max: r.rho_max,
                f_sup: r.f_sup,
                g_sup: r.g_sup,
                v: r.v,
                lip_rho: r.lip_rho,
                lip_u: r.lip_u,
                holder_u_sigma: r.holder_u_sigma,
                u_dev: r.u_dev,
                u_sup: r.u_sup,
                moc_margin_rho: r.moc_margin_rho,
                moc_margin_u: r.moc_margin_u,
                events: r.events.split("; ").filter(|s| !s.is_empty()).map(String::from).collect(),
            })
        })
        .collect()
}
