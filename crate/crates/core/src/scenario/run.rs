use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::data::build_initial_data;
use super::ScenarioError;
use crate::diagnostics::{envelope_rate, write_csv, DiagnosticsRecord, Recorder};
use crate::field::Representation;
use crate::moc::constants::{fit_empirical_constants, EmpiricalConstants, SweepSpec};
use crate::moc::params::{select_parameters, DataNorms, ParamInputs, Regime, SelectedParams};
use crate::moc::scan::{scan_breakthrough, ShiftSet};
use crate::snapshot;
use crate::solver::{extract_auxiliary, FlowState, Integrator, NumericalEvent};
use crate::spectral::gradient_sup;

/// Decay rate floor used for selection when the fitted rate vanishes.
pub const C0_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed { t: f64 },
    Blowup { t: f64, reason: String },
    Vacuum { t: f64, rho_min: f64 },
    MocBreakthrough { t: f64, which: String, xi: f64, margin: f64 },
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Completed { .. } => "completed",
            Self::Blowup { .. } => "blowup",
            Self::Vacuum { .. } => "vacuum",
            Self::MocBreakthrough { .. } => "moc_breakthrough",
        }
    }

    fn from_event(e: &NumericalEvent) -> Self {
        match e {
            NumericalEvent::Vacuum { t, rho_min } => Self::Vacuum { t: *t, rho_min: *rho_min },
            other => Self::Blowup {
                t: other.time(),
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MocSummary {
    pub regime: Regime,
    pub constants: Option<EmpiricalConstants>,
    /// Envelope rate of `V(t)` used as `ĉ₀`.
    pub c0_hat: f64,
    pub inputs: ParamInputs,
    pub selection: Option<SelectedParams>,
    pub error: Option<String>,
    pub min_margin_rho: Option<f64>,
    pub min_margin_u: Option<f64>,
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub series: Vec<DiagnosticsRecord>,
    /// States at `output_stride` steps plus the initial and final ones.
    pub snapshots: Vec<(usize, FlowState)>,
    pub events: Vec<NumericalEvent>,
    pub status: RunStatus,
    pub steps: usize,
    pub moc: Option<MocSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub dim: usize,
    pub n_per_dim: usize,
    pub length: f64,
    pub status: RunStatus,
    pub steps: usize,
    pub snapshots: Vec<String>,
    pub diagnostics: String,
    pub events: String,
    pub moc: Option<MocSummary>,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub simulation: Simulation,
}

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const EVENTS: &str = "events.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Time loop with periodic records; MOC parameters are selected after the
/// loop (the decay rate comes from the recorded series) and every recorded
/// state is scanned against them.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation, ScenarioError> {
    let state0 = build_initial_data(cfg)?;
    let solver = cfg.solver_config();
    let alpha = solver.alpha;
    let integ = Integrator::new(state0.grid(), &solver).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let recorder = Recorder::new(ShiftSet::standard(state0.grid()), cfg.diagnostics.sigma, None);
    let keep_states = cfg.moc_enabled();

    let mut series = Vec::new();
    let mut recorded = Vec::new();
    let mut snapshots = vec![(0usize, state0.clone())];
    let mut events = Vec::new();
    let push_record = |s: &FlowState, series: &mut Vec<DiagnosticsRecord>, recorded: &mut Vec<FlowState>| -> Result<(), NumericalEvent> {
        let aux = extract_auxiliary(s, alpha)?;
        series.push(recorder.record(s, &aux));
        if keep_states {
            recorded.push(s.clone());
        }
        Ok(())
    };
    if let Err(e) = push_record(&state0, &mut series, &mut recorded) {
        return Err(ScenarioError::Config(format!("initial data: {e}")));
    }

    let mut state = state0.clone();
    let mut steps = 0usize;
    let t_end = solver.t_end;
    let mut failure = None;
    while state.t < t_end * (1.0 - 1e-12) {
        if steps >= cfg.solver.max_steps {
            failure = Some(NumericalEvent::StepLimit { t: state.t, steps });
            break;
        }
        let dt = integ.stable_dt(&state).min(t_end - state.t);
        match integ.step(&state, dt) {
            Ok(s) => state = s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        steps += 1;
        let last = state.t >= t_end * (1.0 - 1e-12);
        if steps % cfg.diagnostics.stride == 0 || last {
            if let Err(e) = push_record(&state, &mut series, &mut recorded) {
                failure = Some(e);
                break;
            }
        }
        if steps % solver.output_stride == 0 || last {
            snapshots.push((steps, state.clone()));
        }
    }
    if let Some(e) = &failure {
        if let Some(r) = series.last_mut() {
            r.events.push(e.to_string());
        }
        if snapshots.last().map(|(k, _)| *k) != Some(steps) {
            snapshots.push((steps, state.clone()));
        }
        events.push(e.clone());
    }

    let mut status = match &failure {
        Some(e) => RunStatus::from_event(e),
        None => RunStatus::Completed { t: state.t },
    };
    let moc = if keep_states {
        let summary = moc_posthoc(cfg, &state0, &mut series, &recorded);
        if let (RunStatus::Completed { .. }, Some(b)) = (&status, first_breakthrough(&summary, &series, &recorded)) {
            status = b;
        }
        Some(summary)
    } else {
        None
    };
    Ok(Simulation {
        config: cfg.clone(),
        series,
        snapshots,
        events,
        status,
        steps,
        moc,
    })
}

fn param_inputs(cfg: &ScenarioConfig, state0: &FlowState, series: &[DiagnosticsRecord], c0: f64) -> Result<ParamInputs, String> {
    let aux = extract_auxiliary(state0, cfg.solver.alpha).map_err(|e| e.to_string())?;
    let f = cfg.diagnostics.density_bound_factor;
    let first = &series[0];
    let supercritical = cfg.solver.alpha < 1.0;
    Ok(ParamInputs {
        rho_lower: series.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min) / f,
        rho_upper: series.iter().map(|r| r.rho_max).fold(0.0, f64::max) * f,
        v0: first.v,
        f0_norm: aux.f.sup_norm(),
        grad_f0_norm: gradient_sup(&aux.f),
        h0_norm: aux.h.sup_norm(),
        c0,
        sigma: supercritical.then_some(cfg.diagnostics.sigma),
        u_csigma: supercritical.then(|| series.iter().map(|r| r.holder_u_sigma).fold(0.0, f64::max)),
        rho_data: Some(DataNorms {
            half_osc: 0.5 * (first.rho_max - first.rho_min),
            grad: first.lip_rho,
        }),
        u_data: Some(DataNorms {
            half_osc: 0.5 * first.v,
            grad: first.lip_u,
        }),
    })
}

fn moc_posthoc(cfg: &ScenarioConfig, state0: &FlowState, series: &mut [DiagnosticsRecord], states: &[FlowState]) -> MocSummary {
    let alpha = cfg.solver.alpha;
    let dim = cfg.grid.dim;
    let regime = Regime::of_alpha(alpha).expect("alpha validated");
    let c0_hat = envelope_rate(series);
    let c0 = if c0_hat.is_finite() { c0_hat.max(C0_FLOOR) } else { C0_FLOOR };
    let mut summary = MocSummary {
        regime,
        constants: None,
        c0_hat,
        inputs: ParamInputs {
            rho_lower: 0.0,
            rho_upper: 0.0,
            v0: 0.0,
            f0_norm: 0.0,
            grad_f0_norm: 0.0,
            h0_norm: 0.0,
            c0,
            sigma: None,
            u_csigma: None,
            rho_data: None,
            u_data: None,
        },
        selection: None,
        error: None,
        min_margin_rho: None,
        min_margin_u: None,
    };
    let constants = match fit_empirical_constants(alpha, dim, &SweepSpec::default()) {
        Ok(c) => c,
        Err(e) => {
            summary.error = Some(format!("constant fit failed: {e}"));
            return summary;
        }
    };
    summary.constants = Some(constants.clone());
    match param_inputs(cfg, state0, series, c0) {
        Ok(i) => summary.inputs = i,
        Err(e) => {
            summary.error = Some(e);
            return summary;
        }
    }
    let sel = match select_parameters(regime, alpha, &summary.inputs, &constants) {
        Ok(s) => s,
        Err(e) => {
            summary.error = Some(e.to_string());
            return summary;
        }
    };
    let shifts = ShiftSet::standard(state0.grid());
    let pair = sel.pair;
    let margins: Vec<(f64, f64)> = states
        .par_iter()
        .map(|s| {
            (
                scan_breakthrough(&s.rho, &pair.omega1, 1.0, &shifts).margin,
                scan_breakthrough(&s.u, &pair.omega2, pair.decay(s.t), &shifts).margin,
            )
        })
        .collect();
    for (r, (mr, mu)) in series.iter_mut().zip(&margins) {
        r.moc_margin_rho = Some(*mr);
        r.moc_margin_u = Some(*mu);
    }
    summary.min_margin_rho = margins.iter().map(|m| m.0).reduce(f64::min);
    summary.min_margin_u = margins.iter().map(|m| m.1).reduce(f64::min);
    summary.selection = Some(sel);
    summary
}

fn first_breakthrough(summary: &MocSummary, series: &[DiagnosticsRecord], states: &[FlowState]) -> Option<RunStatus> {
    let pair = summary.selection.as_ref()?.pair;
    let shifts = ShiftSet::standard(states.first()?.grid());
    for (r, s) in series.iter().zip(states) {
        for (which, margin) in [("rho", r.moc_margin_rho), ("u", r.moc_margin_u)] {
            if margin.is_some_and(|m| !(m > 0.0)) {
                let scan = if which == "rho" {
                    scan_breakthrough(&s.rho, &pair.omega1, 1.0, &shifts)
                } else {
                    scan_breakthrough(&s.u, &pair.omega2, pair.decay(s.t), &shifts)
                };
                return Some(RunStatus::MocBreakthrough {
                    t: r.t,
                    which: which.into(),
                    xi: scan.distance,
                    margin: scan.margin,
                });
            }
        }
    }
    None
}

fn io_err(path: &Path, e: impl ToString) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes the manifest, snapshots, diagnostics CSV and event log.
pub fn write_artifacts(sim: Simulation, dir: &Path) -> Result<RunArtifacts, ScenarioError> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
    let mut snapshot_names = Vec::new();
    for (step, s) in &sim.snapshots {
        let name = format!("{SNAPSHOT_DIR}/step_{step:08}.snap");
        let path = dir.join(&name);
        snapshot::write(&path, &[("rho", &s.rho), ("u", &s.u)], s.t, Representation::Physical)
            .map_err(|e| io_err(&path, e))?;
        snapshot_names.push(name);
    }
    let diag = dir.join(DIAGNOSTICS);
    let file = fs::File::create(&diag).map_err(|e| io_err(&diag, e))?;
    write_csv(file, &sim.series).map_err(|e| io_err(&diag, e))?;

    let ev_path = dir.join(EVENTS);
    let mut ev = fs::File::create(&ev_path).map_err(|e| io_err(&ev_path, e))?;
    for e in &sim.events {
        let line = serde_json::to_string(e).expect("event serializes");
        writeln!(ev, "{line}").map_err(|e| io_err(&ev_path, e))?;
    }
    if let RunStatus::MocBreakthrough { .. } = &sim.status {
        let mut v = serde_json::to_value(&sim.status).expect("status serializes");
        v["kind"] = v["status"].take();
        v.as_object_mut().expect("object").remove("status");
        writeln!(ev, "{v}").map_err(|e| io_err(&ev_path, e))?;
    }
    if let Some(err) = sim.moc.as_ref().and_then(|m| m.error.as_ref()) {
        let v = serde_json::json!({ "kind": "moc_selection_failed", "message": err });
        writeln!(ev, "{v}").map_err(|e| io_err(&ev_path, e))?;
    }

    let cfg = &sim.config;
    let mut echoed = cfg.clone();
    echoed.grid.n = Some(cfg.grid.points());
    let manifest = Manifest {
        scenario: cfg.scenario.name().into(),
        seed: cfg.seed,
        config: echoed,
        dim: cfg.grid.dim,
        n_per_dim: cfg.grid.points(),
        length: cfg.grid.length,
        status: sim.status.clone(),
        steps: sim.steps,
        snapshots: snapshot_names,
        diagnostics: DIAGNOSTICS.into(),
        events: EVENTS.into(),
        moc: sim.moc.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let man_path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&man_path, text).map_err(|e| io_err(&man_path, e))?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        manifest,
        simulation: sim,
    })
}

/// Simulates and persists into `dir`, or the configured `output_dir`.
pub fn run(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<RunArtifacts, ScenarioError> {
    let dir = match (dir, &cfg.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(ScenarioError::Config("no output directory given".into())),
    };
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let sim = simulate(cfg)?;
    write_artifacts(sim, &dir)
}

/// Reads a manifest back.
pub fn load_manifest(dir: &Path) -> Result<Manifest, ScenarioError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&path, e))
}
