use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{load_manifest, RunStatus, DIAGNOSTICS, MANIFEST};
use super::ScenarioError;
use crate::diagnostics::{
    check_apriori, criterion_monitor, fit_flocking, read_csv, AprioriTolerances, CriterionReport, DiagnosticsRecord,
    FlockReport, Violation,
};
use crate::moc::lemmas::{write_csv as write_lemma_csv, LemmaReport};
use crate::snapshot;
use crate::solver::FlowState;

/// Written by lemma sweeps into their output directory.
pub const LEMMA_REPORTS: &str = "lemma_reports.json";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaBrief {
    pub lemma: String,
    pub alpha: f64,
    pub dim: usize,
    pub delta1: f64,
    pub constant: f64,
    pub rows: usize,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MocBrief {
    pub c0_hat: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub kappa: Option<f64>,
    pub log_lambda: Option<f64>,
    pub min_margin_rho: Option<f64>,
    pub min_margin_u: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: Option<String>,
    pub status: Option<RunStatus>,
    pub records: usize,
    pub flocking: Option<FlockReport>,
    pub violations: Vec<Violation>,
    pub criterion: Option<CriterionReport>,
    pub blowup_time: Option<f64>,
    pub final_lip_u: Option<f64>,
    pub moc: Option<MocBrief>,
    pub lemmas: Vec<LemmaBrief>,
}

fn io_err(path: &Path, e: impl ToString) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_series_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn load_states(dir: &Path, names: &[String]) -> Result<Vec<FlowState>, ScenarioError> {
    names
        .iter()
        .map(|n| {
            let path = dir.join(n);
            let (h, fields) = snapshot::read(&path).map_err(|e| io_err(&path, e))?;
            let mut it = fields.into_iter();
            let (rho, u) = (it.next(), it.next());
            match (rho, u) {
                (Some(rho), Some(u)) => FlowState::new(rho, u, h.time).map_err(|e| io_err(&path, e)),
                _ => Err(io_err(&path, "snapshot lacks rho and u")),
            }
        })
        .collect()
}

/// Emits plot-ready CSVs and `summary.json` under `<dir>/report/`.
pub fn report(dir: &Path) -> Result<Summary, ScenarioError> {
    let has_manifest = dir.join(MANIFEST).is_file();
    let lemma_path = dir.join(LEMMA_REPORTS);
    let has_lemmas = lemma_path.is_file();
    if !has_manifest && !has_lemmas {
        return Err(ScenarioError::Missing(vec![dir.join(MANIFEST), dir.join(DIAGNOSTICS), lemma_path]));
    }
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut summary = Summary {
        scenario: None,
        status: None,
        records: 0,
        flocking: None,
        violations: Vec::new(),
        criterion: None,
        blowup_time: None,
        final_lip_u: None,
        moc: None,
        lemmas: Vec::new(),
    };

    if has_manifest {
        let m = load_manifest(dir)?;
        let mut missing: Vec<PathBuf> = std::iter::once(m.diagnostics.clone())
            .chain(m.snapshots.iter().cloned())
            .map(|n| dir.join(n))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            missing.sort();
            return Err(ScenarioError::Missing(missing));
        }
        let diag = dir.join(&m.diagnostics);
        let file = fs::File::open(&diag).map_err(|e| io_err(&diag, e))?;
        let series: Vec<DiagnosticsRecord> = read_csv(file).map_err(|e| io_err(&diag, e))?;
        let states = load_states(dir, &m.snapshots)?;

        write_series_csv(
            &out.join("v_t.csv"),
            &["t", "v", "u_dev"],
            series.iter().map(|r| vec![r.t.to_string(), r.v.to_string(), r.u_dev.to_string()]),
        )?;
        write_series_csv(
            &out.join("moc_margins.csv"),
            &["t", "moc_margin_rho", "moc_margin_u"],
            series.iter().map(|r| vec![r.t.to_string(), opt(r.moc_margin_rho), opt(r.moc_margin_u)]),
        )?;

        if let Some(first) = series.first() {
            let tol = AprioriTolerances {
                transport_bounds: !m.config.frozen_density(),
                ..AprioriTolerances::default()
            };
            summary.violations = check_apriori(&series, first, &tol);
            summary.flocking = Some(fit_flocking(&series, &states, m.config.diagnostics.beta));
            let alpha = m.config.solver.alpha;
            if alpha < 1.0 {
                summary.criterion = Some(criterion_monitor(&series, alpha, m.config.diagnostics.sigma));
            }
        }
        if let Some(fp) = &summary.flocking {
            write_series_csv(
                &out.join("profile_residual.csv"),
                &["t", "residual"],
                fp.profile_residual.iter().map(|(t, r)| vec![t.to_string(), r.to_string()]),
            )?;
        }
        if let RunStatus::Blowup { t, .. } = &m.status {
            summary.blowup_time = Some(*t);
        }
        summary.final_lip_u = series.last().map(|r| r.lip_u);
        summary.moc = m.moc.as_ref().map(|s| MocBrief {
            c0_hat: s.c0_hat,
            delta1: s.selection.as_ref().map(|p| p.delta1),
            delta2: s.selection.as_ref().map(|p| p.delta2),
            kappa: s.selection.as_ref().map(|p| p.kappa),
            log_lambda: s.selection.as_ref().map(|p| p.log_lambda),
            min_margin_rho: s.min_margin_rho,
            min_margin_u: s.min_margin_u,
            error: s.error.clone(),
        });
        summary.records = series.len();
        summary.scenario = Some(m.scenario);
        summary.status = Some(m.status);
    }

    if has_lemmas {
        let text = fs::read_to_string(&lemma_path).map_err(|e| io_err(&lemma_path, e))?;
        let reports: Vec<LemmaReport> = serde_json::from_str(&text).map_err(|e| io_err(&lemma_path, e))?;
        let csv_path = out.join("lemma_margins.csv");
        let f = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        write_lemma_csv(f, &reports).map_err(|e| io_err(&csv_path, e))?;
        summary.lemmas = reports
            .iter()
            .map(|r| LemmaBrief {
                lemma: r.lemma.name().into(),
                alpha: r.alpha,
                dim: r.dim,
                delta1: r.delta1,
                constant: r.constant,
                rows: r.rows.len(),
                violations: r.violations(),
                pass: r.pass,
            })
            .collect();
    }

    let sp = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&sp, text).map_err(|e| io_err(&sp, e))?;
    Ok(summary)
}
