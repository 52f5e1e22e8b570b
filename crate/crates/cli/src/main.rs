use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alignflow::moc::constants::{fit_empirical_constants, EmpiricalConstants, LemmaId, SweepSpec};
use alignflow::moc::lemmas::{verify_all, verify_lemma, write_csv, LemmaReport};
use alignflow::moc::params::{select_parameters, ParamError, ParamInputs, Regime};
use alignflow::scenario::report::LEMMA_REPORTS;
use alignflow::scenario::{report, run, RunStatus, ScenarioConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

const EXIT_NUMERICAL: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "alignflow", version, about = "Euler-alignment simulator and modulus-of-continuity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit envelope constants and check every lemma on a sweep.
    VerifyLemmas {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        dim: usize,
        /// TOML sweep used for verification (missing keys take defaults).
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Use these constants (JSON) instead of fitting.
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Verify at this lambda when no sweep file is given.
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        /// Restrict to one lemma: dissipation, drift, cross, cross_subcritical, riesz.
        #[arg(long)]
        lemma: Option<String>,
        /// Directory for lemma_reports.json and lemma_margins.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose (delta1, delta2, kappa, lambda, mu) for a regime.
    SelectParams {
        /// subcritical, critical or supercritical.
        regime: String,
        /// JSON file with rho_lower, rho_upper, v0, f0_norm, grad_f0_norm, h0_norm, c0 [, sigma, u_csigma].
        inputs: PathBuf,
        /// Required unless the regime is critical.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Summarize a run or lemma directory into <dir>/report.
    Report { dir: PathBuf },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn constants(path: Option<&Path>, alpha: f64, dim: usize) -> Result<EmpiricalConstants> {
    match path {
        Some(p) => read_json(p),
        None => fit_empirical_constants(alpha, dim, &SweepSpec::default()).map_err(|e| anyhow::anyhow!("fit failed: {e}")),
    }
}

fn cmd_run(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = ScenarioConfig::load(config)?;
    let art = run(&cfg, out)?;
    println!("{}", serde_json::to_string(&art.manifest.status)?);
    eprintln!("wrote {}", art.dir.display());
    Ok(match art.manifest.status {
        RunStatus::Completed { .. } => 0,
        RunStatus::Blowup { .. } | RunStatus::Vacuum { .. } => EXIT_NUMERICAL,
        RunStatus::MocBreakthrough { .. } => EXIT_VIOLATION,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    alpha: f64,
    dim: usize,
    sweep: Option<&Path>,
    consts: Option<&Path>,
    lambda: f64,
    lemma: Option<&str>,
    out: Option<&Path>,
) -> Result<u8> {
    if !(alpha > 0.0 && alpha < 2.0) {
        bail!("alpha must lie in (0,2)");
    }
    if !(1..=3).contains(&dim) {
        bail!("dim must be 1, 2 or 3");
    }
    let spec = match sweep {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SweepSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SweepSpec::default().with_lambda(lambda),
    };
    let c = constants(consts, alpha, dim)?;
    let reports: Vec<LemmaReport> = match lemma {
        Some(name) => {
            let id = LemmaId::parse(name).with_context(|| format!("unknown lemma {name}"))?;
            if !id.applies(alpha) {
                bail!("{name} does not apply at alpha = {alpha}");
            }
            spec.mus(alpha)
                .into_iter()
                .map(|mu| verify_lemma(id, alpha, dim, &spec.params(mu), &spec.xi_grid(), &c))
                .collect()
        }
        None => verify_all(alpha, dim, &c, &spec),
    };
    for r in &reports {
        let worst = r.worst_margin().map(|w| w.margin).unwrap_or(f64::NAN);
        println!(
            "{:<18} mu={:<6.4} C={:<10.5} rows={:<3} violations={} worst_margin={:.3e} {}",
            r.lemma.name(),
            r.params.mu,
            r.constant,
            r.rows.len(),
            r.violations(),
            worst,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(LEMMA_REPORTS), serde_json::to_string_pretty(&reports)?)?;
        fs::write(dir.join("constants.json"), serde_json::to_string_pretty(&c)?)?;
        write_csv(fs::File::create(dir.join("lemma_margins.csv"))?, &reports)?;
    }
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { EXIT_VIOLATION })
}

fn cmd_select(regime: &str, inputs: &Path, alpha: Option<f64>, dim: usize, consts: Option<&Path>) -> Result<u8> {
    let regime = Regime::parse(regime).with_context(|| format!("unknown regime {regime}"))?;
    let alpha = match (regime, alpha) {
        (_, Some(a)) => a,
        (Regime::Critical, None) => 1.0,
        _ => bail!("--alpha is required for this regime"),
    };
    let inp: ParamInputs = read_json(inputs)?;
    let c = constants(consts, alpha, dim)?;
    match select_parameters(regime, alpha, &inp, &c) {
        Ok(p) => {
            println!("{}", serde_json::to_string_pretty(&p)?);
            Ok(0)
        }
        Err(ParamError::Infeasible(r)) => {
            println!("{}", serde_json::to_string_pretty(&r)?);
            eprintln!("infeasible: binding inequality `{}`", r.binding);
            Ok(EXIT_VIOLATION)
        }
        Err(e) => Err(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let res = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out.as_deref()),
        Command::VerifyLemmas {
            alpha,
            dim,
            sweep,
            constants,
            lambda,
            lemma,
            out,
        } => cmd_verify(*alpha, *dim, sweep.as_deref(), constants.as_deref(), *lambda, lemma.as_deref(), out.as_deref()),
        Command::SelectParams {
            regime,
            inputs,
            alpha,
            dim,
            constants,
        } => cmd_select(regime, inputs, *alpha, *dim, constants.as_deref()),
        Command::Report { dir } => report(dir).map(|s| {
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            0
        }).map_err(Into::into),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
