use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModeSpec, ScenarioConfig, ScenarioKind};
use super::ScenarioError;
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::solver::FlowState;
use crate::spectral::{dealias, inv_dx1_lambda};

/// Smallest allowed `min rho₀ / rho_bar`.
pub const VACUUM_FLOOR: f64 = 0.1;

fn wavevectors(dim: usize, kmax: i64, keep: impl Fn(&[i64]) -> bool) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let span = (2 * kmax + 1) as usize;
    for flat in 0..span.pow(dim as u32) {
        let mut k = Vec::with_capacity(dim);
        let mut r = flat;
        for _ in 0..dim {
            k.push((r % span) as i64 - kmax);
            r /= span;
        }
        // one of each ±k pair
        let first_nonzero = k.iter().find(|&&c| c != 0);
        if matches!(first_nonzero, Some(&c) if c > 0) && keep(&k) {
            out.push(k);
        }
    }
    out
}

fn random_modes(rng: &mut ChaCha8Rng, ks: Vec<Vec<i64>>) -> Vec<ModeSpec> {
    ks.into_iter()
        .map(|k| {
            let k2: i64 = k.iter().map(|c| c * c).sum();
            let amplitude = rng.gen_range(0.5..1.0) / k2 as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            ModeSpec { k, amplitude, phase }
        })
        .collect()
}

fn synthesize(grid: &TorusGrid, modes: &[ModeSpec]) -> ScalarField {
    let s = grid.k_scale();
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|m| {
                let arg: f64 = m.k.iter().zip(x).map(|(k, xi)| *k as f64 * s * xi).sum();
                m.amplitude * (arg + m.phase).cos()
            })
            .sum()
    })
}

/// Initial state for the scenario; fields are dealiased when the solver is.
pub fn build_initial_data(cfg: &ScenarioConfig) -> Result<FlowState, ScenarioError> {
    cfg.validate()?;
    let grid = TorusGrid::new(cfg.grid.dim, cfg.grid.points(), cfg.grid.length).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let d = &cfg.data;
    let dim = cfg.grid.dim;
    let kind = cfg.scenario;
    let keep = move |k: &[i64]| match kind {
        ScenarioKind::GZero => k[0] != 0,
        ScenarioKind::ShearFlock => k[0] == 0,
        _ => true,
    };
    let mut rng_rho = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_u = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_u.set_stream(1);

    let rho = if kind == ScenarioKind::FrozenBurgers {
        ScalarField::constant(&grid, d.rho_bar)
    } else {
        let pert = match &d.rho_modes {
            Some(ms) => synthesize(&grid, ms),
            None => {
                let p = synthesize(&grid, &random_modes(&mut rng_rho, wavevectors(dim, d.max_mode, keep)));
                let depth = -p.min();
                if depth > 0.0 {
                    p.map(|v| v * d.rho_amplitude / depth)
                } else {
                    p
                }
            }
        };
        pert.map(|v| d.rho_bar + v)
    };
    let rho = if cfg.solver.dealias { dealias(&rho) } else { rho };
    let rho_min = rho.min();
    if rho_min < VACUUM_FLOOR * d.rho_bar {
        return Err(ScenarioError::Vacuum {
            rho_min,
            floor: VACUUM_FLOOR * d.rho_bar,
        });
    }

    let u = if kind == ScenarioKind::GZero {
        inv_dx1_lambda(&rho, cfg.solver.alpha)
            .map_err(|e| ScenarioError::Config(format!("g_zero data: {e}")))?
            .map(|v| v + d.u_mean)
    } else {
        let q = match &d.u_modes {
            Some(ms) => synthesize(&grid, ms),
            None => {
                let q = synthesize(&grid, &random_modes(&mut rng_u, wavevectors(dim, d.max_mode, keep)));
                let s = q.sup_norm();
                if s > 0.0 {
                    q.map(|v| v * d.u_amplitude / s)
                } else {
                    q
                }
            }
        };
        q.map(|v| v + d.u_mean)
    };
    let u = if cfg.solver.dealias { dealias(&u) } else { u };
    FlowState::new(rho.to_physical(), u.to_physical(), 0.0).map_err(|e| ScenarioError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::extract_auxiliary;
    use crate::spectral::partial;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(text).unwrap()
    }

    #[test]
    fn g_zero_cosine() {
        let c = cfg(
            "scenario = \"g_zero\"\n[grid]\nn = 64\n[solver]\nalpha = 1.0\n[data]\nrho_modes = [{ k = [1], amplitude = 0.2 }]\n",
        );
        let s = build_initial_data(&c).unwrap();
        let want = ScalarField::from_fn(s.grid(), |x| 0.2 * x[0].sin());
        let err = s.u.zip_with(&want, |a, b| a - b).unwrap().sup_norm();
        assert!(err < 1e-13, "{err}");
        assert!(extract_auxiliary(&s, 1.0).unwrap().g.sup_norm() <= 1e-10);
    }

    #[test]
    fn g_zero_random_in_2d() {
        let c = cfg("scenario = \"g_zero\"\n[grid]\ndim = 2\nn = 32\n[solver]\nalpha = 1.5\n");
        let s = build_initial_data(&c).unwrap();
        assert!(extract_auxiliary(&s, 1.5).unwrap().g.sup_norm() <= 1e-10);
    }

    #[test]
    fn shear_flock_is_x1_independent() {
        let c = cfg("scenario = \"shear_flock\"\n[grid]\ndim = 2\nn = 32\n[solver]\nalpha = 0.5\n");
        let s = build_initial_data(&c).unwrap();
        assert!(partial(&s.rho, 0).sup_norm() == 0.0 || partial(&s.rho, 0).sup_norm() < 1e-14);
        assert!(partial(&s.u, 0).sup_norm() < 1e-14);
        assert!(s.u.sup_norm() > 0.1);
    }

    #[test]
    fn vacuum_rejected() {
        let c = cfg("scenario = \"generic\"\n[grid]\nn = 64\n[solver]\nalpha = 1.0\n[data]\nrho_amplitude = 2.0\n");
        assert!(matches!(build_initial_data(&c), Err(ScenarioError::Vacuum { .. })));
    }

    #[test]
    fn generic_is_seeded() {
        let text = "scenario = \"generic\"\n[grid]\nn = 64\n[solver]\nalpha = 1.0\n";
        let a = build_initial_data(&cfg(text)).unwrap();
        let b = build_initial_data(&cfg(text)).unwrap();
        assert_eq!(a.rho.values(), b.rho.values());
        let other = build_initial_data(&cfg(&format!("seed = 9\n{text}"))).unwrap();
        assert_ne!(a.u.values(), other.u.values());
        assert!((a.rho.min() - 0.7).abs() < 1e-9);
        assert!((a.u.sup_norm() - 1.0).abs() < 1e-9);
    }
}
