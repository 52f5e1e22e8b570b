use std::f64::consts::TAU;

use alignflow::moc::constants::fit_empirical_constants;
use alignflow::moc::params::{check_parameters, select_parameters, ParamInputs, Regime};
use alignflow::moc::scan::{holder_seminorm, scan_breakthrough, ShiftSet};
use alignflow::moc::constants::SweepSpec;
use alignflow::scenario::{build_initial_data, ScenarioConfig};
use alignflow::snapshot;
use alignflow::spectral::{fractional_laplacian, inner, translate};
use alignflow::{alignment_force, extract_auxiliary, make_grid, FlowState, Integrator, Moc, Representation, ScalarField, SolverConfig, TorusGrid};
use proptest::prelude::*;

fn band_limited(grid: &TorusGrid, mean: f64, coeffs: &[(f64, f64)]) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        mean + coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, p))| a / (j + 1) as f64 * ((j + 1) as f64 * x[0] + p).cos())
            .sum::<f64>()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.3..0.3f64, 0.0..TAU), 1..6)
}

fn alpha() -> impl Strategy<Value = f64> {
    0.2..1.9f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alignment_force_preserves_momentum(a in alpha(), rc in coeffs(), uc in coeffs()) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let rho = band_limited(&grid, 1.0, &rc);
        let u = band_limited(&grid, 0.3, &uc);
        let f = alignment_force(&rho, &u, a).unwrap();
        let scale = f.sup_norm().max(1.0);
        prop_assert!(inner(&rho, &f).abs() < 1e-11 * scale);
    }

    #[test]
    fn rhs_conserves_mass_and_g_has_zero_mean(a in alpha(), rc in coeffs(), uc in coeffs()) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let s = FlowState::new(band_limited(&grid, 1.0, &rc), band_limited(&grid, 0.0, &uc), 0.0).unwrap();
        let integ = Integrator::new(&grid, &SolverConfig::new(a)).unwrap();
        let (drho, _) = integ.rhs(&s);
        prop_assert!(drho.integral().abs() < 1e-11);
        let aux = extract_auxiliary(&s, a).unwrap();
        prop_assert!(aux.g.integral().abs() < 1e-11);
    }

    #[test]
    fn fractional_powers_compose(a in 0.1..0.9f64, b in 0.1..0.9f64, c in coeffs()) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let f = band_limited(&grid, 2.0, &c);
        let lhs = fractional_laplacian(&fractional_laplacian(&f, a).unwrap(), b).unwrap();
        let rhs = fractional_laplacian(&f, a + b).unwrap();
        let err = lhs.zip_with(&rhs, |x, y| x - y).unwrap().sup_norm();
        prop_assert!(err < 1e-12 * rhs.sup_norm().max(1.0));
        prop_assert!(fractional_laplacian(&ScalarField::constant(&grid, 3.0), a).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn translation_round_trips(shift in -10.0..10.0f64, c in coeffs()) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let f = band_limited(&grid, 0.0, &c);
        let back = translate(&translate(&f, &[shift]), &[-shift]);
        prop_assert!(back.zip_with(&f, |x, y| x - y).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn holder_seminorm_ignores_constants(sigma in 0.1..1.0f64, k in -5.0..5.0f64, c in coeffs()) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let shifts = ShiftSet::standard(&grid);
        let f = band_limited(&grid, 0.0, &c);
        let g = f.map(|x| x + k);
        let (a, b) = (holder_seminorm(&f, sigma, &shifts), holder_seminorm(&g, sigma, &shifts));
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn a_steep_enough_modulus_is_never_broken(c in coeffs(), lam in 0.01..1.0f64) {
        let grid = make_grid(1, 64, TAU).unwrap();
        let f = band_limited(&grid, 0.0, &c);
        let shifts = ShiftSet::standard(&grid);
        // ω(ξ) ≥ δ ξ/λ · (1 − …) near 0 and ω ≥ δ beyond λ
        let lip = alignflow::spectral::gradient_sup(&f);
        let delta = 4.0 * (lip * lam + f.max() - f.min()) + 1e-3;
        let m = Moc::new(delta, 0.5, lam).unwrap();
        let r = scan_breakthrough(&f, &m, 1.0, &shifts);
        prop_assert!(r.pass && r.margin > 0.0, "margin {}", r.margin);
    }

    #[test]
    fn snapshots_round_trip(c in coeffs(), t in 0.0..100.0f64) {
        let grid = make_grid(1, 32, TAU).unwrap();
        let f = band_limited(&grid, 1.0, &c);
        let g = f.map(|x| x * x);
        let bytes = snapshot::encode(&[("rho", &f), ("u", &g)], t, Representation::Physical);
        let (h, fields) = snapshot::decode(&bytes).unwrap();
        prop_assert_eq!(h.time, t);
        prop_assert_eq!(fields[0].values(), f.values());
        prop_assert_eq!(fields[1].values(), g.values());
    }

    #[test]
    fn selected_parameters_satisfy_every_inequality(
        lo in 0.1..1.0f64,
        spread in 1.0..4.0f64,
        v0 in 0.0..5.0f64,
        f0 in 0.0..3.0f64,
        c0 in 1e-3..2.0f64,
    ) {
        let consts = fit_critical();
        let inp = ParamInputs {
            rho_lower: lo,
            rho_upper: lo * spread,
            v0,
            f0_norm: f0,
            grad_f0_norm: 2.0 * f0,
            h0_norm: 3.0 * f0,
            c0,
            sigma: None,
            u_csigma: None,
            rho_data: None,
            u_data: None,
        };
        let p = select_parameters(Regime::Critical, 1.0, &inp, consts).unwrap();
        prop_assert!(p.kappa > 0.0 && p.kappa <= 1.0);
        let checks = check_parameters(Regime::Critical, 1.0, &inp, consts, p.mu, p.delta2, p.kappa, p.log_lambda);
        prop_assert!(checks.iter().all(|c| c.satisfied), "{:?}", checks);
    }
}

fn fit_critical() -> &'static alignflow::moc::constants::EmpiricalConstants {
    use std::sync::OnceLock;
    static C: OnceLock<alignflow::moc::constants::EmpiricalConstants> = OnceLock::new();
    C.get_or_init(|| fit_empirical_constants(1.0, 1, &SweepSpec::default()).unwrap())
}

#[test]
fn same_seed_same_data_other_seed_differs() {
    let text = |seed: u64| format!("scenario = \"generic\"\nseed = {seed}\n[grid]\nn = 64\n[solver]\nalpha = 1.0\n");
    let a = build_initial_data(&ScenarioConfig::from_toml(&text(9)).unwrap()).unwrap();
    let b = build_initial_data(&ScenarioConfig::from_toml(&text(9)).unwrap()).unwrap();
    let c = build_initial_data(&ScenarioConfig::from_toml(&text(10)).unwrap()).unwrap();
    assert_eq!(a.rho.values(), b.rho.values());
    assert_eq!(a.u.values(), b.u.values());
    assert_ne!(a.u.values(), c.u.values());
}
