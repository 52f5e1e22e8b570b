//! Right-hand side, auxiliary fields and time stepping for
//! `rho_t + (rho u)_x1 = 0`, `u_t + u u_x1 = -Λ^α(rho u) + (Λ^α rho) u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::FieldError;
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::spectral::{dealias_mask, derivative_symbol, fractional_laplacian, lambda_symbol, partial_x1};

const C_STAB: f64 = 2.0;
const DT_EPS: f64 = 1e-12;
const GROWTH_LIMIT: f64 = 10.0;
const GROWTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRK4,
    ImexCN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub scheme: Scheme,
    pub cfl: f64,
    pub dealias: bool,
    pub frozen_density: bool,
    pub t_end: f64,
    pub output_stride: usize,
    /// Threshold on `‖∇rho‖∞ + ‖∇u‖∞` that declares blow-up.
    pub blowup_threshold: f64,
}

impl SolverConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            scheme: Scheme::ExplicitRK4,
            cfl: 0.5,
            dealias: true,
            frozen_density: false,
            t_end: 10.0,
            output_stride: 50,
            blowup_threshold: 1e4,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(format!("alpha must lie in (0,2), got {}", self.alpha));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(format!("cfl must lie in (0,1], got {}", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.output_stride == 0 {
            return Err("output_stride must be at least 1".into());
        }
        if !(self.blowup_threshold > 0.0) {
            return Err("blowup_threshold must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub rho: ScalarField,
    pub u: ScalarField,
    pub t: f64,
}

impl FlowState {
    pub fn new(rho: ScalarField, u: ScalarField, t: f64) -> Result<Self, FieldError> {
        rho.same_grid(&u)?;
        Ok(Self { rho, u, t })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.rho.grid()
    }
}

#[derive(Debug, Clone)]
pub struct AuxiliaryFields {
    pub g: ScalarField,
    pub f: ScalarField,
    pub h: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NumericalEvent {
    #[error("blow-up at t = {t}: gradient sum {gradient_sum:.3e}")]
    Blowup { t: f64, gradient_sum: f64 },
    #[error("non-finite values at t = {t}")]
    NonFinite { t: f64 },
    #[error("vacuum at t = {t}: min rho = {rho_min:.3e}")]
    Vacuum { t: f64, rho_min: f64 },
    #[error("instability at t = {t}: ‖u‖∞ grew by {growth:.2}x in one step")]
    Instability { t: f64, growth: f64 },
    #[error("step limit of {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },
}

impl NumericalEvent {
    pub fn time(&self) -> f64 {
        match *self {
            Self::Blowup { t, .. }
            | Self::NonFinite { t }
            | Self::Vacuum { t, .. }
            | Self::Instability { t, .. }
            | Self::StepLimit { t, .. } => t,
        }
    }
}

/// `C_α(u, rho) = -Λ^α(rho u) + (Λ^α rho) u` evaluated on the grid.
pub fn alignment_force(rho: &ScalarField, u: &ScalarField, alpha: f64) -> Result<ScalarField, FieldError> {
    alignment_force_with(rho, u, alpha, false)
}

pub fn alignment_force_with(
    rho: &ScalarField,
    u: &ScalarField,
    alpha: f64,
    dealias: bool,
) -> Result<ScalarField, FieldError> {
    rho.same_grid(u)?;
    let p = rho.zip_with(u, |a, b| a * b)?;
    let lp = fractional_laplacian(&p, alpha)?;
    let lr = fractional_laplacian(rho, alpha)?;
    let lr_u = lr.zip_with(u, |a, b| a * b)?;
    let out = lr_u.zip_with(&lp, |a, b| a - b)?;
    Ok(if dealias { crate::spectral::dealias(&out) } else { out })
}

/// Precomputed symbols for one grid and configuration.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: TorusGrid,
    cfg: SolverConfig,
    lam: Vec<f64>,
    d1: Vec<f64>,
    mask: Vec<bool>,
}

type Spec = Vec<Complex64>;

impl Integrator {
    pub fn new(grid: &TorusGrid, cfg: &SolverConfig) -> Result<Self, FieldError> {
        if !(cfg.alpha > 0.0 && cfg.alpha < 2.0) {
            return Err(FieldError::Alpha(cfg.alpha));
        }
        Ok(Self {
            grid: grid.clone(),
            cfg: cfg.clone(),
            lam: lambda_symbol(grid, cfg.alpha),
            d1: derivative_symbol(grid, 0),
            mask: dealias_mask(grid),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn truncate(&self, c: &mut Spec) {
        if self.cfg.dealias {
            for (v, keep) in c.iter_mut().zip(&self.mask) {
                if !keep {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Spectral time derivatives of `(rho, u)`.
    fn rhs_spec(&self, rho_hat: &Spec, u_hat: &Spec) -> (Spec, Spec) {
        let g = &self.grid;
        let rho = g.inverse(rho_hat);
        let u = g.inverse(u_hat);
        let lr_hat: Spec = rho_hat.iter().zip(&self.lam).map(|(c, s)| c * s).collect();
        let ux_hat: Spec = u_hat
            .iter()
            .zip(&self.d1)
            .map(|(c, k)| c * Complex64::new(0.0, *k))
            .collect();
        let lr = g.inverse(&lr_hat);
        let ux = g.inverse(&ux_hat);
        let p: Vec<f64> = rho.iter().zip(&u).map(|(a, b)| a * b).collect();
        let q: Vec<f64> = (0..u.len()).map(|i| -u[i] * ux[i] + lr[i] * u[i]).collect();
        let mut p_hat = g.forward(&p);
        let mut q_hat = g.forward(&q);
        self.truncate(&mut p_hat);
        self.truncate(&mut q_hat);
        let du: Spec = q_hat
            .iter()
            .zip(p_hat.iter().zip(&self.lam))
            .map(|(q, (p, s))| q - p * s)
            .collect();
        let drho: Spec = if self.cfg.frozen_density {
            vec![Complex64::new(0.0, 0.0); p_hat.len()]
        } else {
            p_hat
                .iter()
                .zip(&self.d1)
                .map(|(c, k)| -c * Complex64::new(0.0, *k))
                .collect()
        };
        (drho, du)
    }

    pub fn rhs(&self, state: &FlowState) -> (ScalarField, ScalarField) {
        let (dr, du) = self.rhs_spec(&state.rho.spectrum(), &state.u.spectrum());
        (
            ScalarField::from_spectrum(&self.grid, dr).expect("grid length"),
            ScalarField::from_spectrum(&self.grid, du).expect("grid length"),
        )
    }

    pub fn stable_dt(&self, state: &FlowState) -> f64 {
        stable_dt_for(state, &self.cfg)
    }

    fn axpy(y: &Spec, a: f64, x: &Spec) -> Spec {
        y.iter().zip(x).map(|(p, q)| p + q * a).collect()
    }

    fn rk4(&self, r0: &Spec, u0: &Spec, dt: f64) -> (Spec, Spec) {
        let (kr1, ku1) = self.rhs_spec(r0, u0);
        let (kr2, ku2) = self.rhs_spec(&Self::axpy(r0, dt / 2.0, &kr1), &Self::axpy(u0, dt / 2.0, &ku1));
        let (kr3, ku3) = self.rhs_spec(&Self::axpy(r0, dt / 2.0, &kr2), &Self::axpy(u0, dt / 2.0, &ku2));
        let (kr4, ku4) = self.rhs_spec(&Self::axpy(r0, dt, &kr3), &Self::axpy(u0, dt, &ku3));
        let comb = |y: &Spec, k1: &Spec, k2: &Spec, k3: &Spec, k4: &Spec| -> Spec {
            (0..y.len())
                .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
                .collect()
        };
        (comb(r0, &kr1, &kr2, &kr3, &kr4), comb(u0, &ku1, &ku2, &ku3, &ku4))
    }

    /// Crank-Nicolson on `-rho_bar Λ^α u`, Heun on the rest.
    fn imex(&self, r0: &Spec, u0: &Spec, dt: f64) -> (Spec, Spec) {
        let rho_bar = r0[0].re / self.grid.len() as f64;
        let lin: Vec<f64> = self.lam.iter().map(|s| -rho_bar * s).collect();
        let explicit = |r: &Spec, u: &Spec| -> (Spec, Spec) {
            let (dr, mut du) = self.rhs_spec(r, u);
            for i in 0..du.len() {
                du[i] -= u[i] * lin[i];
            }
            (dr, du)
        };
        let (nr0, nu0) = explicit(r0, u0);
        let solve = |rhs_u: &dyn Fn(usize) -> Complex64| -> Spec {
            (0..u0.len())
                .map(|i| rhs_u(i) / (1.0 - 0.5 * dt * lin[i]))
                .collect()
        };
        let r1 = Self::axpy(r0, dt, &nr0);
        let u1 = solve(&|i| u0[i] * (1.0 + 0.5 * dt * lin[i]) + nu0[i] * dt);
        let (nr1, nu1) = explicit(&r1, &u1);
        let r2: Spec = (0..r0.len()).map(|i| r0[i] + (nr0[i] + nr1[i]) * (0.5 * dt)).collect();
        let u2 = solve(&|i| u0[i] * (1.0 + 0.5 * dt * lin[i]) + (nu0[i] + nu1[i]) * (0.5 * dt));
        (r2, u2)
    }

    /// One step; numerical breakdown is reported as an event.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<FlowState, NumericalEvent> {
        let t_new = state.t + dt;
        let r0 = state.rho.spectrum();
        let u0 = state.u.spectrum();
        let (r1, u1) = match self.cfg.scheme {
            Scheme::ExplicitRK4 => self.rk4(&r0, &u0, dt),
            Scheme::ImexCN => self.imex(&r0, &u0, dt),
        };
        let rho = self.grid.inverse(&r1);
        let u = self.grid.inverse(&u1);
        let rho = if self.cfg.frozen_density { state.rho.values() } else { rho };
        if rho.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(NumericalEvent::NonFinite { t: t_new });
        }
        let u_old = state.u.sup_norm();
        let u_new = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if u_new > GROWTH_LIMIT * u_old.max(GROWTH_FLOOR) {
            return Err(NumericalEvent::Instability {
                t: t_new,
                growth: u_new / u_old.max(GROWTH_FLOOR),
            });
        }
        let rho_min = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if rho_min <= 0.0 {
            return Err(NumericalEvent::Vacuum { t: t_new, rho_min });
        }
        let rho_f = ScalarField::from_values(&self.grid, rho).expect("grid length");
        let u_f = ScalarField::from_values(&self.grid, u).expect("grid length");
        let gsum = crate::spectral::gradient_sup(&rho_f) + crate::spectral::gradient_sup(&u_f);
        if !gsum.is_finite() {
            return Err(NumericalEvent::NonFinite { t: t_new });
        }
        if gsum > self.cfg.blowup_threshold {
            return Err(NumericalEvent::Blowup {
                t: t_new,
                gradient_sum: gsum,
            });
        }
        Ok(FlowState {
            rho: rho_f,
            u: u_f,
            t: t_new,
        })
    }

    /// Fixed-step integration to `t_end` (last step shortened).
    pub fn advance_fixed(&self, state: &FlowState, t_end: f64, dt: f64) -> Result<FlowState, NumericalEvent> {
        let mut s = state.clone();
        while s.t < t_end - 1e-12 * t_end.max(1.0) {
            let h = dt.min(t_end - s.t);
            s = self.step(&s, h)?;
        }
        Ok(s)
    }
}

fn stable_dt_for(state: &FlowState, cfg: &SolverConfig) -> f64 {
    let dx = state.grid().spacing();
    let adv = dx / (state.u.sup_norm() + DT_EPS);
    let diss = dx.powf(cfg.alpha) / (C_STAB * state.rho.sup_norm());
    cfg.cfl * adv.min(diss)
}

pub fn rhs(state: &FlowState, cfg: &SolverConfig) -> Result<(ScalarField, ScalarField), NumericalEvent> {
    let integ = Integrator::new(state.grid(), cfg).map_err(|_| NumericalEvent::NonFinite { t: state.t })?;
    let (dr, du) = integ.rhs(state);
    if !(dr.is_finite() && du.is_finite()) {
        return Err(NumericalEvent::NonFinite { t: state.t });
    }
    Ok((dr, du))
}

pub fn stable_dt(state: &FlowState, cfg: &SolverConfig) -> f64 {
    stable_dt_for(state, cfg)
}

pub fn step(state: &FlowState, cfg: &SolverConfig, dt: f64) -> Result<FlowState, NumericalEvent> {
    let integ = Integrator::new(state.grid(), cfg).map_err(|_| NumericalEvent::NonFinite { t: state.t })?;
    integ.step(state, dt)
}

/// `G = ∂x1 u - Λ^α rho`, `F = G / rho`, `H = ∂x1 F / rho`.
pub fn extract_auxiliary(state: &FlowState, alpha: f64) -> Result<AuxiliaryFields, NumericalEvent> {
    let rho_min = state.rho.min();
    if !(rho_min > 0.0) {
        return Err(NumericalEvent::Vacuum { t: state.t, rho_min });
    }
    let lr = fractional_laplacian(&state.rho, alpha).map_err(|_| NumericalEvent::NonFinite { t: state.t })?;
    let g = partial_x1(&state.u).zip_with(&lr, |a, b| a - b).expect("shared grid");
    let f = g.zip_with(&state.rho, |a, b| a / b).expect("shared grid");
    let h = partial_x1(&f).zip_with(&state.rho, |a, b| a / b).expect("shared grid");
    Ok(AuxiliaryFields {
        g: g.to_physical(),
        f,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn maxdiff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(&b.values())
            .fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn uniform_density_gives_minus_lambda() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let rho = ScalarField::constant(&g, 1.0);
        let u = ScalarField::from_fn(&g, |x| (2.0 * x[0]).sin() + 0.2 * x[0].cos());
        let c = alignment_force(&rho, &u, 0.8).unwrap();
        let want = fractional_laplacian(&u, 0.8).unwrap().map(|v| -v);
        assert!(maxdiff(&c, &want) < 1e-13);
    }

    #[test]
    fn constant_velocity_has_no_force() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.4 * x[0].cos());
        let u = ScalarField::constant(&g, 0.7);
        assert!(alignment_force(&rho, &u, 1.3).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = ScalarField::constant(&make_grid(1, 16, 1.0).unwrap(), 1.0);
        let b = ScalarField::constant(&make_grid(1, 32, 1.0).unwrap(), 1.0);
        assert_eq!(alignment_force(&a, &b, 1.0).unwrap_err(), FieldError::GridMismatch);
    }

    #[test]
    fn frozen_burgers_rhs() {
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        let s = FlowState::new(
            ScalarField::constant(&g, 1.0),
            ScalarField::from_fn(&g, |x| x[0].cos()),
            0.0,
        )
        .unwrap();
        let mut cfg = SolverConfig::new(1.0);
        cfg.frozen_density = true;
        let (dr, du) = rhs(&s, &cfg).unwrap();
        assert!(dr.sup_norm() < 1e-15);
        let want = ScalarField::from_fn(&g, |x| x[0].sin() * x[0].cos() - x[0].cos());
        assert!(maxdiff(&du, &want) < 1e-13);
    }

    #[test]
    fn aligned_state_transports() {
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * x[0]).sin());
        let s = FlowState::new(rho.clone(), ScalarField::constant(&g, 0.4), 0.0).unwrap();
        let (dr, du) = rhs(&s, &SolverConfig::new(1.2)).unwrap();
        assert!(du.sup_norm() < 1e-13);
        let want = partial_x1(&rho).map(|v| -0.4 * v);
        assert!(maxdiff(&dr, &want) < 1e-13);
    }

    #[test]
    fn stable_dt_example() {
        let g = make_grid(1, 128, 2.0 * PI).unwrap();
        let s = FlowState::new(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 0.0), 0.0).unwrap();
        let dt = stable_dt(&s, &SolverConfig::new(1.0));
        assert!((dt - 0.5 * (2.0 * PI / 128.0) / 2.0).abs() < 1e-15);
        assert!((dt - 0.01227).abs() < 1e-5);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let s = FlowState::new(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 0.0), 0.0).unwrap();
        for scheme in [Scheme::ExplicitRK4, Scheme::ImexCN] {
            let mut cfg = SolverConfig::new(1.0);
            cfg.scheme = scheme;
            let s1 = step(&s, &cfg, 0.01).unwrap();
            assert!(maxdiff(&s1.rho, &s.rho) < 1e-15);
            assert!(s1.u.sup_norm() < 1e-15);
        }
    }

    #[test]
    fn rk4_translation() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let c = 0.8;
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.3 * x[0].sin() + 0.1 * (3.0 * x[0]).cos());
        let s = FlowState::new(rho, ScalarField::constant(&g, c), 0.0).unwrap();
        let dt = 0.05;
        let s1 = step(&s, &SolverConfig::new(1.0), dt).unwrap();
        let exact = ScalarField::from_fn(&g, |x| {
            let y = x[0] - c * dt;
            1.0 + 0.3 * y.sin() + 0.1 * (3.0 * y).cos()
        });
        // leading local error of the stability polynomial per mode: |k c dt|^5 / 120
        let bound = 0.3 * (c * dt).powi(5) / 120.0 + 0.1 * (3.0 * c * dt).powi(5) / 120.0;
        assert!(maxdiff(&s1.rho, &exact) < 1.05 * bound);
    }

    #[test]
    fn auxiliary_example() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let s = FlowState::new(
            ScalarField::constant(&g, 2.0),
            ScalarField::from_fn(&g, |x| x[0].sin()),
            0.0,
        )
        .unwrap();
        let aux = extract_auxiliary(&s, 1.0).unwrap();
        assert!(maxdiff(&aux.g, &ScalarField::from_fn(&g, |x| x[0].cos())) < 1e-13);
        assert!(maxdiff(&aux.f, &ScalarField::from_fn(&g, |x| x[0].cos() / 2.0)) < 1e-13);
        assert!(maxdiff(&aux.h, &ScalarField::from_fn(&g, |x| -x[0].sin() / 4.0)) < 1e-13);
    }

    #[test]
    fn vacuum_rejected() {
        let g = make_grid(1, 16, 2.0 * PI).unwrap();
        let s = FlowState::new(
            ScalarField::from_fn(&g, |x| x[0].cos()),
            ScalarField::constant(&g, 0.0),
            0.0,
        )
        .unwrap();
        assert!(matches!(extract_auxiliary(&s, 1.0), Err(NumericalEvent::Vacuum { .. })));
    }
}
