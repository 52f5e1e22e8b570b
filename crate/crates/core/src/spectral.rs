//! Fourier-multiplier operators on [`ScalarField`]s.

use num_complex::Complex64;

use crate::error::FieldError;
use crate::field::ScalarField;
use crate::grid::TorusGrid;

/// Relative tolerance for the `k1 = 0` admissibility test of [`inv_dx1_lambda`].
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

fn check_alpha(alpha: f64) -> Result<(), FieldError> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(FieldError::Alpha(alpha))
    }
}

/// Symbol `|k|^alpha` per flat index; the mean mode maps to zero.
pub fn lambda_symbol(grid: &TorusGrid, alpha: f64) -> Vec<f64> {
    grid.kmag()
        .iter()
        .map(|&k| if k == 0.0 { 0.0 } else { k.powf(alpha) })
        .collect()
}

/// Symbol of `d/dx_axis` divided by `i`, zero on the Nyquist line of that axis.
pub fn derivative_symbol(grid: &TorusGrid, axis: usize) -> Vec<f64> {
    let scale = grid.k_scale();
    (0..grid.len())
        .map(|i| {
            if grid.touches_nyquist(i, Some(axis)) {
                0.0
            } else {
                grid.k_vector(i)[axis] as f64 * scale
            }
        })
        .collect()
}

/// Two-thirds rule: `true` where a mode survives.
pub fn dealias_mask(grid: &TorusGrid) -> Vec<bool> {
    let cut = grid.n_per_dim() as i64 / 3;
    (0..grid.len())
        .map(|i| {
            let k = grid.k_vector(i);
            k.iter().all(|c| c.abs() <= cut)
        })
        .collect()
}

fn apply_real_symbol(f: &ScalarField, symbol: &[f64]) -> ScalarField {
    let mut c = f.spectrum();
    for (v, s) in c.iter_mut().zip(symbol) {
        *v *= *s;
    }
    ScalarField::from_spectrum(f.grid(), c).expect("length preserved")
}

fn apply_derivative(f: &ScalarField, symbol: &[f64]) -> ScalarField {
    let mut c = f.spectrum();
    for (v, s) in c.iter_mut().zip(symbol) {
        *v *= Complex64::new(0.0, *s);
    }
    ScalarField::from_spectrum(f.grid(), c).expect("length preserved")
}

/// `Λ^alpha f` with symbol `|k|^alpha`.
pub fn fractional_laplacian(f: &ScalarField, alpha: f64) -> Result<ScalarField, FieldError> {
    check_alpha(alpha)?;
    Ok(apply_real_symbol(f, &lambda_symbol(f.grid(), alpha)))
}

pub fn partial_x1(f: &ScalarField) -> ScalarField {
    partial(f, 0)
}

pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    assert!(axis < f.grid().dim(), "axis out of range");
    apply_derivative(f, &derivative_symbol(f.grid(), axis))
}

/// Sup norm of the spectral gradient magnitude.
pub fn gradient_sup(f: &ScalarField) -> f64 {
    let d = f.grid().dim();
    let parts: Vec<Vec<f64>> = (0..d).map(|a| partial(f, a).values()).collect();
    (0..f.grid().len())
        .map(|i| parts.iter().map(|p| p[i] * p[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `u` with `∂_{x1} u = Λ^alpha rho`; zero mean, zero on `k1 = 0` modes.
pub fn inv_dx1_lambda(rho: &ScalarField, alpha: f64) -> Result<ScalarField, FieldError> {
    check_alpha(alpha)?;
    let grid = rho.grid();
    let lam = lambda_symbol(grid, alpha);
    let d1 = derivative_symbol(grid, 0);
    let c = rho.spectrum();
    let scale = c
        .iter()
        .zip(&lam)
        .fold(0.0f64, |m, (v, s)| m.max(v.norm() * s));
    let mut worst = 0.0f64;
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    for i in 0..c.len() {
        let k1 = grid.k_vector(i)[0];
        let lv = c[i] * lam[i];
        if k1 == 0 {
            worst = worst.max(lv.norm());
        } else if d1[i] != 0.0 {
            out[i] = lv / Complex64::new(0.0, d1[i]);
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { 0.0 };
    if rel > ADMISSIBILITY_TOL {
        return Err(FieldError::NotAdmissible(rel));
    }
    ScalarField::from_spectrum(grid, out)
}

pub fn dealias(f: &ScalarField) -> ScalarField {
    let mask = dealias_mask(f.grid());
    let mut c = f.spectrum();
    for (v, keep) in c.iter_mut().zip(&mask) {
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ScalarField::from_spectrum(f.grid(), c).expect("length preserved")
}

/// `exp(-t Λ^alpha) f`.
pub fn fractional_heat(f: &ScalarField, alpha: f64, t: f64) -> Result<ScalarField, FieldError> {
    check_alpha(alpha)?;
    let sym: Vec<f64> = lambda_symbol(f.grid(), alpha)
        .iter()
        .map(|s| (-t * s).exp())
        .collect();
    Ok(apply_real_symbol(f, &sym))
}

/// `x -> f(x + a)` by spectral phase shift (exact for trigonometric polynomials).
pub fn translate(f: &ScalarField, shift: &[f64]) -> ScalarField {
    let grid = f.grid();
    let scale = grid.k_scale();
    let mut c = f.spectrum();
    for (i, v) in c.iter_mut().enumerate() {
        let k = grid.k_vector(i);
        let mut phase = 0.0;
        for (axis, a) in shift.iter().enumerate().take(grid.dim()) {
            if grid.touches_nyquist(i, Some(axis)) {
                // keep the Nyquist line real: cos-only interpolant
                phase = f64::NAN;
                break;
            }
            phase += k[axis] as f64 * scale * a;
        }
        if phase.is_nan() {
            let mut factor = 1.0;
            for (axis, a) in shift.iter().enumerate().take(grid.dim()) {
                factor *= (k[axis] as f64 * scale * a).cos();
            }
            *v *= factor;
        } else {
            *v *= Complex64::from_polar(1.0, phase);
        }
    }
    ScalarField::from_spectrum(grid, c).expect("length preserved")
}

/// L2 inner product on the torus.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    let a = f.values();
    let b = g.values();
    a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() * f.grid().cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn close(a: &ScalarField, b: &ScalarField, tol: f64) {
        let x = a.values();
        let y = b.values();
        let err = x.iter().zip(&y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < tol, "max diff {err:e}");
    }

    #[test]
    fn constants_annihilated() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let f = ScalarField::constant(&g, 3.0);
        assert!(fractional_laplacian(&f, 0.7).unwrap().sup_norm() < 1e-14);
        assert!(partial_x1(&f).sup_norm() < 1e-14);
    }

    #[test]
    fn eigenfunctions() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].cos());
        close(&fractional_laplacian(&f, 1.0).unwrap(), &f, 1e-13);
        let f2 = ScalarField::from_fn(&g, |x| (2.0 * x[0]).cos());
        let want = f2.map(|v| v * 2f64.sqrt());
        close(&fractional_laplacian(&f2, 0.5).unwrap(), &want, 1e-13);
    }

    #[test]
    fn rejects_alpha() {
        let g = make_grid(1, 8, 1.0).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        assert!(fractional_laplacian(&f, 2.0).is_err());
        assert!(fractional_laplacian(&f, 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let s = ScalarField::from_fn(&g, |x| x[0].sin());
        close(&partial_x1(&s), &ScalarField::from_fn(&g, |x| x[0].cos()), 1e-13);
        let c2 = ScalarField::from_fn(&g, |x| x[1].cos());
        assert!(partial_x1(&c2).sup_norm() < 1e-14);
    }

    #[test]
    fn inverse_operator() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.1 * x[0].cos());
        let u = inv_dx1_lambda(&rho, 1.0).unwrap();
        close(&u, &ScalarField::from_fn(&g, |x| 0.1 * x[0].sin()), 1e-14);
        let flat = inv_dx1_lambda(&ScalarField::constant(&g, 2.0), 0.5).unwrap();
        assert!(flat.sup_norm() < 1e-15);
    }

    #[test]
    fn inverse_rejects_x2_modes() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.1 * x[1].cos());
        assert!(matches!(inv_dx1_lambda(&rho, 1.0), Err(FieldError::NotAdmissible(_))));
    }

    #[test]
    fn dealias_examples() {
        let g = make_grid(1, 24, 2.0 * PI).unwrap();
        let low = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin());
        close(&dealias(&low), &low, 1e-14);
        let nyq = ScalarField::from_fn(&g, |x| (12.0 * x[0]).cos());
        assert!(dealias(&nyq).sup_norm() < 1e-14);
        let mix = ScalarField::from_fn(&g, |x| x[0].cos() + (10.0 * x[0]).cos());
        close(&dealias(&mix), &ScalarField::from_fn(&g, |x| x[0].cos()), 1e-13);
    }

    #[test]
    fn translation_is_exact() {
        let g = make_grid(1, 16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * x[0]).sin() + 0.3 * x[0].cos());
        let a = 0.37;
        let want = ScalarField::from_fn(&g, |x| (2.0 * (x[0] + a)).sin() + 0.3 * (x[0] + a).cos());
        close(&translate(&f, &[a]), &want, 1e-13);
    }

    #[test]
    fn rescaled_box() {
        let g = make_grid(1, 16, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let want = f.map(|v| v * (2.0 * PI).powf(1.5));
        close(&fractional_laplacian(&f, 1.5).unwrap(), &want, 1e-11);
    }
}
