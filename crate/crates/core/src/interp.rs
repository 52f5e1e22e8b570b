//! Trigonometric interpolation and sub-grid extrema.
//!
//! Grid maxima of a smooth field undershoot the continuous maximum by
//! `O(h^2)`. Monitors that must hold to `1e-6` or better (maximum principle
//! for `F`, monotone oscillation `V`) use these refined values instead.

use num_complex::Complex64;

use crate::field::ScalarField;
use crate::grid::TorusGrid;

const MAX_CANDIDATES: usize = 6;

/// Band-limited interpolant of a field (d = 1 or 2).
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(f: &ScalarField) -> Self {
        let grid = f.grid().clone();
        assert!(grid.dim() <= 2, "interpolant supports d <= 2");
        let scale = 1.0 / grid.len() as f64;
        let coeffs = f.spectrum().into_iter().map(|c| c * scale).collect();
        Self { grid, coeffs }
    }

    fn phases(&self, x: f64) -> Vec<Complex64> {
        let n = self.grid.n_per_dim();
        let w = Complex64::from_polar(1.0, self.grid.k_scale() * x);
        let mut pos = Vec::with_capacity(n / 2 + 1);
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..=n / 2 {
            pos.push(p);
            p *= w;
        }
        (0..n)
            .map(|j| {
                let k = self.grid.wavenumber(j);
                if k >= 0 {
                    pos[k as usize]
                } else {
                    pos[(-k) as usize].conj()
                }
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_derivs(x).0
    }

    /// Value, gradient and Hessian (row-major 2x2, unused entries zero in 1-D).
    pub fn eval_derivs(&self, x: &[f64]) -> (f64, [f64; 2], [f64; 4]) {
        let n = self.grid.n_per_dim();
        let s = self.grid.k_scale();
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        if self.grid.dim() == 1 {
            let e = self.phases(x[0]);
            for j in 0..n {
                let k = self.grid.wavenumber(j) as f64 * s;
                let t = self.coeffs[j] * e[j];
                v += t.re;
                g[0] -= k * t.im;
                h[0] -= k * k * t.re;
            }
        } else {
            let e1 = self.phases(x[0]);
            let e2 = self.phases(x[1]);
            for a in 0..n {
                let k1 = self.grid.wavenumber(a) as f64 * s;
                for b in 0..n {
                    let k2 = self.grid.wavenumber(b) as f64 * s;
                    let t = self.coeffs[a * n + b] * e1[a] * e2[b];
                    v += t.re;
                    g[0] -= k1 * t.im;
                    g[1] -= k2 * t.im;
                    h[0] -= k1 * k1 * t.re;
                    h[1] -= k1 * k2 * t.re;
                    h[3] -= k2 * k2 * t.re;
                }
            }
            h[2] = h[1];
        }
        (v, g, h)
    }
}

/// Grid local maxima (axis neighbours), best first.
fn local_maxima(grid: &TorusGrid, vals: &[f64]) -> Vec<usize> {
    let n = grid.n_per_dim();
    let d = grid.dim();
    let mut out: Vec<usize> = (0..vals.len())
        .filter(|&i| {
            let idx = grid.multi_index(i);
            (0..d).all(|axis| {
                let mut lo = idx;
                let mut hi = idx;
                lo[axis] = (idx[axis] + n - 1) % n;
                hi[axis] = (idx[axis] + 1) % n;
                vals[i] >= vals[grid.flat_index(&lo[..d])] && vals[i] >= vals[grid.flat_index(&hi[..d])]
            })
        })
        .collect();
    out.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    out.truncate(MAX_CANDIDATES);
    out
}

/// Golden-section maximisation of `f` on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Sub-grid maximum of a 1-D function sampled at `vals` on the grid.
pub fn refined_max_1d(grid: &TorusGrid, vals: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
    let h = grid.spacing();
    let grid_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    local_maxima(grid, vals)
        .into_iter()
        .map(|i| {
            let x = i as f64 * h;
            golden_max(f, x - h, x + h, 64).1
        })
        .fold(grid_max, f64::max)
}

/// Sub-grid maximum of a band-limited field (d = 1 or 2).
pub fn refined_max(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let vals = f.values();
    let interp = TrigInterpolant::new(f);
    if grid.dim() == 1 {
        return refined_max_1d(grid, &vals, &|x| interp.eval(&[x]));
    }
    let h = grid.spacing();
    let grid_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = grid_max;
    for i in local_maxima(grid, &vals) {
        let p = grid.point(i);
        let mut x = [p[0], p[1]];
        for _ in 0..12 {
            let (_, g, hs) = interp.eval_derivs(&x);
            let det = hs[0] * hs[3] - hs[1] * hs[2];
            if !(hs[0] < 0.0 && det > 0.0) {
                break;
            }
            let dx = (hs[3] * g[0] - hs[1] * g[1]) / det;
            let dy = (hs[0] * g[1] - hs[2] * g[0]) / det;
            x[0] -= dx;
            x[1] -= dy;
            if (x[0] - p[0]).abs() > 1.5 * h || (x[1] - p[1]).abs() > 1.5 * h {
                break;
            }
            if dx.abs().max(dy.abs()) < 1e-13 * h {
                break;
            }
        }
        if (x[0] - p[0]).abs() <= 1.5 * h && (x[1] - p[1]).abs() <= 1.5 * h {
            best = best.max(interp.eval(&x));
        }
    }
    best
}

pub fn refined_min(f: &ScalarField) -> f64 {
    -refined_max(&f.map(|v| -v))
}

/// Sub-grid `sup |num/den|` for 1-D band-limited `num`, `den > 0`.
/// Falls back to grid values for d > 1.
pub fn refined_sup_ratio(num: &ScalarField, den: &ScalarField) -> f64 {
    let grid = num.grid();
    let a = num.values();
    let b = den.values();
    let ratio: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x / y).collect();
    let grid_sup = ratio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if grid.dim() != 1 {
        return grid_sup;
    }
    let pn = TrigInterpolant::new(num);
    let pd = TrigInterpolant::new(den);
    let up = refined_max_1d(grid, &ratio, &|x| pn.eval(&[x]) / pd.eval(&[x]));
    let neg: Vec<f64> = ratio.iter().map(|v| -v).collect();
    let down = refined_max_1d(grid, &neg, &|x| -pn.eval(&[x]) / pd.eval(&[x]));
    grid_sup.max(up).max(down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn interpolant_matches_function_off_grid() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() + 0.5 * x[0].cos());
        let p = TrigInterpolant::new(&f);
        for &x in &[0.1, 1.234, 5.5] {
            let (v, gr, h) = p.eval_derivs(&[x]);
            assert!((v - ((3.0 * x).sin() + 0.5 * x.cos())).abs() < 1e-13);
            assert!((gr[0] - (3.0 * (3.0 * x).cos() - 0.5 * x.sin())).abs() < 1e-12);
            assert!((h[0] - (-9.0 * (3.0 * x).sin() - 0.5 * x.cos())).abs() < 1e-11);
        }
    }

    #[test]
    fn refined_max_finds_offgrid_peak() {
        let g = make_grid(1, 16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] - 0.2).cos());
        assert!(f.max() < 1.0 - 1e-3);
        assert!((refined_max(&f) - 1.0).abs() < 1e-12);
        assert!((refined_min(&f) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn refined_max_2d() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] - 0.2).cos() * (x[1] - 0.15).cos());
        assert!((refined_max(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refined_ratio() {
        let g = make_grid(1, 32, 2.0 * PI).unwrap();
        let num = ScalarField::from_fn(&g, |x| (x[0] - 0.1).sin());
        let den = ScalarField::from_fn(&g, |x| 2.0 + 0.5 * (x[0] - 0.1).cos());
        // max of sin/(2+0.5cos) is 1/sqrt(3.75)
        let want = 1.0 / 3.75f64.sqrt();
        assert!((refined_sup_ratio(&num, &den) - want).abs() < 1e-12);
    }
}
