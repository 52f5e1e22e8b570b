//! Periodic lattice on the torus with cached FFT plans.
//!
//! Flat indices are row-major with the `x1` axis slowest: in 2-D the point
//! `(i1, i2)` lives at `i1 * n + i2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GridError;

#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
    tables: Arc<Tables>,
}

struct Tables {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed integer wavenumber per 1-D index.
    ks: Vec<i64>,
    /// Scaled Euclidean |k| per flat index.
    kmag: Vec<f64>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

pub fn make_grid(dim: usize, n: usize, length: f64) -> Result<TorusGrid, GridError> {
    TorusGrid::new(dim, n, length)
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if n % 2 != 0 {
            return Err(GridError::OddSize(n));
        }
        if n < 8 {
            return Err(GridError::TooSmall(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(GridError::Length(length));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let ks: Vec<i64> = (0..n).map(|j| wavenumber_of(j, n)).collect();
        let scale = 2.0 * PI / length;
        let total = n.pow(dim as u32);
        let mut kmag = Vec::with_capacity(total);
        for flat in 0..total {
            let mut s = 0.0;
            let mut rem = flat;
            for _ in 0..dim {
                let k = ks[rem % n] as f64 * scale;
                s += k * k;
                rem /= n;
            }
            kmag.push(s.sqrt());
        }
        Ok(Self {
            dim,
            n,
            length,
            tables: Arc::new(Tables { fwd, inv, ks, kmag }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of lattice points.
    pub fn len(&self) -> usize {
        self.tables.kmag.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Factor turning integer wavenumbers into physical ones.
    pub fn k_scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nodes_1d(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.spacing()).collect()
    }

    /// Multi-index of a flat index, `x1` first.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.dim)
            .fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    /// Physical coordinates of a lattice point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Signed integer wavenumber of a 1-D index; the Nyquist index maps to `-n/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        self.tables.ks[j]
    }

    /// Integer wavenumber vector of a flat spectral index.
    pub fn k_vector(&self, flat: usize) -> [i64; 3] {
        let idx = self.multi_index(flat);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.tables.ks[idx[axis]];
        }
        k
    }

    /// Scaled Euclidean wavenumber magnitudes per flat index.
    pub fn kmag(&self) -> &[f64] {
        &self.tables.kmag
    }

    /// Whether any component of the flat index sits on the Nyquist line.
    pub fn touches_nyquist(&self, flat: usize, axis: Option<usize>) -> bool {
        let idx = self.multi_index(flat);
        let half = self.n / 2;
        match axis {
            Some(a) => idx[a] == half,
            None => (0..self.dim).any(|a| idx[a] == half),
        }
    }

    /// Unnormalized forward DFT of real data.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        buf
    }

    /// Inverse DFT including the 1/N factor; returns the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, false);
        let scale = 1.0 / self.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn forward_complex(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        assert_eq!(buf.len(), self.len(), "buffer does not match grid");
        let plan = if forward { &self.tables.fwd } else { &self.tables.inv };
        let n = self.n;
        // contiguous last axis
        plan.process(buf);
        if self.dim == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..buf.len()).step_by(block) {
                for off in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + off + j * stride];
                    }
                    plan.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        buf[base + off + j * stride] = *v;
                    }
                }
            }
        }
    }
}

fn wavenumber_of(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(make_grid(1, 7, 2.0 * PI).unwrap_err(), GridError::OddSize(7));
        assert_eq!(make_grid(1, 6, 2.0 * PI).unwrap_err(), GridError::TooSmall(6));
        assert!(make_grid(1, 8, 0.0).is_err());
        assert!(make_grid(4, 8, 1.0).is_err());
    }

    #[test]
    fn nodes_are_uniform() {
        let g = make_grid(1, 8, 2.0 * PI).unwrap();
        let nodes = g.nodes_1d();
        for (j, x) in nodes.iter().enumerate() {
            assert!((x - j as f64 * PI / 4.0).abs() < 1e-15);
        }
        let g2 = make_grid(2, 128, 2.0 * PI).unwrap();
        assert_eq!(g2.len(), 128 * 128);
    }

    #[test]
    fn wavenumbers_symmetric() {
        let g = make_grid(1, 8, 2.0 * PI).unwrap();
        let ks: Vec<i64> = (0..8).map(|j| g.wavenumber(j)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn roundtrip_2d() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = g.inverse(&g.forward(&vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_convention() {
        // cos(x1) on 2-D grid must land on k = (±1, 0)
        let g = make_grid(2, 8, 2.0 * PI).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0].cos()).collect();
        let c = g.forward(&vals);
        for (i, v) in c.iter().enumerate() {
            let k = g.k_vector(i);
            if k[0].abs() == 1 && k[1] == 0 {
                assert!((v.re - 32.0).abs() < 1e-10);
            } else {
                assert!(v.norm() < 1e-10);
            }
        }
    }
}
