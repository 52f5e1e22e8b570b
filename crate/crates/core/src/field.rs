use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::grid::TorusGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Physical,
    Spectral,
}

#[derive(Debug, Clone)]
enum Data {
    Physical(Vec<f64>),
    Spectral(Vec<Complex64>),
}

/// A real scalar field on a [`TorusGrid`], stored in either representation.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: TorusGrid,
    data: Data,
}

impl ScalarField {
    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            data: Data::Physical(values),
        })
    }

    /// Coefficients use the unnormalized forward DFT convention.
    pub fn from_spectrum(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Result<Self, FieldError> {
        if coeffs.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            data: Data::Spectral(coeffs),
        })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..d])
            })
            .collect();
        Self {
            grid: grid.clone(),
            data: Data::Physical(values),
        }
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            data: Data::Physical(vec![c; grid.len()]),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        match self.data {
            Data::Physical(_) => Representation::Physical,
            Data::Spectral(_) => Representation::Spectral,
        }
    }

    /// Physical values (transforming if needed).
    pub fn values(&self) -> Vec<f64> {
        match &self.data {
            Data::Physical(v) => v.clone(),
            Data::Spectral(c) => self.grid.inverse(c),
        }
    }

    /// Spectral coefficients (transforming if needed).
    pub fn spectrum(&self) -> Vec<Complex64> {
        match &self.data {
            Data::Physical(v) => self.grid.forward(v),
            Data::Spectral(c) => c.clone(),
        }
    }

    pub fn physical_ref(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Physical(v) => Some(v),
            Data::Spectral(_) => None,
        }
    }

    pub fn to_physical(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            data: Data::Physical(self.values()),
        }
    }

    pub fn to_spectral(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            data: Data::Spectral(self.spectrum()),
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<(), FieldError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values().into_iter().map(f).collect();
        Self {
            grid: self.grid.clone(),
            data: Data::Physical(values),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        self.same_grid(other)?;
        let a = self.values();
        let b = other.values();
        let values = a.iter().zip(&b).map(|(&x, &y)| f(x, y)).collect();
        Ok(Self {
            grid: self.grid.clone(),
            data: Data::Physical(values),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann sum over the torus (exact for trigonometric polynomials).
    pub fn integral(&self) -> f64 {
        self.values().iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn conjugate_symmetry() {
        let g = make_grid(2, 16, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + x[0].cos().powi(3));
        let c = f.spectrum();
        let n = g.n_per_dim();
        for i in 0..g.len() {
            let idx = g.multi_index(i);
            let j = g.flat_index(&[(n - idx[0]) % n, (n - idx[1]) % n]);
            assert!((c[i] - c[j].conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn length_checked() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert!(ScalarField::from_values(&g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn integral_of_constant() {
        let g = make_grid(2, 8, 2.0 * PI).unwrap();
        let f = ScalarField::constant(&g, 1.5);
        assert!((f.integral() - 1.5 * 4.0 * PI * PI).abs() < 1e-12);
        assert!((f.mean() - 1.5).abs() < 1e-14);
    }
}
