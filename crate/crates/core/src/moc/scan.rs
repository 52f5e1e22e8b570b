//! Discrete two-point scans against a modulus of continuity.
//!
//! On the lattice every pair `(x, y)` is `(x + s, x)` for a lattice shift `s`,
//! so `max_x f(x+s) − f(x)` over a set of shifts is an exact scan of those
//! pairs at `O(N)` cost per shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::Moc;
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::spectral::gradient_sup;

/// Default number of random off-axis shifts.
pub const RANDOM_SHIFTS: usize = 64;

/// Lattice shifts with their minimal-image lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet {
    grid: TorusGrid,
    shifts: Vec<[usize; 3]>,
    lengths: Vec<f64>,
}

impl ShiftSet {
    /// All axis shifts plus `n_random` seeded off-axis shifts (`d ≥ 2`).
    pub fn new(grid: &TorusGrid, n_random: usize, seed: u64) -> Self {
        let n = grid.n_per_dim();
        let d = grid.dim();
        let mut shifts = Vec::new();
        for axis in 0..d {
            for j in 1..n {
                let mut s = [0usize; 3];
                s[axis] = j;
                shifts.push(s);
            }
        }
        if d >= 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut added = 0;
            while added < n_random {
                let mut s = [0usize; 3];
                for c in s.iter_mut().take(d) {
                    *c = rng.gen_range(0..n);
                }
                // off-axis only: at least two nonzero components
                if s.iter().filter(|&&c| c != 0).count() >= 2 && !shifts.contains(&s) {
                    shifts.push(s);
                    added += 1;
                }
            }
        }
        let h = grid.spacing();
        let lengths = shifts
            .iter()
            .map(|s| {
                s.iter()
                    .take(d)
                    .map(|&c| {
                        let m = c.min(n - c) as f64 * h;
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Self {
            grid: grid.clone(),
            shifts,
            lengths,
        }
    }

    pub fn standard(grid: &TorusGrid) -> Self {
        Self::new(grid, RANDOM_SHIFTS, 0x5eed)
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn shift(&self, i: usize) -> [usize; 3] {
        self.shifts[i]
    }

    /// Torus distance `|s|`.
    pub fn length(&self, i: usize) -> f64 {
        self.lengths[i]
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `max_x f(x + s_i) − f(x)` for every shift.
    pub fn max_increments(&self, f: &ScalarField) -> Vec<f64> {
        assert!(f.grid() == &self.grid, "shift set built for another grid");
        let v = f.values();
        let n = self.grid.n_per_dim();
        let d = self.grid.dim();
        let len = self.grid.len();
        self.shifts
            .par_iter()
            .map(|s| {
                let mut best = f64::NEG_INFINITY;
                for flat in 0..len {
                    let idx = self.grid.multi_index(flat);
                    let mut t = [0usize; 3];
                    for a in 0..d {
                        t[a] = (idx[a] + s[a]) % n;
                    }
                    let inc = v[self.grid.flat_index(&t[..d])] - v[flat];
                    if inc > best {
                        best = inc;
                    }
                }
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// `min_s [decay · ω(|s|) − M(s)]`.
    pub margin: f64,
    /// Arg-min shift in lattice units.
    pub shift: Vec<usize>,
    pub distance: f64,
    /// `M(s)` at the arg-min.
    pub increment: f64,
    /// Smallest `|s|` with a nonpositive margin.
    pub first_violation: Option<f64>,
    pub pass: bool,
}

/// Scans `f` against `decay · ω`.
pub fn scan_breakthrough(f: &ScalarField, m: &Moc, decay: f64, shifts: &ShiftSet) -> ScanResult {
    let incs = shifts.max_increments(f);
    let d = shifts.grid().dim();
    let mut best = (f64::INFINITY, 0usize);
    let mut first: Option<f64> = None;
    for (i, inc) in incs.iter().enumerate() {
        let margin = decay * m.at(shifts.length(i)) - inc;
        // NaN increments count as a breakthrough
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if margin < best.0 {
            best = (margin, i);
        }
        if margin <= 0.0 {
            let l = shifts.length(i);
            first = Some(first.map_or(l, |f| f.min(l)));
        }
    }
    let i = best.1;
    ScanResult {
        margin: best.0,
        shift: shifts.shift(i)[..d].to_vec(),
        distance: shifts.length(i),
        increment: incs[i],
        first_violation: first,
        pass: best.0 > 0.0,
    }
}

/// Discrete `C^σ` seminorm `max_s max_x |f(x+s) − f(x)| / |s|^σ`.
pub fn holder_seminorm(f: &ScalarField, sigma: f64, shifts: &ShiftSet) -> f64 {
    // the set is closed under s → −s on the axes; use |·| for the random part
    let up = shifts.max_increments(f);
    let down = shifts.max_increments(&f.map(|x| -x));
    up.iter()
        .zip(&down)
        .enumerate()
        .map(|(i, (a, b))| a.max(*b) / shifts.length(i).powf(sigma))
        .fold(0.0, f64::max)
}

/// `ln` of the largest scale for which `f` obeys `ω_λ^{δ,μ}`:
/// `ln(2‖f‖_∞/‖∇f‖_∞) − 4‖f‖_∞/δ`. `+∞` for constant `f`.
pub fn admissible_log_lambda(f: &ScalarField, delta: f64) -> f64 {
    let sup = f.sup_norm();
    let grad = gradient_sup(f);
    if grad <= 0.0 || sup <= 0.0 {
        return f64::INFINITY;
    }
    (2.0 * sup / grad).ln() - 4.0 * sup / delta
}

/// `(2‖f‖_∞/‖∇f‖_∞) e^{−4‖f‖_∞/δ}`; `+∞` for constant `f`.
pub fn admissible_lambda(f: &ScalarField, delta: f64) -> f64 {
    admissible_log_lambda(f, delta).exp()
}

/// `f` shifted by its mid-range so that `‖f‖_∞` is half its oscillation.
pub fn centred(f: &ScalarField) -> ScalarField {
    let mid = 0.5 * (f.max() + f.min());
    f.map(|x| x - mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::TAU;

    #[test]
    fn admissible_examples() {
        let g = make_grid(1, 64, TAU).unwrap();
        let f = ScalarField::from_fn(&g, |x| 0.3 * x[0].sin());
        assert!((admissible_lambda(&f, 1.0) - 2.0 * (-1.2f64).exp()).abs() < 1e-12);
        let c = ScalarField::constant(&g, 2.0);
        assert_eq!(admissible_lambda(&c, 1.0), f64::INFINITY);
    }

    #[test]
    fn constant_passes_with_smallest_shift() {
        let g = make_grid(1, 32, TAU).unwrap();
        let s = ShiftSet::standard(&g);
        let m = Moc::new(1.0, 0.5, 0.1).unwrap();
        let r = scan_breakthrough(&ScalarField::constant(&g, 1.0), &m, 1.0, &s);
        assert!(r.pass);
        assert!((r.margin - m.at(g.spacing())).abs() < 1e-14);
    }

    #[test]
    fn sin_against_admissible_and_too_flat() {
        let g = make_grid(1, 128, TAU).unwrap();
        let s = ShiftSet::standard(&g);
        let f = ScalarField::from_fn(&g, |x| x[0].sin());
        let lam = admissible_lambda(&f, 1.0);
        assert!(scan_breakthrough(&f, &Moc::new(1.0, 0.5, lam).unwrap(), 1.0, &s).pass);
        let flat = scan_breakthrough(&f, &Moc::new(1.0, 0.5, 1e3).unwrap(), 1.0, &s);
        assert!(!flat.pass);
        assert!((flat.first_violation.unwrap() - g.spacing()).abs() < 1e-14);
        assert!((flat.increment - 2.0).abs() < 1e-3);
    }

    #[test]
    fn shifts_2d() {
        let g = make_grid(2, 16, TAU).unwrap();
        let s = ShiftSet::standard(&g);
        assert_eq!(s.len(), 2 * 15 + RANDOM_SHIFTS);
        let h = g.spacing();
        assert!((s.length(0) - h).abs() < 1e-15);
        assert!((s.length(14) - h).abs() < 1e-15);
        let again = ShiftSet::standard(&g);
        assert_eq!(s, again);
    }

    #[test]
    fn holder_one_tracks_lipschitz() {
        let g = make_grid(1, 256, TAU).unwrap();
        let s = ShiftSet::standard(&g);
        let f = ScalarField::from_fn(&g, |x| x[0].sin());
        let h = holder_seminorm(&f, 1.0, &s);
        assert!((h - 1.0).abs() < 1e-3, "{h}");
    }
}
