use serde::{Deserialize, Serialize};

use super::MocError;

/// `ω(ξ) = δ s − (δ/4) s^{1+μ}` for `s = ξ/λ ≤ 1`, `(3/4)δ + (δ/2) ln s` beyond.
///
/// The scale is stored as `ln λ`, so the astronomically small scales produced
/// by the parameter selector stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moc {
    pub delta: f64,
    pub mu: f64,
    pub log_lambda: f64,
}

impl Moc {
    pub fn new(delta: f64, mu: f64, lambda: f64) -> Result<Self, MocError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(MocError::Parameter(format!("lambda must be positive, got {lambda}")));
        }
        Self::with_log_lambda(delta, mu, lambda.ln())
    }

    pub fn with_log_lambda(delta: f64, mu: f64, log_lambda: f64) -> Result<Self, MocError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(MocError::Parameter(format!("delta must be positive, got {delta}")));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(MocError::Parameter(format!("mu must lie in (0,1], got {mu}")));
        }
        if !log_lambda.is_finite() {
            return Err(MocError::Parameter("log lambda must be finite".into()));
        }
        Ok(Self {
            delta,
            mu,
            log_lambda,
        })
    }

    /// `λ` (underflows to 0 for extreme scales; use `log_lambda` then).
    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    /// Same shape with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            delta: self.delta * factor,
            ..*self
        }
    }

    pub fn eval(&self, xi: f64) -> Result<f64, MocError> {
        if !(xi > 0.0) {
            return Err(MocError::NonPositive(xi));
        }
        Ok(self.at(xi))
    }

    /// Evaluation without the sign check; `at(0) = 0`.
    pub fn at(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let r = xi.ln() - self.log_lambda;
        if r <= 0.0 {
            let s = r.exp();
            self.delta * (s - 0.25 * s.powf(1.0 + self.mu))
        } else {
            self.delta * (0.75 + 0.5 * r)
        }
    }

    fn in_power_branch(&self, x: f64) -> bool {
        x.ln() <= self.log_lambda
    }

    pub fn deriv(&self, xi: f64) -> f64 {
        let r = xi.ln() - self.log_lambda;
        if r <= 0.0 {
            let s = r.exp();
            self.delta * (1.0 - 0.25 * (1.0 + self.mu) * s.powf(self.mu)) / self.lambda()
        } else {
            0.5 * self.delta / xi
        }
    }

    pub fn second_deriv(&self, xi: f64) -> f64 {
        let r = xi.ln() - self.log_lambda;
        if r <= 0.0 {
            let s = r.exp();
            let lam = self.lambda();
            -0.25 * self.delta * (1.0 + self.mu) * self.mu * s.powf(self.mu - 1.0) / (lam * lam)
        } else {
            -0.5 * self.delta / (xi * xi)
        }
    }

    /// `ω(x + h) − ω(x)` without cancellation when both points share a branch.
    pub fn increment(&self, x: f64, h: f64) -> f64 {
        let y = x + h;
        if y <= 0.0 {
            return -self.at(x);
        }
        let px = self.in_power_branch(x);
        let py = self.in_power_branch(y);
        if !px && !py {
            0.5 * self.delta * (h / x).ln_1p()
        } else if px && py {
            let s = (x.ln() - self.log_lambda).exp();
            let t = h / x;
            let grow = ((1.0 + self.mu) * t.ln_1p()).exp_m1();
            self.delta * (t * s - 0.25 * s.powf(1.0 + self.mu) * grow)
        } else {
            self.at(y) - self.at(x)
        }
    }

    /// `ω(|ξe − z|) + ω(|ξe + z|) − 2ω(ξ)` for `|z| = r`, `z₁ = r c`.
    pub fn sym_diff(&self, xi: f64, r: f64, c: f64) -> f64 {
        let lam_gap = (xi.ln() - self.log_lambda).abs();
        // relative distance of ξ from the kink, in log scale
        if r < 1e-4 * xi && r < 1e-4 * xi * lam_gap.min(1.0) {
            let s2 = 1.0 - c * c;
            return r * r * (self.second_deriv(xi) * c * c + self.deriv(xi) / xi * s2);
        }
        let a2 = xi * xi - 2.0 * xi * r * c + r * r;
        let b2 = xi * xi + 2.0 * xi * r * c + r * r;
        let a = a2.max(0.0).sqrt();
        let b = b2.sqrt();
        let lx = !self.in_power_branch(xi);
        if lx && a > 0.0 && !self.in_power_branch(a) && !self.in_power_branch(b) {
            let q = r * r * (r * r + 2.0 * xi * xi * (1.0 - 2.0 * c * c)) / xi.powi(4);
            return 0.25 * self.delta * q.ln_1p();
        }
        let da = (r * r - 2.0 * xi * r * c) / (a + xi);
        let db = (r * r + 2.0 * xi * r * c) / (b + xi);
        self.increment(xi, da) + self.increment(xi, db)
    }

    /// Smallest `ξ > λ` with `ω(ξ) = value`, as `ln ξ`; `value ≥ 3δ/4` required.
    pub fn log_level_crossing(&self, value: f64) -> Option<f64> {
        if value < 0.75 * self.delta {
            return None;
        }
        Some(self.log_lambda + 2.0 * (value / self.delta - 0.75))
    }
}

pub fn moc_eval(m: &Moc, xi: f64) -> Result<f64, MocError> {
    m.eval(xi)
}

/// `ln Ξ = ln λ + 2 level/δ − 3/2`.
pub fn log_threshold(m: &Moc, level: f64) -> f64 {
    m.log_lambda + 2.0 * level / m.delta - 1.5
}

/// The coupled pair `(ω₁, e^{−c₀t} ω₂)` with `δ₁ = κ δ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MocPair {
    pub omega1: Moc,
    pub omega2: Moc,
    pub kappa: f64,
    pub c0: f64,
    /// `ln Ξ₁`, `ln Ξ₂`.
    pub log_xi1: f64,
    pub log_xi2: f64,
}

impl MocPair {
    /// Builds the pair from `δ₂`, `κ`, `μ`, `ln λ` and the levels `ρ̄`, `V₀`.
    pub fn new(
        delta2: f64,
        kappa: f64,
        mu: f64,
        log_lambda: f64,
        c0: f64,
        rho_upper: f64,
        v0: f64,
    ) -> Result<Self, MocError> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(MocError::Parameter(format!("kappa must lie in (0,1], got {kappa}")));
        }
        if !(c0 >= 0.0) {
            return Err(MocError::Parameter(format!("c0 must be nonnegative, got {c0}")));
        }
        let omega2 = Moc::with_log_lambda(delta2, mu, log_lambda)?;
        let omega1 = Moc::with_log_lambda(kappa * delta2, mu, log_lambda)?;
        Ok(Self {
            omega1,
            omega2,
            kappa,
            c0,
            log_xi1: log_threshold(&omega1, rho_upper),
            log_xi2: log_threshold(&omega2, v0),
        })
    }

    pub fn decay(&self, t: f64) -> f64 {
        (-self.c0 * t).exp()
    }

    pub fn with_c0(&self, c0: f64) -> Self {
        Self { c0, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let m = Moc::new(1.0, 0.5, 1.0).unwrap();
        assert!((m.eval(1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((m.eval(std::f64::consts::E.powi(2)).unwrap() - 1.75).abs() < 1e-14);
        let m2 = Moc::new(2.0, 0.5, 0.5).unwrap();
        assert!((m2.eval(0.5).unwrap() - 1.5).abs() < 1e-14);
        assert!(m.eval(0.0).is_err());
        assert!(m.eval(-1.0).is_err());
    }

    #[test]
    fn slope_at_origin() {
        let m = Moc::new(0.7, 0.9, 0.2).unwrap();
        let h = 1e-12;
        assert!((m.at(h) / h - 0.7 / 0.2).abs() < 1e-6);
    }

    #[test]
    fn tiny_scales_stay_finite() {
        let m = Moc::with_log_lambda(0.01, 0.5, -5000.0).unwrap();
        assert_eq!(m.lambda(), 0.0);
        let v = m.at(0.01);
        assert!((v - 0.01 * (0.75 + 0.5 * (0.01f64.ln() + 5000.0))).abs() < 1e-12);
    }

    #[test]
    fn threshold_matches_level() {
        let m = Moc::new(0.3, 0.5, 0.01).unwrap();
        let lx = log_threshold(&m, 2.0);
        assert!((m.at(lx.exp()) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn concave(s in 1e-3f64..1e3, h in 1e-4f64..0.999, mu in 0.05f64..1.0, lam in 1e-2f64..1e2) {
            let m = Moc::new(1.3, mu, lam).unwrap();
            let xi = s * lam;
            let hh = h * xi;
            prop_assert!(m.at(xi + hh) + m.at(xi - hh) - 2.0 * m.at(xi) <= 1e-12 * m.at(xi));
        }

        #[test]
        fn scaling_identity(s in 1e-3f64..1e3, lam in 1e-3f64..1e3, mu in 0.05f64..1.0) {
            let m = Moc::new(0.9, mu, lam).unwrap();
            let unit = Moc::new(0.9, mu, 1.0).unwrap();
            prop_assert!((m.at(s * lam) - unit.at(s)).abs() <= 1e-12 * unit.at(s).max(1.0));
        }

        #[test]
        fn increasing(a in 1e-4f64..1e4, b in 1e-4f64..1e4) {
            let m = Moc::new(1.0, 0.5, 1.0).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi > lo * (1.0 + 1e-9));
            prop_assert!(m.at(hi) > m.at(lo));
        }

        #[test]
        fn increment_matches_direct(x in 1e-2f64..1e2, t in -0.9f64..3.0, mu in 0.05f64..1.0) {
            let m = Moc::new(1.0, mu, 1.0).unwrap();
            let h = t * x;
            let direct = m.at(x + h) - m.at(x);
            prop_assert!((m.increment(x, h) - direct).abs() <= 1e-12 * (1.0 + m.at(x)));
        }

        #[test]
        fn sym_diff_matches_direct(xi in 1e-2f64..1e2, t in 1e-3f64..5.0, c in 0.0f64..1.0) {
            let m = Moc::new(1.0, 0.5, 1.0).unwrap();
            let r = t * xi;
            let a = (xi * xi - 2.0 * xi * r * c + r * r).max(0.0).sqrt();
            let b = (xi * xi + 2.0 * xi * r * c + r * r).sqrt();
            let direct = m.at(a) + m.at(b) - 2.0 * m.at(xi);
            prop_assert!((m.sym_diff(xi, r, c) - direct).abs() <= 1e-10 * (1.0 + m.at(b)));
        }
    }
}
