//! Closed-form guarantees for the VarOpt sparsifier and the offline sandwich.
//!
//! With `η = Z_H / Z` the heavy share of a fractional solution and `τ = 1/k`,
//! the per-bin collision loss is bounded by
//!
//! ```text
//! U_τ(η) = min{ ½·√(η + τ(1 − η)),  e^{−η}·(η + ½·√(τ(1 − η))) }
//! ```
//!
//! and the expected matching on the sparsified graph is at least
//! `Z·(1 − U_{1/k}(η)) − 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub z: f64,
    pub z_heavy: f64,
    pub z_light: f64,
    pub k: usize,
}

impl BoundInputs {
    pub fn new(z_heavy: f64, z_light: f64, k: usize) -> Result<Self> {
        if !(z_heavy >= 0.0 && z_light >= 0.0) {
            return Err(Error::Domain(format!("Z_H = {z_heavy}, Z_L = {z_light}")));
        }
        let z = z_heavy + z_light;
        if !(z > 0.0) {
            return Err(Error::Domain("Z = 0".into()));
        }
        if k == 0 {
            return Err(Error::Domain("k = 0".into()));
        }
        Ok(Self {
            z,
            z_heavy,
            z_light,
            k,
        })
    }

    pub fn heavy_fraction(&self) -> f64 {
        self.z_heavy / self.z
    }
}

/// `U_τ(η)` for `η ∈ [0, 1]`, `τ ∈ (0, 1]`.
pub fn per_bin_bound(eta: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta = {eta}")));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("tau = {tau}")));
    }
    let light = tau * (1.0 - eta);
    let spread = 0.5 * (eta + light).sqrt();
    let collide = (-eta).exp() * (eta + 0.5 * light.sqrt());
    Ok(spread.min(collide))
}

/// Lower bound on `E|M(G_S)|`. May be negative when `Z` is small, in which
/// case it is vacuous.
pub fn theorem_bound(b: &BoundInputs) -> f64 {
    let eta = b.heavy_fraction().clamp(0.0, 1.0);
    let u = per_bin_bound(eta, 1.0 / b.k as f64).expect("inputs validated");
    b.z * (1.0 - u) - 1.0
}

/// Budget `⌈ε⁻²⌉` for which a solution with heavy share `<= ε/2` keeps a
/// `1 − ε − 1/Z` fraction of `Z`.
pub fn corollary_budget(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon}")));
    }
    // Guard against 1/0.1² evaluating to 100.00000000000001.
    let raw = 1.0 / (epsilon * epsilon);
    let rounded = raw.round();
    Ok(if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    } as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichVerdict {
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// `(1 − 1/e)·OPT_LP − 4σ <= mean <= OPT_LP + 4σ`.
pub fn sandwich_check(opt_lp: f64, empirical_mean: f64, stderr: f64) -> SandwichVerdict {
    let slack = 4.0 * stderr.max(0.0);
    let lower = (1.0 - (-1.0f64).exp()) * opt_lp - slack;
    let upper = opt_lp + slack;
    SandwichVerdict {
        lower,
        upper,
        pass: lower <= empirical_mean && empirical_mean <= upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn per_bin_at_endpoints() {
        for tau in [0.01, 0.3, 1.0] {
            assert!((per_bin_bound(1.0, tau).unwrap() - 1.0 / E).abs() < 1e-12);
        }
        assert!((per_bin_bound(0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(per_bin_bound(0.0, 1e-12).unwrap() < 1e-5);
        assert!(per_bin_bound(1.2, 0.5).is_err());
        assert!(per_bin_bound(0.5, 0.0).is_err());
        assert!(per_bin_bound(0.5, 1.5).is_err());
    }

    #[test]
    fn per_bin_monotone_in_tau() {
        for i in 0..=100 {
            let eta = i as f64 / 100.0;
            let mut prev = 0.0;
            for t in 1..=100 {
                let u = per_bin_bound(eta, t as f64 / 100.0).unwrap();
                assert!(u + 1e-15 >= prev, "eta {eta} tau {t}");
                prev = u;
            }
        }
    }

    #[test]
    fn bound_all_heavy() {
        let b = BoundInputs::new(40.0, 0.0, 7).unwrap();
        assert!((theorem_bound(&b) - (40.0 * (1.0 - 1.0 / E) - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn bound_all_light_k4() {
        let b = BoundInputs::new(0.0, 12.0, 4).unwrap();
        assert!((theorem_bound(&b) - (12.0 * 0.75 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn spread_budget_instance() {
        let eps = 0.2;
        let k = corollary_budget(eps).unwrap();
        assert_eq!(k, 25);
        let b = BoundInputs::new(100.0 * eps / 2.0, 100.0 * (1.0 - eps / 2.0), k).unwrap();
        assert!(theorem_bound(&b) >= 79.0 - 1e-9, "{}", theorem_bound(&b));
    }

    #[test]
    fn light_bound_converges_to_z_minus_one() {
        let z = 50.0;
        let mut prev = f64::NEG_INFINITY;
        for k in [1, 4, 16, 64, 256] {
            let v = theorem_bound(&BoundInputs::new(0.0, z, k).unwrap());
            assert!(v > prev);
            prev = v;
        }
        assert!((prev - (z - 1.0)).abs() < z * 0.5 / 16.0 + 1e-9);
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(corollary_budget(0.1).unwrap(), 100);
        assert_eq!(corollary_budget(1.0).unwrap(), 1);
        assert_eq!(corollary_budget(0.25).unwrap(), 16);
        assert_eq!(corollary_budget(0.3).unwrap(), 12);
        assert!(corollary_budget(0.0).is_err());
        assert!(corollary_budget(1.5).is_err());
    }

    #[test]
    fn sandwich_cases() {
        assert!(sandwich_check(10.0, 8.5, 0.05).pass);
        assert!(!sandwich_check(10.0, 10.9, 0.05).pass);
        assert!(!sandwich_check(10.0, 5.0, 0.05).pass);
        let n = 50.0f64;
        let occupancy = n * (1.0 - (1.0 - 1.0 / n).powf(n));
        let v = sandwich_check(n, occupancy, 0.1);
        assert!(v.pass && occupancy - v.lower < 1.0);
    }

    #[test]
    fn bound_inputs_validation() {
        assert!(BoundInputs::new(0.0, 0.0, 3).is_err());
        assert!(BoundInputs::new(-1.0, 2.0, 3).is_err());
        assert!(BoundInputs::new(1.0, 2.0, 0).is_err());
    }
}
