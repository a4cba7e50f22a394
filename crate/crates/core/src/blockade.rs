//! Analytic leakage model for the blockade strength B₀:
//!
//! ```text
//! P(B) = 1/((n+1)³(Δ₁+B)²) + 1/((n−1)³(Δ₁−B)²)
//!      + 1/(n′³(Δ₂−B)²) + 1/(n″³(Δ₂+B)²) + 1/(n³B²)
//! ```
//!
//! with Δ₁, Δ₂ the mean magnitudes of the (n±1) and (n′, n″) detunings.
//! Values are relative; only the location of the minimum is meaningful.

use serde::Serialize;

use crate::params::PhysicalSetting;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakModel {
    pub n: f64,
    pub n_prime: f64,
    pub n_dprime: f64,
    /// rad/ns
    pub delta1: f64,
    /// rad/ns
    pub delta2: f64,
}

impl LeakModel {
    pub fn from_setting(s: &PhysicalSetting) -> Self {
        LeakModel {
            n: s.n as f64,
            n_prime: s.n_prime as f64,
            n_dprime: s.n_dprime as f64,
            delta1: 0.5 * (s.delta_plus.abs() + s.delta_minus.abs()),
            delta2: 0.25
                * (s.delta_p1_half.abs()
                    + s.delta_p3_half.abs()
                    + s.delta_pp1_half.abs()
                    + s.delta_pp3_half.abs()),
        }
    }

    /// Scale `(coefficient, detuning, sign)` of each term `c/(Δ + sign·B)²`;
    /// the last term has zero detuning.
    fn terms(&self) -> [(f64, f64, f64); 5] {
        [
            (1.0 / (self.n + 1.0).powi(3), self.delta1, 1.0),
            (1.0 / (self.n - 1.0).powi(3), self.delta1, -1.0),
            (1.0 / self.n_prime.powi(3), self.delta2, -1.0),
            (1.0 / self.n_dprime.powi(3), self.delta2, 1.0),
            (1.0 / self.n.powi(3), 0.0, 1.0),
        ]
    }

    fn check(&self, b0: f64) -> Result<()> {
        if !(b0.is_finite() && b0 > 0.0) {
            return Err(Error::InvalidArgument(format!("blockade must be positive, got {b0}")));
        }
        for (name, d) in [("Δ₁", self.delta1), ("Δ₂", self.delta2)] {
            if (b0 - d).abs() <= 1e-12 * d {
                return Err(Error::Pole(format!(
                    "B₀ = {name} = {:.6} GHz: leakage level almost resonantly driven",
                    crate::units::angular_to_ghz(d)
                )));
            }
        }
        Ok(())
    }

    /// Relative leakage probability at blockade `b0` (rad/ns).
    pub fn leak_probability(&self, b0: f64) -> Result<f64> {
        self.check(b0)?;
        Ok(self
            .terms()
            .iter()
            .map(|&(c, d, s)| c / (d + s * b0).powi(2))
            .sum())
    }

    /// dP/dB₀.
    pub fn derivative(&self, b0: f64) -> Result<f64> {
        self.check(b0)?;
        Ok(self
            .terms()
            .iter()
            .map(|&(c, d, s)| -2.0 * s * c / (d + s * b0).powi(3))
            .sum())
    }

    /// Bracket `(0, min(Δ₁, Δ₂))` shrunk slightly away from the poles.
    pub fn default_bracket(&self) -> (f64, f64) {
        let top = self.delta1.min(self.delta2);
        (1e-3 * top, top * (1.0 - 1e-6))
    }

    /// Evenly spaced blockades for simulated sweeps, covering
    /// `[0.1, 0.95]·min(Δ₁, Δ₂)` below the first leakage pole.
    pub fn sweep_grid(&self, points: usize) -> Vec<f64> {
        let top = self.delta1.min(self.delta2);
        let n = points.max(2);
        (0..n)
            .map(|i| top * (0.1 + 0.85 * i as f64 / (n - 1) as f64))
            .collect()
    }

    /// `(b, P(b))` at `points` evenly spaced blockades in `[lo, hi]`.
    pub fn scan(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, Result<f64>)> {
        let n = points.max(2);
        (0..n)
            .map(|i| {
                let b = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (b, self.leak_probability(b))
            })
            .collect()
    }

    /// Minimizer of P inside `bracket` by bisection on dP/dB.
    pub fn optimal_blockade(&self, bracket: (f64, f64)) -> Result<OptimalBlockade> {
        let (lo, hi) = bracket;
        if !(0.0 < lo && lo < hi) {
            return Err(Error::InvalidArgument(format!("invalid bracket [{lo}, {hi}]")));
        }
        let scan = self.scan(lo, hi, SCAN_POINTS);
        let scan_min = scan
            .iter()
            .filter_map(|(b, p)| p.as_ref().ok().map(|p| (*b, *p)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map_or(f64::NAN, |x| x.0);
        let (mut a, mut b) = (lo, hi);
        let (da, db) = (self.derivative(a)?, self.derivative(b)?);
        if !(da < 0.0 && db > 0.0) {
            return Err(Error::NoSignChange { lo, hi, scan_min });
        }
        let scale = self.leak_probability(scan_min.max(lo))? / scan_min.max(lo);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let dm = self.derivative(m)?;
            if dm.abs() < 1e-14 * scale {
                a = m;
                b = m;
                break;
            }
            if dm < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let b0 = 0.5 * (a + b);
        let p_min = self.leak_probability(b0)?;
        let (flat_lo, flat_hi) = self.flat_region(b0, p_min, 1.1, bracket)?;
        Ok(OptimalBlockade {
            b0,
            p_min,
            flat_lo,
            flat_hi,
            scan_min,
        })
    }

    /// Interval around `b0` where `P ≤ factor·P(b0)`, clipped to `bracket`.
    fn flat_region(&self, b0: f64, p_min: f64, factor: f64, bracket: (f64, f64)) -> Result<(f64, f64)> {
        let level = factor * p_min;
        let solve = |mut inside: f64, mut outside: f64| -> Result<f64> {
            if self.leak_probability(outside)? <= level {
                return Ok(outside);
            }
            for _ in 0..200 {
                let m = 0.5 * (inside + outside);
                if m == inside || m == outside {
                    break;
                }
                if self.leak_probability(m)? <= level {
                    inside = m;
                } else {
                    outside = m;
                }
            }
            Ok(inside)
        };
        Ok((solve(b0, bracket.0)?, solve(b0, bracket.1)?))
    }
}

const SCAN_POINTS: usize = 200;

/// Optimum of the leakage model with its flatness diagnostics (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalBlockade {
    pub b0: f64,
    pub p_min: f64,
    /// Edges of the region where P ≤ 1.1·P(b0).
    pub flat_lo: f64,
    pub flat_hi: f64,
    /// Best point of the 200-point cross-check scan.
    pub scan_min: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::load_setting;
    use crate::units::{angular_to_ghz, ghz_to_angular};

    fn model(name: &str) -> LeakModel {
        LeakModel::from_setting(&load_setting(name).unwrap())
    }

    #[test]
    fn effective_detunings_s1() {
        let m = model("S1");
        assert!((angular_to_ghz(m.delta1) - 5.614).abs() < 1e-12);
        assert!((angular_to_ghz(m.delta2) - 3.10725).abs() < 1e-12);
    }

    #[test]
    fn optimum_s1_s2() {
        for (name, expected, tol) in [("S1", 1.54, 0.02), ("S2", 0.68, 0.01)] {
            let m = model(name);
            let opt = m.optimal_blockade(m.default_bracket()).unwrap();
            let ghz = angular_to_ghz(opt.b0);
            assert!((ghz - expected).abs() <= tol, "{name}: {ghz}");
            assert!(opt.flat_lo < opt.b0 && opt.b0 < opt.flat_hi);
        }
    }

    #[test]
    fn optimum_beats_scan() {
        let m = model("S2");
        let br = m.default_bracket();
        let opt = m.optimal_blockade(br).unwrap();
        for (_, p) in m.scan(br.0, br.1, 200) {
            assert!(opt.p_min <= p.unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn s2_ordering() {
        let m = model("S2");
        let at = |g: f64| m.leak_probability(ghz_to_angular(g)).unwrap();
        assert!(at(0.68) < at(0.3) && at(0.68) < at(2.0));
    }

    #[test]
    fn diverges_near_zero_and_poles() {
        let m = model("S1");
        assert!(m.leak_probability(1e-6).unwrap() > 1e6 * m.leak_probability(1.0).unwrap());
        assert!(matches!(m.leak_probability(m.delta2), Err(Error::Pole(_))));
        assert!(m.leak_probability(0.0).is_err());
    }

    #[test]
    fn homogeneity() {
        let m = model("S1");
        let c = 2.5;
        let scaled = LeakModel { delta1: m.delta1 * c, delta2: m.delta2 * c, ..m };
        let b = 7.0;
        let r = scaled.leak_probability(b * c).unwrap() / m.leak_probability(b).unwrap();
        assert!((r - 1.0 / (c * c)).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = model("S2");
        for b in [0.5, 2.0, 4.0, 6.0] {
            let h = 1e-5 * b;
            let fd = (m.leak_probability(b + h).unwrap() - m.leak_probability(b - h).unwrap()) / (2.0 * h);
            let d = m.derivative(b).unwrap();
            assert!(((d - fd) / d).abs() < 1e-8, "b={b}: {d} vs {fd}");
        }
    }

    #[test]
    fn no_sign_change_reports_scan() {
        let m = model("S1");
        let err = m.optimal_blockade((0.1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }
}
