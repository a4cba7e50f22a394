//! Unit conventions: nanoseconds, rad/ns, microsecond lifetimes.

use std::f64::consts::TAU;

/// Linear frequency in GHz to angular frequency in rad/ns.
#[inline]
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Angular frequency in rad/ns to linear frequency in GHz.
#[inline]
pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / TAU
}

/// Lifetime in μs to a decay rate in 1/ns.
#[inline]
pub fn lifetime_us_to_rate(tau_us: f64) -> f64 {
    1.0 / (tau_us * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(ghz_to_angular(0.0), 0.0);
        assert_eq!(angular_to_ghz(0.0), 0.0);
    }

    #[test]
    fn blockade_example() {
        assert!((ghz_to_angular(1.54) - 9.676_105_373).abs() < 1e-8);
    }

    #[test]
    fn round_trip() {
        for &x in &[1.54, -5.534, 5.694, 1e-3, 9.1926, -1.245] {
            let y = angular_to_ghz(ghz_to_angular(x));
            assert!(((y - x) / x).abs() < 1e-15, "{x} -> {y}");
        }
    }

    #[test]
    fn lifetime_rate() {
        assert!((lifetime_us_to_rate(538.0) - 1.858_736e-6).abs() < 1e-12);
    }
}
