//! Physical settings for the two single-photon excitation schemes and
//! user overrides loaded from flat TOML files.
//!
//! All frequencies are stored as angular frequencies in rad/ns; lifetimes are
//! kept in μs and converted to rates where they are used.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::atom::Level;
use crate::units::{angular_to_ghz, ghz_to_angular};
use crate::{Error, Result};

/// Cs ground hyperfine splitting, GHz.
pub const CS_HYPERFINE_GHZ: f64 = 9.1926;

/// Default ratio of Rabi couplings to p₁/₂ versus p₃/₂ Rydberg states.
pub const DEFAULT_P_HALF_SUPPRESSION: f64 = 1.0 / 300.0;

/// Groups of Rydberg levels sharing a principal quantum number, used to look
/// up relative blockade strengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Manifold {
    /// Target principal number n.
    N,
    /// n + 1.
    NPlus,
    /// n − 1.
    NMinus,
    /// n′ (reached from |0⟩).
    NPrime,
    /// n″ (reached from |0⟩).
    NDoublePrime,
}

impl Manifold {
    pub const ALL: [Manifold; 5] = [
        Manifold::N,
        Manifold::NPlus,
        Manifold::NMinus,
        Manifold::NPrime,
        Manifold::NDoublePrime,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Manifold::N => "n",
            Manifold::NPlus => "nplus",
            Manifold::NMinus => "nminus",
            Manifold::NPrime => "nprime",
            Manifold::NDoublePrime => "ndprime",
        }
    }

    fn from_key(s: &str) -> Option<Self> {
        Manifold::ALL.into_iter().find(|m| m.key() == s)
    }
}

/// Relative blockade strengths b(m₁, m₂) in units of the target-pair
/// blockade 𝖡₀. Symmetric in its arguments.
///
/// Pairs not involving the target manifold default to the product
/// b(n, m₁)·b(n, m₂) unless set explicitly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelBlockades {
    entries: BTreeMap<(Manifold, Manifold), f64>,
}

impl RelBlockades {
    fn canonical(a: Manifold, b: Manifold) -> (Manifold, Manifold) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Table values shared by both builtin settings.
    pub fn table_defaults() -> Self {
        let mut r = RelBlockades {
            entries: BTreeMap::new(),
        };
        r.set(Manifold::N, Manifold::N, 1.0);
        r.set(Manifold::N, Manifold::NPrime, 0.85);
        r.set(Manifold::N, Manifold::NDoublePrime, 0.80);
        r.set(Manifold::N, Manifold::NPlus, 1.02);
        r.set(Manifold::N, Manifold::NMinus, 0.97);
        r
    }

    pub fn set(&mut self, a: Manifold, b: Manifold, value: f64) {
        self.entries.insert(Self::canonical(a, b), value);
    }

    /// Explicitly stored entry, if any.
    pub fn explicit(&self, a: Manifold, b: Manifold) -> Option<f64> {
        self.entries.get(&Self::canonical(a, b)).copied()
    }

    /// Relative blockade for the pair, falling back to the product rule.
    pub fn get(&self, a: Manifold, b: Manifold) -> f64 {
        if let Some(v) = self.explicit(a, b) {
            return v;
        }
        let bn = |m| self.explicit(Manifold::N, m).unwrap_or(1.0);
        bn(a) * bn(b)
    }
}

/// One complete excitation scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalSetting {
    pub name: String,
    pub n: u32,
    pub n_prime: u32,
    pub n_dprime: u32,
    /// Target Rydberg-state lifetime, μs.
    pub tau_n: f64,
    /// Detuning of (n+1)p₃/₂, rad/ns.
    pub delta_plus: f64,
    /// Detuning of (n−1)p₃/₂, rad/ns.
    pub delta_minus: f64,
    pub delta_p1_half: f64,
    pub delta_p3_half: f64,
    pub delta_pp1_half: f64,
    pub delta_pp3_half: f64,
    /// Blockade shift between two target Rydberg states, rad/ns.
    pub b0: f64,
    pub rel_blockades: RelBlockades,
    pub p_half_suppression: f64,
    /// Qubit hyperfine splitting, rad/ns. Not used in the rotating frame.
    pub omega_q: f64,
    pub decay_branch_g: f64,
    pub decay_branch_0: f64,
    pub decay_branch_1: f64,
    /// Per-level lifetime overrides, μs. Levels without an entry use `tau_n`.
    pub lifetime_overrides: BTreeMap<Level, f64>,
}

/// Table values in GHz/μs for one builtin scheme.
struct TableRow {
    name: &'static str,
    n: u32,
    n_prime: u32,
    n_dprime: u32,
    tau_n_us: f64,
    delta_plus: f64,
    delta_minus: f64,
    delta_p1_half: f64,
    delta_p3_half: f64,
    delta_pp1_half: f64,
    delta_pp3_half: f64,
    b0: f64,
}

const S1: TableRow = TableRow {
    name: "S1",
    n: 107,
    n_prime: 106,
    n_dprime: 105,
    tau_n_us: 538.0,
    delta_plus: -5.534,
    delta_minus: 5.694,
    delta_p1_half: -2.961,
    delta_p3_half: -3.161,
    delta_pp1_half: 3.256,
    delta_pp3_half: 3.051,
    b0: 1.54,
};

const S2: TableRow = TableRow {
    name: "S2",
    n: 141,
    n_prime: 138,
    n_dprime: 137,
    tau_n_us: 969.0,
    delta_plus: -2.507,
    delta_minus: 2.562,
    delta_p1_half: -1.245,
    delta_p3_half: -1.333,
    delta_pp1_half: 1.495,
    delta_pp3_half: 1.405,
    b0: 0.68,
};

pub const BUILTIN_SETTINGS: [&str; 2] = ["S1", "S2"];

impl TableRow {
    fn to_setting(&self) -> PhysicalSetting {
        PhysicalSetting {
            name: self.name.to_string(),
            n: self.n,
            n_prime: self.n_prime,
            n_dprime: self.n_dprime,
            tau_n: self.tau_n_us,
            delta_plus: ghz_to_angular(self.delta_plus),
            delta_minus: ghz_to_angular(self.delta_minus),
            delta_p1_half: ghz_to_angular(self.delta_p1_half),
            delta_p3_half: ghz_to_angular(self.delta_p3_half),
            delta_pp1_half: ghz_to_angular(self.delta_pp1_half),
            delta_pp3_half: ghz_to_angular(self.delta_pp3_half),
            b0: ghz_to_angular(self.b0),
            rel_blockades: RelBlockades::table_defaults(),
            p_half_suppression: DEFAULT_P_HALF_SUPPRESSION,
            omega_q: ghz_to_angular(CS_HYPERFINE_GHZ),
            decay_branch_g: 7.0 / 8.0,
            decay_branch_0: 1.0 / 16.0,
            decay_branch_1: 1.0 / 16.0,
            lifetime_overrides: BTreeMap::new(),
        }
    }
}

/// Returns the validated builtin setting `S1` or `S2`.
pub fn load_setting(name: &str) -> Result<PhysicalSetting> {
    let row = match name {
        "S1" => &S1,
        "S2" => &S2,
        other => return Err(Error::UnknownSetting(other.to_string())),
    };
    let s = row.to_setting();
    s.validate()?;
    Ok(s)
}

/// Loads a setting-override file from disk. See [`parse_setting_overrides`].
pub fn load_setting_file(path: impl AsRef<Path>) -> Result<PhysicalSetting> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_setting_overrides(&text)
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidSetting {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn as_u32(key: &str, v: &toml::Value) -> Result<u32> {
    match v {
        toml::Value::Integer(i) if *i > 0 && *i <= u32::MAX as i64 => Ok(*i as u32),
        _ => Err(invalid(key, "expected a positive integer")),
    }
}

fn level_from_key(s: &str) -> Option<Level> {
    Level::ALL
        .into_iter()
        .filter(|l| l.is_rydberg())
        .find(|l| l.key() == s)
}

/// Parses a flat key–value TOML document overriding a builtin base setting.
///
/// `base` is required. Frequencies carry a `_GHz` suffix and are linear
/// frequencies; lifetimes carry a `_us` suffix. Unknown keys are rejected.
pub fn parse_setting_overrides(text: &str) -> Result<PhysicalSetting> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let base = match table.get("base") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(invalid("base", "expected a setting name string")),
        None => return Err(invalid("base", "missing; name the builtin setting to override")),
    };
    let mut s = load_setting(&base)?;

    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "base" => {}
            "name" => match value {
                toml::Value::String(v) => s.name = v.clone(),
                _ => return Err(invalid(k, "expected a string")),
            },
            "n" => s.n = as_u32(k, value)?,
            "n_prime" => s.n_prime = as_u32(k, value)?,
            "n_dprime" => s.n_dprime = as_u32(k, value)?,
            "tau_n_us" => s.tau_n = as_f64(k, value)?,
            "delta_plus_GHz" => s.delta_plus = ghz_to_angular(as_f64(k, value)?),
            "delta_minus_GHz" => s.delta_minus = ghz_to_angular(as_f64(k, value)?),
            "delta_p1_half_GHz" => s.delta_p1_half = ghz_to_angular(as_f64(k, value)?),
            "delta_p3_half_GHz" => s.delta_p3_half = ghz_to_angular(as_f64(k, value)?),
            "delta_pp1_half_GHz" => s.delta_pp1_half = ghz_to_angular(as_f64(k, value)?),
            "delta_pp3_half_GHz" => s.delta_pp3_half = ghz_to_angular(as_f64(k, value)?),
            "b0_GHz" => s.b0 = ghz_to_angular(as_f64(k, value)?),
            "omega_q_GHz" => s.omega_q = ghz_to_angular(as_f64(k, value)?),
            "p_half_suppression" => s.p_half_suppression = as_f64(k, value)?,
            "decay_branch_g" => s.decay_branch_g = as_f64(k, value)?,
            "decay_branch_0" => s.decay_branch_0 = as_f64(k, value)?,
            "decay_branch_1" => s.decay_branch_1 = as_f64(k, value)?,
            _ => {
                if let Some(rest) = k.strip_prefix("b_") {
                    let (a, b) = rest
                        .split_once('_')
                        .and_then(|(a, b)| Some((Manifold::from_key(a)?, Manifold::from_key(b)?)))
                        .ok_or_else(|| invalid(k, "unknown relative-blockade pair"))?;
                    s.rel_blockades.set(a, b, as_f64(k, value)?);
                } else if let Some(level) = k
                    .strip_prefix("tau_")
                    .and_then(|r| r.strip_suffix("_us"))
                    .and_then(level_from_key)
                {
                    s.lifetime_overrides.insert(level, as_f64(k, value)?);
                } else {
                    return Err(invalid(k, "unknown key"));
                }
            }
        }
    }
    s.validate()?;
    Ok(s)
}

impl PhysicalSetting {
    /// Checks every invariant and names the first offending key.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_n.is_finite() && self.tau_n > 0.0) {
            return Err(invalid("tau_n_us", "lifetime must be positive"));
        }
        for (level, tau) in &self.lifetime_overrides {
            if !(tau.is_finite() && *tau > 0.0) {
                return Err(invalid(
                    &format!("tau_{}_us", level.key()),
                    "lifetime must be positive",
                ));
            }
        }
        let detunings = [
            ("delta_plus_GHz", self.delta_plus),
            ("delta_minus_GHz", self.delta_minus),
            ("delta_p1_half_GHz", self.delta_p1_half),
            ("delta_p3_half_GHz", self.delta_p3_half),
            ("delta_pp1_half_GHz", self.delta_pp1_half),
            ("delta_pp3_half_GHz", self.delta_pp3_half),
        ];
        for (key, d) in detunings {
            if !d.is_finite() || d == 0.0 {
                return Err(invalid(key, "detuning must be finite and nonzero"));
            }
        }
        if !(self.b0.is_finite() && self.b0 >= 0.0) {
            return Err(invalid("b0_GHz", "blockade must be finite and non-negative"));
        }
        if !self.omega_q.is_finite() {
            return Err(invalid("omega_q_GHz", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.p_half_suppression) {
            return Err(invalid("p_half_suppression", "must lie in [0, 1]"));
        }
        for (key, b) in [
            ("decay_branch_g", self.decay_branch_g),
            ("decay_branch_0", self.decay_branch_0),
            ("decay_branch_1", self.decay_branch_1),
        ] {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid(key, "branching fraction must lie in [0, 1]"));
            }
        }
        let sum = self.decay_branch_g + self.decay_branch_0 + self.decay_branch_1;
        if (sum - 1.0).abs() > 1e-15 {
            return Err(invalid(
                "decay_branch_g",
                format!("branching fractions sum to {sum}, expected 1"),
            ));
        }
        for m in Manifold::ALL {
            let key = format!("b_n_{}", m.key());
            match self.rel_blockades.explicit(Manifold::N, m) {
                Some(v) if v.is_finite() => {}
                Some(_) => return Err(invalid(&key, "must be finite")),
                None => return Err(invalid(&key, "required relative blockade missing")),
            }
        }
        for n in [("n", self.n), ("n_prime", self.n_prime), ("n_dprime", self.n_dprime)] {
            if n.1 < 2 {
                return Err(invalid(n.0, "principal quantum number must be at least 2"));
            }
        }
        Ok(())
    }

    /// Lifetime of a Rydberg level in μs.
    pub fn lifetime_us(&self, level: Level) -> f64 {
        self.lifetime_overrides
            .get(&level)
            .copied()
            .unwrap_or(self.tau_n)
    }

    /// Copy with every decay rate multiplied by `factor` (lifetimes divided).
    pub fn with_decay_scale(&self, factor: f64) -> Result<PhysicalSetting> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(invalid("decay_scale", "must be positive"));
        }
        let mut s = self.clone();
        s.tau_n /= factor;
        for tau in s.lifetime_overrides.values_mut() {
            *tau /= factor;
        }
        s.validate()?;
        Ok(s)
    }

    /// Copy with a different blockade shift (rad/ns).
    pub fn with_b0(&self, b0: f64) -> Result<PhysicalSetting> {
        let mut s = self.clone();
        s.b0 = b0;
        s.validate()?;
        Ok(s)
    }

    /// Table-style (GHz) view of all detunings, in field order.
    pub fn detunings_ghz(&self) -> [(&'static str, f64); 7] {
        [
            ("delta_plus_GHz", angular_to_ghz(self.delta_plus)),
            ("delta_minus_GHz", angular_to_ghz(self.delta_minus)),
            ("delta_p1_half_GHz", angular_to_ghz(self.delta_p1_half)),
            ("delta_p3_half_GHz", angular_to_ghz(self.delta_p3_half)),
            ("delta_pp1_half_GHz", angular_to_ghz(self.delta_pp1_half)),
            ("delta_pp3_half_GHz", angular_to_ghz(self.delta_pp3_half)),
            ("b0_GHz", angular_to_ghz(self.b0)),
        ]
    }
}

impl fmt::Display for PhysicalSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "setting {}: n = {}, n' = {}, n'' = {}, tau_n = {} us",
            self.name, self.n, self.n_prime, self.n_dprime, self.tau_n
        )?;
        for (k, v) in self.detunings_ghz() {
            writeln!(f, "  {k} = {v}")?;
        }
        write!(f, "  p_half_suppression = {}", self.p_half_suppression)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_table_values() {
        let s = load_setting("S1").unwrap();
        assert_eq!(s.n, 107);
        assert_eq!(s.tau_n, 538.0);
        assert!((angular_to_ghz(s.delta_plus) + 5.534).abs() < 1e-12);
        assert!((angular_to_ghz(s.delta_minus) - 5.694).abs() < 1e-12);
        assert!((angular_to_ghz(s.b0) - 1.54).abs() < 1e-12);
    }

    #[test]
    fn s2_table_values() {
        let s = load_setting("S2").unwrap();
        assert_eq!(s.n, 141);
        assert_eq!(s.tau_n, 969.0);
        assert!((angular_to_ghz(s.b0) - 0.68).abs() < 1e-12);
        assert!((angular_to_ghz(s.delta_p1_half) + 1.245).abs() < 1e-12);
    }

    #[test]
    fn unknown_setting_lists_available() {
        let err = load_setting("S3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown setting"), "{msg}");
        assert!(msg.contains("S1") && msg.contains("S2"));
    }

    #[test]
    fn table_round_trip_relative_error() {
        for (row, s) in [(&S1, load_setting("S1").unwrap()), (&S2, load_setting("S2").unwrap())] {
            let table = [
                row.delta_plus,
                row.delta_minus,
                row.delta_p1_half,
                row.delta_p3_half,
                row.delta_pp1_half,
                row.delta_pp3_half,
                row.b0,
            ];
            for ((_, got), want) in s.detunings_ghz().into_iter().zip(table) {
                assert!(((got - want) / want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn branching_sums_to_one() {
        for name in BUILTIN_SETTINGS {
            let s = load_setting(name).unwrap();
            let sum = s.decay_branch_g + s.decay_branch_0 + s.decay_branch_1;
            assert!((sum - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn relative_blockade_defaults() {
        let b = RelBlockades::table_defaults();
        assert_eq!(b.get(Manifold::N, Manifold::NPlus), 1.02);
        assert_eq!(b.get(Manifold::NPlus, Manifold::N), 1.02);
        let prod = b.get(Manifold::NPrime, Manifold::NDoublePrime);
        assert!((prod - 0.85 * 0.80).abs() < 1e-15);
    }

    #[test]
    fn override_b0() {
        let s = parse_setting_overrides("base = \"S2\"\nb0_GHz = 0.5 # weaker\n").unwrap();
        let base = load_setting("S2").unwrap();
        assert!((angular_to_ghz(s.b0) - 0.5).abs() < 1e-15);
        assert_eq!(s.tau_n, base.tau_n);
        assert_eq!(s.delta_plus, base.delta_plus);
        assert_eq!(s.rel_blockades, base.rel_blockades);
    }

    #[test]
    fn empty_override_is_identity() {
        let s = parse_setting_overrides("# nothing but the base\nbase = \"S1\"\n").unwrap();
        assert_eq!(s, load_setting("S1").unwrap());
    }

    #[test]
    fn negative_lifetime_rejected() {
        let err = parse_setting_overrides("base = \"S1\"\ntau_n_us = -3.0\n").unwrap_err();
        assert!(err.to_string().contains("tau_n_us"), "{err}");
    }

    #[test]
    fn missing_base_and_unknown_key() {
        let err = parse_setting_overrides("b0_GHz = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("base"));
        let err = parse_setting_overrides("base = \"S1\"\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"));
        let err = parse_setting_overrides("base = \"S1\"\nb0_GHz = = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn zero_detuning_rejected() {
        let err = parse_setting_overrides("base = \"S1\"\ndelta_plus_GHz = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("delta_plus_GHz"));
    }

    #[test]
    fn bad_branching_rejected() {
        let err = parse_setting_overrides("base = \"S1\"\ndecay_branch_g = 0.8\n").unwrap_err();
        assert!(err.to_string().contains("branching"));
    }

    #[test]
    fn pair_and_lifetime_overrides() {
        let s = parse_setting_overrides(
            "base = \"S1\"\nb_nprime_ndprime = 0.5\ntau_r_plus_us = 600\n",
        )
        .unwrap();
        assert_eq!(s.rel_blockades.get(Manifold::NDoublePrime, Manifold::NPrime), 0.5);
        assert_eq!(s.lifetime_us(Level::RPlus), 600.0);
        assert_eq!(s.lifetime_us(Level::RTarget), 538.0);
    }

    #[test]
    fn decay_scale() {
        let s = load_setting("S1").unwrap().with_decay_scale(0.01).unwrap();
        assert!((s.tau_n - 53800.0).abs() < 1e-9);
    }
}
