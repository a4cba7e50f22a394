//! Single-atom level structure in the rotating frame and the two-atom
//! Hamiltonian
//!
//! ```text
//! H(t) = H_c(ε_c) ⊗ 1 + 1 ⊗ H_t(ε_t) + Σ b(rᵢ, rⱼ)·B₀ |rᵢ rⱼ⟩⟨rᵢ rⱼ|
//! ```
//!
//! Composite index of `|a, b⟩` (control `a`, target `b`) is `10·a + b` with
//! the per-atom order of [`Level::ALL`].

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::params::{Manifold, PhysicalSetting};
use crate::sparse::SparseReal;
use crate::units::lifetime_us_to_rate;
use crate::{Error, Result};

pub const LEVELS: usize = 10;
pub const DIM: usize = LEVELS * LEVELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Level {
    G,
    Q0,
    Q1,
    /// np₃/₂
    RTarget,
    /// (n+1)p₃/₂
    RPlus,
    /// (n−1)p₃/₂
    RMinus,
    /// n′p₁/₂
    RP1h,
    /// n′p₃/₂
    RP3h,
    /// n″p₁/₂
    RPP1h,
    /// n″p₃/₂
    RPP3h,
}

impl Level {
    pub const ALL: [Level; LEVELS] = [
        Level::G,
        Level::Q0,
        Level::Q1,
        Level::RTarget,
        Level::RPlus,
        Level::RMinus,
        Level::RP1h,
        Level::RP3h,
        Level::RPP1h,
        Level::RPP3h,
    ];

    pub const RYDBERG: [Level; 7] = [
        Level::RTarget,
        Level::RPlus,
        Level::RMinus,
        Level::RP1h,
        Level::RP3h,
        Level::RPP1h,
        Level::RPP3h,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Level::G => "g",
            Level::Q0 => "q0",
            Level::Q1 => "q1",
            Level::RTarget => "r_target",
            Level::RPlus => "r_plus",
            Level::RMinus => "r_minus",
            Level::RP1h => "r_p1h",
            Level::RP3h => "r_p3h",
            Level::RPP1h => "r_pp1h",
            Level::RPP3h => "r_pp3h",
        }
    }

    pub fn is_rydberg(self) -> bool {
        self.index() >= Level::RTarget.index()
    }

    pub fn manifold(self) -> Option<Manifold> {
        match self {
            Level::G | Level::Q0 | Level::Q1 => None,
            Level::RTarget => Some(Manifold::N),
            Level::RPlus => Some(Manifold::NPlus),
            Level::RMinus => Some(Manifold::NMinus),
            Level::RP1h | Level::RP3h => Some(Manifold::NPrime),
            Level::RPP1h | Level::RPP3h => Some(Manifold::NDoublePrime),
        }
    }

    /// Qubit state the drive couples this Rydberg level to.
    pub fn source(self) -> Option<Level> {
        match self {
            Level::RTarget | Level::RPlus | Level::RMinus => Some(Level::Q1),
            Level::RP1h | Level::RP3h | Level::RPP1h | Level::RPP3h => Some(Level::Q0),
            _ => None,
        }
    }

    pub fn is_p_half(self) -> bool {
        matches!(self, Level::RP1h | Level::RPP1h)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Composite index of `|control, target⟩`.
pub fn composite_index(control: Level, target: Level) -> usize {
    control.index() * LEVELS + target.index()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomLevel {
    pub label: Level,
    /// Rotating-frame energy for an undetuned drive, rad/ns.
    pub rot_detuning: f64,
    pub rabi_weight: f64,
    pub source: Option<Level>,
    /// Γ, 1/ns.
    pub decay_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomBasis {
    setting: String,
    levels: Vec<AtomLevel>,
}

impl AtomBasis {
    pub fn levels(&self) -> &[AtomLevel] {
        &self.levels
    }

    pub fn level(&self, label: Level) -> &AtomLevel {
        &self.levels[label.index()]
    }

    pub fn index_of(&self, label: Level) -> usize {
        label.index()
    }

    pub fn setting_name(&self) -> &str {
        &self.setting
    }

    /// Copy with one level's Rabi weight replaced.
    pub fn with_rabi_weight(mut self, label: Level, weight: f64) -> Self {
        self.levels[label.index()].rabi_weight = weight;
        self
    }

    /// Copy with one level's decay rate replaced.
    pub fn with_decay_rate(mut self, label: Level, rate: f64) -> Self {
        self.levels[label.index()].decay_rate = rate;
        self
    }

    /// Copy with every Rydberg level except `keep` decoupled from the drive.
    pub fn only_coupling(mut self, keep: Level) -> Self {
        for l in self.levels.iter_mut() {
            if l.label.is_rydberg() && l.label != keep {
                l.rabi_weight = 0.0;
            }
        }
        self
    }
}

fn principal(setting: &PhysicalSetting, level: Level) -> u32 {
    match level.manifold() {
        Some(Manifold::N) | None => setting.n,
        Some(Manifold::NPlus) => setting.n + 1,
        Some(Manifold::NMinus) => setting.n - 1,
        Some(Manifold::NPrime) => setting.n_prime,
        Some(Manifold::NDoublePrime) => setting.n_dprime,
    }
}

/// The ten-level basis of one atom.
pub fn build_basis(setting: &PhysicalSetting) -> Result<AtomBasis> {
    setting.validate()?;
    let levels = Level::ALL
        .iter()
        .map(|&label| {
            let rot_detuning = match label {
                Level::RPlus => setting.delta_plus,
                Level::RMinus => setting.delta_minus,
                Level::RP1h => setting.delta_p1_half,
                Level::RP3h => setting.delta_p3_half,
                Level::RPP1h => setting.delta_pp1_half,
                Level::RPP3h => setting.delta_pp3_half,
                _ => 0.0,
            };
            let (rabi_weight, decay_rate) = if label.is_rydberg() {
                let ratio = setting.n as f64 / principal(setting, label) as f64;
                let mut w = ratio.powf(1.5);
                if label.is_p_half() {
                    w *= setting.p_half_suppression;
                }
                (w, lifetime_us_to_rate(setting.lifetime_us(label)))
            } else {
                (0.0, 0.0)
            };
            AtomLevel {
                label,
                rot_detuning,
                rabi_weight,
                source: label.source(),
                decay_rate,
            }
        })
        .collect();
    Ok(AtomBasis {
        setting: setting.name.clone(),
        levels,
    })
}

/// Drift and drive patterns of the two-atom problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeHamiltonian {
    drift: Vec<f64>,
    drive_control: SparseReal,
    drive_target: SparseReal,
    lambda_control: f64,
    lambda_target: f64,
}

fn drive_pattern(basis: &AtomBasis, on_control: bool) -> SparseReal {
    let mut t = Vec::new();
    for lvl in basis.levels() {
        let Some(src) = lvl.source else { continue };
        let w = 0.5 * lvl.rabi_weight;
        for other in Level::ALL {
            let (a, b) = if on_control {
                (composite_index(src, other), composite_index(lvl.label, other))
            } else {
                (composite_index(other, src), composite_index(other, lvl.label))
            };
            t.push((a, b, w));
            t.push((b, a, w));
        }
    }
    SparseReal::from_triplets(DIM, DIM, &t)
}

/// Two-atom Hamiltonian with constant drive offsets `lambda_c`, `lambda_t`
/// (rad/ns) applied as −Λ shifts of each atom's Rydberg diagonal.
pub fn build_composite(
    setting: &PhysicalSetting,
    basis_c: &AtomBasis,
    basis_t: &AtomBasis,
    lambda_c: f64,
    lambda_t: f64,
) -> Result<CompositeHamiltonian> {
    if basis_c != basis_t {
        return Err(Error::BasisMismatch(format!(
            "control from `{}`, target from `{}`",
            basis_c.setting_name(),
            basis_t.setting_name()
        )));
    }
    if !(lambda_c.is_finite() && lambda_t.is_finite()) {
        return Err(Error::InvalidArgument("detuning must be finite".into()));
    }
    let shifted = |basis: &AtomBasis, l: Level, lambda: f64| {
        let e = basis.level(l).rot_detuning;
        if l.is_rydberg() {
            e - lambda
        } else {
            e
        }
    };
    let mut drift = vec![0.0; DIM];
    for a in Level::ALL {
        for b in Level::ALL {
            let mut e = shifted(basis_c, a, lambda_c) + shifted(basis_t, b, lambda_t);
            if let (Some(ma), Some(mb)) = (a.manifold(), b.manifold()) {
                e += setting.rel_blockades.get(ma, mb) * setting.b0;
            }
            drift[composite_index(a, b)] = e;
        }
    }
    Ok(CompositeHamiltonian {
        drift,
        drive_control: drive_pattern(basis_c, true),
        drive_target: drive_pattern(basis_t, false),
        lambda_control: lambda_c,
        lambda_target: lambda_t,
    })
}

impl CompositeHamiltonian {
    pub fn dimension(&self) -> usize {
        DIM
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn drive_control(&self) -> &SparseReal {
        &self.drive_control
    }

    pub fn drive_target(&self) -> &SparseReal {
        &self.drive_target
    }

    pub fn lambdas(&self) -> (f64, f64) {
        (self.lambda_control, self.lambda_target)
    }

    /// Dense `drift + ε_c·P_c + ε_t·P_t`.
    pub fn hamiltonian_at(&self, eps_c: f64, eps_t: f64) -> DMatrix<Complex64> {
        let mut h = DMatrix::from_fn(DIM, DIM, |i, j| {
            Complex64::new(if i == j { self.drift[i] } else { 0.0 }, 0.0)
        });
        for (r, c, v) in self.drive_control.triplets() {
            h[(r, c)] += eps_c * v;
        }
        for (r, c, v) in self.drive_target.triplets() {
            h[(r, c)] += eps_t * v;
        }
        h
    }

    /// `y = alpha · H(ε_c, ε_t) · x` for a row-major block `x` with `width`
    /// columns (1 for a state vector).
    #[inline]
    pub fn apply(
        &self,
        alpha: Complex64,
        eps_c: f64,
        eps_t: f64,
        x: &[Complex64],
        width: usize,
        y: &mut [Complex64],
    ) {
        for (r, &d) in self.drift.iter().enumerate() {
            let a = alpha * d;
            let (xr, yr) = (&x[r * width..(r + 1) * width], &mut y[r * width..(r + 1) * width]);
            for (yv, xv) in yr.iter_mut().zip(xr) {
                *yv = a * xv;
            }
        }
        if eps_c != 0.0 {
            self.drive_control.mul_dense_add(alpha * eps_c, x, width, y);
        }
        if eps_t != 0.0 {
            self.drive_target.mul_dense_add(alpha * eps_t, x, width, y);
        }
    }

    /// CSV dump: diagonal entries, then drive-pattern triplets.
    pub fn write_debug_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,row,col,control_level,target_level,value")?;
        for (i, d) in self.drift.iter().enumerate() {
            let (a, b) = (Level::ALL[i / LEVELS], Level::ALL[i % LEVELS]);
            writeln!(w, "drift,{i},{i},{a},{b},{d:.11e}")?;
        }
        for (name, m) in [("drive_control", &self.drive_control), ("drive_target", &self.drive_target)] {
            for (r, c, v) in m.triplets() {
                let (a, b) = (Level::ALL[r / LEVELS], Level::ALL[r % LEVELS]);
                writeln!(w, "{name},{r},{c},{a},{b},{v:.11e}")?;
            }
        }
        Ok(())
    }
}
