//! Pulse envelopes: square, generalized Gaussian and DRAG.
//!
//! A generalized Gaussian of duration `T` and derivative order `N` is
//!
//! ```text
//! ε(t) = A · [exp(−(t − T/2)² / 2σ²) − exp(−(T/2)² / 2σ²)]^(N+1),   0 ≤ t ≤ T
//! ```
//!
//! whose first `N` derivatives vanish at both ends. A DRAG envelope adds
//! `Σ α₂ₖ ε⁽²ᵏ⁾(t)` with coefficients chosen so that the finite Fourier
//! transform vanishes at a set of leakage detunings.
//!
//! Derivatives are exact: the envelope is expanded as a truncated Taylor
//! series (a jet) around the evaluation point, built from the Gaussian's
//! Hermite recursion and raised to the `N+1` power by series multiplication.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::{Error, Result};

/// Largest derivative order supported by the jet evaluation.
pub const MAX_ORDER: usize = 24;

type Jet = [f64; MAX_ORDER + 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Square,
    Gaussian,
    Drag,
}

impl PulseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PulseKind::Square => "square",
            PulseKind::Gaussian => "gaussian",
            PulseKind::Drag => "drag",
        }
    }
}

impl fmt::Display for PulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PulseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(PulseKind::Square),
            "gaussian" => Ok(PulseKind::Gaussian),
            "drag" => Ok(PulseKind::Drag),
            other => Err(Error::InvalidPulse(format!(
                "unknown pulse kind `{other}` (expected square, gaussian or drag)"
            ))),
        }
    }
}

/// A time-limited in-phase envelope on `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseShape {
    kind: PulseKind,
    duration: f64,
    sigma: f64,
    derivative_order: usize,
    amplitude: f64,
    area: Option<f64>,
    drag_coeffs: Vec<f64>,
    null_frequencies: Vec<f64>,
    detuning: f64,
    amp_scale: f64,
}

/// A derivative value together with whether the order lies in the range
/// guaranteed to vanish at the pulse edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub within_order: bool,
}

/// DRAG coefficients α₂, α₄, …, α₂ₘ for nulls at the given detunings.
///
/// The null condition `1 + Σ α₂ₖ (−iδⱼ)²ᵏ = 0` is a polynomial in δ² whose
/// roots are the δⱼ², so α₂ₖ is the k-th elementary symmetric polynomial of
/// the 1/δⱼ².
pub fn drag_coefficients(null_frequencies: &[f64]) -> Result<Vec<f64>> {
    if null_frequencies.is_empty() {
        return Err(Error::InvalidPulse("at least one null frequency is required".into()));
    }
    if 2 * null_frequencies.len() > MAX_ORDER {
        return Err(Error::InvalidPulse(format!(
            "at most {} null frequencies are supported",
            MAX_ORDER / 2
        )));
    }
    for (i, &d) in null_frequencies.iter().enumerate() {
        if !d.is_finite() || d == 0.0 {
            return Err(Error::InvalidPulse(format!(
                "null frequency {d} must be finite and nonzero"
            )));
        }
        for &e in &null_frequencies[..i] {
            if d.abs() == e.abs() {
                return Err(Error::InvalidPulse(format!(
                    "null frequencies ±{} repeated; higher-multiplicity nulls are not supported",
                    d.abs()
                )));
            }
        }
    }
    let inv: Vec<f64> = null_frequencies.iter().map(|d| 1.0 / (d * d)).collect();
    Ok(elementary_symmetric(&inv))
}

/// e₁ … eₘ of the inputs.
fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; xs.len() + 1];
    e[0] = 1.0;
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e.remove(0);
    e
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidPulse(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok(())
}

impl PulseShape {
    /// Constant envelope. Amplitude 1 until calibrated.
    pub fn square(duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(PulseShape {
            kind: PulseKind::Square,
            duration,
            sigma: 2.0 * duration / 3.0,
            derivative_order: 0,
            amplitude: 1.0,
            area: None,
            drag_coeffs: Vec::new(),
            null_frequencies: Vec::new(),
            detuning: 0.0,
            amp_scale: 1.0,
        })
    }

    /// Generalized Gaussian with even derivative order `order` and σ = 2T/3.
    pub fn gaussian(duration: f64, order: usize) -> Result<Self> {
        check_duration(duration)?;
        if order % 2 != 0 || order > MAX_ORDER {
            return Err(Error::InvalidPulse(format!(
                "derivative order must be even and at most {MAX_ORDER}, got {order}"
            )));
        }
        Ok(PulseShape {
            kind: PulseKind::Gaussian,
            derivative_order: order,
            ..Self::square(duration)?
        })
    }

    /// DRAG envelope nulling the spectrum at each of `null_frequencies`
    /// (rad/ns); the derivative order is twice the number of nulls.
    pub fn drag(duration: f64, null_frequencies: &[f64]) -> Result<Self> {
        let coeffs = drag_coefficients(null_frequencies)?;
        Ok(PulseShape {
            kind: PulseKind::Drag,
            drag_coeffs: coeffs,
            null_frequencies: null_frequencies.to_vec(),
            ..Self::gaussian(duration, 2 * null_frequencies.len())?
        })
    }

    /// Builds the shape of `kind`; `order` applies to Gaussians and `nulls`
    /// to DRAG envelopes.
    pub fn of_kind(kind: PulseKind, duration: f64, order: usize, nulls: &[f64]) -> Result<Self> {
        match kind {
            PulseKind::Square => Self::square(duration),
            PulseKind::Gaussian => Self::gaussian(duration, order),
            PulseKind::Drag => Self::drag(duration, nulls),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidPulse(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_amp_scale(mut self, scale: f64) -> Self {
        self.amp_scale = scale;
        self
    }

    /// Replaces the DRAG coefficients directly (bypassing the null solve).
    pub fn with_drag_coeffs(mut self, coeffs: Vec<f64>) -> Self {
        self.drag_coeffs = coeffs;
        self
    }

    pub fn kind(&self) -> PulseKind {
        self.kind
    }
    pub fn duration(&self) -> f64 {
        self.duration
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn derivative_order(&self) -> usize {
        self.derivative_order
    }
    /// Calibrated amplitude A_θ, rad/ns.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    /// Target area θ, if calibrated.
    pub fn area(&self) -> Option<f64> {
        self.area
    }
    pub fn drag_coeffs(&self) -> &[f64] {
        &self.drag_coeffs
    }
    pub fn null_frequencies(&self) -> &[f64] {
        &self.null_frequencies
    }
    /// Constant drive detuning Λ, rad/ns.
    pub fn detuning(&self) -> f64 {
        self.detuning
    }
    pub fn amp_scale(&self) -> f64 {
        self.amp_scale
    }

    fn inside(&self, t: f64) -> bool {
        (0.0..=self.duration).contains(&t)
    }

    fn gain(&self) -> f64 {
        self.amplitude * self.amp_scale
    }

    /// Taylor coefficients f_k = f⁽ᵏ⁾(t)/k! of the unit-amplitude generalized
    /// Gaussian, k = 0..=order.
    fn base_jet(&self, t: f64, order: usize, out: &mut Jet) {
        let half = 0.5 * self.duration;
        let s2 = 2.0 * self.sigma * self.sigma;
        let x = t - half;
        let q1 = -2.0 * x / s2;
        let q2 = -1.0 / s2;
        let mut g: Jet = [0.0; MAX_ORDER + 1];
        let e0 = (-x * x / s2).exp();
        // exp(-x²/s2) - exp(-(T/2)²/s2) without cancellation near the edges.
        g[0] = -e0 * (-(t * (self.duration - t)) / s2).exp_m1();
        let mut em2 = 0.0;
        let mut em1 = e0;
        for (k, gk) in g.iter_mut().enumerate().take(order + 1).skip(1) {
            let ek = (q1 * em1 + 2.0 * q2 * em2) / k as f64;
            *gk = ek;
            em2 = em1;
            em1 = ek;
        }
        let power = self.derivative_order + 1;
        *out = [0.0; MAX_ORDER + 1];
        out[..=order].copy_from_slice(&g[..=order]);
        let mut tmp: Jet = [0.0; MAX_ORDER + 1];
        for _ in 1..power {
            for k in 0..=order {
                let mut acc = 0.0;
                for j in 0..=k {
                    acc += out[j] * g[k - j];
                }
                tmp[k] = acc;
            }
            out[..=order].copy_from_slice(&tmp[..=order]);
        }
    }

    /// Generalized-Gaussian base term ε⁽⁰⁾(t), including amplitude and scale.
    pub fn gaussian_envelope(&self, t: f64) -> f64 {
        if !self.inside(t) || self.kind == PulseKind::Square {
            return if self.kind == PulseKind::Square {
                self.square_envelope(t)
            } else {
                0.0
            };
        }
        let mut jet = [0.0; MAX_ORDER + 1];
        self.base_jet(t, 0, &mut jet);
        self.gain() * jet[0]
    }

    /// Exact k-th time derivative of the generalized-Gaussian base term.
    pub fn envelope_derivative(&self, t: f64, k: usize) -> Result<Derivative> {
        if self.kind == PulseKind::Square {
            return Err(Error::InvalidPulse(
                "square envelopes have no smooth derivatives".into(),
            ));
        }
        if k > MAX_ORDER {
            return Err(Error::InvalidPulse(format!(
                "derivative order {k} exceeds the supported {MAX_ORDER}"
            )));
        }
        let within_order = k <= self.derivative_order;
        if !self.inside(t) {
            return Ok(Derivative {
                value: 0.0,
                within_order,
            });
        }
        let mut jet = [0.0; MAX_ORDER + 1];
        self.base_jet(t, k, &mut jet);
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        Ok(Derivative {
            value: self.gain() * factorial * jet[k],
            within_order,
        })
    }

    /// ε⁽⁰⁾(t) + Σ α₂ₖ ε⁽²ᵏ⁾(t), including amplitude and scale.
    pub fn drag_envelope(&self, t: f64) -> Result<f64> {
        if self.kind != PulseKind::Drag {
            return Err(Error::InvalidPulse(format!(
                "drag_envelope called on a {} pulse",
                self.kind
            )));
        }
        if self.drag_coeffs.len() != self.derivative_order / 2 || self.drag_coeffs.is_empty() {
            return Err(Error::InvalidPulse(format!(
                "DRAG pulse of order {} needs {} coefficients, has {}",
                self.derivative_order,
                self.derivative_order / 2,
                self.drag_coeffs.len()
            )));
        }
        Ok(self.smooth_value(t))
    }

    fn smooth_value(&self, t: f64) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        let order = 2 * self.drag_coeffs.len();
        let mut jet = [0.0; MAX_ORDER + 1];
        self.base_jet(t, order, &mut jet);
        let mut v = jet[0];
        let mut factorial = 1.0;
        for (k, alpha) in self.drag_coeffs.iter().enumerate() {
            let n = 2 * (k + 1);
            factorial *= ((n - 1) * n) as f64;
            v += alpha * factorial * jet[n];
        }
        self.gain() * v
    }

    /// θ/T · s on [0, T] for calibrated square pulses.
    pub fn square_envelope(&self, t: f64) -> f64 {
        if self.inside(t) {
            self.gain()
        } else {
            0.0
        }
    }

    /// Envelope value at local time `t` (0 outside `[0, duration]`).
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            PulseKind::Square => self.square_envelope(t),
            PulseKind::Gaussian | PulseKind::Drag => self.smooth_value(t),
        }
    }

    /// Largest |ε(t)| on a fine grid.
    pub fn peak_amplitude(&self) -> f64 {
        const SAMPLES: usize = 2000;
        (0..=SAMPLES)
            .map(|i| self.value(self.duration * i as f64 / SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Quadrature of the envelope over its support.
    pub fn integral(&self) -> Result<f64> {
        let tol = 1e-14 * (self.peak_amplitude() * self.duration).max(f64::MIN_POSITIVE);
        quadrature::integrate_real(|t| self.value(t), 0.0, self.duration, 4, tol)
    }

    /// Sets the amplitude so that the unscaled envelope integrates to `theta`.
    pub fn calibrate_area(&self, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta != 0.0) {
            return Err(Error::InvalidPulse(format!("pulse area must be nonzero, got {theta}")));
        }
        let mut unit = self.clone();
        unit.amplitude = 1.0;
        unit.amp_scale = 1.0;
        let base = unit.integral()?;
        if !(base.is_finite() && base != 0.0) {
            return Err(Error::InvalidPulse("base shape has zero integral".into()));
        }
        let mut out = self.clone();
        out.amplitude = theta / base;
        out.area = Some(theta);
        Ok(out)
    }

    /// Finite Fourier transform S(ε, δ) = ∫₀ᵀ ε(t) e^{iδt} dt with the default
    /// tolerance 1e-12 · peak · T.
    pub fn spectrum(&self, delta: f64) -> Result<Complex64> {
        let peak = self.peak_amplitude();
        spectrum(|t| self.value(t), delta, self.duration, 1e-12 * peak * self.duration)
    }

    /// Samples `(t, ε(t))` every `dt` ns from 0 to T inclusive.
    pub fn sample(&self, dt: f64) -> Vec<(f64, f64)> {
        let n = (self.duration / dt).round().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let t = self.duration * i as f64 / n as f64;
                (t, self.value(t))
            })
            .collect()
    }
}

/// S(f, δ) = ∫₀ᵀ f(t) e^{iδt} dt by adaptive Gauss–Kronrod quadrature.
///
/// Integrates over u = t − T/2 so the oscillating factor e^{iδu} is
/// evaluated at small arguments; rounding of large δt otherwise sets the
/// noise floor near nulls.
pub fn spectrum<F: Fn(f64) -> f64>(
    envelope: F,
    delta: f64,
    duration: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    let half = 0.5 * duration;
    let panels = ((delta.abs() * duration / PI).ceil() as usize).clamp(1, 4096) + 1;
    let q = quadrature::integrate(
        |u| Complex64::from_polar(envelope(half + u), delta * u),
        -half,
        half,
        panels,
        abs_tol.max(f64::MIN_POSITIVE),
    )?;
    Ok(q.value * Complex64::from_polar(1.0, delta * half))
}
