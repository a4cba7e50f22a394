//! The π / 2π / −π blockade sequence, its metrics and the (Λ, s) optimizer.
//!
//! Segments: control π on `[0, τ_c]`, target 2π on `[τ_c, τ_c + τ_t]`,
//! control −π on `[τ_c + τ_t, t_g]` with `t_g = τ_t + 2τ_c`.
//!
//! The Bell protocol prepares `(|00⟩ + |10⟩)/√2`, applies an ideal Hadamard
//! on the target, runs the sequence, keeps the computational block without
//! renormalizing, applies `R(π, φ̃, −φ̃, 0)` on the target and a control
//! phase `diag(1, e^{iχ})`, and compares with `|Φ₊⟩`. For an ideal
//! controlled phase the output is `(−e^{iφ₀₀}|00⟩ + e^{iφ₁₁}|11⟩)/√2`, so
//! `χ = φ₀₀ − φ₁₁ + π` removes the remaining local phase.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atom::{build_basis, build_composite, composite_index, AtomBasis, CompositeHamiltonian, Level, DIM};
use crate::dynamics::{
    build_collapse_set, lindblad_trajectory, propagate_columns, propagate_lindblad, schrodinger_trajectory,
    BranchConvention, CollapseSet, DensityMatrix, PopulationSamples, QuantumState, Segment, Tolerances,
};
use crate::linalg::{trace_distance as td, CMatrix, CVector};
use crate::optimize::{coordinate_descent, Coordinate, TraceEntry};
use crate::params::PhysicalSetting;
use crate::pulses::{PulseKind, PulseShape};
use crate::{Error, Result};

/// Computational basis order `|00⟩, |01⟩, |10⟩, |11⟩` (control, target).
pub const COMPUTATIONAL: [(Level, Level); 4] = [
    (Level::Q0, Level::Q0),
    (Level::Q0, Level::Q1),
    (Level::Q1, Level::Q0),
    (Level::Q1, Level::Q1),
];

const LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// Composite indices of the computational subspace.
pub fn computational_indices() -> [usize; 4] {
    COMPUTATIONAL.map(|(a, b)| composite_index(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Unitary,
    Lindblad,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Unitary => "unitary",
            Model::Lindblad => "lindblad",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unitary" => Ok(Model::Unitary),
            "lindblad" => Ok(Model::Lindblad),
            other => Err(Error::InvalidArgument(format!(
                "unknown model `{other}` (expected unitary or lindblad)"
            ))),
        }
    }
}

/// Timing, shapes and correction parameters of one gate sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub tau_t: f64,
    pub tau_c: f64,
    /// Shape of each of the three segments.
    pub kinds: [PulseKind; 3],
    /// Λ on the target atom, rad/ns.
    pub lambda_target: f64,
    /// Λ on the control atom, rad/ns.
    pub lambda_control: f64,
    pub amp_scales: [f64; 3],
    /// Null frequencies of control DRAG segments; `None` uses Δ′₁/₂, Δ′₃/₂.
    pub control_nulls: Option<Vec<f64>>,
    /// Null frequencies of the target DRAG segment; `None` uses −B₀.
    pub target_nulls: Option<Vec<f64>>,
    /// Derivative order of Gaussian control segments.
    pub control_order: usize,
    /// Derivative order of the Gaussian target segment.
    pub target_order: usize,
}

impl SequenceSpec {
    /// Defaults: τ_c = τ_t/2, no detuning, unit scales, N = 4 / 2.
    pub fn new(tau_t: f64, kind: PulseKind) -> Self {
        SequenceSpec {
            tau_t,
            tau_c: tau_t / 2.0,
            kinds: [kind; 3],
            lambda_target: 0.0,
            lambda_control: 0.0,
            amp_scales: [1.0; 3],
            control_nulls: None,
            target_nulls: None,
            control_order: 4,
            target_order: 2,
        }
    }

    pub fn with_tau_c_ratio(mut self, ratio: f64) -> Self {
        self.tau_c = self.tau_t * ratio;
        self
    }

    pub fn with_lambda_target(mut self, lambda: f64) -> Self {
        self.lambda_target = lambda;
        self
    }

    /// Control scale on segments 1 and 3, target scale on segment 2.
    pub fn with_scales(mut self, control: f64, target: f64) -> Self {
        self.amp_scales = [control, target, control];
        self
    }

    pub fn gate_time(&self) -> f64 {
        self.tau_t + 2.0 * self.tau_c
    }

    /// Segment boundaries `[0, τ_c, τ_c + τ_t, t_g]`.
    pub fn boundaries(&self) -> [f64; 4] {
        [0.0, self.tau_c, self.tau_c + self.tau_t, self.gate_time()]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau_t", self.tau_t), ("tau_c", self.tau_c)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {t}")));
            }
        }
        if self.amp_scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("amplitude scales must be finite".into()));
        }
        if !(self.lambda_target.is_finite() && self.lambda_control.is_finite()) {
            return Err(Error::InvalidArgument("detunings must be finite".into()));
        }
        Ok(())
    }
}

/// The three calibrated segment envelopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequencePulses {
    pub pulses: [PulseShape; 3],
    pub boundaries: [f64; 4],
}

/// Default null frequencies `(control, target)` for a setting.
pub fn default_nulls(setting: &PhysicalSetting) -> (Vec<f64>, Vec<f64>) {
    (
        vec![setting.delta_p1_half, setting.delta_p3_half],
        vec![-setting.b0],
    )
}

/// Calibrated pulses with areas π, 2π, −π times the amplitude scales.
pub fn build_sequence(spec: &SequenceSpec, setting: &PhysicalSetting) -> Result<SequencePulses> {
    spec.validate()?;
    let (dc, dt) = default_nulls(setting);
    let control_nulls = spec.control_nulls.clone().unwrap_or(dc);
    let target_nulls = spec.target_nulls.clone().unwrap_or(dt);
    let make = |i: usize, duration: f64, theta: f64, order: usize, nulls: &[f64], lambda: f64| {
        PulseShape::of_kind(spec.kinds[i], duration, order, nulls)?
            .calibrate_area(theta)
            .map(|p| p.with_amp_scale(spec.amp_scales[i]).with_detuning(lambda))
    };
    let first = make(0, spec.tau_c, PI, spec.control_order, &control_nulls, spec.lambda_control)?;
    let second = make(1, spec.tau_t, TAU, spec.target_order, &target_nulls, spec.lambda_target)?;
    let third = make(2, spec.tau_c, -PI, spec.control_order, &control_nulls, spec.lambda_control)?;
    Ok(SequencePulses {
        pulses: [first, second, third],
        boundaries: spec.boundaries(),
    })
}

/// `φ₀₀ − φ₀₁ − φ₁₀ + φ₁₁` reduced to `[0, 2π)`.
pub fn entangling_phase(phases: &[f64; 4]) -> f64 {
    (phases[0] - phases[1] - phases[2] + phases[3]).rem_euclid(TAU)
}

/// `R(h) = (1/√2) [[e^{ih₀₀}, e^{ih₀₁}], [e^{ih₁₀}, e^{ih₁₁}]]`.
pub fn rotation(h: [f64; 4]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &h.map(|x| Complex64::from_polar(FRAC_1_SQRT_2, x)))
}

fn kron2(a: &CMatrix, b: &CMatrix) -> CMatrix {
    crate::linalg::kron(a, b)
}

/// Bell-protocol input after the ideal target Hadamard, computational basis.
pub fn prepared_input() -> CVector {
    let psi = CVector::from_vec(vec![
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, 0.0),
    ]);
    let pre = kron2(&CMatrix::identity(2, 2), &rotation([0.0, 0.0, 0.0, PI]));
    pre * psi
}

/// Output frame map `(diag(1, e^{iχ}) ⊗ R(π, φ̃, −φ̃, 0))` for the given
/// phases.
pub fn wrapper(phases: &[f64; 4]) -> CMatrix {
    let tilde = phases[2] - phases[3];
    let chi = phases[0] - phases[3] + PI;
    let local = CMatrix::from_diagonal(&CVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, chi),
    ]));
    kron2(&local, &rotation([PI, tilde, -tilde, 0.0]))
}

/// Applies the output rotations to a computational-block density matrix.
pub fn cnot_wrap(rho_q: &CMatrix, phases: &[f64; 4]) -> CMatrix {
    let w = wrapper(phases);
    &w * rho_q * w.adjoint()
}

/// `|Φ₊⟩ = (|00⟩ + |11⟩)/√2`.
pub fn phi_plus() -> CVector {
    CVector::from_vec(vec![
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    ])
}

/// `⟨Φ₊|ρ|Φ₊⟩`, the Uhlmann fidelity against a pure target.
pub fn bell_fidelity_of(rho_q: &CMatrix) -> f64 {
    let p = phi_plus();
    (p.adjoint() * rho_q * &p)[(0, 0)].re
}

/// `½ Σ |λ(ρ_Q − |Φ₊⟩⟨Φ₊|)|`.
pub fn trace_distance_to_bell(rho_q: &CMatrix) -> f64 {
    td(rho_q, &crate::linalg::outer(&phi_plus()))
}

/// All metrics of one simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateMetrics {
    pub phases: [f64; 4],
    pub entangling_phase: f64,
    pub population_error: f64,
    pub bell_fidelity: f64,
    pub trace_distance: f64,
    /// Largest |‖ψ‖² − 1| over the unitary basis runs.
    pub norm_drift: f64,
    pub warning: Option<String>,
}

impl GateMetrics {
    pub fn bell_infidelity(&self) -> f64 {
        1.0 - self.bell_fidelity
    }
}

/// Bell-protocol outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellResult {
    pub fidelity: f64,
    pub trace_distance: f64,
    pub phases: [f64; 4],
}

/// Final states of the four computational inputs under unitary evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRuns {
    /// `states[k]` is the final state for input `COMPUTATIONAL[k]`.
    pub states: [Vec<Complex64>; 4],
}

impl BasisRuns {
    /// `arg⟨ij|ψ_ij⟩`, failing when any overlap magnitude is below ½.
    pub fn phases(&self) -> Result<[f64; 4]> {
        let idx = computational_indices();
        let mut out = [0.0; 4];
        for k in 0..4 {
            let z = self.states[k][idx[k]];
            if z.norm() < 0.5 {
                return Err(Error::UnreliablePhases {
                    state: LABELS[k],
                    overlap: z.norm(),
                });
            }
            out[k] = z.arg();
        }
        Ok(out)
    }

    /// Mean probability of ending outside the computational subspace.
    pub fn population_error(&self) -> f64 {
        let idx = computational_indices();
        let mut total = 0.0;
        for s in &self.states {
            total += s
                .iter()
                .enumerate()
                .filter(|(i, _)| !idx.contains(i))
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>();
        }
        total / 4.0
    }

    pub fn norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Computational block of the final state for input amplitudes `c`.
    pub fn block_state(&self, c: &CVector) -> CVector {
        let idx = computational_indices();
        CVector::from_fn(4, |q, _| (0..4).map(|k| c[k] * self.states[k][idx[q]]).sum())
    }
}

fn phase_warning(phases: &[f64; 4]) -> Option<String> {
    let dev = (entangling_phase(phases) - PI).abs();
    (dev > 0.1).then(|| format!("entangling phase deviates from π by {dev:.3} rad"))
}

/// Evaluates sequences for one physical setting.
#[derive(Debug, Clone)]
pub struct GateSimulator {
    setting: PhysicalSetting,
    basis: AtomBasis,
    collapse: CollapseSet,
    tol: Tolerances,
}

impl GateSimulator {
    pub fn new(setting: &PhysicalSetting) -> Result<Self> {
        let basis = build_basis(setting)?;
        let collapse = build_collapse_set(setting, &basis, BranchConvention::Probability);
        Ok(GateSimulator {
            setting: setting.clone(),
            basis,
            collapse,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Replaces the per-atom basis (and rebuilds the collapse operators).
    pub fn with_basis(mut self, basis: AtomBasis, convention: BranchConvention) -> Self {
        self.collapse = build_collapse_set(&self.setting, &basis, convention);
        self.basis = basis;
        self
    }

    pub fn with_branch_convention(self, convention: BranchConvention) -> Self {
        let basis = self.basis.clone();
        self.with_basis(basis, convention)
    }

    pub fn setting(&self) -> &PhysicalSetting {
        &self.setting
    }

    pub fn basis(&self) -> &AtomBasis {
        &self.basis
    }

    pub fn collapse(&self) -> &CollapseSet {
        &self.collapse
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Hamiltonian with the sequence's detunings, shared by all segments.
    pub fn hamiltonian(&self, spec: &SequenceSpec) -> Result<CompositeHamiltonian> {
        build_composite(
            &self.setting,
            &self.basis,
            &self.basis,
            spec.lambda_control,
            spec.lambda_target,
        )
    }

    fn segments<'a>(pulses: &'a SequencePulses, h: &'a CompositeHamiltonian) -> [Segment<'a>; 3] {
        let b = pulses.boundaries;
        [
            Segment { start: b[0], end: b[1], hamiltonian: h, control: Some(&pulses.pulses[0]), target: None },
            Segment { start: b[1], end: b[2], hamiltonian: h, control: None, target: Some(&pulses.pulses[1]) },
            Segment { start: b[2], end: b[3], hamiltonian: h, control: Some(&pulses.pulses[2]), target: None },
        ]
    }

    /// Propagates `initial` through the three segments.
    pub fn run_sequence(&self, spec: &SequenceSpec, initial: &QuantumState, model: Model) -> Result<QuantumState> {
        if initial.dim() != DIM {
            return Err(Error::Dimension { expected: DIM, actual: initial.dim() });
        }
        let pulses = build_sequence(spec, &self.setting)?;
        let h = self.hamiltonian(spec)?;
        let segs = Self::segments(&pulses, &h);
        match (model, initial) {
            (Model::Unitary, QuantumState::Pure(psi)) => {
                Ok(QuantumState::Pure(propagate_columns(&segs, psi, 1, self.tol)?.state))
            }
            (Model::Unitary, QuantumState::Mixed(_)) => Err(Error::InvalidArgument(
                "the unitary model propagates pure states only".into(),
            )),
            (Model::Lindblad, state) => Ok(QuantumState::Mixed(
                propagate_lindblad(&segs, &self.collapse, &state.to_density(), self.tol)?.state,
            )),
        }
    }

    /// Like [`Self::run_sequence`], also sampling composite populations
    /// every `stride` ns.
    pub fn trajectory(
        &self,
        spec: &SequenceSpec,
        initial: &QuantumState,
        model: Model,
        stride: f64,
    ) -> Result<(QuantumState, PopulationSamples)> {
        if !(stride.is_finite() && stride > 0.0) {
            return Err(Error::InvalidArgument(format!("sample stride must be positive, got {stride}")));
        }
        if initial.dim() != DIM {
            return Err(Error::Dimension { expected: DIM, actual: initial.dim() });
        }
        let pulses = build_sequence(spec, &self.setting)?;
        let h = self.hamiltonian(spec)?;
        let segs = Self::segments(&pulses, &h);
        match (model, initial) {
            (Model::Unitary, QuantumState::Pure(psi)) => {
                let (out, samples) = schrodinger_trajectory(&segs, psi, self.tol, stride)?;
                Ok((QuantumState::Pure(out), samples))
            }
            (Model::Unitary, QuantumState::Mixed(_)) => Err(Error::InvalidArgument(
                "the unitary model propagates pure states only".into(),
            )),
            (Model::Lindblad, state) => {
                let (out, samples) =
                    lindblad_trajectory(&segs, &self.collapse, &state.to_density(), self.tol, stride)?;
                Ok((QuantumState::Mixed(out), samples))
            }
        }
    }

    /// Unitary final states of the four computational inputs.
    pub fn basis_runs(&self, spec: &SequenceSpec) -> Result<BasisRuns> {
        let pulses = build_sequence(spec, &self.setting)?;
        let h = self.hamiltonian(spec)?;
        let segs = Self::segments(&pulses, &h);
        let idx = computational_indices();
        let mut block = vec![Complex64::new(0.0, 0.0); DIM * 4];
        for (k, &i) in idx.iter().enumerate() {
            block[i * 4 + k] = Complex64::new(1.0, 0.0);
        }
        let out = propagate_columns(&segs, &block, 4, self.tol)?.state;
        let col = |k: usize| (0..DIM).map(|i| out[i * 4 + k]).collect::<Vec<_>>();
        Ok(BasisRuns {
            states: [col(0), col(1), col(2), col(3)],
        })
    }

    pub fn extract_phases(&self, spec: &SequenceSpec) -> Result<[f64; 4]> {
        self.basis_runs(spec)?.phases()
    }

    /// Mean leaked population over the four computational inputs.
    pub fn population_error(&self, spec: &SequenceSpec, model: Model) -> Result<f64> {
        match model {
            Model::Unitary => Ok(self.basis_runs(spec)?.population_error()),
            Model::Lindblad => {
                // The channel is linear, so the mean over the four inputs is
                // the leakage of the single input I_Q/4.
                let idx = computational_indices();
                let mut data = vec![Complex64::new(0.0, 0.0); DIM * DIM];
                for &i in &idx {
                    data[i * DIM + i] = Complex64::new(0.25, 0.0);
                }
                let rho0 = DensityMatrix::from_data(DIM, data)?;
                let out = self.run_sequence(spec, &QuantumState::Mixed(rho0), Model::Lindblad)?;
                let kept: f64 = idx.iter().map(|&i| out.populations()[i]).sum();
                Ok(out.total_probability() - kept)
            }
        }
    }

    fn bell_from_runs(runs: &BasisRuns, phases: &[f64; 4]) -> BellResult {
        let v = runs.block_state(&prepared_input());
        let rho = crate::linalg::outer(&v);
        let wrapped = cnot_wrap(&rho, phases);
        BellResult {
            fidelity: bell_fidelity_of(&wrapped),
            trace_distance: trace_distance_to_bell(&wrapped),
            phases: *phases,
        }
    }

    /// Bell-state fidelity and trace distance. Wrapper phases always come
    /// from the unitary model.
    pub fn bell(&self, spec: &SequenceSpec, model: Model) -> Result<BellResult> {
        let runs = self.basis_runs(spec)?;
        let phases = runs.phases()?;
        match model {
            Model::Unitary => Ok(Self::bell_from_runs(&runs, &phases)),
            Model::Lindblad => self.bell_lindblad(spec, &phases),
        }
    }

    fn bell_lindblad(&self, spec: &SequenceSpec, phases: &[f64; 4]) -> Result<BellResult> {
        let c = prepared_input();
        let idx = computational_indices();
        let mut psi = vec![Complex64::new(0.0, 0.0); DIM];
        for k in 0..4 {
            psi[idx[k]] = c[k];
        }
        let out = self.run_sequence(spec, &QuantumState::Pure(psi), Model::Lindblad)?;
        let QuantumState::Mixed(rho) = out else {
            unreachable!("lindblad runs return density matrices")
        };
        let wrapped = cnot_wrap(&rho.block(&idx), phases);
        Ok(BellResult {
            fidelity: bell_fidelity_of(&wrapped),
            trace_distance: trace_distance_to_bell(&wrapped),
            phases: *phases,
        })
    }

    /// Unitary-model `1 − F_B`.
    pub fn bell_infidelity(&self, spec: &SequenceSpec) -> Result<f64> {
        Ok(1.0 - self.bell(spec, Model::Unitary)?.fidelity)
    }

    /// Phases, population error, Bell fidelity and trace distance.
    pub fn metrics(&self, spec: &SequenceSpec, model: Model) -> Result<GateMetrics> {
        let runs = self.basis_runs(spec)?;
        let phases = runs.phases()?;
        let (population_error, bell) = match model {
            Model::Unitary => (runs.population_error(), Self::bell_from_runs(&runs, &phases)),
            Model::Lindblad => {
                let (p, b) = rayon::join(
                    || self.population_error(spec, Model::Lindblad),
                    || self.bell_lindblad(spec, &phases),
                );
                (p?, b?)
            }
        };
        Ok(GateMetrics {
            phases,
            entangling_phase: entangling_phase(&phases),
            population_error,
            bell_fidelity: bell.fidelity,
            trace_distance: bell.trace_distance,
            norm_drift: runs.norm_drift(),
            warning: phase_warning(&phases),
        })
    }
}

/// Bounds, steps and stopping rules of the (Λ, s) optimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// |Λ| bound, rad/ns.
    pub lambda_bound: f64,
    pub scale_bounds: (f64, f64),
    pub lambda_step: f64,
    pub scale_step: f64,
    pub lambda_xtol: f64,
    pub scale_xtol: f64,
    /// Stop when a round lowers the infidelity by less than this.
    pub ftol: f64,
    pub max_rounds: usize,
    pub optimize_lambda: bool,
    pub optimize_scales: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            lambda_bound: TAU,
            scale_bounds: (0.9, 1.1),
            lambda_step: 2e-3,
            scale_step: 2e-3,
            lambda_xtol: 1e-6,
            scale_xtol: 1e-7,
            ftol: 1e-7,
            max_rounds: 20,
            optimize_lambda: true,
            optimize_scales: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedGate {
    pub spec: SequenceSpec,
    pub initial_infidelity: f64,
    pub infidelity: f64,
    pub rounds: usize,
    pub evaluations: usize,
    pub no_progress: bool,
    pub trace: Vec<TraceEntry>,
}

/// Coordinate descent over `(Λ_target, s_target, s_control)` on the unitary
/// Bell infidelity, starting from the values in `spec`.
pub fn optimize_gate(sim: &GateSimulator, spec: &SequenceSpec, opts: &OptimizeOptions) -> Result<OptimizedGate> {
    let mut coords = Vec::new();
    let mut x0 = Vec::new();
    if opts.optimize_lambda {
        coords.push(Coordinate {
            name: "lambda_target".into(),
            step: opts.lambda_step,
            lo: -opts.lambda_bound,
            hi: opts.lambda_bound,
            xtol: opts.lambda_xtol,
        });
        x0.push(spec.lambda_target.clamp(-opts.lambda_bound, opts.lambda_bound));
    }
    if opts.optimize_scales {
        let (lo, hi) = opts.scale_bounds;
        for (name, v) in [("amp_scale_target", spec.amp_scales[1]), ("amp_scale_control", spec.amp_scales[0])] {
            coords.push(Coordinate {
                name: name.into(),
                step: opts.scale_step,
                lo,
                hi,
                xtol: opts.scale_xtol,
            });
            x0.push(v.clamp(lo, hi));
        }
    }
    let apply = |x: &[f64]| {
        let mut s = spec.clone();
        let mut k = 0;
        if opts.optimize_lambda {
            s.lambda_target = x[k];
            k += 1;
        }
        if opts.optimize_scales {
            s.amp_scales = [x[k + 1], x[k], x[k + 1]];
        }
        s
    };
    let initial_infidelity = sim.bell_infidelity(spec)?;
    if coords.is_empty() {
        return Ok(OptimizedGate {
            spec: spec.clone(),
            initial_infidelity,
            infidelity: initial_infidelity,
            rounds: 0,
            evaluations: 1,
            no_progress: true,
            trace: Vec::new(),
        });
    }
    let result = coordinate_descent(|x| sim.bell_infidelity(&apply(x)), &x0, &coords, opts.ftol, opts.max_rounds)?;
    let (spec_out, infidelity) = if result.no_progress {
        (spec.clone(), initial_infidelity)
    } else {
        (apply(&result.x), result.objective)
    };
    Ok(OptimizedGate {
        spec: spec_out,
        initial_infidelity,
        infidelity,
        rounds: result.rounds,
        evaluations: result.evaluations + 1,
        no_progress: result.no_progress,
        trace: result.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::load_setting;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hadamard_and_unitarity() {
        let h = rotation([0.0, 0.0, 0.0, PI]);
        let s = FRAC_1_SQRT_2;
        let expect = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        assert!((&h - expect).norm() < 1e-15);
        for hv in [[PI, 0.3, -0.3, 0.0], [0.0, 0.0, 0.0, PI], [PI, -1.2, 1.2, 0.0]] {
            let r = rotation(hv);
            assert!((&r * r.adjoint() - CMatrix::identity(2, 2)).norm() < 1e-14);
        }
    }

    fn ideal_block(phases: [f64; 4]) -> CVector {
        let u = CMatrix::from_diagonal(&CVector::from_vec(phases.map(|p| Complex64::from_polar(1.0, p)).to_vec()));
        u * prepared_input()
    }

    #[test]
    fn ideal_cz_gives_bell_state() {
        let phases = [0.0, PI, 0.0, 0.0];
        let rho = crate::linalg::outer(&ideal_block(phases));
        let out = cnot_wrap(&rho, &phases);
        assert!((bell_fidelity_of(&out) - 1.0).abs() < 1e-14);
        assert!(trace_distance_to_bell(&out) < 1e-7);
    }

    #[test]
    fn general_phases_with_pi_entangling_phase() {
        let phases = [0.4, 1.1, -0.7, 0.4 - 1.1 + 0.7 - PI + 0.0];
        let phases = [phases[0], phases[1], phases[2], PI + phases[1] + phases[2] - phases[0]];
        assert!((entangling_phase(&phases) - PI).abs() < 1e-12);
        let rho = crate::linalg::outer(&ideal_block(phases));
        let out = cnot_wrap(&rho, &phases);
        assert!((bell_fidelity_of(&out) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bell_fidelity_identity_and_orthogonal() {
        let p = crate::linalg::outer(&phi_plus());
        assert!((bell_fidelity_of(&p) - 1.0).abs() < 1e-15);
        let s = FRAC_1_SQRT_2;
        let m = crate::linalg::outer(&CVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-s, 0.0)]));
        assert!(bell_fidelity_of(&m).abs() < 1e-15);
        assert!((trace_distance_to_bell(&m) - 1.0).abs() < 1e-12);
        assert!(trace_distance_to_bell(&p).abs() < 1e-7);
    }

    #[test]
    fn entangling_phase_invariances() {
        let p = [0.3, -1.2, 2.0, 0.9];
        let base = entangling_phase(&p);
        let shifted = [p[0] + 0.5, p[1] + 0.5, p[2] + 0.5, p[3] + 0.5];
        assert!((entangling_phase(&shifted) - base).abs() < 1e-12);
        let (a0, a1, b0, b1) = (0.2, -0.7, 1.3, 0.05);
        let local = [p[0] + a0 + b0, p[1] + a0 + b1, p[2] + a1 + b0, p[3] + a1 + b1];
        assert!((entangling_phase(&local) - base).abs() < 1e-12);
    }

    #[test]
    fn sequence_structure() {
        let s = load_setting("S1").unwrap();
        let spec = SequenceSpec::new(30.0, PulseKind::Drag);
        let seq = build_sequence(&spec, &s).unwrap();
        assert_eq!(seq.boundaries, [0.0, 15.0, 45.0, 60.0]);
        assert_eq!(seq.pulses[0].null_frequencies(), &[s.delta_p1_half, s.delta_p3_half]);
        assert_eq!(seq.pulses[1].null_frequencies(), &[-s.b0]);
        for t in [1.0, 7.5, 12.0] {
            assert_eq!(seq.pulses[2].value(t), -seq.pulses[0].value(t));
        }
        let sq = build_sequence(&SequenceSpec::new(20.0, PulseKind::Square), &s).unwrap();
        let areas: Vec<f64> = sq.pulses.iter().map(|p| p.integral().unwrap()).collect();
        assert!((areas[0] - PI).abs() < 1e-12 && (areas[1] - TAU).abs() < 1e-12 && (areas[2] + PI).abs() < 1e-12);
        assert!((SequenceSpec::new(30.0, PulseKind::Drag).with_tau_c_ratio(1.0 / 3.0).gate_time() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_identity() {
        let s = load_setting("S1").unwrap();
        let sim = GateSimulator::new(&s).unwrap();
        let mut spec = SequenceSpec::new(20.0, PulseKind::Gaussian);
        spec.amp_scales = [0.0; 3];
        let runs = sim.basis_runs(&spec).unwrap();
        assert_eq!(runs.phases().unwrap(), [0.0; 4]);
        assert_eq!(runs.population_error(), 0.0);
    }

    #[test]
    fn unreliable_phase_detection() {
        let mut states: [Vec<Complex64>; 4] = std::array::from_fn(|k| {
            let mut v = vec![c(0.0, 0.0); DIM];
            v[computational_indices()[k]] = c(1.0, 0.0);
            v
        });
        states[3][computational_indices()[3]] = c(0.3, 0.0);
        let err = BasisRuns { states }.phases().unwrap_err();
        assert!(matches!(err, Error::UnreliablePhases { state: "11", .. }));
    }

    #[test]
    fn model_parse() {
        assert_eq!("Lindblad".parse::<Model>().unwrap(), Model::Lindblad);
        assert!("classical".parse::<Model>().is_err());
    }

    #[test]
    fn trajectory_ends_at_run_sequence() {
        let sim = GateSimulator::new(&load_setting("S1").unwrap()).unwrap();
        let spec = SequenceSpec::new(20.0, PulseKind::Drag);
        let psi = QuantumState::basis(Level::Q1, Level::Q1);
        let direct = sim.run_sequence(&spec, &psi, Model::Unitary).unwrap();
        let (end, samples) = sim.trajectory(&spec, &psi, Model::Unitary, 5.0).unwrap();
        let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        let (QuantumState::Pure(a), QuantumState::Pure(b)) = (direct, end) else { panic!() };
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        // Sampling forces extra step stops; agreement is at integrator tolerance.
        assert!(diff < 1e-9, "{diff}");
        assert!(sim.trajectory(&spec, &psi, Model::Unitary, 0.0).is_err());
    }
}
