//! Schrödinger and Lindblad propagation through back-to-back pulse segments.
//!
//! Segment boundaries are hard integration breakpoints. The density matrix
//! is integrated directly as a 100×100 array using
//!
//! ```text
//! ρ̇ = A + A†,   A = −i H_eff ρ + ½ Σ C_r ρ C_r†,   H_eff = H − (i/2) Σ C_r†C_r
//! ```
//!
//! which keeps the derivative exactly Hermitian.

use num_complex::Complex64;
use serde::Serialize;

use crate::atom::{AtomBasis, CompositeHamiltonian, Level, DIM, LEVELS};
use crate::linalg::CMatrix;
use crate::ode::{Dop853, OdeOptions, Stats};
use crate::params::PhysicalSetting;
use crate::pulses::PulseShape;
use crate::sparse::SparseReal;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const MINUS_I: Complex64 = Complex64 { re: 0.0, im: -1.0 };

/// Relative and absolute integrator tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    /// Both tolerances scaled by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Tolerances {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
        }
    }

    fn ode(self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }
}

/// Row-major density matrix over the composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix { dim, data }
    }

    pub fn from_data(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Sub-block on the given indices.
    pub fn block(&self, indices: &[usize]) -> CMatrix {
        CMatrix::from_fn(indices.len(), indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::hermitian_eigenvalues(&self.to_matrix())[0]
    }
}

/// A pure state vector or a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(Vec<Complex64>),
    Mixed(DensityMatrix),
}

impl QuantumState {
    /// `|control, target⟩`.
    pub fn basis(control: Level, target: Level) -> Self {
        let mut v = vec![ZERO; DIM];
        v[crate::atom::composite_index(control, target)] = Complex64::new(1.0, 0.0);
        QuantumState::Pure(v)
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(r) => r.dim(),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            QuantumState::Mixed(r) => r.populations(),
        }
    }

    /// ‖ψ‖² or Tr ρ.
    pub fn total_probability(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(v) => DensityMatrix::from_pure(v),
            QuantumState::Mixed(r) => r.clone(),
        }
    }
}

/// Single-atom marginal populations `(control, target)` of composite
/// populations.
pub fn marginal_populations(pops: &[f64]) -> ([f64; LEVELS], [f64; LEVELS]) {
    let mut c = [0.0; LEVELS];
    let mut t = [0.0; LEVELS];
    for (i, p) in pops.iter().enumerate() {
        c[i / LEVELS] += p;
        t[i % LEVELS] += p;
    }
    (c, t)
}

/// How the printed branch coefficients enter the collapse operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BranchConvention {
    /// Branch fractions are probabilities: amplitudes √(7/8), √(1/16), √(1/16).
    #[default]
    Probability,
    /// Branch fractions used directly as amplitudes.
    LiteralAmplitude,
}

/// Composite collapse operators `C_r = c_r ⊗ 1 + 1 ⊗ c_r` and their summed
/// generator `K = Σ C_r†C_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSet {
    operators: Vec<(Level, SparseReal)>,
    single_atom: Vec<(Level, SparseReal)>,
    generator: SparseReal,
}

impl CollapseSet {
    pub fn empty() -> Self {
        CollapseSet {
            operators: Vec::new(),
            single_atom: Vec::new(),
            generator: SparseReal::zeros(DIM, DIM),
        }
    }

    pub fn operators(&self) -> &[(Level, SparseReal)] {
        &self.operators
    }

    /// Single-atom `c_r`, 10×10.
    pub fn single_atom(&self) -> &[(Level, SparseReal)] {
        &self.single_atom
    }

    pub fn generator(&self) -> &SparseReal {
        &self.generator
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }
}

/// One collapse operator per Rydberg level with nonzero decay rate.
pub fn build_collapse_set(
    setting: &PhysicalSetting,
    basis: &AtomBasis,
    convention: BranchConvention,
) -> CollapseSet {
    let branches = [
        (Level::G, setting.decay_branch_g),
        (Level::Q0, setting.decay_branch_0),
        (Level::Q1, setting.decay_branch_1),
    ];
    let mut set = CollapseSet::empty();
    for r in Level::RYDBERG {
        let gamma = basis.level(r).decay_rate;
        if gamma == 0.0 {
            continue;
        }
        let amps: Vec<(Level, f64)> = branches
            .iter()
            .map(|&(l, p)| {
                let a = match convention {
                    BranchConvention::Probability => p.sqrt(),
                    BranchConvention::LiteralAmplitude => p,
                };
                (l, gamma.sqrt() * a)
            })
            .collect();
        let single: Vec<_> = amps.iter().map(|&(l, a)| (l.index(), r.index(), a)).collect();
        let mut t = Vec::new();
        for &(l, a) in &amps {
            for other in Level::ALL {
                t.push((
                    crate::atom::composite_index(l, other),
                    crate::atom::composite_index(r, other),
                    a,
                ));
                t.push((
                    crate::atom::composite_index(other, l),
                    crate::atom::composite_index(other, r),
                    a,
                ));
            }
        }
        let c = SparseReal::from_triplets(DIM, DIM, &t);
        set.generator = set.generator.add(&c.transpose().matmul(&c));
        set.operators.push((r, c));
        set.single_atom
            .push((r, SparseReal::from_triplets(LEVELS, LEVELS, &single)));
    }
    set
}

/// One pulse segment on `[start, end]` with a fixed Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub start: f64,
    pub end: f64,
    pub hamiltonian: &'a CompositeHamiltonian,
    pub control: Option<&'a PulseShape>,
    pub target: Option<&'a PulseShape>,
}

impl Segment<'_> {
    #[inline]
    fn envelopes(&self, t: f64) -> (f64, f64) {
        let local = (t - self.start).clamp(0.0, self.end - self.start);
        (
            self.control.map_or(0.0, |p| p.value(local)),
            self.target.map_or(0.0, |p| p.value(local)),
        )
    }
}

/// Output of a propagation.
#[derive(Debug, Clone)]
pub struct Propagation<S> {
    pub state: S,
    pub stats: Stats,
}

fn check_segments(segments: &[Segment<'_>]) -> Result<()> {
    for w in segments.windows(2) {
        if w[0].end != w[1].start {
            return Err(Error::InvalidArgument(format!(
                "segments must abut: {} ns != {} ns",
                w[0].end, w[1].start
            )));
        }
    }
    for s in segments {
        if !(s.end >= s.start) {
            return Err(Error::InvalidArgument("segment ends before it starts".into()));
        }
    }
    Ok(())
}

/// Drives `y` through all segments, splitting at multiples of `stride` (if
/// any) and calling `observe` at every breakpoint including the start.
fn run_segments<R, O>(
    segments: &[Segment<'_>],
    y: &mut [Complex64],
    tol: Tolerances,
    stride: Option<f64>,
    mut rhs: R,
    mut observe: O,
) -> Result<Stats>
where
    R: FnMut(&Segment<'_>, f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]) -> Result<()>,
{
    check_segments(segments)?;
    let mut solver = Dop853::new(y.len(), tol.ode());
    if let Some(first) = segments.first() {
        observe(first.start, y)?;
    }
    for seg in segments {
        let mut cuts = Vec::new();
        if let Some(dt) = stride.filter(|d| *d > 0.0) {
            let k0 = (seg.start / dt).floor() as i64 + 1;
            let mut k = k0;
            while (k as f64) * dt < seg.end {
                cuts.push(k as f64 * dt);
                k += 1;
            }
        }
        cuts.push(seg.end);
        let mut t = seg.start;
        for t1 in cuts {
            solver.advance(|tt, yy, dy| rhs(seg, tt, yy, dy), t, t1, y)?;
            t = t1;
            observe(t, y)?;
        }
    }
    Ok(solver.stats())
}

/// Propagates a row-major block of `width` column states under `iψ̇ = Hψ`.
pub fn propagate_columns(
    segments: &[Segment<'_>],
    block: &[Complex64],
    width: usize,
    tol: Tolerances,
) -> Result<Propagation<Vec<Complex64>>> {
    if block.len() != DIM * width {
        return Err(Error::Dimension {
            expected: DIM * width,
            actual: block.len(),
        });
    }
    let mut y = block.to_vec();
    let stats = run_segments(
        segments,
        &mut y,
        tol,
        None,
        |seg, t, x, dy| {
            let (ec, et) = seg.envelopes(t);
            seg.hamiltonian.apply(MINUS_I, ec, et, x, width, dy);
        },
        |_, _| Ok(()),
    )?;
    Ok(Propagation { state: y, stats })
}

/// `ψ(t_end)` from `iψ̇ = H(t)ψ`. The norm is not restored.
pub fn propagate_schrodinger(
    segments: &[Segment<'_>],
    psi0: &[Complex64],
    tol: Tolerances,
) -> Result<Propagation<Vec<Complex64>>> {
    propagate_columns(segments, psi0, 1, tol)
}

/// `(t, composite populations)` samples of a trajectory.
pub type PopulationSamples = Vec<(f64, Vec<f64>)>;

/// Schrödinger propagation sampling composite populations every `stride` ns.
pub fn schrodinger_trajectory(
    segments: &[Segment<'_>],
    psi0: &[Complex64],
    tol: Tolerances,
    stride: f64,
) -> Result<(Vec<Complex64>, PopulationSamples)> {
    let mut y = psi0.to_vec();
    let mut samples = Vec::new();
    run_segments(
        segments,
        &mut y,
        tol,
        Some(stride),
        |seg, t, x, dy| {
            let (ec, et) = seg.envelopes(t);
            seg.hamiltonian.apply(MINUS_I, ec, et, x, 1, dy);
        },
        |t, x| {
            samples.push((t, x.iter().map(|z| z.norm_sqr()).collect()));
            Ok(())
        },
    )?;
    Ok((y, samples))
}

/// Lindblad right-hand side with reusable work buffers.
struct LindbladRhs<'c> {
    collapse: &'c CollapseSet,
    /// Nonzeros `(row, col, value)` of each collapse operator.
    jumps: Vec<Vec<(usize, usize, f64)>>,
    work: Vec<Complex64>,
}

impl<'c> LindbladRhs<'c> {
    fn new(collapse: &'c CollapseSet) -> Self {
        LindbladRhs {
            collapse,
            jumps: collapse.operators.iter().map(|(_, c)| c.triplets()).collect(),
            work: vec![ZERO; DIM * DIM],
        }
    }

    fn eval(&mut self, seg: &Segment<'_>, t: f64, rho: &[Complex64], drho: &mut [Complex64]) {
        let n = DIM;
        let (ec, et) = seg.envelopes(t);
        // work = A = -i H ρ - ½ K ρ + ½ Σ C ρ Cᵀ
        seg.hamiltonian.apply(MINUS_I, ec, et, rho, n, &mut self.work);
        if !self.collapse.is_empty() {
            self.collapse
                .generator
                .mul_dense_add(Complex64::new(-0.5, 0.0), rho, n, &mut self.work);
            // (C ρ Cᵀ)_ij = Σ C_ik ρ_kl C_jl over pairs of nonzeros.
            for jump in &self.jumps {
                for &(i, k, a) in jump {
                    let row = &rho[k * n..(k + 1) * n];
                    let out = &mut self.work[i * n..(i + 1) * n];
                    for &(j, l, b) in jump {
                        out[j] += row[l] * (0.5 * a * b);
                    }
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let a = self.work[i * n + j];
                let b = self.work[j * n + i];
                let v = a + b.conj();
                drho[i * n + j] = v;
                drho[j * n + i] = v.conj();
            }
        }
    }
}

/// Largest tolerated |ρ − ρ†| entry before the run is declared failed.
pub const HERMITICITY_LIMIT: f64 = 1e-8;

fn lindblad_run<O>(
    segments: &[Segment<'_>],
    collapse: &CollapseSet,
    rho0: &DensityMatrix,
    tol: Tolerances,
    stride: Option<f64>,
    mut observe: O,
) -> Result<Propagation<DensityMatrix>>
where
    O: FnMut(f64, &[Complex64]) -> Result<()>,
{
    if rho0.dim() != DIM {
        return Err(Error::Dimension {
            expected: DIM,
            actual: rho0.dim(),
        });
    }
    let mut y = rho0.data.clone();
    let mut rhs = LindbladRhs::new(collapse);
    let stats = run_segments(
        segments,
        &mut y,
        tol,
        stride,
        |seg, t, x, dy| rhs.eval(seg, t, x, dy),
        |t, x| {
            let rho = DensityMatrix {
                dim: DIM,
                data: x.to_vec(),
            };
            let deviation = rho.hermitian_deviation();
            if deviation > HERMITICITY_LIMIT {
                return Err(Error::NonHermitian { deviation });
            }
            observe(t, x)
        },
    )?;
    Ok(Propagation {
        state: DensityMatrix { dim: DIM, data: y },
        stats,
    })
}

/// `ρ(t_end)` from the Lindblad master equation.
pub fn propagate_lindblad(
    segments: &[Segment<'_>],
    collapse: &CollapseSet,
    rho0: &DensityMatrix,
    tol: Tolerances,
) -> Result<Propagation<DensityMatrix>> {
    lindblad_run(segments, collapse, rho0, tol, None, |_, _| Ok(()))
}

/// Lindblad propagation sampling populations every `stride` ns.
pub fn lindblad_trajectory(
    segments: &[Segment<'_>],
    collapse: &CollapseSet,
    rho0: &DensityMatrix,
    tol: Tolerances,
    stride: f64,
) -> Result<(DensityMatrix, PopulationSamples)> {
    let mut samples = Vec::new();
    let out = lindblad_run(segments, collapse, rho0, tol, Some(stride), |t, x| {
        samples.push((t, (0..DIM).map(|i| x[i * DIM + i].re).collect()));
        Ok(())
    })?;
    Ok((out.state, samples))
}
