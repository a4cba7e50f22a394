use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rydgate::{Model, PulseKind};

/// Shaped-pulse Rydberg blockade gate simulator.
///
/// Frequencies on the command line are linear (GHz or MHz); times are in
/// nanoseconds. All data files are CSV with 12 significant digits and are
/// byte-identical for identical inputs, independent of --workers.
#[derive(Debug, Parser)]
#[command(name = "rydgate", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Builtin physical setting (S1 or S2).
    #[arg(long, global = true, default_value = "S1")]
    pub setting: String,

    /// TOML file overriding a builtin setting; takes precedence over --setting.
    #[arg(long, global = true, value_name = "PATH")]
    pub setting_file: Option<PathBuf>,

    /// Pulse shape(s): drag, gaussian, square. Comma-separated lists are
    /// accepted by sweep-time.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_kind, default_value = "drag")]
    pub pulse: Vec<PulseKind>,

    /// Dynamics model: unitary or lindblad.
    #[arg(long, global = true, value_parser = parse_model, default_value = "unitary")]
    pub model: Model,

    /// Target pulse duration τ_t in ns: a value, a list `25,35,50` or an
    /// inclusive range `start:stop:step`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub tau_t: Option<String>,

    /// Control pulse duration as a fraction of τ_t.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub tau_c_ratio: f64,

    /// Explicit control pulse duration in ns; overrides --tau-c-ratio.
    #[arg(long, global = true)]
    pub tau_c: Option<f64>,

    /// Multiply every Rydberg decay rate by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub decay_scale: f64,

    /// Output directory.
    #[arg(long, global = true, env = "RYDGATE_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    /// Relative integrator tolerance; the absolute tolerance is 1% of it.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write sampled waveforms and spectra of the three-pulse sequence.
    Design(DesignArgs),
    /// Simulate one sequence and report its gate metrics.
    Simulate(SimulateArgs),
    /// Gate metrics over a list of τ_t values.
    SweepTime(SweepTimeArgs),
    /// Population error over a grid of blockade shifts.
    SweepBlockade(SweepBlockadeArgs),
    /// Blockade shift minimizing the analytic leakage model.
    OptimalBlockade(OptimalBlockadeArgs),
    /// Optimize the target detuning and amplitude scales for one τ_t.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Waveform sample spacing in ns.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Lower edge of the spectrum grid, GHz.
    #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
    pub delta_min: f64,
    /// Upper edge of the spectrum grid, GHz.
    #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
    pub delta_max: f64,
    /// Number of spectrum grid points.
    #[arg(long, default_value_t = 1201)]
    pub delta_points: usize,
}

/// Fixed sequence parameters on top of the global flags.
#[derive(Debug, Clone, Args)]
pub struct SequenceArgs {
    /// Constant target detuning Λ/2π in MHz.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lambda_mhz: f64,
    /// Target amplitude scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale_target: f64,
    /// Control amplitude scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale_control: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Input {
    #[value(name = "00")]
    Q00,
    #[value(name = "01")]
    Q01,
    #[value(name = "10")]
    Q10,
    #[value(name = "11")]
    Q11,
    /// The Bell-protocol input after the target Hadamard.
    Bell,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sequence: SequenceArgs,
    /// Also write level populations every this many ns.
    #[arg(long)]
    pub trajectory_stride: Option<f64>,
    /// Initial state of the trajectory.
    #[arg(long, value_enum, default_value = "bell")]
    pub input: Input,
}

/// Optimizer switches.
#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    /// Keep Λ fixed at its starting value.
    #[arg(long)]
    pub no_lambda: bool,
    /// Keep the amplitude scales fixed.
    #[arg(long)]
    pub no_scales: bool,
    /// Stop when a round improves the infidelity by less than this.
    #[arg(long, default_value_t = 1e-7)]
    pub ftol: f64,
    /// Maximum coordinate-descent rounds.
    #[arg(long, default_value_t = 20)]
    pub max_rounds: usize,
    /// Ignore and overwrite cached optima.
    #[arg(long)]
    pub fresh: bool,
}

#[derive(Debug, Args)]
pub struct SweepTimeArgs {
    /// Optimize (Λ, s) per point on the unitary Bell infidelity before
    /// evaluating the metrics.
    #[arg(long)]
    pub optimize: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Args)]
pub struct SweepBlockadeArgs {
    /// Number of grid points.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Lowest blockade B₀/2π in GHz (default: 0.1·min(Δ₁, Δ₂)).
    #[arg(long)]
    pub b_min: Option<f64>,
    /// Highest blockade B₀/2π in GHz (default: 0.95·min(Δ₁, Δ₂)).
    #[arg(long)]
    pub b_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimalBlockadeArgs {
    /// Points of the written leakage scan.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Lower bracket edge B₀/2π in GHz.
    #[arg(long)]
    pub b_min: Option<f64>,
    /// Upper bracket edge B₀/2π in GHz.
    #[arg(long)]
    pub b_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub sequence: SequenceArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

fn parse_kind(s: &str) -> Result<PulseKind, String> {
    PulseKind::from_str(s).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<Model, String> {
    Model::from_str(s).map_err(|e| e.to_string())
}

/// Expands `a`, `a,b,c` or `start:stop:step` (inclusive) into values.
pub fn parse_values(spec: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{}` is not a number", t.trim()))
    };
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("range `{spec}` must be start:stop:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step.is_finite() && step > 0.0) {
            return Err(format!("range step must be positive, got {step}"));
        }
        let n = ((b - a) / step + 1e-9).floor();
        if !(n >= 0.0) {
            Vec::new()
        } else {
            (0..=n as usize).map(|i| a + step * i as f64).collect()
        }
    } else {
        spec.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(format!("`{spec}` selects no values"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(format!("durations must be positive, got {v}"));
    }
    Ok(values)
}
