use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use rydgate::dynamics::Tolerances;
use rydgate::gate::{build_sequence, computational_indices, optimize_gate, prepared_input, OptimizeOptions, OptimizedGate};
use rydgate::params::{load_setting, load_setting_file};
use rydgate::report::{self, MetricsRow};
use rydgate::units::{angular_to_ghz, ghz_to_angular};
use rydgate::{
    Complex64, GateMetrics, GateSimulator, LeakModel, Level, Model, PhysicalSetting, PulseKind, QuantumState,
    SequenceSpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    parse_values, Cli, Command, DesignArgs, Global, Input, OptimalBlockadeArgs, OptimizeArgs, OptimizerArgs,
    SequenceArgs, SimulateArgs, SweepBlockadeArgs, SweepTimeArgs,
};
use crate::ConfigError;

const CACHE_FILE: &str = "optimize_cache.json";

fn config(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Validated global options.
struct Context {
    setting: PhysicalSetting,
    kinds: Vec<PulseKind>,
    model: Model,
    tau_t: Option<Vec<f64>>,
    tau_c_ratio: f64,
    tau_c: Option<f64>,
    out: PathBuf,
    tol: Tolerances,
    pool: rayon::ThreadPool,
}

impl Context {
    fn new(g: &Global) -> Result<Self> {
        let base = match &g.setting_file {
            Some(path) => load_setting_file(path)?,
            None => load_setting(&g.setting)?,
        };
        let setting = if g.decay_scale == 1.0 {
            base
        } else {
            base.with_decay_scale(g.decay_scale)?
        };
        if !(g.tol.is_finite() && g.tol > 0.0 && g.tol <= 1e-3) {
            return Err(config(format!("--tol must lie in (0, 1e-3], got {}", g.tol)));
        }
        if !(g.tau_c_ratio.is_finite() && g.tau_c_ratio > 0.0) {
            return Err(config(format!("--tau-c-ratio must be positive, got {}", g.tau_c_ratio)));
        }
        if let Some(tc) = g.tau_c {
            if !(tc.is_finite() && tc > 0.0) {
                return Err(config(format!("--tau-c must be positive, got {tc}")));
            }
        }
        let tau_t = g
            .tau_t
            .as_deref()
            .map(parse_values)
            .transpose()
            .map_err(|e| config(format!("--tau-t: {e}")))?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = g.workers {
            if n == 0 {
                return Err(config("--workers must be at least 1"));
            }
            pool = pool.num_threads(n);
        }
        Ok(Context {
            setting,
            kinds: g.pulse.clone(),
            model: g.model,
            tau_t,
            tau_c_ratio: g.tau_c_ratio,
            tau_c: g.tau_c,
            out: g.out.clone(),
            tol: Tolerances {
                rtol: g.tol,
                atol: 1e-2 * g.tol,
            },
            pool: pool.build().context("cannot start worker pool")?,
        })
    }

    fn single_tau(&self, default: Option<f64>) -> Result<f64> {
        match (&self.tau_t, default) {
            (Some(v), _) if v.len() == 1 => Ok(v[0]),
            (Some(_), _) => Err(config("this command takes a single --tau-t value")),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(config("--tau-t is required")),
        }
    }

    fn single_kind(&self) -> Result<PulseKind> {
        match self.kinds.as_slice() {
            [k] => Ok(*k),
            _ => Err(config("this command takes a single --pulse kind")),
        }
    }

    fn spec(&self, tau_t: f64, kind: PulseKind) -> SequenceSpec {
        let mut spec = SequenceSpec::new(tau_t, kind).with_tau_c_ratio(self.tau_c_ratio);
        if let Some(tc) = self.tau_c {
            spec.tau_c = tc;
        }
        spec
    }

    fn spec_with(&self, tau_t: f64, kind: PulseKind, seq: &SequenceArgs) -> Result<SequenceSpec> {
        let spec = self
            .spec(tau_t, kind)
            .with_lambda_target(ghz_to_angular(seq.lambda_mhz * 1e-3))
            .with_scales(seq.scale_control, seq.scale_target);
        spec.validate()?;
        Ok(spec)
    }

    fn simulator(&self) -> Result<GateSimulator> {
        Ok(GateSimulator::new(&self.setting)?.with_tolerances(self.tol))
    }

    /// Creates the output directory; called only after all validation.
    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| config(format!("cannot create output directory {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context::new(&cli.global)?;
    match &cli.command {
        Command::Design(a) => design(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::SweepTime(a) => sweep_time(&ctx, a),
        Command::SweepBlockade(a) => sweep_blockade(&ctx, a),
        Command::OptimalBlockade(a) => optimal_blockade(&ctx, a),
        Command::Optimize(a) => optimize(&ctx, a),
    }
}

fn write_file<F>(dir: &Path, name: &str, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn metrics_row(spec: &SequenceSpec, m: &GateMetrics) -> MetricsRow {
    MetricsRow {
        t_g: spec.gate_time(),
        tau_t: spec.tau_t,
        tau_c: spec.tau_c,
        pulse_kind: spec.kinds[1].to_string(),
        lambda_ghz: angular_to_ghz(spec.lambda_target),
        amp_scale_target: spec.amp_scales[1],
        amp_scale_control: spec.amp_scales[0],
        pop_error: m.population_error,
        bell_infidelity: m.bell_infidelity(),
        trace_distance: m.trace_distance,
        phi_ent: m.entangling_phase,
        error: m.warning.clone().unwrap_or_default(),
    }
}

fn design(ctx: &Context, a: &DesignArgs) -> Result<()> {
    let tau_t = ctx.single_tau(None)?;
    let kind = ctx.single_kind()?;
    if !(a.dt.is_finite() && a.dt > 0.0) {
        return Err(config(format!("--dt must be positive, got {}", a.dt)));
    }
    if a.delta_points < 2 || !(a.delta_min < a.delta_max) {
        return Err(config("spectrum grid needs --delta-min < --delta-max and at least 2 points"));
    }
    let spec = ctx.spec(tau_t, kind);
    let seq = build_sequence(&spec, &ctx.setting)?;
    let [c1, t2, c3] = &seq.pulses;
    let [_, b1, b2, tg] = seq.boundaries;

    let n = (tg / a.dt).round().max(1.0) as usize;
    let mut control = Vec::with_capacity(n + 1);
    let mut target = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = tg * i as f64 / n as f64;
        let (c, g) = if t < b1 {
            (c1.value(t), 0.0)
        } else if t < b2 {
            (0.0, t2.value(t - b1))
        } else {
            (c3.value(t - b2), 0.0)
        };
        control.push((t, c));
        target.push((t, g));
    }

    let grid: Vec<f64> = (0..a.delta_points)
        .map(|i| a.delta_min + (a.delta_max - a.delta_min) * i as f64 / (a.delta_points - 1) as f64)
        .collect();
    let spectra = |p: &rydgate::PulseShape| -> Result<Vec<(f64, Complex64)>> {
        ctx.pool.install(|| {
            grid.par_iter()
                .map(|&d| Ok((d, p.spectrum(ghz_to_angular(d))?)))
                .collect()
        })
    };
    let s_control = spectra(c1)?;
    let s_target = spectra(t2)?;

    println!("setting {}  pulse {kind}  t_g = {tg} ns", ctx.setting.name);
    for (name, p) in [("control π", c1), ("target 2π", t2), ("control −π", c3)] {
        println!(
            "{name:<11} T = {:.4} ns  calibration A = {:.9e}  peak Omega/2pi = {:.6} MHz",
            p.duration(),
            p.amplitude(),
            angular_to_ghz(p.peak_amplitude()) * 1e3
        );
        if kind == PulseKind::Drag {
            let nulls: Vec<String> = p.null_frequencies().iter().map(|d| format!("{:.6}", angular_to_ghz(*d))).collect();
            let coeffs: Vec<String> = p.drag_coeffs().iter().map(|c| format!("{c:.9e}")).collect();
            println!("            nulls [{}] GHz  alpha [{}] ns^2k", nulls.join(", "), coeffs.join(", "));
        }
    }

    let dir = ctx.out_dir()?;
    write_file(dir, "waveform_control.csv", |w| Ok(report::write_waveform(w, &control)?))?;
    write_file(dir, "waveform_target.csv", |w| Ok(report::write_waveform(w, &target)?))?;
    write_file(dir, "spectrum_control.csv", |w| Ok(report::write_spectrum(w, &s_control)?))?;
    write_file(dir, "spectrum_target.csv", |w| Ok(report::write_spectrum(w, &s_target)?))?;
    Ok(())
}

fn initial_state(input: Input) -> QuantumState {
    let (c, t) = match input {
        Input::Q00 => (Level::Q0, Level::Q0),
        Input::Q01 => (Level::Q0, Level::Q1),
        Input::Q10 => (Level::Q1, Level::Q0),
        Input::Q11 => (Level::Q1, Level::Q1),
        Input::Bell => {
            let amps = prepared_input();
            let mut psi = vec![Complex64::new(0.0, 0.0); rydgate::atom::DIM];
            for (k, &i) in computational_indices().iter().enumerate() {
                psi[i] = amps[k];
            }
            return QuantumState::Pure(psi);
        }
    };
    QuantumState::basis(c, t)
}

fn print_metrics(spec: &SequenceSpec, m: &GateMetrics, model: Model) {
    println!(
        "t_g = {} ns ({model}): population error {:.6e}  1-F_B {:.6e}  D {:.6e}  phi_ent {:.9} rad",
        spec.gate_time(),
        m.population_error,
        m.bell_infidelity(),
        m.trace_distance,
        m.entangling_phase
    );
    if let Some(w) = &m.warning {
        eprintln!("warning: {w}");
    }
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let tau_t = ctx.single_tau(None)?;
    let spec = ctx.spec_with(tau_t, ctx.single_kind()?, &a.sequence)?;
    if let Some(s) = a.trajectory_stride {
        if !(s.is_finite() && s > 0.0) {
            return Err(config(format!("--trajectory-stride must be positive, got {s}")));
        }
    }
    let sim = ctx.simulator()?;
    let metrics = ctx.pool.install(|| sim.metrics(&spec, ctx.model))?;
    let trajectory = a
        .trajectory_stride
        .map(|s| ctx.pool.install(|| sim.trajectory(&spec, &initial_state(a.input), ctx.model, s)))
        .transpose()?;
    print_metrics(&spec, &metrics, ctx.model);

    let dir = ctx.out_dir()?;
    let row = metrics_row(&spec, &metrics);
    write_file(dir, "metrics.csv", |w| Ok(report::write_metrics(w, &[row])?))?;
    if let Some((_, samples)) = trajectory {
        write_file(dir, "trajectory.csv", |w| Ok(report::write_trajectory(w, &samples)?))?;
    }
    Ok(())
}

/// Optimized parameters stored in the sidecar cache.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedOptimum {
    lambda_target: f64,
    amp_scale_target: f64,
    amp_scale_control: f64,
    infidelity: f64,
}

impl CachedOptimum {
    fn of(spec: &SequenceSpec, infidelity: f64) -> Self {
        CachedOptimum {
            lambda_target: spec.lambda_target,
            amp_scale_target: spec.amp_scales[1],
            amp_scale_control: spec.amp_scales[0],
            infidelity,
        }
    }

    fn apply(&self, spec: &SequenceSpec) -> SequenceSpec {
        spec.clone()
            .with_lambda_target(self.lambda_target)
            .with_scales(self.amp_scale_control, self.amp_scale_target)
    }
}

type Cache = BTreeMap<String, CachedOptimum>;

fn cache_key(setting: &PhysicalSetting, spec: &SequenceSpec) -> String {
    format!(
        "{}|{}|tau_t={}|tau_c={}",
        setting.name,
        spec.kinds[1],
        report::fmt_f(spec.tau_t),
        report::fmt_f(spec.tau_c)
    )
}

fn load_cache(dir: &Path, fresh: bool) -> Result<Cache> {
    let path = dir.join(CACHE_FILE);
    if fresh || !path.exists() {
        return Ok(Cache::new());
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| config(format!("corrupt cache {}: {e}; delete it or pass --fresh", path.display())))
}

fn store_cache(ctx: &Context, updates: Vec<(String, CachedOptimum)>, fresh: bool) -> Result<()> {
    if updates.is_empty() {
        return Ok(());
    }
    let dir = ctx.out_dir()?;
    let mut cache = match load_cache(dir, false) {
        Ok(c) => c,
        Err(_) if fresh => Cache::new(),
        Err(e) => return Err(e),
    };
    cache.extend(updates);
    write_json(dir, CACHE_FILE, &cache)
}

fn optimizer_options(o: &OptimizerArgs) -> Result<OptimizeOptions> {
    if !(o.ftol.is_finite() && o.ftol > 0.0) || o.max_rounds == 0 {
        return Err(config("--ftol must be positive and --max-rounds at least 1"));
    }
    Ok(OptimizeOptions {
        ftol: o.ftol,
        max_rounds: o.max_rounds,
        optimize_lambda: !o.no_lambda,
        optimize_scales: !o.no_scales,
        ..OptimizeOptions::default()
    })
}

fn sweep_time(ctx: &Context, a: &SweepTimeArgs) -> Result<()> {
    let taus = ctx.tau_t.clone().ok_or_else(|| config("--tau-t is required"))?;
    let opts = optimizer_options(&a.optimizer)?;
    let cache = if a.optimize {
        load_cache(&ctx.out, a.optimizer.fresh)?
    } else {
        Cache::new()
    };
    let sim = ctx.simulator()?;
    let points: Vec<SequenceSpec> = taus
        .iter()
        .flat_map(|&t| ctx.kinds.iter().map(move |&k| (t, k)))
        .map(|(t, k)| ctx.spec(t, k))
        .collect();
    for spec in &points {
        spec.validate()?;
    }

    let evaluate = |base: &SequenceSpec| -> (MetricsRow, Option<(String, CachedOptimum)>) {
        let key = cache_key(&ctx.setting, base);
        let mut update = None;
        let spec = if !a.optimize {
            base.clone()
        } else if let Some(hit) = cache.get(&key) {
            hit.apply(base)
        } else {
            match optimize_gate(&sim, base, &opts) {
                Ok(OptimizedGate { spec, infidelity, .. }) => {
                    update = Some((key, CachedOptimum::of(&spec, infidelity)));
                    spec
                }
                Err(e) => {
                    let row = MetricsRow::failed(base.gate_time(), base.tau_t, base.tau_c, base.kinds[1].as_str(), e.to_string());
                    return (row, None);
                }
            }
        };
        let row = match sim.metrics(&spec, ctx.model) {
            Ok(m) => metrics_row(&spec, &m),
            Err(e) => MetricsRow::failed(spec.gate_time(), spec.tau_t, spec.tau_c, spec.kinds[1].as_str(), e.to_string()),
        };
        (row, update)
    };
    let results: Vec<_> = ctx.pool.install(|| points.par_iter().map(evaluate).collect());

    let mut rows = Vec::with_capacity(results.len());
    let mut updates = Vec::new();
    let mut failed = 0;
    for (row, update) in results {
        if row.pop_error.is_nan() {
            failed += 1;
            eprintln!("t_g = {} ns {}: failed: {}", row.t_g, row.pulse_kind, row.error);
        } else {
            println!(
                "t_g = {} ns {:<8} pop_error {:.6e}  1-F_B {:.6e}  Lambda/2pi {:.6} MHz",
                row.t_g,
                row.pulse_kind,
                row.pop_error,
                row.bell_infidelity,
                row.lambda_ghz * 1e3
            );
        }
        rows.push(row);
        updates.extend(update);
    }
    let dir = ctx.out_dir()?;
    write_file(dir, "sweep_time.csv", |w| Ok(report::write_metrics(w, &rows)?))?;
    store_cache(ctx, updates, a.optimizer.fresh)?;
    if failed > 0 {
        eprintln!("{failed} of {} points failed; see the error column", rows.len());
    }
    Ok(())
}

fn blockade_range(lo: Option<f64>, hi: Option<f64>, default: (f64, f64)) -> Result<(f64, f64)> {
    let lo = lo.map_or(default.0, ghz_to_angular);
    let hi = hi.map_or(default.1, ghz_to_angular);
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(config(format!(
            "blockade range [{}, {}] GHz must be positive and increasing",
            angular_to_ghz(lo),
            angular_to_ghz(hi)
        )));
    }
    Ok((lo, hi))
}

fn sweep_blockade(ctx: &Context, a: &SweepBlockadeArgs) -> Result<()> {
    let tau_t = ctx.single_tau(Some(30.0))?;
    let kind = ctx.single_kind()?;
    if a.points < 2 {
        return Err(config("--points must be at least 2"));
    }
    let leak = LeakModel::from_setting(&ctx.setting);
    let default = leak.sweep_grid(2);
    let (lo, hi) = blockade_range(a.b_min, a.b_max, (default[0], default[1]))?;
    let grid: Vec<f64> = (0..a.points)
        .map(|i| lo + (hi - lo) * i as f64 / (a.points - 1) as f64)
        .collect();
    let spec = ctx.spec(tau_t, kind);
    spec.validate()?;

    let evaluate = |&b: &f64| -> (f64, f64, f64, String) {
        let mut errors = Vec::new();
        let pop = ctx
            .setting
            .with_b0(b)
            .and_then(|s| GateSimulator::new(&s))
            .and_then(|sim| sim.with_tolerances(ctx.tol).population_error(&spec, ctx.model))
            .unwrap_or_else(|e| {
                errors.push(e.to_string());
                f64::NAN
            });
        let p = leak.leak_probability(b).unwrap_or_else(|e| {
            errors.push(e.to_string());
            f64::NAN
        });
        (angular_to_ghz(b), pop, p, errors.join("; "))
    };
    let rows: Vec<_> = ctx.pool.install(|| grid.par_iter().map(evaluate).collect());

    let best = rows
        .iter()
        .filter(|r| r.1.is_finite())
        .min_by(|x, y| x.1.total_cmp(&y.1));
    match best {
        Some(r) => println!("minimum population error {:.6e} at B0/2pi = {:.6} GHz", r.1, r.0),
        None => eprintln!("no grid point succeeded"),
    }
    let dir = ctx.out_dir()?;
    write_file(dir, "sweep_blockade.csv", |w| Ok(report::write_blockade_sweep(w, &rows)?))
}

#[derive(Serialize)]
struct BlockadeReport<'a> {
    setting: &'a str,
    b0_ghz: f64,
    p_min: f64,
    flat_lo_ghz: f64,
    flat_hi_ghz: f64,
    scan_min_ghz: f64,
    delta1_ghz: f64,
    delta2_ghz: f64,
}

fn optimal_blockade(ctx: &Context, a: &OptimalBlockadeArgs) -> Result<()> {
    if a.points < 2 {
        return Err(config("--points must be at least 2"));
    }
    let model = LeakModel::from_setting(&ctx.setting);
    let bracket = blockade_range(a.b_min, a.b_max, model.default_bracket())?;
    let opt = model.optimal_blockade(bracket)?;
    let scan: Vec<(f64, f64)> = model
        .scan(bracket.0, bracket.1, a.points)
        .into_iter()
        .map(|(b, p)| (angular_to_ghz(b), p.unwrap_or(f64::NAN)))
        .collect();
    let rep = BlockadeReport {
        setting: &ctx.setting.name,
        b0_ghz: angular_to_ghz(opt.b0),
        p_min: opt.p_min,
        flat_lo_ghz: angular_to_ghz(opt.flat_lo),
        flat_hi_ghz: angular_to_ghz(opt.flat_hi),
        scan_min_ghz: angular_to_ghz(opt.scan_min),
        delta1_ghz: angular_to_ghz(model.delta1),
        delta2_ghz: angular_to_ghz(model.delta2),
    };
    println!("{}: optimal B0/2pi = {:.6} GHz", rep.setting, rep.b0_ghz);
    println!(
        "  P within 10% of its minimum for B0/2pi in [{:.4}, {:.4}] GHz; scan minimum {:.4} GHz",
        rep.flat_lo_ghz, rep.flat_hi_ghz, rep.scan_min_ghz
    );
    let dir = ctx.out_dir()?;
    write_file(dir, "leak_scan.csv", |w| Ok(report::write_leak_scan(w, &scan)?))?;
    write_json(dir, "optimal_blockade.json", &rep)
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    setting: &'a str,
    model: Model,
    lambda_target_mhz: f64,
    amp_scale_target: f64,
    amp_scale_control: f64,
    metrics: &'a GateMetrics,
    optimization: &'a OptimizedGate,
}

fn optimize(ctx: &Context, a: &OptimizeArgs) -> Result<()> {
    let tau_t = ctx.single_tau(None)?;
    let start = ctx.spec_with(tau_t, ctx.single_kind()?, &a.sequence)?;
    let opts = optimizer_options(&a.optimizer)?;
    let sim = ctx.simulator()?;
    let result = ctx.pool.install(|| optimize_gate(&sim, &start, &opts))?;
    let metrics = ctx.pool.install(|| sim.metrics(&result.spec, ctx.model))?;
    let spec = &result.spec;
    println!(
        "optimized in {} rounds ({} evaluations): Lambda/2pi = {:.6} MHz, s_t = {:.9}, s_c = {:.9}",
        result.rounds,
        result.evaluations,
        angular_to_ghz(spec.lambda_target) * 1e3,
        spec.amp_scales[1],
        spec.amp_scales[0]
    );
    println!(
        "unitary 1-F_B {:.6e} -> {:.6e}",
        result.initial_infidelity, result.infidelity
    );
    if result.no_progress {
        eprintln!("warning: optimizer made no progress; starting values kept");
    }
    print_metrics(spec, &metrics, ctx.model);

    let dir = ctx.out_dir()?;
    let rep = OptimizeReport {
        setting: &ctx.setting.name,
        model: ctx.model,
        lambda_target_mhz: angular_to_ghz(spec.lambda_target) * 1e3,
        amp_scale_target: spec.amp_scales[1],
        amp_scale_control: spec.amp_scales[0],
        metrics: &metrics,
        optimization: &result,
    };
    write_json(dir, "optimize.json", &rep)?;
    let row = metrics_row(spec, &metrics);
    write_file(dir, "metrics.csv", |w| Ok(report::write_metrics(w, &[row])?))?;
    let key = cache_key(&ctx.setting, spec);
    store_cache(ctx, vec![(key, CachedOptimum::of(spec, result.infidelity))], a.optimizer.fresh)
}
