//! Deterministic CSV writers. Floats use 12 significant digits in
//! scientific notation.

use std::io::Write;

use num_complex::Complex64;

use crate::atom::{Level, LEVELS};
use crate::dynamics::marginal_populations;

/// 12-significant-digit scientific formatting.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.11e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> csv::Result<()> {
    w.flush()?;
    Ok(())
}

/// `t_ns,amplitude_rad_per_ns`.
pub fn write_waveform<W: Write>(w: W, samples: &[(f64, f64)]) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(["t_ns", "amplitude_rad_per_ns"])?;
    for &(t, a) in samples {
        w.write_record([fmt_f(t), fmt_f(a)])?;
    }
    finish(w)
}

/// `delta_GHz,abs_S,re_S,im_S`.
pub fn write_spectrum<W: Write>(w: W, rows: &[(f64, Complex64)]) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(["delta_GHz", "abs_S", "re_S", "im_S"])?;
    for &(d, s) in rows {
        w.write_record([fmt_f(d), fmt_f(s.norm()), fmt_f(s.re), fmt_f(s.im)])?;
    }
    finish(w)
}

/// One line of a gate-time sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t_g: f64,
    pub tau_t: f64,
    pub tau_c: f64,
    pub pulse_kind: String,
    pub lambda_ghz: f64,
    pub amp_scale_target: f64,
    pub amp_scale_control: f64,
    pub pop_error: f64,
    pub bell_infidelity: f64,
    pub trace_distance: f64,
    pub phi_ent: f64,
    pub error: String,
}

impl MetricsRow {
    /// A row for a failed point: timing filled, metrics NaN.
    pub fn failed(t_g: f64, tau_t: f64, tau_c: f64, kind: &str, error: String) -> Self {
        MetricsRow {
            t_g,
            tau_t,
            tau_c,
            pulse_kind: kind.into(),
            lambda_ghz: f64::NAN,
            amp_scale_target: f64::NAN,
            amp_scale_control: f64::NAN,
            pop_error: f64::NAN,
            bell_infidelity: f64::NAN,
            trace_distance: f64::NAN,
            phi_ent: f64::NAN,
            error,
        }
    }
}

pub const METRICS_HEADER: [&str; 12] = [
    "t_g_ns",
    "tau_t_ns",
    "tau_c_ns",
    "pulse_kind",
    "lambda_GHz",
    "amp_scale",
    "pop_error",
    "bell_infidelity",
    "trace_distance",
    "phi_ent_rad",
    "amp_scale_control",
    "error",
];

/// Gate metrics table; `amp_scale` is the target scale.
pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f(r.t_g),
            fmt_f(r.tau_t),
            fmt_f(r.tau_c),
            r.pulse_kind.clone(),
            fmt_f(r.lambda_ghz),
            fmt_f(r.amp_scale_target),
            fmt_f(r.pop_error),
            fmt_f(r.bell_infidelity),
            fmt_f(r.trace_distance),
            fmt_f(r.phi_ent),
            fmt_f(r.amp_scale_control),
            r.error.clone(),
        ])?;
    }
    finish(w)
}

/// `b0_GHz,pop_error,p_leak_rel,error`.
pub fn write_blockade_sweep<W: Write>(w: W, rows: &[(f64, f64, f64, String)]) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(["b0_GHz", "pop_error", "p_leak_rel", "error"])?;
    for (b, p, l, e) in rows {
        w.write_record([fmt_f(*b), fmt_f(*p), fmt_f(*l), e.clone()])?;
    }
    finish(w)
}

/// `b0_GHz,p_leak_rel`.
pub fn write_leak_scan<W: Write>(w: W, rows: &[(f64, f64)]) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(["b0_GHz", "p_leak_rel"])?;
    for &(b, p) in rows {
        w.write_record([fmt_f(b), fmt_f(p)])?;
    }
    finish(w)
}

/// `t_ns` followed by control and target single-atom level populations.
pub fn write_trajectory<W: Write>(w: W, samples: &[(f64, Vec<f64>)]) -> csv::Result<()> {
    let mut w = writer(w);
    let mut header = vec!["t_ns".to_string()];
    for atom in ["control", "target"] {
        for l in Level::ALL {
            header.push(format!("pop_{atom}_{l}"));
        }
    }
    w.write_record(&header)?;
    for (t, pops) in samples {
        let (c, g) = marginal_populations(pops);
        let mut rec = Vec::with_capacity(1 + 2 * LEVELS);
        rec.push(fmt_f(*t));
        rec.extend(c.iter().chain(g.iter()).map(|p| fmt_f(*p)));
        w.write_record(&rec)?;
    }
    finish(w)
}
