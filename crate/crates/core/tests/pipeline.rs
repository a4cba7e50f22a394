use std::io::Write;

use rydgate::gate::computational_indices;
use rydgate::params::{load_setting, load_setting_file};
use rydgate::report::{write_metrics, MetricsRow, METRICS_HEADER};
use rydgate::units::{angular_to_ghz, ghz_to_angular};
use rydgate::{Error, GateSimulator, Level, Model, PulseKind, QuantumState, SequenceSpec};

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn setting_file_overrides_base() {
    let f = write_temp(
        "base = \"S1\"\nname = \"S1-strong\"\nb0_GHz = 2.0\ntau_r_p1h_us = 150.0\nb_nprime_nprime = 0.5\n",
    );
    let s = load_setting_file(f.path());
    let base = load_setting("S1").unwrap();
    let s = match s {
        Ok(s) => s,
        Err(e) => panic!("{e}"),
    };
    assert_eq!(s.name, "S1-strong");
    assert!((angular_to_ghz(s.b0) - 2.0).abs() < 1e-14);
    assert_eq!(s.n, base.n);
    assert_eq!(s.delta_plus, base.delta_plus);
}

#[test]
fn setting_file_rejects_bad_input() {
    let unknown = write_temp("base = \"S2\"\nwavelength_nm = 780\n");
    assert!(matches!(
        load_setting_file(unknown.path()),
        Err(Error::InvalidSetting { ref key, .. }) if key == "wavelength_nm"
    ));
    let no_base = write_temp("b0_GHz = 1.0\n");
    assert!(matches!(
        load_setting_file(no_base.path()),
        Err(Error::InvalidSetting { ref key, .. }) if key == "base"
    ));
    let negative = write_temp("base = \"S1\"\nb0_GHz = -1.0\n");
    assert!(load_setting_file(negative.path()).is_err());
    assert!(load_setting_file("/nonexistent/setting.toml").is_err());
}

#[test]
fn metrics_are_deterministic() {
    let sim = GateSimulator::new(&load_setting("S1").unwrap()).unwrap();
    let spec = SequenceSpec::new(30.0, PulseKind::Drag).with_lambda_target(ghz_to_angular(1.6e-3));
    let a = sim.metrics(&spec, Model::Unitary).unwrap();
    let b = sim.metrics(&spec, Model::Unitary).unwrap();
    for (x, y) in [
        (a.population_error, b.population_error),
        (a.bell_fidelity, b.bell_fidelity),
        (a.trace_distance, b.trace_distance),
        (a.entangling_phase, b.entangling_phase),
    ] {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }
}

#[test]
fn lindblad_population_error_is_mean_over_inputs() {
    let setting = load_setting("S2").unwrap().with_decay_scale(200.0).unwrap();
    let sim = GateSimulator::new(&setting).unwrap();
    let spec = SequenceSpec::new(12.0, PulseKind::Gaussian);
    let fast = sim.population_error(&spec, Model::Lindblad).unwrap();
    let idx = computational_indices();
    let mut mean = 0.0;
    for (c, t) in [(Level::Q0, Level::Q0), (Level::Q0, Level::Q1), (Level::Q1, Level::Q0), (Level::Q1, Level::Q1)] {
        let out = sim
            .run_sequence(&spec, &QuantumState::basis(c, t), Model::Lindblad)
            .unwrap();
        let pops = out.populations();
        mean += (out.total_probability() - idx.iter().map(|&i| pops[i]).sum::<f64>()) / 4.0;
    }
    assert!(fast > 1e-4, "decay should be visible, got {fast}");
    assert!((fast - mean).abs() <= 1e-9, "{fast} vs {mean}");
}

#[test]
fn metrics_csv_round_trips() {
    let sim = GateSimulator::new(&load_setting("S2").unwrap()).unwrap();
    let spec = SequenceSpec::new(20.0, PulseKind::Drag);
    let m = sim.metrics(&spec, Model::Unitary).unwrap();
    let row = MetricsRow {
        t_g: spec.gate_time(),
        tau_t: spec.tau_t,
        tau_c: spec.tau_c,
        pulse_kind: "drag".into(),
        lambda_ghz: angular_to_ghz(spec.lambda_target),
        amp_scale_target: spec.amp_scales[1],
        amp_scale_control: spec.amp_scales[0],
        pop_error: m.population_error,
        bell_infidelity: m.bell_infidelity(),
        trace_distance: m.trace_distance,
        phi_ent: m.entangling_phase,
        error: String::new(),
    };
    let mut out = Vec::new();
    write_metrics(&mut out, &[row]).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, METRICS_HEADER);
    let rec = reader.records().next().unwrap().unwrap();
    let field = |name: &str| -> f64 {
        let i = METRICS_HEADER.iter().position(|h| *h == name).unwrap();
        rec[i].parse().unwrap()
    };
    assert_eq!(field("t_g_ns"), 40.0);
    assert!((field("pop_error") - m.population_error).abs() <= 1e-11 * m.population_error);
    assert!((field("phi_ent_rad") - m.entangling_phase).abs() <= 1e-10);
}
