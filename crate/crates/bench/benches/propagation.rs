use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use rydgate::atom::DIM;
use rydgate::{Model, PulseShape};
use rydgate_bench::{drag_sequence, simulator};

fn pulses(c: &mut Criterion) {
    let p = PulseShape::drag(30.0, &[-9.676, 18.6]).unwrap().calibrate_area(std::f64::consts::PI).unwrap();
    c.bench_function("drag_envelope_value", |b| b.iter(|| p.value(black_box(12.3))));
    c.bench_function("drag_spectrum", |b| b.iter(|| p.spectrum(black_box(-9.676)).unwrap()));
}

fn hamiltonian(c: &mut Criterion) {
    let sim = simulator("S1");
    let h = sim.hamiltonian(&drag_sequence(30.0, 0.0)).unwrap();
    let x: Vec<Complex64> = (0..DIM).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
    let mut y = vec![Complex64::new(0.0, 0.0); DIM];
    c.bench_function("hamiltonian_apply", |b| {
        b.iter(|| h.apply(Complex64::new(0.0, -1.0), 0.3, 0.2, black_box(&x), 1, &mut y))
    });
}

fn gates(c: &mut Criterion) {
    let sim = simulator("S1");
    let spec = drag_sequence(30.0, 0.0096);
    c.bench_function("unitary_metrics_tau30", |b| b.iter(|| sim.metrics(black_box(&spec), Model::Unitary).unwrap()));

    let mut group = c.benchmark_group("lindblad");
    group.sample_size(10);
    let short = drag_sequence(10.0, 0.0);
    group.bench_function("population_error_tau10", |b| {
        b.iter(|| sim.population_error(black_box(&short), Model::Lindblad).unwrap())
    });
    group.finish();
}

criterion_group!(benches, pulses, hamiltonian, gates);
criterion_main!(benches);
