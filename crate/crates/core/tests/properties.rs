use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rydgate::gate::{bell_fidelity_of, cnot_wrap, entangling_phase, prepared_input};
use rydgate::linalg::{outer, CMatrix, CVector};
use rydgate::params::load_setting;
use rydgate::pulses::drag_coefficients;
use rydgate::{Complex64, GateSimulator, LeakModel, PulseKind, PulseShape, SequenceSpec};

fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drag_coefficients_ignore_order_and_sign(
        nulls in prop::collection::vec(1.0f64..50.0, 1..5),
        flips in prop::collection::vec(any::<bool>(), 5),
    ) {
        let mut distinct = nulls.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(distinct.len() == nulls.len());
        let base = drag_coefficients(&nulls).unwrap();
        let mut permuted: Vec<f64> = nulls
            .iter()
            .zip(&flips)
            .map(|(&d, &f)| if f { -d } else { d })
            .collect();
        permuted.reverse();
        let other = drag_coefficients(&permuted).unwrap();
        for (x, y) in base.iter().zip(&other) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs());
        }
    }

    #[test]
    fn entangling_phase_ignores_local_phases(
        phases in prop::array::uniform4(-10.0f64..10.0),
        global in -10.0f64..10.0,
        control in -10.0f64..10.0,
        target in -10.0f64..10.0,
    ) {
        let shifted = [
            phases[0] + global,
            phases[1] + global + target,
            phases[2] + global + control,
            phases[3] + global + control + target,
        ];
        let a = entangling_phase(&phases);
        let b = entangling_phase(&shifted);
        prop_assert!((0.0..TAU).contains(&a));
        prop_assert!(wrapped_distance(a, b) < 1e-12);
    }

    #[test]
    fn ideal_controlled_phase_reaches_bell_state(
        global in -PI..PI,
        control in -PI..PI,
        target in -PI..PI,
    ) {
        let phases = [global, global + target, global + control, global + control + target + PI];
        let u = CMatrix::from_diagonal(&CVector::from_iterator(
            4,
            phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        ));
        let rho = outer(&(u * prepared_input()));
        let f = bell_fidelity_of(&cnot_wrap(&rho, &phases));
        prop_assert!((f - 1.0).abs() < 1e-12, "F = {f}");
    }

    #[test]
    fn leak_model_is_homogeneous(c in 0.2f64..5.0, frac in 0.05f64..0.9) {
        let m = LeakModel::from_setting(&load_setting("S2").unwrap());
        let b = frac * m.delta1.min(m.delta2);
        let scaled = LeakModel { delta1: c * m.delta1, delta2: c * m.delta2, ..m };
        let r = scaled.leak_probability(c * b).unwrap() / m.leak_probability(b).unwrap();
        prop_assert!((r * c * c - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn drag_spectrum_vanishes_at_nulls(
        duration in 10.0f64..60.0,
        x1 in 8.0f64..20.0,
        x2 in 25.0f64..60.0,
    ) {
        let nulls = [x1 * TAU / duration, -x2 * TAU / duration];
        let p = PulseShape::drag(duration, &nulls).unwrap().calibrate_area(PI).unwrap();
        for d in nulls {
            for s in [d, -d] {
                let v = p.spectrum(s).unwrap().norm();
                prop_assert!(v < 1e-9 * PI, "|S({s})| = {v}");
            }
        }
    }

    #[test]
    fn calibrated_area_is_exact(duration in 5.0f64..100.0, theta in 0.1f64..10.0, drag in any::<bool>()) {
        let p = if drag {
            PulseShape::drag(duration, &[20.0, 35.0]).unwrap()
        } else {
            PulseShape::gaussian(duration, 2).unwrap()
        };
        let area = p.calibrate_area(theta).unwrap().integral().unwrap();
        prop_assert!((area - theta).abs() < 1e-10 * theta);
    }

    #[test]
    fn hamiltonian_is_hermitian(
        eps_c in -5.0f64..5.0,
        eps_t in -5.0f64..5.0,
        lambda in -2.0f64..2.0,
        s2 in any::<bool>(),
    ) {
        let setting = load_setting(if s2 { "S2" } else { "S1" }).unwrap();
        let sim = GateSimulator::new(&setting).unwrap();
        let spec = SequenceSpec::new(30.0, PulseKind::Drag).with_lambda_target(lambda);
        let h = sim.hamiltonian(&spec).unwrap().hamiltonian_at(eps_c, eps_t);
        let dev = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(dev == 0.0, "max |H − H†| = {dev}");
    }
}
