//! Adaptive Dormand–Prince 8(5,3) integration of complex linear-algebra
//! ODE systems `y' = f(t, y)`.
//!
//! Coefficients and step-size control follow Hairer, Nørsett & Wanner,
//! with the combined 5th/3rd-order error estimate. The solver keeps its step
//! size between successive [`Dop853::advance`] calls so that a sequence of
//! breakpoints (pulse-segment boundaries, output times) can be hit exactly
//! without interpolation.

use num_complex::Complex64;

use crate::{Error, Result};

#[rustfmt::skip]
mod tableau {
    pub const C: [f64; 12] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0];
    pub const A: [[f64; 12]; 12] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
        [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
        [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
        [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
    ];
    pub const B: [f64; 12] = [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259];
    pub const E3: [f64; 13] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0];
    pub const E5: [f64; 13] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0];
}

use tableau::{A, B, C, E3, E5};

const STAGES: usize = 12;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Integrator tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// Step counters accumulated over the lifetime of a solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Reusable DOP853 stepper for states of fixed length.
pub struct Dop853 {
    opts: OdeOptions,
    k: Vec<Vec<Complex64>>,
    y_new: Vec<Complex64>,
    tmp: Vec<Complex64>,
    h_abs: Option<f64>,
    stats: Stats,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

impl Dop853 {
    pub fn new(len: usize, opts: OdeOptions) -> Self {
        Dop853 {
            opts,
            k: vec![vec![Complex64::new(0.0, 0.0); len]; STAGES + 1],
            y_new: vec![Complex64::new(0.0, 0.0); len],
            tmp: vec![Complex64::new(0.0, 0.0); len],
            h_abs: None,
            stats: Stats::default(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    fn initial_step<F>(&mut self, f: &mut F, t0: f64, y: &[Complex64], span: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        let (rtol, atol) = (self.opts.rtol, self.opts.atol);
        let scale = |v: Complex64| atol + v.norm() * rtol;
        let d0 = rms(y.iter().map(|v| v.norm() / scale(*v)), n);
        let d1 = rms(y.iter().zip(&self.k[0]).map(|(v, d)| d.norm() / scale(*v)), n);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k[0][i] * h0;
        }
        f(t0 + h0, &self.tmp, &mut self.y_new);
        self.stats.evaluations += 1;
        let d2 = rms(
            y.iter()
                .zip(self.y_new.iter().zip(&self.k[0]))
                .map(|(v, (f1, f0))| (f1 - f0).norm() / scale(*v)),
            n,
        ) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(span).min(self.opts.max_step)
    }

    /// Integrates `y` in place from `t0` to `t1 > t0`.
    pub fn advance<F>(&mut self, mut f: F, t0: f64, t1: f64, y: &mut [Complex64]) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if self.y_new.len() != n {
            return Err(Error::Dimension {
                expected: self.y_new.len(),
                actual: n,
            });
        }
        if t1 <= t0 {
            return Ok(());
        }
        f(t0, y, &mut self.k[0]);
        self.stats.evaluations += 1;
        let mut h_abs = match self.h_abs {
            Some(h) => h,
            None => self.initial_step(&mut f, t0, y, t1 - t0),
        };
        let mut t = t0;
        let mut steps = 0usize;
        while t < t1 {
            let min_step = 10.0 * (libm_next_up(t) - t);
            h_abs = h_abs.min(self.opts.max_step);
            if h_abs < min_step {
                h_abs = min_step;
            }
            let mut rejected = false;
            loop {
                if h_abs < min_step {
                    return Err(Error::StepUnderflow { t });
                }
                steps += 1;
                if steps > self.opts.max_steps {
                    return Err(Error::StepUnderflow { t });
                }
                let mut t_new = t + h_abs;
                if t_new > t1 {
                    t_new = t1;
                }
                let h = t_new - t;
                self.step(&mut f, t, y, h);
                let err = self.error_norm(y, h);
                if err < 1.0 {
                    let mut factor = if err == 0.0 {
                        MAX_FACTOR
                    } else {
                        MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                    };
                    if rejected {
                        factor = factor.min(1.0);
                    }
                    // Keep the step that was planned, not the one clipped to t1.
                    h_abs = if t_new == t1 && h < h_abs { h_abs } else { h_abs * factor };
                    y.copy_from_slice(&self.y_new);
                    let (first, rest) = self.k.split_at_mut(1);
                    first[0].copy_from_slice(&rest[STAGES - 1]);
                    t = t_new;
                    self.stats.accepted += 1;
                    break;
                }
                h_abs *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
                rejected = true;
                self.stats.rejected += 1;
            }
        }
        self.h_abs = Some(h_abs);
        Ok(())
    }

    fn step<F>(&mut self, f: &mut F, t: f64, y: &[Complex64], h: f64)
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        for s in 1..STAGES {
            self.tmp.copy_from_slice(y);
            for (j, kj) in self.k[..s].iter().enumerate() {
                let a = A[s][j] * h;
                if a != 0.0 {
                    for i in 0..n {
                        self.tmp[i] += kj[i] * a;
                    }
                }
            }
            f(t + C[s] * h, &self.tmp, &mut self.k[s]);
        }
        self.y_new.copy_from_slice(y);
        for (j, kj) in self.k[..STAGES].iter().enumerate() {
            let b = B[j] * h;
            if b != 0.0 {
                for i in 0..n {
                    self.y_new[i] += kj[i] * b;
                }
            }
        }
        f(t + h, &self.y_new, &mut self.k[STAGES]);
        self.stats.evaluations += STAGES;
    }

    fn error_norm(&self, y: &[Complex64], h: f64) -> f64 {
        let (rtol, atol) = (self.opts.rtol, self.opts.atol);
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..y.len() {
            let scale = atol + rtol * y[i].norm().max(self.y_new[i].norm());
            let mut s5 = Complex64::new(0.0, 0.0);
            let mut s3 = Complex64::new(0.0, 0.0);
            for j in 0..=STAGES {
                let kj = self.k[j][i];
                s5 += kj * E5[j];
                s3 += kj * E3[j];
            }
            e5 += (s5 / scale).norm_sqr();
            e3 += (s3 / scale).norm_sqr();
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * y.len() as f64).sqrt()
    }
}

fn libm_next_up(t: f64) -> f64 {
    if t.is_nan() || t == f64::INFINITY {
        return t;
    }
    let bits = t.to_bits();
    let next = if t == 0.0 {
        1
    } else if t > 0.0 {
        bits + 1
    } else {
        bits - 1
    };
    f64::from_bits(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tableau_consistency() {
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-13, "row {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = -i w y, exact y = exp(-i w t).
        let w = 3.7;
        let mut y = vec![c(1.0, 0.0)];
        let mut s = Dop853::new(1, OdeOptions::default());
        s.advance(|_, y, dy| dy[0] = c(0.0, -w) * y[0], 0.0, 20.0, &mut y).unwrap();
        let exact = Complex64::from_polar(1.0, -w * 20.0);
        assert!((y[0] - exact).norm() < 1e-8, "{}", (y[0] - exact).norm());
    }

    #[test]
    fn breakpoints_are_hit_and_state_continues() {
        let mut y = vec![c(1.0, 0.0)];
        let mut s = Dop853::new(1, OdeOptions::default());
        let mut t = 0.0;
        for k in 1..=10 {
            let t1 = k as f64 * 0.37;
            s.advance(|_, y, dy| dy[0] = -y[0], t, t1, &mut y).unwrap();
            t = t1;
        }
        assert!((y[0].re - (-3.7f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn discontinuous_rhs_across_breakpoint() {
        // y' = 1 on [0,1], y' = -2 on [1,2].
        let mut y = vec![c(0.0, 0.0)];
        let mut s = Dop853::new(1, OdeOptions::default());
        s.advance(|_, _, dy| dy[0] = c(1.0, 0.0), 0.0, 1.0, &mut y).unwrap();
        s.advance(|_, _, dy| dy[0] = c(-2.0, 0.0), 1.0, 2.0, &mut y).unwrap();
        assert!((y[0].re + 1.0).abs() < 1e-13);
    }

    #[test]
    fn convergence_order() {
        // Global error against tolerance on a non-trivial linear problem.
        let run = |tol: f64| {
            let opts = OdeOptions { rtol: tol, atol: tol * 1e-2, ..OdeOptions::default() };
            let mut y = vec![c(1.0, 0.0), c(0.0, 0.0)];
            let mut s = Dop853::new(2, opts);
            let om = 2.0;
            s.advance(
                |t, y, dy| {
                    let e = om * (1.0 + 0.3 * (t).sin());
                    dy[0] = c(0.0, -0.5 * e) * y[1];
                    dy[1] = c(0.0, -0.5 * e) * y[0];
                },
                0.0,
                10.0,
                &mut y,
            )
            .unwrap();
            // Exact: rotation by the integrated area.
            let area = om * (10.0 + 0.3 * (1.0 - (10.0f64).cos()));
            let exact0 = (area / 2.0).cos();
            ((y[0].re - exact0).abs() + y[0].im.abs(), s.stats().evaluations)
        };
        let (e1, n1) = run(1e-6);
        let (e2, n2) = run(1e-10);
        assert!(e2 < e1);
        assert!(e2 < 1e-9);
        // Error per work follows roughly the eighth order.
        let slope = (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln();
        assert!(slope > 5.0, "slope {slope}");
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = Dop853::new(2, OdeOptions::default());
        let mut y = vec![c(1.0, 0.0)];
        assert!(s.advance(|_, _, _| {}, 0.0, 1.0, &mut y).is_err());
    }

    #[test]
    fn step_budget_exhaustion_reports_time() {
        let opts = OdeOptions { max_steps: 5, ..OdeOptions::default() };
        let mut s = Dop853::new(1, opts);
        let mut y = vec![c(1.0, 0.0)];
        let err = s.advance(|_, y, dy| dy[0] = c(0.0, -50.0) * y[0], 0.0, 100.0, &mut y);
        assert!(matches!(err, Err(Error::StepUnderflow { .. })));
    }
}
