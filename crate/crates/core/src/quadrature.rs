//! Globally adaptive 21-point Gauss–Kronrod quadrature for complex-valued
//! integrands on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::{Error, Result};

// Kronrod abscissae on [-1, 1] (non-negative half, descending); the odd
// entries are the 10-point Gauss abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_795_222_560,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    /// Round-off floor included in `error`.
    floor: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn scaled_error(abs_diff: f64, resasc: f64, resabs: f64) -> f64 {
    let mut err = abs_diff;
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

fn kronrod21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = Complex64::new(0.0, 0.0);
    let mut abs_re = WGK[10] * fc.re.abs();
    let mut abs_im = WGK[10] * fc.im.abs();
    let mut vals = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 10];
    for (j, v) in vals.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let sum = f1 + f2;
        res_k += sum * WGK[j];
        if j % 2 == 1 {
            res_g += sum * WG[j / 2];
        }
        abs_re += WGK[j] * (f1.re.abs() + f2.re.abs());
        abs_im += WGK[j] * (f1.im.abs() + f2.im.abs());
        *v = (f1, f2);
    }
    let mean = res_k * 0.5;
    let mut asc_re = WGK[10] * (fc.re - mean.re).abs();
    let mut asc_im = WGK[10] * (fc.im - mean.im).abs();
    for (j, (f1, f2)) in vals.iter().enumerate() {
        asc_re += WGK[j] * ((f1.re - mean.re).abs() + (f2.re - mean.re).abs());
        asc_im += WGK[j] * ((f1.im - mean.im).abs() + (f2.im - mean.im).abs());
    }
    let h = half.abs();
    let diff = (res_k - res_g) * half;
    let err = scaled_error(diff.re.abs(), asc_re * h, abs_re * h)
        + scaled_error(diff.im.abs(), asc_im * h, abs_im * h);
    Piece {
        a,
        b,
        value: res_k * half,
        error: err,
        floor: 50.0 * f64::EPSILON * (abs_re + abs_im) * h,
    }
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal sub-intervals
/// and bisecting the worst interval until the summed error estimate is at
/// most `abs_tol`.
pub fn integrate<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
) -> Result<Quadrature> {
    const MAX_INTERVALS: usize = 20_000;
    if a == b {
        return Ok(Quadrature {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        });
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(2 * panels + 64);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { a + width * (i + 1) as f64 };
        heap.push(kronrod21(&mut f, lo, hi));
    }
    let total_error = |h: &BinaryHeap<Piece>| h.iter().map(|p| p.error).sum::<f64>();
    // Tolerances below twice the summed round-off floor cannot be met by
    // further bisection.
    let reachable = |h: &BinaryHeap<Piece>| abs_tol.max(2.0 * h.iter().map(|p| p.floor).sum::<f64>());
    let mut err = total_error(&heap);
    let mut target = reachable(&heap);
    while err > target && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod21(&mut f, worst.a, mid);
        let right = kronrod21(&mut f, mid, worst.b);
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Guard against drift of the running sum.
        if heap.len() % 256 == 0 {
            err = total_error(&heap);
            target = reachable(&heap);
        }
    }
    err = total_error(&heap);
    let target = reachable(&heap);
    let mut pieces = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = kahan_sum(pieces.iter().map(|p| p.value));
    if err > target {
        return Err(Error::Quadrature {
            achieved: err,
            tolerance: target,
        });
    }
    Ok(Quadrature {
        value,
        error: err,
        intervals: pieces.len(),
    })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
) -> Result<f64> {
    integrate(|t| Complex64::new(f(t), 0.0), a, b, panels, abs_tol).map(|q| q.value.re)
}

fn kahan_sum(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut c = Complex64::new(0.0, 0.0);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
