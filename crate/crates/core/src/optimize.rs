//! Derivative-free minimization: downhill bracketing, Brent line searches
//! (golden section with parabolic steps) and cyclic coordinate descent.

use serde::Serialize;

use crate::{Error, Result};

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// A bracket `a < b < c` (or reversed) with `f(b) ≤ min(f(a), f(c))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub fb: f64,
}

/// Walks downhill from `x0` in steps growing by the golden ratio until the
/// objective rises or a bound is reached.
pub fn bracket_minimum<F>(f: &mut F, x0: f64, f0: f64, step: f64, lo: f64, hi: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= x0 && x0 <= hi) || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "start {x0} outside [{lo}, {hi}] or non-positive step {step}"
        )));
    }
    let clamp = |x: f64| x.clamp(lo, hi);
    let mut dir = 1.0;
    let mut x1 = clamp(x0 + step);
    let mut f1 = if x1 == x0 { f64::INFINITY } else { f(x1)? };
    if f1 > f0 {
        let xm = clamp(x0 - step);
        let fm = if xm == x0 { f64::INFINITY } else { f(xm)? };
        if fm >= f0 {
            return Ok(Bracket { a: xm, b: x0, c: x1, fb: f0 });
        }
        dir = -1.0;
        x1 = xm;
        f1 = fm;
    }
    // x0 → x1 is downhill; keep going.
    let (mut xa, mut xb, mut fb) = (x0, x1, f1);
    let mut width = (x1 - x0).abs();
    loop {
        width *= GOLD;
        let xc = clamp(xb + dir * width);
        if xc == xb {
            // Minimum at the bound.
            return Ok(Bracket { a: xa, b: xb, c: xb, fb });
        }
        let fc = f(xc)?;
        if fc >= fb {
            return Ok(Bracket { a: xa, b: xb, c: xc, fb });
        }
        xa = xb;
        xb = xc;
        fb = fc;
    }
}

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineMinimum {
    pub x: f64,
    pub f: f64,
    pub evaluations: usize,
}

/// Brent minimization inside a bracket to absolute tolerance `xtol`.
pub fn brent<F>(f: &mut F, bracket: Bracket, xtol: f64, max_iter: usize) -> Result<LineMinimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if bracket.a < bracket.c {
        (bracket.a, bracket.c)
    } else {
        (bracket.c, bracket.a)
    };
    let mut x = bracket.b;
    let (mut w, mut v) = (x, x);
    let mut fx = bracket.fb;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evaluations = 0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = xtol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u)?;
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(LineMinimum { x, f: fx, evaluations })
}

/// Bracketing followed by Brent refinement, starting from a known value.
pub fn line_minimize<F>(
    f: &mut F,
    x0: f64,
    f0: f64,
    step: f64,
    bounds: (f64, f64),
    xtol: f64,
) -> Result<LineMinimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut count = 0usize;
    let mut counted = |x: f64| {
        count += 1;
        f(x)
    };
    let br = bracket_minimum(&mut counted, x0, f0, step, bounds.0, bounds.1)?;
    let m = if br.a == br.c || br.b == br.c || br.a == br.b {
        LineMinimum { x: br.b, f: br.fb, evaluations: 0 }
    } else {
        brent(&mut counted, br, xtol, 200)?
    };
    Ok(LineMinimum { evaluations: count, ..m })
}

/// One free parameter of a coordinate-descent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coordinate {
    pub name: String,
    pub step: f64,
    pub lo: f64,
    pub hi: f64,
    pub xtol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub round: usize,
    pub coordinate: String,
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub rounds: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// The first round did not lower the objective.
    pub no_progress: bool,
    pub trace: Vec<TraceEntry>,
}

/// Cyclic line searches over each coordinate until a full round lowers the
/// objective by less than `ftol` or `max_rounds` is reached.
pub fn coordinate_descent<F>(
    mut f: F,
    x0: &[f64],
    coords: &[Coordinate],
    ftol: f64,
    max_rounds: usize,
) -> Result<DescentResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.len() != coords.len() {
        return Err(Error::Dimension {
            expected: coords.len(),
            actual: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let f_start = fx;
    let mut evaluations = 1;
    let mut trace = vec![TraceEntry {
        round: 0,
        coordinate: "start".into(),
        x: x.clone(),
        objective: fx,
    }];
    let mut rounds = 0;
    let mut converged = false;
    let mut no_progress = false;
    while rounds < max_rounds {
        rounds += 1;
        let f_round = fx;
        for (k, c) in coords.iter().enumerate() {
            let mut line = |v: f64| {
                let mut y = x.clone();
                y[k] = v;
                f(&y)
            };
            let m = line_minimize(&mut line, x[k], fx, c.step, (c.lo, c.hi), c.xtol)?;
            evaluations += m.evaluations;
            if m.f < fx {
                x[k] = m.x;
                fx = m.f;
            }
            trace.push(TraceEntry {
                round: rounds,
                coordinate: c.name.clone(),
                x: x.clone(),
                objective: fx,
            });
        }
        if rounds == 1 && fx >= f_start {
            no_progress = true;
            break;
        }
        if f_round - fx < ftol {
            converged = true;
            break;
        }
    }
    Ok(DescentResult {
        x,
        objective: fx,
        rounds,
        evaluations,
        converged,
        no_progress,
        trace,
    })
}
