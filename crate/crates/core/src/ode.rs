//! Dormand–Prince 5(4) with absolute + relative error control and
//! Hairer's 4th-order continuous extension on every accepted step.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy)]
pub struct Options<T> {
    pub atol: T,
    pub rtol: T,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Options<T> {
    /// Same value for absolute and relative tolerance.
    pub fn with_tol(tol: T) -> Self {
        Self {
            atol: tol,
            rtol: tol,
            h0: None,
            h_max: None,
            max_steps: 2_000_000,
        }
    }
}

/// Coefficients of the dense interpolant on one accepted step.
#[derive(Debug, Clone)]
struct Segment<T> {
    t0: T,
    h: T,
    r: [Vec<T>; 5],
}

/// Solution with continuous output over `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution<T> {
    t0: T,
    t_end: T,
    dim: usize,
    ts: Vec<T>,
    ys: Vec<Vec<T>>,
    segs: Vec<Segment<T>>,
}

impl<T: Real> DenseSolution<T> {
    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Accepted step times, starting with `t0` and ending with `t_end`.
    pub fn times(&self) -> &[T] {
        &self.ts
    }

    /// States at the accepted step times.
    pub fn states(&self) -> &[Vec<T>] {
        &self.ys
    }

    pub fn last(&self) -> &[T] {
        self.ys.last().expect("non-empty solution")
    }

    fn segment_index(&self, t: T) -> usize {
        if self.segs.is_empty() {
            return 0;
        }
        let k = self.ts.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.segs.len() - 1)
    }

    /// Interpolated state at `t`; `None` outside `[t0, t_end]`.
    pub fn eval(&self, t: T) -> Option<Vec<T>> {
        let span = (self.t_end - self.t0).abs();
        let slack = span * lit(1e-12);
        if t < self.t0 - slack || t > self.t_end + slack {
            return None;
        }
        if self.segs.is_empty() {
            return Some(self.ys[0].clone());
        }
        let i = self.segment_index(t);
        if t == self.ts[i] {
            return Some(self.ys[i].clone());
        }
        let seg = &self.segs[i];
        let s = (t - seg.t0) / seg.h;
        let s1 = T::one() - s;
        Some(
            (0..self.dim)
                .map(|k| {
                    seg.r[0][k]
                        + s * (seg.r[1][k]
                            + s1 * (seg.r[2][k] + s * (seg.r[3][k] + s1 * seg.r[4][k])))
                })
                .collect(),
        )
    }

    /// One component of the interpolated state.
    pub fn eval_component(&self, t: T, k: usize) -> Option<T> {
        self.eval(t).map(|y| y[k])
    }

    /// First time `t > t0` where `g` crosses from positive to `≤ 0`, located by
    /// bisection on the dense output to relative accuracy `rel`.
    pub fn first_root<G: Fn(T, &[T]) -> T>(&self, g: G, rel: T) -> Option<T> {
        let mut prev = g(self.ts[0], &self.ys[0]);
        for i in 1..self.ts.len() {
            let cur = g(self.ts[i], &self.ys[i]);
            if prev > T::zero() && cur <= T::zero() {
                let (mut lo, mut hi) = (self.ts[i - 1], self.ts[i]);
                for _ in 0..200 {
                    let mid = lo + (hi - lo) * lit(0.5);
                    let y = self.eval(mid).expect("inside span");
                    if g(mid, &y) > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= rel * hi.abs().max(T::epsilon()) {
                        break;
                    }
                }
                return Some(lo + (hi - lo) * lit(0.5));
            }
            prev = cur;
        }
        None
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `f` writes the derivative into its third argument and may fail (for
/// instance when a tabulated profile is evaluated out of range).
pub fn integrate<T, F>(
    mut f: F,
    t0: T,
    y0: &[T],
    t_end: T,
    opts: &Options<T>,
) -> Result<DenseSolution<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    let dim = y0.len();
    let mut sol = DenseSolution {
        t0,
        t_end,
        dim,
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        segs: Vec::new(),
    };
    if t_end == t0 {
        return Ok(sol);
    }
    let dir = if t_end > t0 { T::one() } else { -T::one() };
    let span = (t_end - t0).abs();
    let a: Vec<Vec<T>> = A.iter().map(|r| r.iter().map(|&v| lit(v)).collect()).collect();
    let c: Vec<T> = C.iter().map(|&v| lit(v)).collect();
    let e: Vec<T> = E.iter().map(|&v| lit(v)).collect();
    let d: Vec<T> = D.iter().map(|&v| lit(v)).collect();

    let err_scale = |y0: &[T], y1: &[T], i: usize| -> T {
        opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs())
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    f(t, &y, &mut k[0])?;

    let mut h = match opts.h0 {
        Some(h) => h.abs(),
        None => {
            // Hairer's starting-step heuristic.
            let n = T::from_usize(dim.max(1)).unwrap();
            let d0 = ((0..dim).fold(T::zero(), |s, i| {
                let v = y[i] / err_scale(&y, &y, i);
                s + v * v
            }) / n)
                .sqrt();
            let d1 = ((0..dim).fold(T::zero(), |s, i| {
                let v = k[0][i] / err_scale(&y, &y, i);
                s + v * v
            }) / n)
                .sqrt();
            let h0 = if d0 < lit(1e-5) || d1 < lit(1e-5) {
                lit(1e-6)
            } else {
                lit::<T>(0.01) * d0 / d1
            };
            h0.min(span)
        }
    };
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let safety: T = lit(0.9);
    let mut ytmp = vec![T::zero(); dim];
    let mut y1 = vec![T::zero(); dim];
    let mut steps = 0usize;
    let mut last_rejected = false;

    while (t_end - t) * dir > T::zero() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                t_last: t.to_f64_lossy(),
                reason: "step budget exhausted".into(),
            });
        }
        if h > h_max {
            h = h_max;
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining * (T::one() - lit(1e-12));
        if last {
            h = remaining;
        }
        if h <= T::epsilon() * lit::<T>(16.0) * t.abs().max(span * lit(1e-3)) {
            return Err(Error::Integration {
                t_last: t.to_f64_lossy(),
                reason: "step size underflow".into(),
            });
        }
        let hs = h * dir;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + a[s][j] * kj[i];
                }
                ytmp[i] = y[i] + hs * acc;
            }
            let ts = if s == 6 { t + hs } else { t + c[s] * hs };
            f(ts, &ytmp, &mut k[s])?;
            if s == 6 {
                y1.copy_from_slice(&ytmp);
            }
        }
        let k7 = k[6].clone();

        let mut err = T::zero();
        for i in 0..dim {
            let mut ei = T::zero();
            for (s, ks) in k.iter().enumerate().take(6) {
                ei = ei + e[s] * ks[i];
            }
            ei = (ei + e[6] * k7[i]) * hs;
            let r = ei / err_scale(&y, &y1, i);
            err = err + r * r;
        }
        err = (err / T::from_usize(dim.max(1)).unwrap()).sqrt();
        if !err.is_finite() {
            h = h * lit(0.25);
            last_rejected = true;
            continue;
        }

        if err <= T::one() {
            let ydiff: Vec<T> = (0..dim).map(|i| y1[i] - y[i]).collect();
            let bspl: Vec<T> = (0..dim).map(|i| hs * k[0][i] - ydiff[i]).collect();
            let r3 = bspl.clone();
            let r4: Vec<T> = (0..dim)
                .map(|i| ydiff[i] - hs * k7[i] - bspl[i])
                .collect();
            let r5: Vec<T> = (0..dim)
                .map(|i| {
                    hs * (d[0] * k[0][i]
                        + d[2] * k[2][i]
                        + d[3] * k[3][i]
                        + d[4] * k[4][i]
                        + d[5] * k[5][i]
                        + d[6] * k7[i])
                })
                .collect();
            sol.segs.push(Segment {
                t0: t,
                h: hs,
                r: [y.clone(), ydiff, r3, r4, r5],
            });
            t = if last { t_end } else { t + hs };
            y.copy_from_slice(&y1);
            sol.ts.push(t);
            sol.ys.push(y.clone());
            k[0].copy_from_slice(&k7);

            let mut fac = if err == T::zero() {
                lit(10.0)
            } else {
                safety * err.powf(lit(-0.2))
            };
            fac = fac.min(lit(10.0)).max(lit(0.2));
            if last_rejected {
                fac = fac.min(T::one());
            }
            h = h * fac;
            last_rejected = false;
        } else {
            let fac = (safety * err.powf(lit(-0.2))).max(lit(0.2));
            h = h * fac;
            last_rejected = true;
        }
    }
    if dir < T::zero() {
        // Keep the time axis increasing for lookups.
        sol.ts.reverse();
        sol.ys.reverse();
        sol.segs.reverse();
        for seg in &mut sol.segs {
            seg.r = reanchor(&seg.r);
            seg.t0 = seg.t0 + seg.h;
            seg.h = -seg.h;
        }
        sol.t0 = t_end;
        sol.t_end = t0;
    }
    Ok(sol)
}

/// Rewrites `p(s) = r0 + s(r1 + (1−s)(r2 + s(r3 + (1−s) r4)))` in `σ = 1 − s`.
fn reanchor<T: Real>(r: &[Vec<T>; 5]) -> [Vec<T>; 5] {
    let r0 = r[0].iter().zip(&r[1]).map(|(a, b)| *a + *b).collect();
    let r1 = r[1].iter().map(|v| -*v).collect();
    let r2 = r[2].iter().zip(&r[3]).map(|(a, b)| *a + *b).collect();
    let r3 = r[3].iter().map(|v| -*v).collect();
    [r0, r1, r2, r3, r[4].clone()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = integrate(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            3.0,
            &Options::with_tol(1e-12),
        )
        .unwrap();
        assert!((sol.last()[0] - (-3.0f64).exp()).abs() < 1e-11);
        let mid = sol.eval(1.234).unwrap()[0];
        assert!((mid - (-1.234f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_root() {
        let sol = integrate(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            3.0,
            &Options::with_tol(1e-12),
        )
        .unwrap();
        let r = sol.first_root(|_, y| y[0], 1e-13).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            -2.0,
            &Options::with_tol(1e-12),
        )
        .unwrap();
        assert!((sol.eval(-2.0).unwrap()[0] - 2.0f64.cos()).abs() < 1e-10);
        assert!((sol.eval(-0.7).unwrap()[1] - 0.7f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn f32_runs() {
        let sol = integrate(
            |_t, y: &[f32], dy: &mut [f32]| {
                dy[0] = y[0];
                Ok(())
            },
            0.0f32,
            &[1.0],
            1.0,
            &Options::with_tol(1e-5),
        )
        .unwrap();
        assert!((sol.last()[0] - std::f32::consts::E).abs() < 1e-4);
    }

    #[test]
    fn rhs_error_propagates() {
        let r = integrate(
            |t, _y: &[f64], _dy: &mut [f64]| {
                if t > 0.5 {
                    Err(Error::Domain("outside".into()))
                } else {
                    Ok(())
                }
            },
            0.0,
            &[0.0],
            1.0,
            &Options::with_tol(1e-8),
        );
        assert!(r.is_err());
    }
}
