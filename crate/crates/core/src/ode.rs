//! Adaptive Dormand–Prince 5(4) integration of complex vector ODEs.
//!
//! Steps never straddle a breakpoint, so piecewise drives are integrated one
//! smooth segment at a time; within a segment the right-hand side sees the
//! one-sided limits at the segment ends.

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            max_steps: 50_000_000,
        }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
const CN: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rms_norm<T: Real>(v: &[C<T>], scale: impl Fn(usize) -> T) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let mut acc = T::zero();
    for (i, x) in v.iter().enumerate() {
        let r = x.norm() / scale(i);
        acc += r * r;
    }
    (acc / T::from_usize_lossy(v.len())).sqrt()
}

/// Integrates `y' = rhs(t, y)` from `t0`, returning the state at every entry of
/// `outputs` (non-decreasing, all `>= t0`). `on_step` sees every accepted step.
pub fn integrate<T, F, O>(
    mut rhs: F,
    t0: T,
    y0: &[C<T>],
    outputs: &[T],
    breakpoints: &[T],
    opts: OdeOptions<T>,
    mut on_step: O,
) -> Result<Vec<Vec<C<T>>>>
where
    T: Real,
    F: FnMut(T, &[C<T>], &mut [C<T>]) -> Result<()>,
    O: FnMut(T, &[C<T>]),
{
    for w in outputs.windows(2) {
        if !(w[1] >= w[0]) {
            return Err(Error::Grid("output times must be non-decreasing".into()));
        }
    }
    if let Some(first) = outputs.first() {
        if *first < t0 {
            return Err(Error::Grid("output times precede the initial time".into()));
        }
    }
    let t_end = match outputs.last() {
        Some(t) => *t,
        None => return Ok(Vec::new()),
    };

    let mut stops: Vec<T> = outputs
        .iter()
        .chain(breakpoints.iter())
        .copied()
        .filter(|s| *s > t0 && *s <= t_end)
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite stop"));
    stops.dedup();

    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut result = Vec::with_capacity(outputs.len());
    let mut out_idx = 0;
    while out_idx < outputs.len() && outputs[out_idx] == t0 {
        result.push(y.clone());
        out_idx += 1;
    }

    let mut k: Vec<Vec<C<T>>> = vec![vec![C::new(T::zero(), T::zero()); n]; 7];
    let mut ytmp = vec![C::new(T::zero(), T::zero()); n];
    let mut ynew = vec![C::new(T::zero(), T::zero()); n];
    let mut h: Option<T> = None;
    let mut steps = 0usize;
    let eps = T::epsilon();

    for &stop in &stops {
        let lo = t;
        let hi = stop;
        let span = hi - lo;
        let guard = T::lit(8.0) * eps * T::one().max(lo.abs()).max(hi.abs());
        let clamp = |s: T| -> T {
            if span > guard + guard {
                s.max(lo + guard).min(hi - guard)
            } else {
                (lo + hi) / (T::one() + T::one())
            }
        };

        rhs(clamp(t), &y, &mut k[0])?;
        let mut hs = match h {
            Some(prev) => prev.min(span),
            None => {
                let d0 = rms_norm(&y, |_| T::one());
                let d1 = rms_norm(&k[0], |_| T::one());
                let guess = if d0 > T::lit(1e-5) && d1 > T::lit(1e-5) {
                    T::lit(0.01) * d0 / d1
                } else {
                    T::lit(1e-4) * span.max(T::lit(1e-3))
                };
                guess.min(span)
            }
        };

        while t < hi {
            if steps >= opts.max_steps {
                return Err(Error::StepUnderflow { t: t.as_f64() });
            }
            let remaining = hi - t;
            let last = hs >= remaining * (T::one() - T::lit(1e-12));
            if last {
                hs = remaining;
            }
            if hs <= T::lit(16.0) * eps * T::one().max(t.abs()) && !last {
                return Err(Error::StepUnderflow { t: t.as_f64() });
            }

            for stage in 0..6 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        let a = A[stage][j];
                        if a != 0.0 {
                            acc += kj[i] * (hs * T::lit(a));
                        }
                    }
                    if stage == 5 {
                        ynew[i] = acc;
                    } else {
                        ytmp[i] = acc;
                    }
                }
                let ts = if stage == 5 && last {
                    hi
                } else {
                    t + hs * T::lit(CN[stage])
                };
                let src = if stage == 5 { &ynew } else { &ytmp };
                rhs(clamp(ts), src, &mut k[stage + 1])?;
            }

            let err = rms_norm(
                &(0..n)
                    .map(|i| {
                        let mut e = C::new(T::zero(), T::zero());
                        for (j, kj) in k.iter().enumerate() {
                            if E[j] != 0.0 {
                                e += kj[i] * (hs * T::lit(E[j]));
                            }
                        }
                        e
                    })
                    .collect::<Vec<_>>(),
                |i| opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm()),
            );
            steps += 1;
            if !err.is_finite() {
                hs = hs * T::lit(0.2);
                continue;
            }

            if err <= T::one() {
                t = if last { hi } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                on_step(t, &y);
                let fac = if err == T::zero() {
                    T::lit(5.0)
                } else {
                    (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
                };
                let proposal = hs * fac;
                if last {
                    h = Some(proposal.max(hs));
                } else {
                    hs = proposal;
                    h = Some(hs);
                }
            } else {
                let fac = (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2));
                hs = hs * fac.min(T::one());
            }
        }

        while out_idx < outputs.len() && outputs[out_idx] == stop {
            result.push(y.clone());
            out_idx += 1;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let out = integrate(
            |_t, y, dy| {
                dy[0] = y[0] * C::new(-0.3, 2.0);
                Ok(())
            },
            0.0,
            &[C::new(1.0, 0.0)],
            &grid,
            &[],
            OdeOptions::with_tol(1e-12),
            |_, _| {},
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&out) {
            let exact = (C::new(-0.3, 2.0) * *t).exp();
            assert!((y[0] - exact).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn step_discontinuity_is_resolved_at_breakpoint() {
        // y' = 1 on [0, 1], y' = 0 afterwards.
        let grid = [0.0, 0.7, 2.0];
        let out = integrate(
            |t: f64, _y, dy| {
                dy[0] = C::new(if t <= 1.0 { 1.0 } else { 0.0 }, 0.0);
                Ok(())
            },
            0.0,
            &[C::new(0.0, 0.0)],
            &grid,
            &[1.0],
            OdeOptions::with_tol(1e-10),
            |_, _| {},
        )
        .unwrap();
        assert!((out[1][0].re - 0.7).abs() < 1e-12);
        assert!((out[2][0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let out = integrate(
            |_t: f32, y, dy| {
                dy[0] = y[0] * C::new(0.0f32, 1.0);
                Ok(())
            },
            0.0f32,
            &[C::new(1.0f32, 0.0)],
            &[1.0f32],
            &[],
            OdeOptions::with_tol(1e-5f32),
            |_, _| {},
        )
        .unwrap();
        assert!((out[0][0] - C::new(1.0f32.cos(), 1.0f32.sin())).norm() < 1e-4);
    }

    #[test]
    fn rejects_unsorted_outputs() {
        let r = integrate(
            |_t: f64, _y, _dy| Ok(()),
            0.0,
            &[C::new(0.0, 0.0)],
            &[1.0, 0.5],
            &[],
            OdeOptions::with_tol(1e-8),
            |_, _| {},
        );
        assert!(matches!(r, Err(Error::Grid(_))));
    }
}
