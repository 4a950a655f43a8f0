//! Adaptive embedded Runge–Kutta 5(4) (Dormand–Prince) with PI step
//! control and 5th-order dense output.
//!
//! The state is a `DVector`; the right-hand side writes its derivative in
//! place. A non-finite derivative makes the error estimate infinite, so the
//! step is rejected and the step size shrinks; if it underflows the solver
//! stops early with the `underflow` flag set instead of failing, leaving
//! truncation policy to the caller.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::float::Float;

const STAGES: usize = 7;

const A: [[f64; 6]; STAGES] = [
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

const C: [f64; STAGES] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

/// 5th-order weights (row 7 of A; FSAL).
const B: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output coefficients.
const D: [f64; STAGES] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Solver parameters.
#[derive(Debug, Clone, Copy)]
pub struct Rk45<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub max_steps: usize,
}

impl<T: Float> Default for Rk45<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::of(1e-9),
            abs_tol: T::of(1e-12),
            max_step: T::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

/// One accepted step with its interpolation polynomial.
#[derive(Debug, Clone)]
pub struct Segment<T> {
    pub t0: T,
    pub h: T,
    cont: [DVector<T>; 5],
}

impl<T: Float> Segment<T> {
    fn eval(&self, t: T) -> DVector<T> {
        let s = (t - self.t0) / self.h;
        let s1 = T::one() - s;
        let [c0, c1, c2, c3, c4] = &self.cont;
        c0 + (c1 + (c2 + (c3 + c4 * s1) * s) * s1) * s
    }
}

/// Piecewise-polynomial solution over the integrated span.
#[derive(Debug, Clone)]
pub struct OdeSolution<T> {
    pub segments: Vec<Segment<T>>,
    pub t0: T,
    pub t_reached: T,
    pub y_final: DVector<T>,
    /// Step size underflowed before reaching the requested end time.
    pub underflow: bool,
    pub accepted: usize,
    pub rejected: usize,
}

impl<T: Float> OdeSolution<T> {
    /// Evaluate the dense output at `t`, clamped to the integrated span.
    pub fn sample(&self, t: T) -> DVector<T> {
        if self.segments.is_empty() || t >= self.t_reached {
            return self.y_final.clone();
        }
        let mut lo = 0usize;
        let mut hi = self.segments.len() - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.segments[mid].t0 <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        self.segments[lo].eval(t)
    }
}

impl<T: Float> Rk45<T> {
    /// Integrate `y' = f(t, y)` from `t0` to `tf > t0`.
    pub fn solve<F>(&self, mut f: F, t0: T, tf: T, y0: &DVector<T>) -> Result<OdeSolution<T>>
    where
        F: FnMut(T, &DVector<T>, &mut DVector<T>),
    {
        if tf <= t0 {
            return Err(Error::HorizonNonpositive {
                value: (tf - t0).to_f64(),
            });
        }
        let n = y0.len();
        let span = tf - t0;
        let max_step = self.max_step.min(span);

        let a: [[T; 6]; STAGES] = A.map(|row| row.map(T::of));
        let b: [T; STAGES] = B.map(T::of);
        let c: [T; STAGES] = C.map(T::of);
        let e: [T; STAGES] = E.map(T::of);
        let d: [T; STAGES] = D.map(T::of);

        let safe = T::of(0.9);
        let beta = T::of(0.04);
        let expo1 = T::of(0.2) - beta * T::of(0.75);
        let fac_min = T::of(0.2);
        let fac_max = T::of(10.0);
        let mut facold = T::of(1e-4);

        let mut k: Vec<DVector<T>> = (0..STAGES).map(|_| DVector::zeros(n)).collect();
        let mut y = y0.clone();
        let mut y_stage = DVector::zeros(n);
        let mut y_next = DVector::zeros(n);
        let mut t = t0;
        let mut h = (span * T::of(1e-3)).min(max_step);
        let mut last_rejected = false;

        let mut segments = Vec::new();
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut underflow = false;

        f(t, &y, &mut k[0]);

        for _ in 0..self.max_steps {
            if t >= tf {
                break;
            }
            let tiny = T::default_epsilon() * T::of(16.0) * t.abs().max(T::one());
            if h < tiny {
                underflow = true;
                break;
            }
            if t + h > tf {
                h = tf - t;
            }

            for stage in 1..STAGES {
                y_stage.copy_from(&y);
                for j in 0..stage {
                    let w = a[stage][j];
                    if w != T::zero() {
                        y_stage.axpy(h * w, &k[j], T::one());
                    }
                }
                let (head, tail) = k.split_at_mut(stage);
                let _ = head;
                f(t + c[stage] * h, &y_stage, &mut tail[0]);
            }

            // 5th-order solution (b7 = 0) and embedded error estimate.
            y_next.copy_from(&y);
            for j in 0..STAGES {
                if b[j] != T::zero() {
                    y_next.axpy(h * b[j], &k[j], T::one());
                }
            }
            let mut err_sq = T::zero();
            for i in 0..n {
                let mut err_i = T::zero();
                for j in 0..STAGES {
                    err_i += e[j] * k[j][i];
                }
                err_i *= h;
                let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y_next[i].abs());
                let ratio = err_i / scale;
                err_sq += ratio * ratio;
            }
            let mut err = (err_sq / T::of(n as f64)).sqrt();
            if !(err == err) || err == T::INFINITY {
                // Non-finite derivative somewhere inside the step.
                err = T::INFINITY;
            }

            if err <= T::one() {
                // FSAL stage: derivative at the accepted endpoint.
                let (head, tail) = k.split_at_mut(STAGES - 1);
                let _ = head;
                f(t + h, &y_next, &mut tail[0]);

                let ydiff = &y_next - &y;
                let bspl = &k[0] * h - &ydiff;
                let mut dsum = DVector::zeros(n);
                for j in 0..STAGES {
                    if d[j] != T::zero() {
                        dsum.axpy(d[j], &k[j], T::one());
                    }
                }
                let cont3 = &ydiff - &k[STAGES - 1] * h - &bspl;
                segments.push(Segment {
                    t0: t,
                    h,
                    cont: [y.clone(), ydiff, bspl, cont3, dsum * h],
                });

                let fac11 = if err == T::zero() { T::zero() } else { err.powf(expo1) };
                // PI controller: divisor clamped so h grows by at most
                // 1/fac_min and shrinks by at most 1/fac_max per step.
                let fac = (fac11 / facold.powf(beta) / safe)
                    .max(T::one() / fac_max)
                    .min(T::one() / fac_min);
                facold = err.max(T::of(1e-4));
                accepted += 1;
                t += h;
                y.copy_from(&y_next);
                k.swap(0, STAGES - 1);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                h = h_new.min(max_step);
            } else {
                rejected += 1;
                last_rejected = true;
                if err == T::INFINITY {
                    h *= T::of(0.5);
                } else {
                    let fac11 = err.powf(expo1);
                    h /= (fac11 / safe).min(T::one() / fac_min);
                }
            }
        }

        if t < tf && !underflow {
            // Step budget exhausted.
            underflow = true;
        }

        Ok(OdeSolution {
            segments,
            t0,
            t_reached: t,
            y_final: y,
            underflow,
            accepted,
            rejected,
        })
    }
}
