//! Dormand–Prince 5(4) stepper with PI step-size control and the
//! fourth-order continuous extension of Hairer, Nørsett and Wanner.

use nalgebra::SVector;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepError<E> {
    /// The step size fell below `h_min` while trying to satisfy the tolerance.
    Underflow { t: f64, h: f64 },
    NonFinite { t: f64 },
    /// The right-hand side kept failing until the step size underflowed.
    Rhs { t: f64, error: E },
}

/// An accepted step together with its interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y1: SVector<f64, N>,
    rcont: [SVector<f64, N>; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Fourth-order interpolant on `[t0, t1]`.
    pub fn interpolate(&self, t: f64) -> SVector<f64, N> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        r1 + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s
    }
}

/// Adaptive explicit integrator state.
pub struct DormandPrince<const N: usize> {
    opts: StepperOptions,
    t: f64,
    y: SVector<f64, N>,
    k1: Option<SVector<f64, N>>,
    h: f64,
    err_old: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> DormandPrince<N> {
    pub fn new(t0: f64, y0: SVector<f64, N>, opts: StepperOptions) -> Self {
        Self {
            opts,
            t: t0,
            y: y0,
            k1: None,
            h: opts.h_init,
            err_old: 1e-4,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &SVector<f64, N> {
        &self.y
    }

    fn error_norm(&self, y1: &SVector<f64, N>, err: &SVector<f64, N>) -> f64 {
        let sum: f64 = (0..N)
            .map(|i| {
                let sk = self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs().max(y1[i].abs());
                (err[i] / sk).powi(2)
            })
            .sum();
        (sum / N as f64).sqrt()
    }

    /// Takes one accepted step without passing `t_end`.
    pub fn step<E, F>(&mut self, f: &mut F, t_end: f64) -> Result<DenseStep<N>, StepError<E>>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    {
        let t = self.t;
        let y = self.y;
        let k1 = match self.k1 {
            Some(k) => k,
            None => f(t, &y).map_err(|error| StepError::Rhs { t, error })?,
        };
        let mut last_rejection_was_rhs: Option<E> = None;
        let mut rejected_here = false;

        loop {
            let remaining = t_end - t;
            let mut h = self.h.min(self.opts.h_max);
            let final_step = h >= remaining;
            if final_step {
                h = remaining;
            } else if h < self.opts.h_min {
                return Err(match last_rejection_was_rhs.take() {
                    Some(error) => StepError::Rhs { t, error },
                    None => StepError::Underflow { t, h },
                });
            }

            let stages = (|| -> Result<_, E> {
                let k2 = f(t + C2 * h, &(y + k1 * (h * A21)))?;
                let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h))?;
                let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
                let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h))?;
                let k6 = f(
                    t + h,
                    &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
                )?;
                let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
                let k7 = f(t + h, &y1)?;
                Ok((k2, k3, k4, k5, k6, k7, y1))
            })();

            let (_k2, k3, k4, k5, k6, k7, y1) = match stages {
                Ok(s) => s,
                Err(e) => {
                    last_rejection_was_rhs = Some(e);
                    self.rejected += 1;
                    rejected_here = true;
                    self.h = h * 0.25;
                    if final_step && self.h < self.opts.h_min {
                        return Err(StepError::Rhs {
                            t,
                            error: last_rejection_was_rhs.take().unwrap(),
                        });
                    }
                    continue;
                }
            };

            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let err = self.error_norm(&y1, &err_vec);
            let finite = y1.iter().all(|v| v.is_finite());

            if !err.is_finite() || !finite {
                self.rejected += 1;
                rejected_here = true;
                self.h = h * MIN_SHRINK;
                if self.h < self.opts.h_min {
                    return Err(StepError::NonFinite { t });
                }
                continue;
            }

            let expo = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo);
            if err <= 1.0 {
                let mut fac = fac11 / self.err_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / MAX_GROWTH, 1.0 / MIN_SHRINK);
                let mut h_new = h / fac;
                if rejected_here {
                    h_new = h_new.min(h);
                }
                self.err_old = err.max(1e-4);

                let t1 = if final_step { t_end } else { t + h };
                let r2 = y1 - y;
                let r3 = k1 * h - r2;
                let r4 = r2 - k7 * h - r3;
                let r5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
                let dense = DenseStep {
                    t0: t,
                    t1,
                    y1,
                    rcont: [y, r2, r3, r4, r5],
                };

                self.t = t1;
                self.y = y1;
                self.k1 = Some(k7);
                // Keep the proposal from a clipped final step from shrinking later steps.
                if !final_step {
                    self.h = h_new;
                } else {
                    self.h = self.h.max(h_new);
                }
                self.accepted += 1;
                return Ok(dense);
            }

            self.rejected += 1;
            rejected_here = true;
            self.h = h / (1.0 / MIN_SHRINK).min(fac11 / SAFETY);
            last_rejection_was_rhs = None;
        }
    }
}
