//! Dormand–Prince 5(4) embedded Runge–Kutta integrator with adaptive step
//! size control.

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)` on a flat real vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Longest step that cannot skip over features of an explicitly
    /// time-dependent right-hand side.
    fn max_step(&self) -> f64 {
        f64::INFINITY
    }
}

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

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct DormandPrince {
    rel_tol: f64,
    abs_tol: f64,
    t: f64,
    h: f64,
    h_max: f64,
    y: Vec<f64>,
    y_new: Vec<f64>,
    stage: Vec<f64>,
    k: [Vec<f64>; 7],
    accepted: usize,
    rejected: usize,
}

impl DormandPrince {
    pub fn new(dim: usize, rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            t: 0.0,
            h: 0.0,
            h_max: f64::INFINITY,
            y: vec![0.0; dim],
            y_new: vec![0.0; dim],
            stage: vec![0.0; dim],
            k: std::array::from_fn(|_| vec![0.0; dim]),
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    fn error_scale(&self, a: f64, b: f64) -> f64 {
        self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }

    /// Reset to `(t0, y0)` and choose a starting step.
    pub fn init<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, y0: &[f64]) -> Result<()> {
        if y0.len() != self.y.len() || sys.dim() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                found: y0.len(),
            });
        }
        self.t = t0;
        self.y.copy_from_slice(y0);
        self.accepted = 0;
        self.rejected = 0;
        self.h_max = sys.max_step();
        let [k1, k2, ..] = &mut self.k;
        sys.rhs(t0, &self.y, k1)?;

        // Initial step heuristic (Hairer, Nørsett & Wanner, II.4).
        let n = self.y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (y, k) in self.y.iter().zip(k1.iter()) {
            let sc = self.abs_tol + self.rel_tol * y.abs();
            d0 += (y / sc).powi(2);
            d1 += (k / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for ((s, y), k) in self.stage.iter_mut().zip(&self.y).zip(k1.iter()) {
            *s = y + h0 * k;
        }
        sys.rhs(t0 + h0, &self.stage, k2)?;
        let mut d2 = 0.0;
        for i in 0..self.y.len() {
            let sc = self.abs_tol + self.rel_tol * self.y[i].abs();
            d2 += ((k2[i] - k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        self.h = (100.0 * h0).min(h1).min(self.h_max);
        Ok(())
    }

    /// Advance by one accepted step, never past `t_stop`.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, t_stop: f64) -> Result<()> {
        let dim = self.y.len();
        let mut reject_streak = false;
        loop {
            let remaining = t_stop - self.t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            let h_min = 16.0 * f64::EPSILON * self.t.abs().max(1.0);
            if h < h_min && !clipped {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            let t = self.t;
            {
                let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
                let y = &self.y;
                let s = &mut self.stage;
                for i in 0..dim {
                    s[i] = y[i] + h * A21 * k1[i];
                }
                sys.rhs(t + C2 * h, s, k2)?;
                for i in 0..dim {
                    s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                sys.rhs(t + C3 * h, s, k3)?;
                for i in 0..dim {
                    s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                sys.rhs(t + C4 * h, s, k4)?;
                for i in 0..dim {
                    s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                sys.rhs(t + C5 * h, s, k5)?;
                for i in 0..dim {
                    s[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                sys.rhs(t + h, s, k6)?;
                for i in 0..dim {
                    self.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
                }
                sys.rhs(t + h, &self.y_new, k7)?;
            }

            let mut err = 0.0;
            for i in 0..dim {
                let k = &self.k;
                let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = self.error_scale(self.y[i], self.y_new[i]);
                err = f64::max(err, (e / sc).abs());
            }

            if !err.is_finite() {
                self.rejected += 1;
                self.h = h * MIN_FACTOR;
                reject_streak = true;
                continue;
            }

            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let factor = if reject_streak { factor.min(1.0) } else { factor };
                self.t = if clipped { t_stop } else { t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                // first-same-as-last
                let [k1, .., k7] = &mut self.k;
                std::mem::swap(k1, k7);
                // a clipped step says nothing about the natural step length
                if !clipped {
                    self.h = (h * factor).min(self.h_max);
                }
                self.accepted += 1;
                return Ok(());
            }
            self.rejected += 1;
            reject_streak = true;
            self.h = h * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[0];
            Ok(())
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    struct Explosive;
    impl OdeSystem for Explosive {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        }
    }

    fn run<S: OdeSystem>(sys: &mut S, y0: &[f64], t_end: f64, tol: f64) -> Result<DormandPrince> {
        let mut dp = DormandPrince::new(y0.len(), tol, tol);
        dp.init(sys, 0.0, y0)?;
        while dp.t() < t_end {
            dp.step(sys, t_end)?;
        }
        Ok(dp)
    }

    #[test]
    fn exponential_decay() {
        let dp = run(&mut Decay, &[1.0], 5.0, 1e-10).unwrap();
        assert_eq!(dp.t(), 5.0);
        assert!((dp.y()[0] - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_over_many_periods() {
        let t_end = 20.0 * std::f64::consts::PI;
        let dp = run(&mut Oscillator, &[1.0, 0.0], t_end, 1e-10).unwrap();
        assert!((dp.y()[0] - 1.0).abs() < 1e-7);
        assert!(dp.y()[1].abs() < 1e-7);
    }

    #[test]
    fn tighter_tolerance_converges() {
        let coarse = run(&mut Oscillator, &[1.0, 0.0], 10.0, 1e-6).unwrap();
        let fine = run(&mut Oscillator, &[1.0, 0.0], 10.0, 1e-11).unwrap();
        let exact = 10f64.cos();
        assert!((fine.y()[0] - exact).abs() < (coarse.y()[0] - exact).abs());
        assert!(fine.accepted_steps() > coarse.accepted_steps());
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y^2 from y = 1 diverges at t = 1
        let err = run(&mut Explosive, &[1.0], 2.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::StepSizeUnderflow { .. }), "{err:?}");
    }

    #[test]
    fn dimension_checked() {
        let mut dp = DormandPrince::new(3, 1e-8, 1e-8);
        assert!(matches!(
            dp.init(&mut Decay, 0.0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
