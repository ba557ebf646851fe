//! Independent closed forms shared by the oracle and acceptance suites.

use exciton_core::dimer::DimerParams;

/// Static dimer, equal site decay: sink population as t -> infinity.
pub fn static_oracle(j: f64, g: f64, gs: f64) -> f64 {
    gs * j * j / ((2.0 * g + gs) * (g * (g + gs) + j * j))
}

/// Site and sink populations of the driven dimer with gamma1 = gamma2 +
/// gamma_sink, on a uniform grid of step `h`. The coupling phase and the
/// sink integral use composite Simpson rules.
pub struct GammaOracle {
    h: f64,
    p1: Vec<f64>,
    p2: Vec<f64>,
    sink: Vec<f64>,
}

impl GammaOracle {
    pub fn new(p: &DimerParams, t_end: f64, h: f64) -> Self {
        let j = |t: f64| p.j0 / (1.0 - 2.0 * p.a * (p.omega * t + p.phi).sin()).powi(3);
        let gamma = p.gamma1;
        let steps = (t_end / h).round() as usize;
        let mut theta = vec![0.0; steps + 1];
        for k in 0..steps {
            let t = k as f64 * h;
            theta[k + 1] = theta[k] + h / 6.0 * (j(t) + 4.0 * j(t + 0.5 * h) + j(t + h));
        }
        let decay = |k: usize| (-2.0 * gamma * k as f64 * h).exp();
        let p1: Vec<f64> = (0..=steps).map(|k| decay(k) * theta[k].cos().powi(2)).collect();
        let p2: Vec<f64> = (0..=steps).map(|k| decay(k) * theta[k].sin().powi(2)).collect();
        let mut sink = vec![0.0; steps + 1];
        for k in (0..steps.saturating_sub(1)).step_by(2) {
            let area = h / 3.0 * (p2[k] + 4.0 * p2[k + 1] + p2[k + 2]);
            // odd node: interpolating quadratic integrated over the first half panel
            let half = h / 12.0 * (5.0 * p2[k] + 8.0 * p2[k + 1] - p2[k + 2]);
            sink[k + 1] = sink[k] + 2.0 * p.gamma_sink * half;
            sink[k + 2] = sink[k] + 2.0 * p.gamma_sink * area;
        }
        Self { h, p1, p2, sink }
    }

    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let k = (t / self.h).round() as usize;
        (self.p1[k], self.p2[k], self.sink[k])
    }
}

/// Five parameter sets obeying gamma1 = gamma2 + gamma_sink.
pub fn gamma_sets() -> [DimerParams; 5] {
    let base = DimerParams {
        j0: 1.0,
        a: 0.25,
        omega: 4.54,
        phi: std::f64::consts::FRAC_PI_2,
        gamma1: 0.6,
        gamma2: 0.1,
        gamma_sink: 0.5,
    };
    [
        base,
        DimerParams {
            a: 0.1,
            omega: 1.0,
            phi: 0.0,
            ..base
        },
        DimerParams {
            a: 0.3,
            omega: 2.5,
            phi: 1.0,
            gamma1: 0.3,
            gamma2: 0.0,
            gamma_sink: 0.3,
            ..base
        },
        DimerParams {
            j0: 0.5,
            a: 0.2,
            omega: 7.0,
            phi: 4.0,
            gamma1: 0.25,
            gamma2: 0.05,
            gamma_sink: 0.2,
        },
        DimerParams {
            j0: 2.0,
            a: 0.0,
            omega: 3.0,
            gamma1: 1.0,
            gamma2: 0.4,
            gamma_sink: 0.6,
            ..base
        },
    ]
}
