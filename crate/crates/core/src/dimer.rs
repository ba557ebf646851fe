//! Closed-form results for the driven dimer.
//!
//! Under the symmetric-decay condition `gamma1 = gamma2 + gamma_sink` (with
//! degenerate sites) the populations of the two sites follow from the
//! accumulated coupling phase `theta(t) = int_0^t J(t') dt'` alone.

use std::f64::consts::PI;

use crate::dynamics::ChannelSpec;
use crate::error::{Error, Result};
use crate::model::{time_averaged_coupling, ChainSpec, MotionProfile};
use crate::numerics;

const PHASE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerParams {
    pub j0: f64,
    pub a: f64,
    pub omega: f64,
    pub phi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_sink: f64,
}

impl DimerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            return Err(Error::invalid("j0", format!("must be positive, got {}", self.j0)));
        }
        if !(0.0..0.5).contains(&self.a) {
            return Err(Error::invalid(
                "a",
                format!("amplitude must satisfy 0 <= a < 1/2, got {}", self.a),
            ));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid(
                "omega",
                format!("must be non-negative, got {}", self.omega),
            ));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        for (name, g) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_sink", self.gamma_sink),
        ] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid(name, format!("must be non-negative, got {g}")));
            }
        }
        Ok(())
    }

    /// `Gamma`, provided the symmetric-decay condition holds.
    pub fn big_gamma(&self) -> Result<f64> {
        let rhs = self.gamma2 + self.gamma_sink;
        if (self.gamma1 - rhs).abs() <= 1e-12 * self.gamma1.abs().max(rhs.abs()).max(1.0) {
            Ok(self.gamma1)
        } else {
            Err(Error::GammaConditionViolated {
                gamma1: self.gamma1,
                gamma2: self.gamma2,
                gamma_sink: self.gamma_sink,
            })
        }
    }

    pub fn coupling(&self, t: f64) -> f64 {
        let s = 1.0 - 2.0 * self.a * (self.omega * t + self.phi).sin();
        self.j0 / (s * s * s)
    }

    /// Equivalent chain description for the numerical propagator.
    pub fn to_chain(&self) -> Result<(ChainSpec, MotionProfile, ChannelSpec)> {
        self.validate()?;
        let spec = ChainSpec::uniform(2)?.with_j0(self.j0)?;
        let profile = MotionProfile::pairwise_uniform(1, self.a, self.omega, self.phi);
        let channels = ChannelSpec {
            gamma: vec![self.gamma1, self.gamma2],
            gamma_sink: self.gamma_sink,
            gamma_deph: 0.0,
        };
        Ok((spec, profile, channels))
    }

    /// Quadrature piece length: at most an eighth of a period.
    fn piece(&self) -> f64 {
        if self.omega > 0.0 {
            (0.25 * PI / self.omega).min(0.5)
        } else {
            0.5
        }
    }

    fn phase_between(&self, t0: f64, t1: f64) -> f64 {
        numerics::integrate(|t| self.coupling(t), t0, t1, PHASE_TOL, PHASE_TOL)
    }

    /// `theta(t) = int_0^t J(t') dt'`.
    pub fn coupling_phase(&self, t: f64) -> f64 {
        let h = self.piece();
        let mut theta = 0.0;
        let mut s = 0.0;
        while s < t {
            let e = (s + h).min(t);
            theta += self.phase_between(s, e);
            s = e;
        }
        theta
    }
}

/// Asymptotic sink population of the static dimer with coupling `j`, equal
/// site decay `gamma` and sink rate `gamma_sink`.
pub fn static_sink_population(j: f64, gamma: f64, gamma_sink: f64) -> Result<f64> {
    let outer = 2.0 * gamma + gamma_sink;
    if outer == 0.0 {
        return Err(Error::DomainError("2 gamma + gamma_sink must be non-zero".into()));
    }
    if !(gamma >= 0.0 && gamma_sink >= 0.0) {
        return Err(Error::DomainError(format!(
            "rates must be non-negative (gamma = {gamma}, gamma_sink = {gamma_sink})"
        )));
    }
    let j2 = j * j;
    if j2 == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_sink * j2 / (outer * (gamma * (gamma + gamma_sink) + j2)))
}

fn populations_from_phase(theta: f64, big_gamma: f64, t: f64) -> (f64, f64) {
    let damp = (-2.0 * big_gamma * t).exp();
    let (s, c) = theta.sin_cos();
    (c * c * damp, s * s * damp)
}

/// Site populations `(P1, P2)` at time `t`, starting from site 1.
pub fn dimer_populations(params: &DimerParams, t: f64) -> Result<(f64, f64)> {
    params.validate()?;
    let big_gamma = params.big_gamma()?;
    if t < 0.0 {
        return Err(Error::DomainError(format!("time must be non-negative, got {t}")));
    }
    Ok(populations_from_phase(params.coupling_phase(t), big_gamma, t))
}

/// [`dimer_populations`] at every entry of the non-decreasing `times`,
/// accumulating the phase integral along the way.
pub fn dimer_trajectory(params: &DimerParams, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let big_gamma = params.big_gamma()?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::DomainError(
            "times must be non-negative and non-decreasing".into(),
        ));
    }
    let h = params.piece();
    let mut theta = 0.0;
    let mut s = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while s < t {
            let e = (s + h).min(t);
            theta += params.phase_between(s, e);
            s = e;
        }
        out.push(populations_from_phase(theta, big_gamma, t));
    }
    Ok(out)
}

/// `P_sink(t) = 2 gamma_sink int_0^t P2(t') dt'`.
pub fn analytic_sink_population(params: &DimerParams, t: f64) -> Result<f64> {
    params.validate()?;
    let big_gamma = params.big_gamma()?;
    if t < 0.0 {
        return Err(Error::DomainError(format!("time must be non-negative, got {t}")));
    }
    if params.gamma_sink == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let h = params.piece();
    let mut theta0 = 0.0;
    let mut s = 0.0;
    let mut total = 0.0;
    while s < t {
        let e = (s + h).min(t);
        let inner = |x: f64| {
            let theta = theta0 + params.phase_between(s, x);
            populations_from_phase(theta, big_gamma, x).1
        };
        total += numerics::integrate(inner, s, e, 1e-13, 1e-11);
        theta0 += params.phase_between(s, e);
        s = e;
    }
    Ok(2.0 * params.gamma_sink * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// Estimated driving frequency of the `m`-th maximum (`2 J_avg / (2m + 1)`)
/// or minimum (`J_avg / m`) of the transfer efficiency.
pub fn extremal_frequency(j0: f64, a: f64, kind: Extremum, m: u32) -> Result<f64> {
    let j_avg = time_averaged_coupling(j0, a)?;
    match kind {
        Extremum::Max => Ok(2.0 * j_avg / f64::from(2 * m + 1)),
        Extremum::Min if m == 0 => Err(Error::DomainError("minima are indexed from m = 1".into())),
        Extremum::Min => Ok(j_avg / f64::from(m)),
    }
}
