//! Parameter scans over the moving chain and their static references.
//!
//! The enhancement of a run is its asymptotic sink population minus that of
//! a resting reference chain; [`Baseline`] selects the reference couplings.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::dimer::static_sink_population;
use crate::dynamics::{propagate_with, static_bonds_sink_population, ChannelSpec, IntegratorConfig, Sampling};
use crate::error::{Error, Result};
use crate::model::{ChainSpec, Kinematics, MotionProfile, VibronicCoupling};
use crate::numerics::{bisect, golden_section_max};
use crate::pool::WorkerPool;

/// Relative bracket width at which golden-section refinement stops.
pub const REFINE_WIDTH: f64 = 1e-3;
/// Absolute tolerance of the critical dephasing rate.
pub const CRITICAL_RATE_TOL: f64 = 1e-4;
/// Largest dephasing rate probed when bracketing the critical rate.
pub const CRITICAL_RATE_LIMIT: f64 = 10.0;

/// Couplings of the resting reference chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Each bond frozen at the largest coupling it reaches.
    JMax,
    /// Each bond frozen at its period-averaged coupling.
    JAvg,
    /// The chain at rest.
    J0,
}

impl Baseline {
    pub fn kind(self) -> &'static str {
        match self {
            Baseline::JMax => "j_max",
            Baseline::JAvg => "j_avg",
            Baseline::J0 => "j0",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "j_max" => Ok(Baseline::JMax),
            "j_avg" => Ok(Baseline::JAvg),
            "j0" => Ok(Baseline::J0),
            other => Err(Error::invalid(
                "sweep.reference",
                format!("expected one of j_max, j_avg, j0, got `{other}`"),
            )),
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancementPoint {
    /// The swept parameter (frequency, dephasing rate, ...).
    pub param: f64,
    pub p_sink: f64,
    pub baseline: Baseline,
    pub p_static_ref: f64,
    /// Always `p_sink - p_static_ref`.
    pub delta: f64,
}

impl EnhancementPoint {
    pub fn new(param: f64, p_sink: f64, baseline: Baseline, p_static_ref: f64) -> Self {
        Self {
            param,
            p_sink,
            baseline,
            p_static_ref,
            delta: p_sink - p_static_ref,
        }
    }
}

/// Everything needed for one propagation from site 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ChainSpec,
    pub profile: MotionProfile,
    pub vib: VibronicCoupling,
    pub channels: ChannelSpec,
    pub integrator: IntegratorConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let kin = Kinematics::new(&self.spec, &self.profile)?;
        if self.vib.enabled && !kin.has_displacements() {
            return Err(Error::NotApplicable {
                operation: "exciton-vibration detuning",
                profile: self.profile.name(),
            });
        }
        self.channels.validate(self.spec.n_sites)?;
        self.integrator.validate()
    }

    pub fn with_profile(&self, profile: MotionProfile) -> Self {
        Self {
            profile,
            ..self.clone()
        }
    }

    pub fn with_dephasing(&self, gamma_deph: f64) -> Self {
        let mut out = self.clone();
        out.channels.gamma_deph = gamma_deph;
        out
    }

    fn final_only(&self) -> IntegratorConfig {
        self.integrator.clone().with_sampling(Sampling::FinalOnly)
    }

    /// Asymptotic sink population of the moving chain.
    pub fn sink_population(&self) -> Result<f64> {
        let kin = Kinematics::new(&self.spec, &self.profile)?;
        Ok(propagate_with(&kin, &self.vib, &self.channels, &self.final_only(), 1)?.asymptotic_sink)
    }

    /// Bond couplings of the reference chain.
    pub fn reference_couplings(&self, baseline: Baseline) -> Result<Vec<f64>> {
        let kin = Kinematics::new(&self.spec, &self.profile)?;
        match baseline {
            Baseline::JMax => Ok(kin.max_couplings()),
            Baseline::JAvg => kin.mean_couplings(),
            Baseline::J0 => Ok(vec![self.spec.j0; self.spec.n_bonds()]),
        }
    }

    /// Asymptotic sink population of the reference chain under the same
    /// channels (dephasing included). Uses the closed form where it applies.
    pub fn static_reference(&self, baseline: Baseline) -> Result<f64> {
        let couplings = self.reference_couplings(baseline)?;
        let ch = &self.channels;
        let closed_form = self.spec.n_sites == 2
            && ch.gamma[0] == ch.gamma[1]
            && ch.gamma_deph == 0.0
            && self.spec.site_energies[0] == self.spec.site_energies[1];
        if closed_form {
            static_sink_population(couplings[0], ch.gamma[0], ch.gamma_sink)
        } else {
            static_bonds_sink_population(&self.spec, &couplings, ch, &self.final_only())
        }
    }
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid", format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "sweep grid",
            format!("{name} grid must be finite and strictly increasing"),
        ));
    }
    Ok(())
}

/// Enhancement at every driving frequency of `grid` (`omega` for pairwise
/// motion, `omega0` for normal modes). The reference is computed once.
pub fn frequency_sweep(
    base: &Scenario,
    grid: &[f64],
    baseline: Baseline,
    pool: &WorkerPool,
) -> Result<Vec<EnhancementPoint>> {
    check_grid("frequency", grid)?;
    base.validate()?;
    let reference = base.static_reference(baseline)?;
    pool.try_map(grid, |&omega| {
        let p = sink_at_frequency(base, omega).map_err(|e| e.at(format!("omega = {omega}")))?;
        Ok(EnhancementPoint::new(omega, p, baseline, reference))
    })
}

fn sink_at_frequency(base: &Scenario, omega: f64) -> Result<f64> {
    base.with_profile(base.profile.with_frequency(omega)?).sink_population()
}

/// Sink populations over a deterministic phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEnsemble {
    pub omegas: Vec<f64>,
    pub phases: Vec<f64>,
    /// `curves[k][i]`: phase `k`, frequency `i`.
    pub curves: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub env_min: Vec<f64>,
    pub env_max: Vec<f64>,
}

/// Frequency sweeps for phases `offset + 2 pi k / n_phases`, aggregated.
pub fn phase_ensemble(
    base: &Scenario,
    grid: &[f64],
    n_phases: usize,
    offset: f64,
    pool: &WorkerPool,
) -> Result<PhaseEnsemble> {
    check_grid("frequency", grid)?;
    if n_phases == 0 {
        return Err(Error::invalid("sweep.n_phases", "need at least one phase"));
    }
    base.validate()?;
    let phases: Vec<f64> = (0..n_phases)
        .map(|k| offset + 2.0 * PI * k as f64 / n_phases as f64)
        .collect();
    let jobs: Vec<(f64, f64)> = phases
        .iter()
        .flat_map(|&phi| grid.iter().map(move |&omega| (phi, omega)))
        .collect();
    let flat = pool.try_map(&jobs, |&(phi, omega)| {
        let profile = base.profile.with_phase(phi)?.with_frequency(omega)?;
        base.with_profile(profile)
            .sink_population()
            .map_err(|e| e.at(format!("phi = {phi}, omega = {omega}")))
    })?;
    let curves: Vec<Vec<f64>> = flat.chunks(grid.len()).map(<[f64]>::to_vec).collect();
    let column = |i: usize| curves.iter().map(move |c| c[i]);
    let mean = (0..grid.len())
        .map(|i| column(i).sum::<f64>() / n_phases as f64)
        .collect();
    let env_min = (0..grid.len())
        .map(|i| column(i).fold(f64::INFINITY, f64::min))
        .collect();
    let env_max = (0..grid.len())
        .map(|i| column(i).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(PhaseEnsemble {
        omegas: grid.to_vec(),
        phases,
        curves,
        mean,
        env_min,
        env_max,
    })
}

/// Golden-section refinement around the best grid value. The maximum must
/// lie strictly inside the grid.
fn refine_peak<F>(grid: &[f64], values: &[f64], f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut i = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[i] {
            i = k;
        }
    }
    if i == 0 || i + 1 == grid.len() {
        return Err(Error::NoMaximumInBracket {
            lo: grid[0],
            hi: grid[grid.len() - 1],
        });
    }
    let (x, fx) = golden_section_max(f, grid[i - 1], grid[i + 1], REFINE_WIDTH)?;
    Ok(if fx >= values[i] { (x, fx) } else { (grid[i], values[i]) })
}

/// Frequency of largest enhancement: coarse sweep over `grid`, then
/// golden-section refinement between the neighbours of the best point.
pub fn optimal_frequency(
    base: &Scenario,
    grid: &[f64],
    baseline: Baseline,
    pool: &WorkerPool,
) -> Result<EnhancementPoint> {
    let coarse = frequency_sweep(base, grid, baseline, pool)?;
    refine_frequency(base, &coarse)
}

/// Golden-section refinement of an existing [`frequency_sweep`] result.
pub fn refine_frequency(base: &Scenario, coarse: &[EnhancementPoint]) -> Result<EnhancementPoint> {
    let first = coarse
        .first()
        .ok_or_else(|| Error::invalid("sweep grid", "frequency grid is empty"))?;
    let grid: Vec<f64> = coarse.iter().map(|p| p.param).collect();
    let values: Vec<f64> = coarse.iter().map(|p| p.p_sink).collect();
    let (omega, p) = refine_peak(&grid, &values, |omega| {
        sink_at_frequency(base, omega).map_err(|e| e.at(format!("omega = {omega}")))
    })?;
    Ok(EnhancementPoint::new(omega, p, first.baseline, first.p_static_ref))
}

/// Optimal frequency for each amplitude.
pub fn amplitude_scan(
    base: &Scenario,
    amplitudes: &[f64],
    grid: &[f64],
    baseline: Baseline,
    pool: &WorkerPool,
) -> Result<Vec<(f64, EnhancementPoint)>> {
    check_grid("amplitude", amplitudes)?;
    amplitudes
        .iter()
        .map(|&a| {
            let scenario = base.with_profile(base.profile.with_amplitude(a)?);
            let opt = optimal_frequency(&scenario, grid, baseline, pool).map_err(|e| e.at(format!("a = {a}")))?;
            Ok((a, opt))
        })
        .collect()
}

/// Enhancement with moving and reference chains sharing the dephasing rate.
pub fn dephasing_enhancement(base: &Scenario, gamma_deph: f64, baseline: Baseline) -> Result<EnhancementPoint> {
    let s = base.with_dephasing(gamma_deph);
    let at = |e: Error| e.at(format!("gamma_deph = {gamma_deph}"));
    let reference = s.static_reference(baseline).map_err(at)?;
    let p = s.sink_population().map_err(at)?;
    Ok(EnhancementPoint::new(gamma_deph, p, baseline, reference))
}

pub fn dephasing_sweep(
    base: &Scenario,
    grid: &[f64],
    baseline: Baseline,
    pool: &WorkerPool,
) -> Result<Vec<EnhancementPoint>> {
    check_grid("dephasing", grid)?;
    if grid[0] < 0.0 {
        return Err(Error::invalid(
            "sweep.gamma_deph",
            "dephasing rates must be non-negative",
        ));
    }
    base.validate()?;
    pool.try_map(grid, |&g| dephasing_enhancement(base, g, baseline))
}

/// Dephasing rate at which the enhancement of `base` (at its fixed
/// frequency) crosses zero.
pub fn critical_dephasing_rate(base: &Scenario, baseline: Baseline) -> Result<f64> {
    base.validate()?;
    let start = dephasing_enhancement(base, 0.0, baseline)?;
    if start.delta <= 0.0 {
        return Err(Error::NoEnhancement { delta: start.delta });
    }
    let mut lo = 0.0;
    let mut lo_delta = start.delta;
    let mut hi = 0.05;
    loop {
        let d = dephasing_enhancement(base, hi, baseline)?.delta;
        if d <= 0.0 {
            break;
        }
        if hi >= CRITICAL_RATE_LIMIT {
            return Err(Error::NoSignChange {
                limit: CRITICAL_RATE_LIMIT,
            });
        }
        lo = hi;
        lo_delta = d;
        hi = (2.0 * hi).min(CRITICAL_RATE_LIMIT);
    }
    bisect(
        |g| dephasing_enhancement(base, g, baseline).map(|p| p.delta),
        lo,
        hi,
        lo_delta,
        CRITICAL_RATE_TOL,
    )
}

/// One evaluated Gaussian-pulse configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePoint {
    pub v: f64,
    pub sigma: f64,
    pub p_sink: f64,
    pub baseline_value: f64,
    /// Always `p_sink - baseline_value`.
    pub delta: f64,
}

impl PulsePoint {
    fn new(v: f64, sigma: f64, p_sink: f64, baseline_value: f64) -> Self {
        Self {
            v,
            sigma,
            p_sink,
            baseline_value,
            delta: p_sink - baseline_value,
        }
    }
}

fn pulse_profile(base: &Scenario, v: f64, sigma: f64) -> Result<MotionProfile> {
    match base.profile {
        MotionProfile::GaussianPulse { strength, .. } => Ok(MotionProfile::GaussianPulse {
            strength,
            width: sigma,
            speed: v,
        }),
        ref other => Err(Error::NotApplicable {
            operation: "pulse scan",
            profile: other.name(),
        }),
    }
}

fn pulse_sink(base: &Scenario, v: f64, sigma: f64) -> Result<f64> {
    base.with_profile(pulse_profile(base, v, sigma)?)
        .sink_population()
        .map_err(|e| e.at(format!("v = {v}, sigma = {sigma}")))
}

/// Reference for pulses: the uniform chain at the pulse-peak coupling
/// `J0 / (1 - A)^3`.
pub fn pulse_reference(base: &Scenario) -> Result<f64> {
    pulse_profile(base, 0.0, 1.0)?;
    base.static_reference(Baseline::JMax)
}

/// Enhancement for every `(v, sigma)`, `v` varying slowest.
pub fn pulse_grid(base: &Scenario, v_grid: &[f64], sigma_grid: &[f64], pool: &WorkerPool) -> Result<Vec<PulsePoint>> {
    check_grid("v", v_grid)?;
    check_grid("sigma", sigma_grid)?;
    base.validate()?;
    let reference = pulse_reference(base)?;
    let jobs: Vec<(f64, f64)> = v_grid
        .iter()
        .flat_map(|&v| sigma_grid.iter().map(move |&s| (v, s)))
        .collect();
    pool.try_map(&jobs, |&(v, sigma)| {
        Ok(PulsePoint::new(v, sigma, pulse_sink(base, v, sigma)?, reference))
    })
}

/// Best pulse speed at fixed width: grid plus golden-section refinement.
pub fn pulse_speed_optimum(base: &Scenario, sigma: f64, v_grid: &[f64], pool: &WorkerPool) -> Result<PulsePoint> {
    let coarse = pulse_grid(base, v_grid, &[sigma], pool)?;
    let values: Vec<f64> = coarse.iter().map(|p| p.p_sink).collect();
    let (v, p) = refine_peak(v_grid, &values, |v| pulse_sink(base, v, sigma))?;
    Ok(PulsePoint::new(v, sigma, p, coarse[0].baseline_value))
}

/// Coordinate ascent from `start`, alternating golden-section searches
/// over `v` and `sigma` within `+- steps` of the current point.
pub fn pulse_refine(base: &Scenario, start: PulsePoint, steps: (f64, f64), rounds: usize) -> Result<PulsePoint> {
    let mut best = start;
    for _ in 0..rounds {
        let sigma = best.sigma;
        let (v, p) = golden_section_max(
            |v| pulse_sink(base, v, sigma),
            (best.v - steps.0).max(0.0),
            best.v + steps.0,
            REFINE_WIDTH,
        )?;
        if p > best.p_sink {
            best = PulsePoint::new(v, sigma, p, best.baseline_value);
        }
        let v = best.v;
        let (sigma, p) = golden_section_max(
            |s| pulse_sink(base, v, s),
            (best.sigma - steps.1).max(1e-3),
            best.sigma + steps.1,
            REFINE_WIDTH,
        )?;
        if p > best.p_sink {
            best = PulsePoint::new(v, sigma, p, best.baseline_value);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::time_averaged_coupling;

    fn dimer(a: f64, phi: f64) -> Scenario {
        Scenario {
            spec: ChainSpec::uniform(2).unwrap(),
            profile: MotionProfile::pairwise_uniform(1, a, 1.0, phi),
            vib: VibronicCoupling::disabled(),
            channels: ChannelSpec::uniform(2, 0.1, 0.5),
            integrator: IntegratorConfig::default(),
        }
    }

    #[test]
    fn baseline_names_round_trip() {
        for b in [Baseline::JMax, Baseline::JAvg, Baseline::J0] {
            assert_eq!(b.kind().parse::<Baseline>().unwrap(), b);
        }
        assert!("max".parse::<Baseline>().is_err());
    }

    #[test]
    fn dimer_references_use_closed_form() {
        let s = dimer(0.25, PI / 2.0);
        let jmax = s.static_reference(Baseline::JMax).unwrap();
        assert_eq!(jmax, static_sink_population(8.0, 0.1, 0.5).unwrap());
        let javg = s.static_reference(Baseline::JAvg).unwrap();
        let j = time_averaged_coupling(1.0, 0.25).unwrap();
        assert_eq!(javg, static_sink_population(j, 0.1, 0.5).unwrap());
    }

    #[test]
    fn numeric_reference_agrees_with_closed_form() {
        let mut s = dimer(0.25, 0.0);
        s.channels.gamma = vec![0.1, 0.1 + 1e-15];
        let numeric = s.static_reference(Baseline::J0).unwrap();
        let exact = static_sink_population(1.0, 0.1, 0.5).unwrap();
        assert!((numeric - exact).abs() < 1e-6);
    }

    #[test]
    fn delta_is_exact_difference() {
        let pts = frequency_sweep(&dimer(0.1, 0.3), &[1.0, 2.0], Baseline::J0, &WorkerPool::serial()).unwrap();
        for p in pts {
            assert_eq!(p.delta, p.p_sink - p.p_static_ref);
            assert_eq!(p.baseline, Baseline::J0);
        }
    }

    #[test]
    fn grids_validated() {
        let pool = WorkerPool::serial();
        assert!(frequency_sweep(&dimer(0.1, 0.0), &[], Baseline::J0, &pool).is_err());
        assert!(frequency_sweep(&dimer(0.1, 0.0), &[2.0, 1.0], Baseline::J0, &pool).is_err());
    }

    #[test]
    fn single_phase_ensemble_is_a_sweep() {
        let pool = WorkerPool::serial();
        let s = dimer(0.25, PI / 2.0);
        let grid = [3.0, 4.5];
        let e = phase_ensemble(&s, &grid, 1, PI / 2.0, &pool).unwrap();
        let sweep = frequency_sweep(&s, &grid, Baseline::J0, &pool).unwrap();
        for (i, point) in sweep.iter().enumerate() {
            assert_eq!(e.mean[i], point.p_sink);
            assert_eq!(e.env_min[i], e.env_max[i]);
        }
    }

    #[test]
    fn envelope_brackets_mean() {
        let e = phase_ensemble(
            &dimer(0.25, 0.0),
            &[0.5, 2.0, 5.0],
            4,
            0.0,
            &WorkerPool::new(2).unwrap(),
        )
        .unwrap();
        for i in 0..3 {
            assert!(e.env_min[i] <= e.mean[i] && e.mean[i] <= e.env_max[i]);
        }
        assert_eq!(e.phases.len(), 4);
        assert!((e.phases[1] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn optimum_at_grid_edge_rejected() {
        let r = optimal_frequency(
            &dimer(0.25, PI / 2.0),
            &[4.6, 4.8, 5.0],
            Baseline::JMax,
            &WorkerPool::serial(),
        );
        assert!(matches!(r, Err(Error::NoMaximumInBracket { .. })), "{r:?}");
    }

    #[test]
    fn no_enhancement_without_motion() {
        let s = dimer(0.0, 0.0);
        assert!(matches!(
            critical_dephasing_rate(&s, Baseline::JMax),
            Err(Error::NoEnhancement { .. })
        ));
    }

    #[test]
    fn pulse_scans_need_a_pulse() {
        let pool = WorkerPool::serial();
        assert!(matches!(
            pulse_grid(&dimer(0.1, 0.0), &[1.0], &[1.0], &pool),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn failing_point_is_named() {
        let mut s = dimer(0.25, 0.0);
        s.integrator.max_steps = 5;
        match frequency_sweep(&s, &[1.5], Baseline::J0, &WorkerPool::serial()) {
            Err(Error::AtGridPoint { point, .. }) => assert_eq!(point, "omega = 1.5"),
            other => panic!("{other:?}"),
        }
    }
}
