//! Chain geometry and the instantaneous tight-binding Hamiltonian.
//!
//! Sites and bonds are numbered from 1 in the public free functions, so that
//! site `n` sits between bonds `n - 1` and `n`. Units follow the usual
//! convention `J0 = d0 = 1` unless a [`ChainSpec`] says otherwise.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Static description of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub n_sites: usize,
    /// Equilibrium nearest-neighbour spacing.
    pub d0: f64,
    pub site_energies: Vec<f64>,
    /// Coupling at the equilibrium spacing.
    pub j0: f64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, d0: f64, site_energies: Vec<f64>, j0: f64) -> Result<Self> {
        let spec = Self {
            n_sites,
            d0,
            site_energies,
            j0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n_sites` degenerate sites with `d0 = J0 = 1`.
    pub fn uniform(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, 1.0, vec![0.0; n_sites], 1.0)
    }

    pub fn with_j0(mut self, j0: f64) -> Result<Self> {
        self.j0 = j0;
        self.validate()?;
        Ok(self)
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::invalid(
                "n_sites",
                format!("need at least 2 sites, got {}", self.n_sites),
            ));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(Error::invalid("d0", format!("must be positive, got {}", self.d0)));
        }
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            return Err(Error::invalid("j0", format!("must be positive, got {}", self.j0)));
        }
        if self.site_energies.len() != self.n_sites {
            return Err(Error::invalid(
                "site_energies",
                format!("expected {} entries, got {}", self.n_sites, self.site_energies.len()),
            ));
        }
        if self.site_energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("site_energies", "entries must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Both ends tied to walls by an extra spring.
    Confined,
    /// Free ends.
    Open,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Confined => "confined",
            Boundary::Open => "open",
        }
    }
}

/// Time dependence of the chain geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionProfile {
    /// Resting chain whose every coupling equals `scale * J0`.
    Static { scale: f64 },
    /// Resting chain with an individual coupling multiplier per bond.
    StaticBonds { scales: Vec<f64> },
    /// Each bond oscillates independently: `d_n = d0 [1 - 2 a_n sin(w t + phi_n)]`.
    PairwiseSinusoid {
        amplitudes: Vec<f64>,
        omega: f64,
        phases: Vec<f64>,
    },
    /// Superposition of the normal modes of a uniform spring chain.
    NormalMode {
        boundary: Boundary,
        omega0: f64,
        mode_amplitudes: Vec<f64>,
        mode_phases: Vec<f64>,
    },
    /// Gaussian compression travelling along the chain at `speed`.
    GaussianPulse { strength: f64, width: f64, speed: f64 },
}

impl MotionProfile {
    /// Same amplitude and phase on every bond.
    pub fn pairwise_uniform(n_bonds: usize, amplitude: f64, omega: f64, phase: f64) -> Self {
        MotionProfile::PairwiseSinusoid {
            amplitudes: vec![amplitude; n_bonds],
            omega,
            phases: vec![phase; n_bonds],
        }
    }

    /// Only mode `q` (1-based) excited.
    pub fn single_mode(boundary: Boundary, n_sites: usize, q: usize, amplitude: f64, phase: f64, omega0: f64) -> Self {
        let mut mode_amplitudes = vec![0.0; n_sites];
        if (1..=n_sites).contains(&q) {
            mode_amplitudes[q - 1] = amplitude;
        }
        MotionProfile::NormalMode {
            boundary,
            omega0,
            mode_amplitudes,
            mode_phases: vec![phase; n_sites],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MotionProfile::Static { .. } => "static",
            MotionProfile::StaticBonds { .. } => "static-bonds",
            MotionProfile::PairwiseSinusoid { .. } => "pairwise",
            MotionProfile::NormalMode { .. } => "normal-mode",
            MotionProfile::GaussianPulse { .. } => "pulse",
        }
    }

    /// Replace the driving frequency: `omega` for pairwise motion, `omega0`
    /// for normal modes.
    pub fn with_frequency(&self, frequency: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            MotionProfile::PairwiseSinusoid { omega, .. } => *omega = frequency,
            MotionProfile::NormalMode { omega0, .. } => *omega0 = frequency,
            other => {
                return Err(Error::NotApplicable {
                    operation: "frequency sweep",
                    profile: other.name(),
                })
            }
        }
        Ok(out)
    }

    /// Replace the motion amplitude: every bond amplitude for pairwise
    /// motion, every excited mode for normal modes, the strength of a pulse.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            MotionProfile::PairwiseSinusoid { amplitudes, .. } => amplitudes.iter_mut().for_each(|a| *a = amplitude),
            MotionProfile::NormalMode { mode_amplitudes, .. } => mode_amplitudes
                .iter_mut()
                .filter(|a| **a != 0.0)
                .for_each(|a| *a = amplitude),
            MotionProfile::GaussianPulse { strength, .. } => *strength = amplitude,
            other => {
                return Err(Error::NotApplicable {
                    operation: "amplitude scan",
                    profile: other.name(),
                })
            }
        }
        Ok(out)
    }

    /// Replace every phase (all bonds or all modes) by `phase`.
    pub fn with_phase(&self, phase: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            MotionProfile::PairwiseSinusoid { phases, .. } => phases.iter_mut().for_each(|p| *p = phase),
            MotionProfile::NormalMode { mode_phases, .. } => mode_phases.iter_mut().for_each(|p| *p = phase),
            other => {
                return Err(Error::NotApplicable {
                    operation: "phase ensemble",
                    profile: other.name(),
                })
            }
        }
        Ok(out)
    }

    pub fn validate(&self, spec: &ChainSpec) -> Result<()> {
        Kinematics::new(spec, self).map(|_| ())
    }
}

/// Exciton–vibration coupling detuning the site energies by `chi` times the
/// local bond extension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VibronicCoupling {
    pub chi: f64,
    pub enabled: bool,
}

impl VibronicCoupling {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn new(chi: f64) -> Self {
        Self { chi, enabled: true }
    }
}

/// Real symmetric tridiagonal Hamiltonian at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSnapshot {
    pub diagonal: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl HamiltonianSnapshot {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            diagonal: vec![0.0; n_sites],
            couplings: vec![0.0; n_sites.saturating_sub(1)],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.diagonal.len()
    }

    /// Dense row-major `N x N` matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut m = vec![0.0; n * n];
        for (i, e) in self.diagonal.iter().enumerate() {
            m[i * n + i] = *e;
        }
        for (i, j) in self.couplings.iter().enumerate() {
            m[i * n + i + 1] = *j;
            m[(i + 1) * n + i] = *j;
        }
        m
    }
}

/// Frequency of normal mode `q` (1-based).
pub fn mode_frequency(boundary: Boundary, n_sites: usize, q: usize, omega0: f64) -> f64 {
    let n = n_sites as f64;
    let q = q as f64;
    match boundary {
        Boundary::Confined => 2.0 * omega0 * (q * PI / (2.0 * (n + 1.0))).sin(),
        Boundary::Open => 2.0 * omega0 * (q * PI / (2.0 * n)).sin(),
    }
}

/// Normalised displacement pattern of mode `q` at site `n` (both 1-based),
/// i.e. the site factor divided by `A_q` or `B_q`.
fn mode_shape(boundary: Boundary, n_sites: usize, q: usize, n: usize) -> f64 {
    let nn = n_sites as f64;
    let (q, n) = (q as f64, n as f64);
    match boundary {
        Boundary::Confined => {
            let norm = (q * PI / (nn + 1.0)).sin();
            (q * PI * n / (nn + 1.0)).sin() / norm
        }
        Boundary::Open => {
            let norm = (q * PI / (2.0 * nn)).cos();
            (q * PI / nn * (n - 0.5)).cos() / norm
        }
    }
}

#[derive(Debug, Clone)]
struct ActiveMode {
    omega: f64,
    phase: f64,
    /// Displacement amplitude per site (0-based).
    site: Vec<f64>,
    /// `u_n - u_{n+1}` amplitude per bond (0-based).
    bond: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Motion {
    Frozen(Vec<f64>),
    Pairwise {
        amplitudes: Vec<f64>,
        omega: f64,
        phases: Vec<f64>,
    },
    Modes(Vec<ActiveMode>),
    Pulse {
        strength: f64,
        width: f64,
        speed: f64,
    },
}

/// A validated chain plus motion profile, precomputed for fast repeated
/// evaluation inside an integrator.
#[derive(Debug, Clone)]
pub struct Kinematics {
    spec: ChainSpec,
    profile_name: &'static str,
    motion: Motion,
}

impl Kinematics {
    pub fn new(spec: &ChainSpec, profile: &MotionProfile) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_sites;
        let bonds = spec.n_bonds();
        let motion = match profile {
            MotionProfile::Static { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid("motion.scale", format!("must be positive, got {scale}")));
                }
                Motion::Frozen(vec![*scale; bonds])
            }
            MotionProfile::StaticBonds { scales } => {
                check_len("motion.scales", scales, bonds)?;
                if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                    return Err(Error::invalid("motion.scales", format!("must be positive, got {s}")));
                }
                Motion::Frozen(scales.clone())
            }
            MotionProfile::PairwiseSinusoid {
                amplitudes,
                omega,
                phases,
            } => {
                check_len("motion.a", amplitudes, bonds)?;
                check_len("motion.phi", phases, bonds)?;
                if let Some(a) = amplitudes.iter().find(|a| !(**a >= 0.0 && **a < 0.5)) {
                    return Err(Error::invalid(
                        "motion.a",
                        format!("amplitude must satisfy 0 <= a < 1/2, got {a}"),
                    ));
                }
                if !(omega.is_finite() && *omega >= 0.0) {
                    return Err(Error::invalid(
                        "motion.omega",
                        format!("must be finite and non-negative, got {omega}"),
                    ));
                }
                if phases.iter().any(|p| !p.is_finite()) {
                    return Err(Error::invalid("motion.phi", "phases must be finite"));
                }
                Motion::Pairwise {
                    amplitudes: amplitudes.clone(),
                    omega: *omega,
                    phases: phases.clone(),
                }
            }
            MotionProfile::NormalMode {
                boundary,
                omega0,
                mode_amplitudes,
                mode_phases,
            } => {
                check_len("motion.mode_amplitudes", mode_amplitudes, n)?;
                check_len("motion.mode_phases", mode_phases, n)?;
                if !(*omega0 > 0.0 && omega0.is_finite()) {
                    return Err(Error::invalid(
                        "motion.omega0",
                        format!("must be positive, got {omega0}"),
                    ));
                }
                if mode_amplitudes.iter().chain(mode_phases).any(|x| !x.is_finite()) {
                    return Err(Error::invalid(
                        "motion.mode_amplitudes",
                        "amplitudes and phases must be finite",
                    ));
                }
                if *boundary == Boundary::Open && mode_amplitudes[n - 1] != 0.0 {
                    return Err(Error::invalid(
                        "motion.mode_amplitudes",
                        format!("open chain mode q = {n} has zero shape and cannot carry an amplitude"),
                    ));
                }
                let modes = mode_amplitudes
                    .iter()
                    .zip(mode_phases)
                    .enumerate()
                    .filter(|(_, (a, _))| **a != 0.0)
                    .map(|(i, (a, phase))| {
                        let q = i + 1;
                        let site: Vec<f64> = (1..=n).map(|s| a * spec.d0 * mode_shape(*boundary, n, q, s)).collect();
                        let bond = site.windows(2).map(|w| w[0] - w[1]).collect();
                        ActiveMode {
                            omega: mode_frequency(*boundary, n, q, *omega0),
                            phase: *phase,
                            site,
                            bond,
                        }
                    })
                    .collect::<Vec<_>>();
                check_mode_positivity(spec, &modes)?;
                Motion::Modes(modes)
            }
            MotionProfile::GaussianPulse { strength, width, speed } => {
                if !(*strength >= 0.0 && *strength < 1.0) {
                    return Err(Error::invalid(
                        "motion.pulse_strength",
                        format!("must satisfy 0 <= A < 1, got {strength}"),
                    ));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::invalid("motion.sigma", format!("must be positive, got {width}")));
                }
                if !(*speed >= 0.0 && speed.is_finite()) {
                    return Err(Error::invalid("motion.v", format!("must be non-negative, got {speed}")));
                }
                Motion::Pulse {
                    strength: *strength,
                    width: *width,
                    speed: *speed,
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            profile_name: profile.name(),
            motion,
        })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    /// Whether the profile defines relative displacements usable for the
    /// exciton–vibration detuning.
    pub fn has_displacements(&self) -> bool {
        matches!(self.motion, Motion::Pairwise { .. } | Motion::Modes(_))
    }

    /// Shortest time over which the couplings change appreciably: the
    /// fastest period of periodic motion, or the time a pulse takes to
    /// travel one width. `None` for frozen chains.
    pub fn time_scale(&self) -> Option<f64> {
        let period = |omega: f64| (omega > 0.0).then(|| 2.0 * PI / omega);
        match &self.motion {
            Motion::Frozen(_) => None,
            Motion::Pairwise { omega, .. } => period(*omega),
            Motion::Modes(modes) => modes.iter().filter_map(|m| period(m.omega)).min_by(f64::total_cmp),
            Motion::Pulse { width, speed, .. } => (*speed > 0.0).then(|| width / speed),
        }
    }

    /// Displacement `u_n(t)` of site `site` (0-based).
    pub fn displacement(&self, site: usize, t: f64) -> Result<f64> {
        match &self.motion {
            Motion::Modes(modes) => Ok(modes.iter().map(|m| m.site[site] * (m.omega * t + m.phase).sin()).sum()),
            _ => Err(Error::NotApplicable {
                operation: "displacement_at",
                profile: self.profile_name,
            }),
        }
    }

    /// `d_n(t)` for bond `bond` (0-based), without the positivity check.
    fn raw_distance(&self, bond: usize, t: f64) -> f64 {
        let d0 = self.spec.d0;
        match &self.motion {
            Motion::Frozen(scales) => d0 * scales[bond].powf(-1.0 / 3.0),
            Motion::Pairwise {
                amplitudes,
                omega,
                phases,
            } => d0 * (1.0 - 2.0 * amplitudes[bond] * (omega * t + phases[bond]).sin()),
            Motion::Modes(modes) => {
                d0 - modes
                    .iter()
                    .map(|m| m.bond[bond] * (m.omega * t + m.phase).sin())
                    .sum::<f64>()
            }
            Motion::Pulse { strength, width, speed } => {
                let x = bond as f64 * d0 - speed * t;
                d0 - strength * d0 * (-(x * x) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn distance(&self, bond: usize, t: f64) -> Result<f64> {
        let d = self.raw_distance(bond, t);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::PositivityViolation(format!(
                "distance of bond {} is {d} at t = {t}",
                bond + 1
            )))
        }
    }

    pub fn coupling(&self, bond: usize, t: f64) -> Result<f64> {
        if let Motion::Frozen(scales) = &self.motion {
            return Ok(self.spec.j0 * scales[bond]);
        }
        let ratio = self.spec.d0 / self.distance(bond, t)?;
        Ok(self.spec.j0 * ratio * ratio * ratio)
    }

    /// Fill `out` with the Hamiltonian at time `t`.
    pub fn hamiltonian_into(&self, vib: &VibronicCoupling, t: f64, out: &mut HamiltonianSnapshot) -> Result<()> {
        let n = self.spec.n_sites;
        if out.diagonal.len() != n || out.couplings.len() != n - 1 {
            *out = HamiltonianSnapshot::zeros(n);
        }
        out.diagonal.copy_from_slice(&self.spec.site_energies);
        let detune = vib.enabled && vib.chi != 0.0;
        if vib.enabled && !self.has_displacements() {
            return Err(Error::NotApplicable {
                operation: "exciton-vibration detuning",
                profile: self.profile_name,
            });
        }
        let d0 = self.spec.d0;
        let j0 = self.spec.j0;
        for bond in 0..n - 1 {
            let d = self.distance(bond, t)?;
            let r = d0 / d;
            out.couplings[bond] = j0 * r * r * r;
            if detune {
                // u_{n+1} - u_n equals the bond extension d_n - d0
                out.diagonal[bond] += vib.chi * (d - d0);
            }
        }
        if detune {
            let last = self.distance(n - 2, t)?;
            out.diagonal[n - 1] += vib.chi * (last - d0);
        }
        Ok(())
    }

    pub fn hamiltonian(&self, vib: &VibronicCoupling, t: f64) -> Result<HamiltonianSnapshot> {
        let mut h = HamiltonianSnapshot::zeros(self.spec.n_sites);
        self.hamiltonian_into(vib, t, &mut h)?;
        Ok(h)
    }

    /// Largest coupling each bond reaches during the motion.
    pub fn max_couplings(&self) -> Vec<f64> {
        let j0 = self.spec.j0;
        let d0 = self.spec.d0;
        let bonds = self.spec.n_bonds();
        match &self.motion {
            Motion::Frozen(scales) => scales.iter().map(|s| s * j0).collect(),
            Motion::Pairwise { amplitudes, .. } => amplitudes.iter().map(|a| j0 / (1.0 - 2.0 * a).powi(3)).collect(),
            Motion::Pulse { strength, .. } => vec![j0 / (1.0 - strength).powi(3); bonds],
            Motion::Modes(modes) if modes.len() <= 1 => (0..bonds)
                .map(|b| {
                    let amp = modes.first().map_or(0.0, |m| m.bond[b].abs());
                    j0 / (1.0 - amp / d0).powi(3)
                })
                .collect(),
            Motion::Modes(modes) => {
                // No closed form for superpositions; scan a long window.
                let slowest = modes.iter().map(|m| m.omega).fold(f64::INFINITY, f64::min);
                let window = 8.0 * 2.0 * PI / slowest;
                let samples = 32_768;
                let mut best = vec![0.0f64; bonds];
                for k in 0..=samples {
                    let t = window * k as f64 / samples as f64;
                    for (b, best) in best.iter_mut().enumerate() {
                        let d = self.raw_distance(b, t);
                        *best = best.max(j0 * (d0 / d).powi(3));
                    }
                }
                best
            }
        }
    }

    /// Period-averaged coupling of each bond.
    pub fn mean_couplings(&self) -> Result<Vec<f64>> {
        let j0 = self.spec.j0;
        let d0 = self.spec.d0;
        match &self.motion {
            Motion::Frozen(scales) => Ok(scales.iter().map(|s| s * j0).collect()),
            Motion::Pairwise { amplitudes, .. } => amplitudes.iter().map(|a| time_averaged_coupling(j0, *a)).collect(),
            Motion::Modes(modes) if modes.len() <= 1 => Ok((0..self.spec.n_bonds())
                .map(|b| {
                    let x = modes.first().map_or(0.0, |m| m.bond[b] / d0);
                    j0 * (1.0 + 0.5 * x * x) / (1.0 - x * x).powf(2.5)
                })
                .collect()),
            _ => Err(Error::NotApplicable {
                operation: "time-averaged coupling",
                profile: self.profile_name,
            }),
        }
    }
}

fn check_len(name: &'static str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("expected {expected} entries, got {}", v.len()),
        ))
    }
}

fn check_mode_positivity(spec: &ChainSpec, modes: &[ActiveMode]) -> Result<()> {
    let bonds = spec.n_bonds();
    let worst_case = (0..bonds)
        .map(|b| modes.iter().map(|m| m.bond[b].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if worst_case < spec.d0 {
        return Ok(());
    }
    // The triangle bound failed; sample one period of the slowest mode.
    let slowest = modes.iter().map(|m| m.omega).fold(f64::INFINITY, f64::min);
    let period = 2.0 * PI / slowest;
    let samples = 4096;
    for k in 0..samples {
        let t = period * k as f64 / samples as f64;
        for b in 0..bonds {
            let d = spec.d0
                - modes
                    .iter()
                    .map(|m| m.bond[b] * (m.omega * t + m.phase).sin())
                    .sum::<f64>();
            if d <= 0.0 {
                return Err(Error::PositivityViolation(format!(
                    "normal-mode motion collapses bond {} (d = {d} at t = {t})",
                    b + 1
                )));
            }
        }
    }
    Ok(())
}

fn check_site(spec: &ChainSpec, n: usize) -> Result<usize> {
    if (1..=spec.n_sites).contains(&n) {
        Ok(n - 1)
    } else {
        Err(Error::DomainError(format!(
            "site index {n} outside 1..={}",
            spec.n_sites
        )))
    }
}

fn check_bond(spec: &ChainSpec, n: usize) -> Result<usize> {
    if (1..=spec.n_bonds()).contains(&n) {
        Ok(n - 1)
    } else {
        Err(Error::DomainError(format!(
            "bond index {n} outside 1..={}",
            spec.n_bonds()
        )))
    }
}

/// Displacement `u_n(t)` of site `n` (1-based) for normal-mode motion.
pub fn displacement_at(profile: &MotionProfile, spec: &ChainSpec, n: usize, t: f64) -> Result<f64> {
    let site = check_site(spec, n)?;
    Kinematics::new(spec, profile)?.displacement(site, t)
}

/// Distance `d_n(t)` across bond `n` (1-based).
pub fn pair_distance(profile: &MotionProfile, spec: &ChainSpec, n: usize, t: f64) -> Result<f64> {
    let bond = check_bond(spec, n)?;
    Kinematics::new(spec, profile)?.distance(bond, t)
}

/// Coupling `J_n(t) = J0 (d0 / d_n(t))^3` across bond `n` (1-based).
pub fn coupling_at(profile: &MotionProfile, spec: &ChainSpec, n: usize, t: f64) -> Result<f64> {
    let bond = check_bond(spec, n)?;
    Kinematics::new(spec, profile)?.coupling(bond, t)
}

pub fn hamiltonian_at(
    profile: &MotionProfile,
    spec: &ChainSpec,
    vib: &VibronicCoupling,
    t: f64,
) -> Result<HamiltonianSnapshot> {
    Kinematics::new(spec, profile)?.hamiltonian(vib, t)
}

/// Period average of `J0 / (1 - 2a sin)^3`, i.e. `J0 (1 + 2a^2) / (1 - 4a^2)^(5/2)`.
pub fn time_averaged_coupling(j0: f64, a: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&a) {
        return Err(Error::DomainError(format!(
            "amplitude must satisfy 0 <= a < 1/2, got {a}"
        )));
    }
    Ok(j0 * (1.0 + 2.0 * a * a) / (1.0 - 4.0 * a * a).powf(2.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics;
    use proptest::prelude::*;

    fn dimer() -> ChainSpec {
        ChainSpec::uniform(2).unwrap()
    }

    #[test]
    fn chain_spec_invariants() {
        assert!(ChainSpec::uniform(1).is_err());
        assert!(ChainSpec::new(3, 0.0, vec![0.0; 3], 1.0).is_err());
        assert!(ChainSpec::new(3, 1.0, vec![0.0; 3], -1.0).is_err());
        assert!(ChainSpec::new(3, 1.0, vec![0.0; 2], 1.0).is_err());
    }

    #[test]
    fn zero_amplitude_modes_do_not_move() {
        let spec = ChainSpec::uniform(7).unwrap();
        let p = MotionProfile::NormalMode {
            boundary: Boundary::Confined,
            omega0: 1.3,
            mode_amplitudes: vec![0.0; 7],
            mode_phases: vec![0.4; 7],
        };
        for n in 1..=7 {
            assert_eq!(displacement_at(&p, &spec, n, 2.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn confined_dimer_lowest_mode_frequency() {
        assert!((mode_frequency(Boundary::Confined, 2, 1, 1.7) - 1.7).abs() < 1e-14);
    }

    #[test]
    fn open_breathing_mode_is_antisymmetric() {
        let n = 13;
        let spec = ChainSpec::uniform(n).unwrap();
        let p = MotionProfile::single_mode(Boundary::Open, n, 1, 0.2, 0.3, 1.1);
        for k in 0..17 {
            let t = 0.37 * k as f64 + 0.011;
            for site in 1..=n {
                let u = displacement_at(&p, &spec, site, t).unwrap();
                let mirror = displacement_at(&p, &spec, n + 1 - site, t).unwrap();
                assert!((u + mirror).abs() < 1e-14, "site {site}, t {t}");
            }
        }
    }

    #[test]
    fn confined_modes_vanish_at_virtual_walls() {
        let n = 9;
        for q in 1..=n {
            assert!(mode_shape(Boundary::Confined, n, q, 0).abs() < 1e-12);
            assert!(mode_shape(Boundary::Confined, n, q, n + 1).abs() < 1e-12);
        }
    }

    #[test]
    fn open_top_mode_cannot_carry_amplitude() {
        let spec = ChainSpec::uniform(4).unwrap();
        let p = MotionProfile::single_mode(Boundary::Open, 4, 4, 0.1, 0.0, 1.0);
        assert!(matches!(p.validate(&spec), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn collapsing_normal_mode_rejected() {
        let spec = ChainSpec::uniform(5).unwrap();
        let p = MotionProfile::single_mode(Boundary::Confined, 5, 5, 2.0, 0.0, 1.0);
        assert!(matches!(p.validate(&spec), Err(Error::PositivityViolation(_))));
    }

    #[test]
    fn displacement_not_defined_for_bond_level_profiles() {
        let spec = dimer();
        for p in [
            MotionProfile::Static { scale: 1.0 },
            MotionProfile::pairwise_uniform(1, 0.1, 1.0, 0.0),
            MotionProfile::GaussianPulse {
                strength: 0.1,
                width: 1.0,
                speed: 1.0,
            },
        ] {
            assert!(matches!(
                displacement_at(&p, &spec, 1, 0.0),
                Err(Error::NotApplicable { .. })
            ));
        }
    }

    #[test]
    fn pairwise_distances() {
        let spec = dimer();
        let rest = MotionProfile::pairwise_uniform(1, 0.0, 3.0, 0.2);
        assert_eq!(pair_distance(&rest, &spec, 1, 1.234).unwrap(), 1.0);
        // w t + phi = pi/2
        let p = MotionProfile::pairwise_uniform(1, 0.25, 2.0, 0.0);
        let t = PI / 4.0;
        assert!((pair_distance(&p, &spec, 1, t).unwrap() - 0.5).abs() < 1e-15);
        assert!((coupling_at(&p, &spec, 1, t).unwrap() - 8.0).abs() < 1e-12);
        let far = 3.0 * PI / 4.0;
        assert!((pair_distance(&p, &spec, 1, far).unwrap() - 1.5).abs() < 1e-15);
        assert!((coupling_at(&p, &spec, 1, far).unwrap() - 8.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn pulse_peak_compression() {
        let spec = ChainSpec::uniform(13).unwrap();
        let p = MotionProfile::GaussianPulse {
            strength: 1.0 / 6.0,
            width: 1.0,
            speed: 2.0,
        };
        // center on bond 4 when (4 - 1) d0 = v t
        let d = pair_distance(&p, &spec, 4, 1.5).unwrap();
        assert!((d - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn static_scale_sets_coupling() {
        let spec = ChainSpec::uniform(3).unwrap().with_j0(2.0).unwrap();
        let p = MotionProfile::Static { scale: 1.0 };
        assert_eq!(coupling_at(&p, &spec, 2, 5.0).unwrap(), 2.0);
        let p = MotionProfile::Static { scale: 8.0 };
        assert!((pair_distance(&p, &spec, 1, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((coupling_at(&p, &spec, 1, 0.0).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_indices() {
        let spec = dimer();
        let p = MotionProfile::Static { scale: 1.0 };
        assert!(matches!(coupling_at(&p, &spec, 0, 0.0), Err(Error::DomainError(_))));
        assert!(matches!(coupling_at(&p, &spec, 2, 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn invalid_profiles_rejected() {
        let spec = dimer();
        assert!(MotionProfile::pairwise_uniform(1, 0.5, 1.0, 0.0)
            .validate(&spec)
            .is_err());
        assert!(MotionProfile::pairwise_uniform(1, -0.1, 1.0, 0.0)
            .validate(&spec)
            .is_err());
        assert!(MotionProfile::pairwise_uniform(2, 0.1, 1.0, 0.0)
            .validate(&spec)
            .is_err());
        let pulse = |strength, width, speed| MotionProfile::GaussianPulse { strength, width, speed };
        assert!(pulse(1.0, 1.0, 1.0).validate(&spec).is_err());
        assert!(pulse(0.1, 0.0, 1.0).validate(&spec).is_err());
        assert!(pulse(0.1, 1.0, -1.0).validate(&spec).is_err());
        assert!(MotionProfile::single_mode(Boundary::Open, 2, 1, 0.1, 0.0, 0.0)
            .validate(&spec)
            .is_err());
    }

    #[test]
    fn hamiltonian_without_detuning() {
        let spec = ChainSpec::new(3, 1.0, vec![0.5; 3], 1.0).unwrap();
        let p = MotionProfile::pairwise_uniform(2, 0.1, 1.0, 0.3);
        let h = hamiltonian_at(&p, &spec, &VibronicCoupling::disabled(), 0.7).unwrap();
        assert_eq!(h.diagonal, vec![0.5; 3]);
        for (n, j) in h.couplings.iter().enumerate() {
            assert_eq!(*j, coupling_at(&p, &spec, n + 1, 0.7).unwrap());
        }
    }

    #[test]
    fn detuning_vanishes_without_motion() {
        let spec = ChainSpec::new(5, 1.0, vec![0.1, 0.2, 0.3, 0.4, 0.5], 1.0).unwrap();
        let p = MotionProfile::NormalMode {
            boundary: Boundary::Open,
            omega0: 1.0,
            mode_amplitudes: vec![0.0; 5],
            mode_phases: vec![0.0; 5],
        };
        let h = hamiltonian_at(&p, &spec, &VibronicCoupling::new(10.0), 1.3).unwrap();
        assert_eq!(h.diagonal, spec.site_energies);
    }

    #[test]
    fn detuning_uses_neighbour_displacements() {
        let n = 6;
        let spec = ChainSpec::uniform(n).unwrap();
        let p = MotionProfile::single_mode(Boundary::Confined, n, 2, 0.05, 0.4, 1.3);
        let chi = 3.0;
        let t = 0.9;
        let h = hamiltonian_at(&p, &spec, &VibronicCoupling::new(chi), t).unwrap();
        let u: Vec<f64> = (1..=n).map(|s| displacement_at(&p, &spec, s, t).unwrap()).collect();
        for site in 0..n - 1 {
            assert!((h.diagonal[site] - chi * (u[site + 1] - u[site])).abs() < 1e-13);
        }
        assert!((h.diagonal[n - 1] - chi * (u[n - 1] - u[n - 2])).abs() < 1e-13);
    }

    #[test]
    fn detuning_requires_displacements() {
        let spec = ChainSpec::uniform(4).unwrap();
        let vib = VibronicCoupling::new(1.0);
        let pulse = MotionProfile::GaussianPulse {
            strength: 0.1,
            width: 1.0,
            speed: 1.0,
        };
        assert!(matches!(
            hamiltonian_at(&pulse, &spec, &vib, 0.0),
            Err(Error::NotApplicable { .. })
        ));
        let st = MotionProfile::Static { scale: 1.0 };
        assert!(matches!(
            hamiltonian_at(&st, &spec, &vib, 0.0),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn dimer_detuning_comparable_to_coupling() {
        // chi = 10 at a = 1/4: site detuning and coupling share an order of magnitude
        let spec = dimer();
        let p = MotionProfile::pairwise_uniform(1, 0.25, 1.0, 0.0);
        let vib = VibronicCoupling::new(10.0);
        let (mut max_det, mut max_j) = (0.0f64, 0.0f64);
        for k in 0..1000 {
            let t = 2.0 * PI * k as f64 / 1000.0;
            let h = hamiltonian_at(&p, &spec, &vib, t).unwrap();
            max_det = max_det.max(h.diagonal[0].abs());
            max_j = max_j.max(h.couplings[0]);
        }
        let ratio = max_det / max_j;
        assert!((0.1..10.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn averaged_coupling_values() {
        assert_eq!(time_averaged_coupling(1.0, 0.0).unwrap(), 1.0);
        assert!((time_averaged_coupling(1.0, 0.25).unwrap() - 2.309_401_076_758_503).abs() < 1e-12);
        assert!(time_averaged_coupling(1.0, 0.5).is_err());
    }

    #[test]
    fn averaged_coupling_matches_quadrature() {
        for a in [0.05, 0.1, 0.2, 0.25] {
            let omega = 1.7;
            let period = 2.0 * PI / omega;
            let spec = dimer();
            let p = MotionProfile::pairwise_uniform(1, a, omega, 0.4);
            let k = Kinematics::new(&spec, &p).unwrap();
            let avg = numerics::integrate(|t| k.coupling(0, t).unwrap(), 0.0, period, 1e-14, 1e-14) / period;
            let closed = time_averaged_coupling(1.0, a).unwrap();
            assert!(((avg - closed) / closed).abs() < 1e-9, "a = {a}: {avg} vs {closed}");
        }
    }

    #[test]
    fn max_and_mean_couplings() {
        let spec = dimer();
        let k = Kinematics::new(&spec, &MotionProfile::pairwise_uniform(1, 0.25, 1.0, 0.0)).unwrap();
        assert!((k.max_couplings()[0] - 8.0).abs() < 1e-12);
        assert!((k.mean_couplings().unwrap()[0] - 2.309_401_076_758_503).abs() < 1e-12);
        let pulse = MotionProfile::GaussianPulse {
            strength: 1.0 / 6.0,
            width: 1.0,
            speed: 0.0,
        };
        let k = Kinematics::new(&ChainSpec::uniform(13).unwrap(), &pulse).unwrap();
        assert!(k.max_couplings().iter().all(|j| (j - 1.728).abs() < 1e-12));
    }

    #[test]
    fn breathing_mode_max_coupling_matches_scan() {
        let n = 8;
        let spec = ChainSpec::uniform(n).unwrap();
        let p = MotionProfile::single_mode(Boundary::Open, n, 1, n as f64 / 12.0, 0.0, 1.0);
        let k = Kinematics::new(&spec, &p).unwrap();
        let exact = k.max_couplings();
        let period = 2.0 * PI / mode_frequency(Boundary::Open, n, 1, 1.0);
        for (b, want) in exact.iter().enumerate() {
            let scanned = (0..20_000)
                .map(|i| k.coupling(b, period * i as f64 / 20_000.0).unwrap())
                .fold(0.0, f64::max);
            assert!((scanned - want).abs() < 1e-6 * want);
        }
    }

    proptest! {
        #[test]
        fn pairwise_coupling_is_periodic(a in 0.0..0.45f64, omega in 0.1..20.0f64, phi in 0.0..6.3f64, t in 0.0..50.0f64) {
            let spec = dimer();
            let p = MotionProfile::pairwise_uniform(1, a, omega, phi);
            let k = Kinematics::new(&spec, &p).unwrap();
            let j = k.coupling(0, t).unwrap();
            let j2 = k.coupling(0, t + 2.0 * PI / omega).unwrap();
            prop_assert!((j - j2).abs() <= 1e-9 * j);
            prop_assert!(j > 0.0);
        }

        #[test]
        fn pulse_leaves_distant_bonds_alone(sigma in 0.2..1.5f64) {
            let spec = ChainSpec::uniform(13).unwrap();
            let p = MotionProfile::GaussianPulse { strength: 0.9, width: sigma, speed: 0.0 };
            let k = Kinematics::new(&spec, &p).unwrap();
            for b in 0..12 {
                if b as f64 > 6.0 * sigma {
                    prop_assert!((k.coupling(b, 3.0).unwrap() - 1.0).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn distances_and_couplings_positive(q in 1usize..7, a in 0.0..0.2f64, phase in 0.0..6.3f64, t in 0.0..100.0f64) {
            let n = 8;
            let spec = ChainSpec::uniform(n).unwrap();
            let p = MotionProfile::single_mode(Boundary::Confined, n, q, a, phase, 0.9);
            let k = Kinematics::new(&spec, &p).unwrap();
            for b in 0..n - 1 {
                prop_assert!(k.distance(b, t).unwrap() > 0.0);
                prop_assert!(k.coupling(b, t).unwrap() > 0.0);
            }
        }
    }
}
