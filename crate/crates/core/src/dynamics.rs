//! Lindblad master equation for a single excitation on the chain plus a
//! trapping sink.
//!
//! The state space is `{|1>, ..., |N>, |sink>}`. Every channel uses the
//! `gamma [2 L rho L^+ - {L^+ L, rho}]` normalisation, so site populations
//! decay at `2 gamma_n` and the sink fills at `2 gamma_sink` times the
//! population of site `N`. Excitation lost to the environment leaves the
//! state space; the missing trace is tracked as `loss`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{DormandPrince, OdeSystem};
use crate::model::{ChainSpec, HamiltonianSnapshot, Kinematics, MotionProfile, VibronicCoupling};

/// Dissipation, sink and dephasing rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// Per-site dissipation rates `gamma_n`.
    pub gamma: Vec<f64>,
    pub gamma_sink: f64,
    /// Pure dephasing rate, identical on every site.
    pub gamma_deph: f64,
}

impl ChannelSpec {
    pub fn uniform(n_sites: usize, gamma: f64, gamma_sink: f64) -> Self {
        Self {
            gamma: vec![gamma; n_sites],
            gamma_sink,
            gamma_deph: 0.0,
        }
    }

    pub fn with_dephasing(mut self, gamma_deph: f64) -> Self {
        self.gamma_deph = gamma_deph;
        self
    }

    pub fn closed(n_sites: usize) -> Self {
        Self::uniform(n_sites, 0.0, 0.0)
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.gamma.len() != n_sites {
            return Err(Error::invalid(
                "channels.gamma",
                format!("expected {n_sites} entries, got {}", self.gamma.len()),
            ));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid(
                "channels.gamma",
                format!("rates must be non-negative, got {g}"),
            ));
        }
        if !(self.gamma_sink >= 0.0 && self.gamma_sink.is_finite()) {
            return Err(Error::invalid(
                "channels.gamma_sink",
                format!("must be non-negative, got {}", self.gamma_sink),
            ));
        }
        if !(self.gamma_deph >= 0.0 && self.gamma_deph.is_finite()) {
            return Err(Error::invalid(
                "channels.gamma_deph",
                format!("must be non-negative, got {}", self.gamma_deph),
            ));
        }
        Ok(())
    }

    /// Anticommutator decay rate of each basis state (sites then sink).
    fn basis_decay(&self) -> Vec<f64> {
        let n = self.gamma.len();
        let mut kappa: Vec<f64> = self.gamma.iter().map(|g| g + self.gamma_deph).collect();
        kappa[n - 1] += self.gamma_sink;
        kappa.push(0.0);
        kappa
    }
}

/// Density matrix over `N` sites plus the sink, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    dim: usize,
    rho: Vec<Complex64>,
}

impl QuantumState {
    /// `|site><site|` with `site` 1-based.
    pub fn localized(n_sites: usize, site: usize) -> Result<Self> {
        if !(1..=n_sites).contains(&site) {
            return Err(Error::DomainError(format!("initial site {site} outside 1..={n_sites}")));
        }
        let dim = n_sites + 1;
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        rho[(site - 1) * dim + site - 1] = Complex64::new(1.0, 0.0);
        Ok(Self { dim, rho })
    }

    pub fn from_matrix(dim: usize, rho: Vec<Complex64>) -> Result<Self> {
        if dim < 3 || rho.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: rho.len(),
            });
        }
        Ok(Self { dim, rho })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.dim - 1
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.rho
    }

    /// Population of site `n` (1-based).
    pub fn site_population(&self, n: usize) -> f64 {
        self.get(n - 1, n - 1).re
    }

    pub fn sink_population(&self) -> f64 {
        self.get(self.dim - 1, self.dim - 1).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    /// `tr(rho H)` over the site block.
    pub fn energy(&self, h: &HamiltonianSnapshot) -> f64 {
        let n = self.n_sites();
        let dense = h.to_dense();
        let mut e = 0.0;
        for j in 0..n {
            for k in 0..n {
                e += (self.get(j, k) * dense[k * n + j]).re;
            }
        }
        e
    }
}

fn lindblad_rhs_into(
    dim: usize,
    rho: &[Complex64],
    h: &HamiltonianSnapshot,
    ch: &ChannelSpec,
    kappa: &[f64],
    out: &mut [Complex64],
) {
    let n = dim - 1;
    let e = &h.diagonal;
    let jc = &h.couplings;
    let i = Complex64::i();
    for r in 0..dim {
        let row = r * dim;
        for c in 0..dim {
            let x = rho[row + c];
            // (rho H)_{rc}; H vanishes on the sink row and column
            let mut rho_h = Complex64::new(0.0, 0.0);
            if c < n {
                rho_h = x * e[c];
                if c > 0 {
                    rho_h += rho[row + c - 1] * jc[c - 1];
                }
                if c + 1 < n {
                    rho_h += rho[row + c + 1] * jc[c];
                }
            }
            let mut h_rho = Complex64::new(0.0, 0.0);
            if r < n {
                h_rho = x * e[r];
                if r > 0 {
                    h_rho += rho[row - dim + c] * jc[r - 1];
                }
                if r + 1 < n {
                    h_rho += rho[row + dim + c] * jc[r];
                }
            }
            out[row + c] = i * (rho_h - h_rho) - x * (kappa[r] + kappa[c]);
        }
    }
    if ch.gamma_deph != 0.0 {
        for s in 0..n {
            out[s * dim + s] += rho[s * dim + s] * (2.0 * ch.gamma_deph);
        }
    }
    out[n * dim + n] += rho[(n - 1) * dim + n - 1] * (2.0 * ch.gamma_sink);
}

/// Time derivative `i[rho, H] + L_diss rho + L_sink rho + L_deph rho`,
/// returned row-major with the same layout as the state.
pub fn lindblad_rhs(rho: &QuantumState, h: &HamiltonianSnapshot, ch: &ChannelSpec) -> Result<Vec<Complex64>> {
    let n = rho.n_sites();
    if h.diagonal.len() != n || h.couplings.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.diagonal.len(),
        });
    }
    if ch.gamma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ch.gamma.len(),
        });
    }
    let kappa = ch.basis_decay();
    let mut out = vec![Complex64::new(0.0, 0.0); rho.dim * rho.dim];
    lindblad_rhs_into(rho.dim, &rho.rho, h, ch, &kappa, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Only the initial and final states.
    FinalOnly,
    /// Every accepted integrator step.
    EveryStep,
    /// Every multiple of the given interval (steps are shortened to land on them).
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    /// Stop once the total site population drops below this.
    pub convergence_tol: f64,
    /// Upper bound on accepted steps per propagation.
    pub max_steps: u64,
    pub sampling: Sampling,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_max: 500.0,
            convergence_tol: 1e-9,
            max_steps: 10_000_000,
            sampling: Sampling::FinalOnly,
        }
    }
}

impl IntegratorConfig {
    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("integrator.rel_tol", self.rel_tol)?;
        positive("integrator.abs_tol", self.abs_tol)?;
        positive("integrator.t_max", self.t_max)?;
        positive("integrator.convergence_tol", self.convergence_tol)?;
        if let Sampling::Uniform(dt) = self.sampling {
            positive("integrator.sample_dt", dt)?;
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("integrator.max_steps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Site populations fell below the convergence threshold.
    Converged,
    TimeCapped,
}

/// Sampled populations of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub times: Vec<f64>,
    /// One row per sample, one column per site.
    pub site_populations: Vec<Vec<f64>>,
    pub sink_population: Vec<f64>,
    pub loss: Vec<f64>,
    pub asymptotic_sink: f64,
    pub termination: Termination,
}

impl TransferRecord {
    pub(crate) fn new() -> Self {
        Self {
            times: Vec::new(),
            site_populations: Vec::new(),
            sink_population: Vec::new(),
            loss: Vec::new(),
            asymptotic_sink: 0.0,
            termination: Termination::TimeCapped,
        }
    }

    pub(crate) fn push(&mut self, t: f64, sites: Vec<f64>, sink: f64, loss: f64) {
        self.times.push(t);
        self.site_populations.push(sites);
        self.sink_population.push(sink);
        self.loss.push(loss);
    }

    pub fn n_sites(&self) -> usize {
        self.site_populations.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Largest deviation of `sum P_n + P_sink + loss` from one.
    pub fn bookkeeping_error(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                (self.site_populations[i].iter().sum::<f64>() + self.sink_population[i] + self.loss[i] - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Drives a [`DormandPrince`] through a population-carrying system,
/// handling sampling, convergence and positivity checks. `observe` maps the
/// raw state to `(site populations, sink, loss)`.
pub(crate) fn drive<S, F>(sys: &mut S, y0: &[f64], cfg: &IntegratorConfig, mut observe: F) -> Result<TransferRecord>
where
    S: OdeSystem,
    F: FnMut(&[f64]) -> (Vec<f64>, f64, f64),
{
    cfg.validate()?;
    let mut dp = DormandPrince::new(y0.len(), cfg.rel_tol, cfg.abs_tol);
    dp.init(sys, 0.0, y0)?;
    let mut record = TransferRecord::new();
    let (sites, sink, loss) = observe(y0);
    record.push(0.0, sites, sink, loss);
    let floor = -100.0 * cfg.abs_tol;
    let mut next_sample = match cfg.sampling {
        Sampling::Uniform(dt) => dt.min(cfg.t_max),
        _ => cfg.t_max,
    };
    let mut sample_index = 1u64;
    loop {
        if dp.accepted_steps() as u64 >= cfg.max_steps {
            return Err(Error::StepBudgetExhausted {
                t: dp.t(),
                steps: cfg.max_steps,
            });
        }
        dp.step(sys, next_sample)?;
        let t = dp.t();
        let (sites, sink, loss) = observe(dp.y());
        if let Some((n, p)) = sites.iter().enumerate().find(|(_, p)| **p < floor) {
            return Err(Error::PositivityViolation(format!(
                "population of site {} is {p:e} at t = {t}",
                n + 1
            )));
        }
        if sink < floor {
            return Err(Error::PositivityViolation(format!(
                "sink population is {sink:e} at t = {t}"
            )));
        }
        let remaining: f64 = sites.iter().sum();
        let converged = remaining < cfg.convergence_tol;
        let at_end = t >= cfg.t_max;
        let on_sample = match cfg.sampling {
            Sampling::EveryStep => true,
            Sampling::Uniform(_) => t >= next_sample,
            Sampling::FinalOnly => false,
        };
        if on_sample || converged || at_end {
            record.asymptotic_sink = sink;
            record.push(t, sites, sink, loss);
        }
        if converged {
            record.termination = Termination::Converged;
            return Ok(record);
        }
        if at_end {
            record.termination = Termination::TimeCapped;
            return Ok(record);
        }
        if let Sampling::Uniform(dt) = cfg.sampling {
            if t >= next_sample {
                sample_index += 1;
                next_sample = (dt * sample_index as f64).min(cfg.t_max);
            }
        }
    }
}

struct LindbladSystem<'a> {
    kin: &'a Kinematics,
    vib: &'a VibronicCoupling,
    ch: &'a ChannelSpec,
    kappa: Vec<f64>,
    h: HamiltonianSnapshot,
    dim: usize,
}

impl OdeSystem for LindbladSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim + 1
    }

    fn max_step(&self) -> f64 {
        step_cap(self.kin)
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.kin.hamiltonian_into(self.vib, t, &mut self.h)?;
        let m = 2 * self.dim * self.dim;
        let rho: &[Complex64] = bytemuck::cast_slice(&y[..m]);
        let out: &mut [Complex64] = bytemuck::cast_slice_mut(&mut dy[..m]);
        lindblad_rhs_into(self.dim, rho, &self.h, self.ch, &self.kappa, out);
        let loss_rate: f64 = self
            .ch
            .gamma
            .iter()
            .enumerate()
            .map(|(s, g)| 2.0 * g * rho[s * self.dim + s].re)
            .sum();
        dy[m] = loss_rate;
        Ok(())
    }
}

/// Integrator steps per motion time scale, so that short coupling spikes
/// are never stepped over while the populations are near zero.
const STEPS_PER_TIME_SCALE: f64 = 8.0;

pub(crate) fn step_cap(kin: &Kinematics) -> f64 {
    kin.time_scale().map_or(f64::INFINITY, |s| s / STEPS_PER_TIME_SCALE)
}

/// Integrate the master equation from `|initial><initial|` (1-based site)
/// until the sites are empty or `t_max` is reached.
pub fn propagate(
    spec: &ChainSpec,
    profile: &MotionProfile,
    vib: &VibronicCoupling,
    ch: &ChannelSpec,
    cfg: &IntegratorConfig,
    initial: usize,
) -> Result<TransferRecord> {
    let kin = Kinematics::new(spec, profile)?;
    propagate_with(&kin, vib, ch, cfg, initial)
}

pub fn propagate_with(
    kin: &Kinematics,
    vib: &VibronicCoupling,
    ch: &ChannelSpec,
    cfg: &IntegratorConfig,
    initial: usize,
) -> Result<TransferRecord> {
    let n = kin.spec().n_sites;
    ch.validate(n)?;
    let state = QuantumState::localized(n, initial)?;
    let dim = n + 1;
    let mut y0: Vec<f64> = bytemuck::cast_slice::<Complex64, f64>(&state.rho).to_vec();
    y0.push(0.0);
    let mut sys = LindbladSystem {
        kin,
        vib,
        ch,
        kappa: ch.basis_decay(),
        h: HamiltonianSnapshot::zeros(n),
        dim,
    };
    let m = 2 * dim * dim;
    drive(&mut sys, &y0, cfg, |y| {
        let sites = (0..n).map(|s| y[2 * (s * dim + s)]).collect();
        (sites, y[2 * (n * dim + n)], y[m])
    })
}

/// Asymptotic sink population of the resting chain with every coupling at
/// `scale * J0`.
pub fn static_sink_population_numeric(
    spec: &ChainSpec,
    scale: f64,
    ch: &ChannelSpec,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let cfg = cfg.clone().with_sampling(Sampling::FinalOnly);
    let record = propagate(
        spec,
        &MotionProfile::Static { scale },
        &VibronicCoupling::disabled(),
        ch,
        &cfg,
        1,
    )?;
    Ok(record.asymptotic_sink)
}

/// As [`static_sink_population_numeric`] with an individual coupling per bond.
pub fn static_bonds_sink_population(
    spec: &ChainSpec,
    couplings: &[f64],
    ch: &ChannelSpec,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let scales = couplings.iter().map(|j| j / spec.j0).collect();
    let cfg = cfg.clone().with_sampling(Sampling::FinalOnly);
    let record = propagate(
        spec,
        &MotionProfile::StaticBonds { scales },
        &VibronicCoupling::disabled(),
        ch,
        &cfg,
        1,
    )?;
    Ok(record.asymptotic_sink)
}
