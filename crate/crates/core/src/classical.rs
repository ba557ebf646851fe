//! Classical incoherent (Förster-type) hopping along the chain.
//!
//! Populations obey `dP_n/dt = sum_m M_nm P_m` with symmetric nearest-neighbour
//! rates `k_n(t) = c J_n(t)^2`, the same loss `2 gamma_n` and sink feed
//! `2 gamma_sink` as the quantum model.

use crate::dynamics::{drive, step_cap, ChannelSpec, IntegratorConfig, Sampling, TransferRecord};
use crate::error::{Error, Result};
use crate::integrator::OdeSystem;
use crate::model::{ChainSpec, Kinematics, MotionProfile};
use crate::pool::WorkerPool;
use crate::sweeps::{check_grid, Baseline, EnhancementPoint};

/// Förster rate for coupling `j`.
pub fn hopping_rate(j: f64, c: f64) -> f64 {
    c * j * j
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    /// Converts squared coupling into a hopping rate.
    pub hop_scale: f64,
    /// Per-site loss rates `2 gamma_n`.
    pub loss_rates: Vec<f64>,
    /// Sink feed rate `2 gamma_sink`.
    pub sink_rate: f64,
    /// Forward and backward hops share one rate.
    pub detailed_balance: bool,
}

impl RateModel {
    pub fn new(ch: &ChannelSpec, hop_scale: f64) -> Result<Self> {
        if !(hop_scale > 0.0 && hop_scale.is_finite()) {
            return Err(Error::invalid(
                "classical.hop_scale",
                format!("must be positive, got {hop_scale}"),
            ));
        }
        ch.validate(ch.gamma.len())?;
        Ok(Self {
            hop_scale,
            loss_rates: ch.gamma.iter().map(|g| 2.0 * g).collect(),
            sink_rate: 2.0 * ch.gamma_sink,
            detailed_balance: true,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.loss_rates.len()
    }

    /// Dense row-major site rate matrix for the given bond couplings.
    pub fn rate_matrix(&self, couplings: &[f64]) -> Vec<f64> {
        let n = self.n_sites();
        let mut m = vec![0.0; n * n];
        for (b, j) in couplings.iter().enumerate() {
            let k = hopping_rate(*j, self.hop_scale);
            m[b * n + b + 1] = k;
            m[(b + 1) * n + b] = k;
            m[b * n + b] -= k;
            m[(b + 1) * n + b + 1] -= k;
        }
        for (s, loss) in self.loss_rates.iter().enumerate() {
            m[s * n + s] -= loss;
        }
        m[n * n - 1] -= self.sink_rate;
        m
    }
}

struct RateSystem<'a> {
    kin: &'a Kinematics,
    model: &'a RateModel,
    rates: Vec<f64>,
}

impl OdeSystem for RateSystem<'_> {
    fn dim(&self) -> usize {
        self.model.n_sites() + 2
    }

    fn max_step(&self) -> f64 {
        step_cap(self.kin)
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.model.n_sites();
        for (b, k) in self.rates.iter_mut().enumerate() {
            *k = hopping_rate(self.kin.coupling(b, t)?, self.model.hop_scale);
        }
        let mut loss = 0.0;
        for s in 0..n {
            let mut d = -self.model.loss_rates[s] * y[s];
            loss += self.model.loss_rates[s] * y[s];
            if s > 0 {
                d += self.rates[s - 1] * (y[s - 1] - y[s]);
            }
            if s + 1 < n {
                d += self.rates[s] * (y[s + 1] - y[s]);
            }
            dy[s] = d;
        }
        dy[n - 1] -= self.model.sink_rate * y[n - 1];
        dy[n] = self.model.sink_rate * y[n - 1];
        dy[n + 1] = loss;
        Ok(())
    }
}

/// Integrate the rate equations from site 1.
pub fn propagate_classical(
    spec: &ChainSpec,
    profile: &MotionProfile,
    ch: &ChannelSpec,
    hop_scale: f64,
    cfg: &IntegratorConfig,
) -> Result<TransferRecord> {
    let kin = Kinematics::new(spec, profile)?;
    propagate_classical_with(&kin, ch, hop_scale, cfg)
}

pub fn propagate_classical_with(
    kin: &Kinematics,
    ch: &ChannelSpec,
    hop_scale: f64,
    cfg: &IntegratorConfig,
) -> Result<TransferRecord> {
    let n = kin.spec().n_sites;
    ch.validate(n)?;
    let model = RateModel::new(ch, hop_scale)?;
    let mut y0 = vec![0.0; n + 2];
    y0[0] = 1.0;
    let mut sys = RateSystem {
        kin,
        model: &model,
        rates: vec![0.0; n - 1],
    };
    drive(&mut sys, &y0, cfg, |y| (y[..n].to_vec(), y[n], y[n + 1]))
}

fn classical_sink(kin: &Kinematics, ch: &ChannelSpec, hop_scale: f64, cfg: &IntegratorConfig) -> Result<f64> {
    Ok(propagate_classical_with(kin, ch, hop_scale, cfg)?.asymptotic_sink)
}

/// `Delta_cl(omega)`: classical sink population of the moving chain minus
/// the classical static chain frozen at each bond's maximal coupling.
pub fn classical_enhancement(
    spec: &ChainSpec,
    profile: &MotionProfile,
    ch: &ChannelSpec,
    hop_scale: f64,
    omega_grid: &[f64],
    cfg: &IntegratorConfig,
    pool: &WorkerPool,
) -> Result<Vec<EnhancementPoint>> {
    if !matches!(
        profile,
        MotionProfile::PairwiseSinusoid { .. } | MotionProfile::NormalMode { .. }
    ) {
        return Err(Error::NotApplicable {
            operation: "classical enhancement",
            profile: profile.name(),
        });
    }
    check_grid("omega", omega_grid)?;
    let cfg = cfg.clone().with_sampling(Sampling::FinalOnly);
    let kin = Kinematics::new(spec, profile)?;
    let scales = kin.max_couplings().iter().map(|j| j / spec.j0).collect();
    let frozen = Kinematics::new(spec, &MotionProfile::StaticBonds { scales })?;
    let reference = classical_sink(&frozen, ch, hop_scale, &cfg)?;
    pool.try_map(omega_grid, |&omega| {
        let moving = Kinematics::new(spec, &profile.with_frequency(omega)?)?;
        let p = classical_sink(&moving, ch, hop_scale, &cfg).map_err(|e| e.at(format!("omega = {omega}")))?;
        Ok(EnhancementPoint::new(omega, p, Baseline::JMax, reference))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn rate_examples() {
        assert_eq!(hopping_rate(0.0, 1.0), 0.0);
        assert_eq!(hopping_rate(1.0, 1.0), 1.0);
        assert_eq!(hopping_rate(2.4, 0.7), 4.0 * hopping_rate(1.2, 0.7));
    }

    #[test]
    fn rate_matrix_symmetric_and_balanced() {
        let ch = ChannelSpec::uniform(4, 0.1, 0.5);
        let model = RateModel::new(&ch, 1.3).unwrap();
        let m = model.rate_matrix(&[1.0, 0.5, 2.0]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i * 4 + j], m[j * 4 + i]);
            }
        }
        // columns sum to minus the outflow from the site block
        for col in 0..4 {
            let s: f64 = (0..4).map(|r| m[r * 4 + col]).sum();
            let out = 0.2 + if col == 3 { 1.0 } else { 0.0 };
            assert!((s + out).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_chain_equilibrates() {
        let spec = ChainSpec::uniform(5).unwrap();
        let ch = ChannelSpec::closed(5);
        let cfg = IntegratorConfig { t_max: 200.0, ..cfg() };
        let rec = propagate_classical(&spec, &MotionProfile::Static { scale: 1.0 }, &ch, 1.0, &cfg).unwrap();
        for p in rec.site_populations.last().unwrap() {
            assert!((p - 0.2).abs() < 1e-7);
        }
    }

    #[test]
    fn frozen_hops_keep_population() {
        let spec = ChainSpec::uniform(3).unwrap();
        let rec = propagate_classical(
            &spec,
            &MotionProfile::Static { scale: 1.0 },
            &ChannelSpec::closed(3),
            1e-300,
            &IntegratorConfig { t_max: 10.0, ..cfg() },
        )
        .unwrap();
        assert!((rec.site_populations.last().unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn static_dimer_sink_grows_with_rate() {
        let spec = ChainSpec::uniform(2).unwrap();
        let ch = ChannelSpec::uniform(2, 0.1, 0.5);
        let mut last = 0.0;
        for k in 1..=12 {
            let scale = 0.25 * k as f64;
            let p = propagate_classical(&spec, &MotionProfile::Static { scale }, &ch, 1.0, &cfg())
                .unwrap()
                .asymptotic_sink;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn bookkeeping_holds() {
        let spec = ChainSpec::uniform(4).unwrap();
        let profile = MotionProfile::pairwise_uniform(3, 0.2, 1.7, 0.5);
        let ch = ChannelSpec::uniform(4, 0.1, 0.5);
        let rec = propagate_classical(&spec, &profile, &ch, 1.0, &cfg().with_sampling(Sampling::EveryStep)).unwrap();
        assert!(rec.bookkeeping_error() < 1e-9);
        assert!(rec.site_populations.iter().flatten().all(|p| *p > -1e-10));
    }

    #[test]
    fn zero_amplitude_has_no_enhancement() {
        let spec = ChainSpec::uniform(2).unwrap();
        let ch = ChannelSpec::uniform(2, 0.1, 0.5);
        let profile = MotionProfile::pairwise_uniform(1, 0.0, 1.0, 0.0);
        let pts = classical_enhancement(&spec, &profile, &ch, 1.0, &[0.5, 2.0], &cfg(), &WorkerPool::serial()).unwrap();
        for p in pts {
            assert!(p.delta.abs() < 1e-7, "{}", p.delta);
        }
    }

    #[test]
    fn coupling_spikes_are_not_stepped_over() {
        let spec = ChainSpec::uniform(2).unwrap();
        let ch = ChannelSpec::uniform(2, 0.1, 0.5);
        let profile = MotionProfile::pairwise_uniform(1, 0.25, 6.6, std::f64::consts::FRAC_PI_2);
        let rec = propagate_classical(&spec, &profile, &ch, 1.0, &cfg().with_sampling(Sampling::EveryStep)).unwrap();
        let period = 2.0 * std::f64::consts::PI / 6.6;
        assert!(rec.times.windows(2).all(|w| w[1] - w[0] <= period / 8.0 + 1e-12));
    }
}
