//! Flat `key = value` experiment configuration.
//!
//! Keys carry a dotted section prefix (`chain.n`, `motion.a`, ...). Lists are
//! comma separated; grids are either lists or `start:stop:step`. Lines
//! starting with `#` are comments. Every key has a per-experiment default, so
//! a config file only needs to name what differs.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use exciton_core::dynamics::{ChannelSpec, IntegratorConfig, Sampling};
use exciton_core::model::{Boundary, ChainSpec, MotionProfile, VibronicCoupling};
use exciton_core::sweeps::{Baseline, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    DimerSweep,
    DimerPhaseEnsemble,
    DimerAmplitude,
    ChainModes,
    ChainLengthScan,
    DephasingScan,
    PulseGrid,
    ClassicalCompare,
    Trajectory,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::DimerSweep,
        Experiment::DimerPhaseEnsemble,
        Experiment::DimerAmplitude,
        Experiment::ChainModes,
        Experiment::ChainLengthScan,
        Experiment::DephasingScan,
        Experiment::PulseGrid,
        Experiment::ClassicalCompare,
        Experiment::Trajectory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::DimerSweep => "dimer-sweep",
            Experiment::DimerPhaseEnsemble => "dimer-phase-ensemble",
            Experiment::DimerAmplitude => "dimer-amplitude",
            Experiment::ChainModes => "chain-modes",
            Experiment::ChainLengthScan => "chain-length-scan",
            Experiment::DephasingScan => "dephasing-scan",
            Experiment::PulseGrid => "pulse-grid",
            Experiment::ClassicalCompare => "classical-compare",
            Experiment::Trajectory => "trajectory",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.as_str()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Static,
    Pairwise,
    NormalMode,
    Pulse,
}

impl MotionKind {
    fn as_str(self) -> &'static str {
        match self {
            MotionKind::Static => "static",
            MotionKind::Pairwise => "pairwise",
            MotionKind::NormalMode => "normal-mode",
            MotionKind::Pulse => "pulse",
        }
    }
}

impl FromStr for MotionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(MotionKind::Static),
            "pairwise" => Ok(MotionKind::Pairwise),
            "normal-mode" => Ok(MotionKind::NormalMode),
            "pulse" => Ok(MotionKind::Pulse),
            _ => Err(format!("expected static, pairwise, normal-mode or pulse, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryModel {
    Quantum,
    Classical,
}

impl TrajectoryModel {
    fn as_str(self) -> &'static str {
        match self {
            TrajectoryModel::Quantum => "quantum",
            TrajectoryModel::Classical => "classical",
        }
    }
}

impl FromStr for TrajectoryModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quantum" => Ok(TrajectoryModel::Quantum),
            "classical" => Ok(TrajectoryModel::Classical),
            _ => Err(format!("expected quantum or classical, got `{s}`")),
        }
    }
}

/// A scalar broadcast to every entry, or one value per entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Scalar(f64),
    List(Vec<f64>),
}

impl Series {
    pub fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>, String> {
        match self {
            Series::Scalar(x) => Ok(vec![*x; n]),
            Series::List(v) if v.len() == n => Ok(v.clone()),
            Series::List(v) => Err(format!("{key}: expected {n} values, got {}", v.len())),
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Series::Scalar(x) => write!(f, "{}", Num(*x)),
            Series::List(v) => write!(f, "{}", join(v.iter().map(|x| Num(*x)))),
        }
    }
}

/// Values of a swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `start, start + step, ...` up to and including `stop`.
    Range {
        start: f64,
        stop: f64,
        step: f64,
    },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match *self {
            Grid::List(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if step <= 0.0 || stop < start {
                    return Err(format!("range {self} needs step > 0 and stop >= start"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|k| start + step * k as f64).collect())
            }
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Range { start, stop, step } => write!(f, "{}:{}:{}", Num(*start), Num(*stop), Num(*step)),
            Grid::List(v) => write!(f, "{}", join(v.iter().map(|x| Num(*x)))),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSection {
    pub n: usize,
    pub d0: f64,
    pub j0: f64,
    pub epsilon: Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSection {
    pub gamma: Series,
    pub gamma_sink: f64,
    pub gamma_deph: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibSection {
    pub enabled: bool,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSection {
    pub kind: MotionKind,
    /// Static coupling multiplier.
    pub scale: f64,
    /// Pairwise amplitudes, one per bond or broadcast.
    pub a: Series,
    pub omega: f64,
    pub phi: Series,
    pub boundary: Boundary,
    pub omega0: f64,
    /// Excited normal modes (1-based).
    pub modes: Vec<usize>,
    pub mode_amplitudes: Series,
    pub mode_phases: Series,
    pub pulse_strength: f64,
    pub sigma: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    /// Driving frequencies. Chain-length and dephasing scans read these as
    /// frequencies of the lowest excited mode rather than `omega0`.
    pub omega: Grid,
    pub reference: Baseline,
    pub n_phases: usize,
    pub phase_offset: f64,
    pub amplitudes: Grid,
    pub lengths: Vec<usize>,
    /// Length scans use amplitude `a_over_n * N`.
    pub a_over_n: f64,
    pub gamma_deph: Grid,
    pub v: Grid,
    pub sigma: Grid,
    pub refine_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSection {
    pub hop_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub convergence_tol: f64,
    pub max_steps: u64,
    /// Trajectory sampling interval.
    pub sample_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub out: PathBuf,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub chain: ChainSection,
    pub channels: ChannelSection,
    pub vib: VibSection,
    pub motion: MotionSection,
    pub sweep: SweepSection,
    pub classical: ClassicalSection,
    pub integrator: IntegratorSection,
    pub trajectory_model: TrajectoryModel,
    pub run: RunSection,
}

/// One `key = value` line of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Split config text into entries, reporting every malformed line.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, Vec<String>> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => entries.push(Entry {
                line: i + 1,
                key: k.trim().to_string(),
                value: v.trim().to_string(),
            }),
            _ => errors.push(format!("line {}: expected `key = value`, got `{line}`", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(errors)
    }
}

/// Parse a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<Entry, String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok(Entry {
            line: 0,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        }),
        _ => Err(format!("override `{s}` is not of the form key=value")),
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| parse_num(x.trim())).collect()
}

fn parse_series(s: &str) -> Result<Series, String> {
    let v = parse_list(s)?;
    Ok(if v.len() == 1 && !s.contains(',') {
        Series::Scalar(v[0])
    } else {
        Series::List(v)
    })
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{s}` must be start:stop:step"));
        }
        Ok(Grid::Range {
            start: parse_num(parts[0].trim())?,
            stop: parse_num(parts[1].trim())?,
            step: parse_num(parts[2].trim())?,
        })
    } else {
        Ok(Grid::List(parse_list(s)?))
    }
}

fn parse_count<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

/// Comma-separated integers, or an inclusive `first:last` range.
fn parse_indices(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (usize, usize) = (parse_count(a.trim())?, parse_count(b.trim())?);
        if b < a {
            return Err(format!("range `{s}` is empty"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| parse_count(x.trim())).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    match s {
        "confined" => Ok(Boundary::Confined),
        "open" => Ok(Boundary::Open),
        _ => Err(format!("expected confined or open, got `{s}`")),
    }
}

impl ExperimentConfig {
    /// Default parameters of `experiment`.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            chain: ChainSection {
                n: 2,
                d0: 1.0,
                j0: 1.0,
                epsilon: Series::Scalar(0.0),
            },
            channels: ChannelSection {
                gamma: Series::Scalar(0.1),
                gamma_sink: 0.5,
                gamma_deph: 0.0,
            },
            vib: VibSection {
                enabled: false,
                chi: 10.0,
            },
            motion: MotionSection {
                kind: MotionKind::Pairwise,
                scale: 1.0,
                a: Series::Scalar(0.25),
                omega: 4.54,
                phi: Series::Scalar(PI / 2.0),
                boundary: Boundary::Open,
                omega0: 1.0,
                modes: vec![1],
                mode_amplitudes: Series::Scalar(1.0 / 24.0),
                mode_phases: Series::Scalar(0.0),
                pulse_strength: 1.0 / 6.0,
                sigma: 1.0,
                v: 2.53,
            },
            sweep: SweepSection {
                omega: Grid::Range {
                    start: 0.5,
                    stop: 20.0,
                    step: 0.02,
                },
                reference: Baseline::JMax,
                n_phases: 200,
                phase_offset: 0.0,
                amplitudes: Grid::Range {
                    start: 0.02,
                    stop: 0.24,
                    step: 0.02,
                },
                lengths: (4..=13).collect(),
                a_over_n: 1.0 / 48.0,
                gamma_deph: Grid::Range {
                    start: 0.0,
                    stop: 0.2,
                    step: 0.01,
                },
                v: Grid::Range {
                    start: 0.5,
                    stop: 6.5,
                    step: 0.25,
                },
                sigma: Grid::Range {
                    start: 0.5,
                    stop: 6.0,
                    step: 0.25,
                },
                refine_rounds: 3,
            },
            classical: ClassicalSection { hop_scale: 1.0 },
            integrator: IntegratorSection {
                rel_tol: 1e-8,
                abs_tol: 1e-10,
                t_max: 500.0,
                convergence_tol: 1e-9,
                max_steps: 10_000_000,
                sample_dt: 0.1,
            },
            trajectory_model: TrajectoryModel::Quantum,
            run: RunSection {
                out: PathBuf::from("out"),
                workers: None,
            },
        };
        match experiment {
            Experiment::DimerSweep | Experiment::Trajectory => {}
            Experiment::DimerPhaseEnsemble => {
                c.sweep.omega = Grid::Range {
                    start: 0.1,
                    stop: 20.0,
                    step: 0.1,
                };
                c.sweep.reference = Baseline::JAvg;
            }
            Experiment::DimerAmplitude => {
                c.sweep.omega = Grid::Range {
                    start: 0.5,
                    stop: 20.0,
                    step: 0.1,
                };
            }
            Experiment::ChainModes => {
                c.chain.n = 13;
                c.motion.kind = MotionKind::NormalMode;
                c.motion.boundary = Boundary::Confined;
                c.motion.modes = vec![1, 2, 3];
                c.motion.mode_phases = Series::Scalar(PI);
                c.sweep.omega = Grid::Range {
                    start: 0.1,
                    stop: 20.0,
                    step: 0.1,
                };
                c.sweep.reference = Baseline::J0;
            }
            Experiment::ChainLengthScan | Experiment::DephasingScan => {
                c.motion.kind = MotionKind::NormalMode;
                c.motion.boundary = Boundary::Open;
                c.motion.modes = vec![1];
                c.sweep.omega = Grid::Range {
                    start: 0.1,
                    stop: 3.0,
                    step: 0.05,
                };
                if experiment == Experiment::DephasingScan {
                    c.sweep.lengths = (4..=10).collect();
                }
            }
            Experiment::PulseGrid => {
                c.chain.n = 13;
                c.motion.kind = MotionKind::Pulse;
            }
            Experiment::ClassicalCompare => {
                c.sweep.omega = Grid::Range {
                    start: 0.1,
                    stop: 20.0,
                    step: 0.1,
                };
            }
        }
        c
    }

    /// Preset of the chosen experiment updated by file entries and then by
    /// overrides. The experiment comes from `experiment`, else from an
    /// `experiment` entry (overrides first).
    pub fn resolve(experiment: Option<Experiment>, file: &[Entry], overrides: &[Entry]) -> Result<Self, Vec<String>> {
        let named = overrides
            .iter()
            .rev()
            .chain(file.iter().rev())
            .find(|e| e.key == "experiment")
            .map(|e| e.value.parse::<Experiment>());
        let experiment = match (experiment, named) {
            (Some(e), _) => e,
            (None, Some(Ok(e))) => e,
            (None, Some(Err(msg))) => return Err(vec![format!("experiment: {msg}")]),
            (None, None) => return Err(vec!["no experiment given".to_string()]),
        };
        let mut config = Self::preset(experiment);
        let mut errors = Vec::new();
        for entry in file.iter().chain(overrides) {
            if entry.key == "experiment" {
                continue;
            }
            if let Err(msg) = config.set(&entry.key, &entry.value) {
                let place = if entry.line == 0 {
                    "override".to_string()
                } else {
                    format!("line {}", entry.line)
                };
                errors.push(format!("{place}: {}: {msg}", entry.key));
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(errors)
        }
    }

    /// Parse a complete config text (which must name its experiment).
    pub fn from_text(text: &str) -> Result<Self, Vec<String>> {
        Self::resolve(None, &parse_entries(text)?, &[])
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value;
        match key {
            "chain.n" => self.chain.n = parse_count(v)?,
            "chain.d0" => self.chain.d0 = parse_num(v)?,
            "chain.j0" => self.chain.j0 = parse_num(v)?,
            "chain.epsilon" => self.chain.epsilon = parse_series(v)?,
            "channels.gamma" => self.channels.gamma = parse_series(v)?,
            "channels.gamma_sink" => self.channels.gamma_sink = parse_num(v)?,
            "channels.gamma_deph" => self.channels.gamma_deph = parse_num(v)?,
            "vib.enabled" => self.vib.enabled = parse_bool(v)?,
            "vib.chi" => self.vib.chi = parse_num(v)?,
            "motion.kind" => self.motion.kind = v.parse()?,
            "motion.scale" => self.motion.scale = parse_num(v)?,
            "motion.a" => self.motion.a = parse_series(v)?,
            "motion.omega" => self.motion.omega = parse_num(v)?,
            "motion.phi" => self.motion.phi = parse_series(v)?,
            "motion.boundary" => self.motion.boundary = parse_boundary(v)?,
            "motion.omega0" => self.motion.omega0 = parse_num(v)?,
            "motion.modes" => self.motion.modes = parse_indices(v)?,
            "motion.mode_amplitudes" => self.motion.mode_amplitudes = parse_series(v)?,
            "motion.mode_phases" => self.motion.mode_phases = parse_series(v)?,
            "motion.pulse_strength" => self.motion.pulse_strength = parse_num(v)?,
            "motion.sigma" => self.motion.sigma = parse_num(v)?,
            "motion.v" => self.motion.v = parse_num(v)?,
            "sweep.omega" => self.sweep.omega = parse_grid(v)?,
            "sweep.reference" => self.sweep.reference = v.parse().map_err(|e: exciton_core::Error| e.to_string())?,
            "sweep.n_phases" => self.sweep.n_phases = parse_count(v)?,
            "sweep.phase_offset" => self.sweep.phase_offset = parse_num(v)?,
            "sweep.amplitudes" => self.sweep.amplitudes = parse_grid(v)?,
            "sweep.lengths" => self.sweep.lengths = parse_indices(v)?,
            "sweep.a_over_n" => self.sweep.a_over_n = parse_num(v)?,
            "sweep.gamma_deph" => self.sweep.gamma_deph = parse_grid(v)?,
            "sweep.v" => self.sweep.v = parse_grid(v)?,
            "sweep.sigma" => self.sweep.sigma = parse_grid(v)?,
            "sweep.refine_rounds" => self.sweep.refine_rounds = parse_count(v)?,
            "classical.hop_scale" => self.classical.hop_scale = parse_num(v)?,
            "integrator.rel_tol" => self.integrator.rel_tol = parse_num(v)?,
            "integrator.abs_tol" => self.integrator.abs_tol = parse_num(v)?,
            "integrator.t_max" => self.integrator.t_max = parse_num(v)?,
            "integrator.convergence_tol" => self.integrator.convergence_tol = parse_num(v)?,
            "integrator.max_steps" => self.integrator.max_steps = parse_count(v)?,
            "integrator.sample_dt" => self.integrator.sample_dt = parse_num(v)?,
            "trajectory.model" => self.trajectory_model = v.parse()?,
            "run.out" => {
                if v.is_empty() {
                    return Err("output directory must not be empty".into());
                }
                self.run.out = PathBuf::from(v)
            }
            "run.workers" => self.run.workers = Some(parse_count(v)?),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.motion;
        let s = &self.sweep;
        let i = &self.integrator;
        let mut out = vec![
            ("experiment", self.experiment.to_string()),
            ("chain.n", self.chain.n.to_string()),
            ("chain.d0", Num(self.chain.d0).to_string()),
            ("chain.j0", Num(self.chain.j0).to_string()),
            ("chain.epsilon", self.chain.epsilon.to_string()),
            ("channels.gamma", self.channels.gamma.to_string()),
            ("channels.gamma_sink", Num(self.channels.gamma_sink).to_string()),
            ("channels.gamma_deph", Num(self.channels.gamma_deph).to_string()),
            ("vib.enabled", self.vib.enabled.to_string()),
            ("vib.chi", Num(self.vib.chi).to_string()),
            ("motion.kind", m.kind.as_str().to_string()),
            ("motion.scale", Num(m.scale).to_string()),
            ("motion.a", m.a.to_string()),
            ("motion.omega", Num(m.omega).to_string()),
            ("motion.phi", m.phi.to_string()),
            ("motion.boundary", m.boundary.as_str().to_string()),
            ("motion.omega0", Num(m.omega0).to_string()),
            ("motion.modes", join(m.modes.iter())),
            ("motion.mode_amplitudes", m.mode_amplitudes.to_string()),
            ("motion.mode_phases", m.mode_phases.to_string()),
            ("motion.pulse_strength", Num(m.pulse_strength).to_string()),
            ("motion.sigma", Num(m.sigma).to_string()),
            ("motion.v", Num(m.v).to_string()),
            ("sweep.omega", s.omega.to_string()),
            ("sweep.reference", s.reference.kind().to_string()),
            ("sweep.n_phases", s.n_phases.to_string()),
            ("sweep.phase_offset", Num(s.phase_offset).to_string()),
            ("sweep.amplitudes", s.amplitudes.to_string()),
            ("sweep.lengths", join(s.lengths.iter())),
            ("sweep.a_over_n", Num(s.a_over_n).to_string()),
            ("sweep.gamma_deph", s.gamma_deph.to_string()),
            ("sweep.v", s.v.to_string()),
            ("sweep.sigma", s.sigma.to_string()),
            ("sweep.refine_rounds", s.refine_rounds.to_string()),
            ("classical.hop_scale", Num(self.classical.hop_scale).to_string()),
            ("integrator.rel_tol", Num(i.rel_tol).to_string()),
            ("integrator.abs_tol", Num(i.abs_tol).to_string()),
            ("integrator.t_max", Num(i.t_max).to_string()),
            ("integrator.convergence_tol", Num(i.convergence_tol).to_string()),
            ("integrator.max_steps", i.max_steps.to_string()),
            ("integrator.sample_dt", Num(i.sample_dt).to_string()),
            ("trajectory.model", self.trajectory_model.as_str().to_string()),
            ("run.out", self.run.out.display().to_string()),
        ];
        if let Some(w) = self.run.workers {
            out.push(("run.workers", w.to_string()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn chain_spec(&self, n: usize) -> exciton_core::Result<ChainSpec> {
        let epsilon = self
            .chain
            .epsilon
            .expand(n, "chain.epsilon")
            .map_err(|m| invalid("chain.epsilon", m))?;
        ChainSpec::new(n, self.chain.d0, epsilon, self.chain.j0)
    }

    pub fn channels(&self, n: usize) -> exciton_core::Result<ChannelSpec> {
        let gamma = self
            .channels
            .gamma
            .expand(n, "channels.gamma")
            .map_err(|m| invalid("channels.gamma", m))?;
        let ch = ChannelSpec {
            gamma,
            gamma_sink: self.channels.gamma_sink,
            gamma_deph: self.channels.gamma_deph,
        };
        ch.validate(n)?;
        Ok(ch)
    }

    pub fn vibronic(&self) -> VibronicCoupling {
        if self.vib.enabled {
            VibronicCoupling::new(self.vib.chi)
        } else {
            VibronicCoupling::disabled()
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            t_max: self.integrator.t_max,
            convergence_tol: self.integrator.convergence_tol,
            max_steps: self.integrator.max_steps,
            sampling: Sampling::FinalOnly,
        }
    }

    /// Mode amplitudes and phases over all `n` modes, zero where not excited.
    fn mode_vectors(&self, n: usize, amplitude: Option<f64>) -> exciton_core::Result<(Vec<f64>, Vec<f64>)> {
        let m = &self.motion;
        let k = m.modes.len();
        if k == 0 {
            return Err(invalid("motion.modes", "at least one mode must be excited".into()));
        }
        let amps = match amplitude {
            Some(a) => vec![a; k],
            None => m
                .mode_amplitudes
                .expand(k, "motion.mode_amplitudes")
                .map_err(|e| invalid("motion.mode_amplitudes", e))?,
        };
        let phases = m
            .mode_phases
            .expand(k, "motion.mode_phases")
            .map_err(|e| invalid("motion.mode_phases", e))?;
        let mut full_a = vec![0.0; n];
        let mut full_p = vec![0.0; n];
        for (i, &q) in m.modes.iter().enumerate() {
            if !(1..=n).contains(&q) {
                return Err(invalid("motion.modes", format!("mode {q} outside 1..={n}")));
            }
            full_a[q - 1] = amps[i];
            full_p[q - 1] = phases[i];
        }
        Ok((full_a, full_p))
    }

    /// Motion profile for an `n`-site chain; `amplitude` replaces the
    /// configured amplitude of the moving bonds or modes.
    pub fn profile(&self, n: usize, amplitude: Option<f64>) -> exciton_core::Result<MotionProfile> {
        let m = &self.motion;
        let bonds = n.saturating_sub(1);
        Ok(match m.kind {
            MotionKind::Static => MotionProfile::Static { scale: m.scale },
            MotionKind::Pairwise => MotionProfile::PairwiseSinusoid {
                amplitudes: match amplitude {
                    Some(a) => vec![a; bonds],
                    None => m.a.expand(bonds, "motion.a").map_err(|e| invalid("motion.a", e))?,
                },
                omega: m.omega,
                phases: m
                    .phi
                    .expand(bonds, "motion.phi")
                    .map_err(|e| invalid("motion.phi", e))?,
            },
            MotionKind::NormalMode => {
                let (mode_amplitudes, mode_phases) = self.mode_vectors(n, amplitude)?;
                MotionProfile::NormalMode {
                    boundary: m.boundary,
                    omega0: m.omega0,
                    mode_amplitudes,
                    mode_phases,
                }
            }
            MotionKind::Pulse => MotionProfile::GaussianPulse {
                strength: amplitude.unwrap_or(m.pulse_strength),
                width: m.sigma,
                speed: m.v,
            },
        })
    }

    /// The configured chain as a validated scenario.
    pub fn scenario(&self) -> exciton_core::Result<Scenario> {
        self.scenario_for(self.chain.n, None)
    }

    /// Scenario with `n` sites and the amplitude `a_over_n * n` used by
    /// length scans.
    pub fn scenario_for_length(&self, n: usize) -> exciton_core::Result<Scenario> {
        self.scenario_for(n, Some(self.sweep.a_over_n * n as f64))
    }

    fn scenario_for(&self, n: usize, amplitude: Option<f64>) -> exciton_core::Result<Scenario> {
        let scenario = Scenario {
            spec: self.chain_spec(n)?,
            profile: self.profile(n, amplitude)?,
            vib: self.vibronic(),
            channels: self.channels(n)?,
            integrator: self.integrator_config(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Every invariant violation, without running anything.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut check = |r: exciton_core::Result<()>| {
            if let Err(e) = r {
                let msg = e.to_string();
                if !errors.contains(&msg) {
                    errors.push(msg);
                }
            }
        };
        let n = self.chain.n;
        let length_scan = matches!(self.experiment, Experiment::ChainLengthScan | Experiment::DephasingScan);
        check(self.chain_spec(n).map(drop));
        check(self.channels(n.max(2)).map(drop));
        check(self.integrator_config().validate());
        if !length_scan {
            check(self.chain_spec(n).and_then(|spec| {
                let profile = self.profile(n, None)?;
                profile.validate(&spec)?;
                Scenario {
                    spec,
                    profile,
                    vib: self.vibronic(),
                    channels: ChannelSpec::closed(n),
                    integrator: self.integrator_config(),
                }
                .validate()
            }));
        }
        if self.classical.hop_scale <= 0.0 {
            check(Err(invalid(
                "classical.hop_scale",
                format!("must be positive, got {}", self.classical.hop_scale),
            )));
        }
        let grid = |key: &'static str, g: &Grid| -> exciton_core::Result<()> {
            let v = g.values().map_err(|m| invalid(key, m))?;
            if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(key, "grid must be non-empty and strictly increasing".into()));
            }
            Ok(())
        };
        let kind = self.motion.kind;
        let driven = matches!(kind, MotionKind::Pairwise | MotionKind::NormalMode);
        let need_driven = |name: &str| -> exciton_core::Result<()> {
            if driven {
                Ok(())
            } else {
                Err(invalid(
                    "motion.kind",
                    format!("{name} needs pairwise or normal-mode motion"),
                ))
            }
        };
        match self.experiment {
            Experiment::DimerSweep | Experiment::ClassicalCompare | Experiment::ChainModes => {
                check(grid("sweep.omega", &self.sweep.omega));
                check(need_driven(self.experiment.as_str()));
                if self.experiment == Experiment::ChainModes && kind != MotionKind::NormalMode {
                    check(Err(invalid(
                        "motion.kind",
                        "chain-modes needs normal-mode motion".into(),
                    )));
                }
            }
            Experiment::DimerPhaseEnsemble => {
                check(grid("sweep.omega", &self.sweep.omega));
                check(need_driven("dimer-phase-ensemble"));
                if self.sweep.n_phases == 0 {
                    check(Err(invalid("sweep.n_phases", "need at least one phase".into())));
                }
            }
            Experiment::DimerAmplitude => {
                check(grid("sweep.omega", &self.sweep.omega));
                check(grid("sweep.amplitudes", &self.sweep.amplitudes));
                check(need_driven("dimer-amplitude"));
                if let Ok(amps) = self.sweep.amplitudes.values() {
                    for a in amps {
                        check(
                            self.chain_spec(n)
                                .and_then(|spec| self.profile(n, Some(a))?.validate(&spec)),
                        );
                    }
                }
            }
            Experiment::ChainLengthScan | Experiment::DephasingScan => {
                check(grid("sweep.omega", &self.sweep.omega));
                check(need_driven(self.experiment.as_str()));
                if self.sweep.lengths.is_empty() {
                    check(Err(invalid("sweep.lengths", "need at least one chain length".into())));
                }
                for &len in &self.sweep.lengths {
                    check(self.scenario_for_length(len).map(drop));
                }
                if self.experiment == Experiment::DephasingScan {
                    check(grid("sweep.gamma_deph", &self.sweep.gamma_deph));
                    if let Ok(g) = self.sweep.gamma_deph.values() {
                        if g.iter().any(|x| *x < 0.0) {
                            check(Err(invalid(
                                "sweep.gamma_deph",
                                "dephasing rates must be non-negative".into(),
                            )));
                        }
                    }
                }
            }
            Experiment::PulseGrid => {
                check(grid("sweep.v", &self.sweep.v));
                check(grid("sweep.sigma", &self.sweep.sigma));
                if kind != MotionKind::Pulse {
                    check(Err(invalid("motion.kind", "pulse-grid needs pulse motion".into())));
                }
                if let (Ok(v), Ok(s)) = (self.sweep.v.values(), self.sweep.sigma.values()) {
                    if v.iter().any(|x| *x < 0.0) || s.iter().any(|x| *x <= 0.0) {
                        check(Err(invalid("sweep.v", "speeds must be >= 0 and widths > 0".into())));
                    }
                }
            }
            Experiment::Trajectory => {
                if self.integrator.sample_dt <= 0.0 {
                    check(Err(invalid(
                        "integrator.sample_dt",
                        format!("must be positive, got {}", self.integrator.sample_dt),
                    )));
                }
            }
        }
        if self.run.workers == Some(0) {
            check(Err(invalid("run.workers", "need at least one worker".into())));
        }
        errors
    }
}

fn invalid(name: &'static str, reason: String) -> exciton_core::Error {
    exciton_core::Error::InvalidParameter { name, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for e in Experiment::ALL {
            let mut c = ExperimentConfig::preset(e);
            c.run.workers = Some(3);
            let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
            assert_eq!(back, c, "{e}");
        }
    }

    #[test]
    fn awkward_values_round_trip() {
        let mut c = ExperimentConfig::preset(Experiment::DimerSweep);
        c.set("channels.gamma", "0.1,0.30000000000000004").unwrap();
        c.set("integrator.abs_tol", "1e-13").unwrap();
        c.set("sweep.omega", "0.1,0.2,1e3").unwrap();
        c.set("motion.phi", "1.5707963267948966").unwrap();
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn presets_are_valid() {
        for e in Experiment::ALL {
            assert_eq!(ExperimentConfig::preset(e).validate(), Vec::<String>::new(), "{e}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_text("experiment = dimer-sweep\nmotion.amplitude = 0.2\n").unwrap_err();
        assert_eq!(err, vec!["line 2: motion.amplitude: unknown key".to_string()]);
    }

    #[test]
    fn all_bad_lines_reported() {
        let err = ExperimentConfig::from_text("experiment = trajectory\nchain.n = two\nnonsense\nchain.d0 = x\n")
            .unwrap_err();
        assert_eq!(err.len(), 1, "{err:?}");
        let err = ExperimentConfig::from_text("experiment = trajectory\nchain.n = two\nchain.d0 = x\n").unwrap_err();
        assert_eq!(err.len(), 2, "{err:?}");
    }

    #[test]
    fn overrides_win() {
        let file = parse_entries("experiment = dimer-sweep\nmotion.omega = 3\n").unwrap();
        let over = vec![parse_override("motion.omega=5").unwrap()];
        let c = ExperimentConfig::resolve(None, &file, &over).unwrap();
        assert_eq!(c.motion.omega, 5.0);
        let c = ExperimentConfig::resolve(Some(Experiment::Trajectory), &file, &over).unwrap();
        assert_eq!(c.experiment, Experiment::Trajectory);
    }

    #[test]
    fn grid_expansion() {
        let g = parse_grid("0.5:20:0.02").unwrap();
        let v = g.values().unwrap();
        assert_eq!(v.len(), 976);
        assert!((v[202] - 4.54).abs() < 1e-12);
        assert!((v[975] - 20.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").unwrap().values().is_err());
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_indices("4:7").unwrap(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn amplitude_bound_named() {
        let mut c = ExperimentConfig::preset(Experiment::DimerSweep);
        c.set("motion.a", "0.6").unwrap();
        let errors = c.validate();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].contains("a < 1/2"), "{errors:?}");
    }

    #[test]
    fn several_violations_reported_together() {
        let mut c = ExperimentConfig::preset(Experiment::DimerSweep);
        c.set("motion.a", "0.6").unwrap();
        c.set("channels.gamma_sink", "-0.5").unwrap();
        c.set("integrator.rel_tol", "0").unwrap();
        assert_eq!(c.validate().len(), 3, "{:?}", c.validate());
    }

    #[test]
    fn length_scan_checks_every_length() {
        let mut c = ExperimentConfig::preset(Experiment::ChainLengthScan);
        c.set("sweep.a_over_n", "0.5").unwrap();
        assert!(!c.validate().is_empty());
    }
}
